#include "binagree/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace binagree {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
// Plot area inside the viewport; the remainder holds axes and labels.
constexpr double kLeft = 70.0, kRight = 620.0, kTop = 40.0, kBottom = 420.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Pads by 5% of the span; a degenerate span gets +-0.5.
  void pad() {
    if (!std::isfinite(lo)) lo = hi = 0.0;
    const double span = hi - lo;
    if (span <= 0.0) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      lo -= 0.05 * span;
      hi += 0.05 * span;
    }
  }
};

struct Axes {
  Range x, y;
  double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kRight - kLeft); }
  double py(double v) const { return kBottom - (v - y.lo) / (y.hi - y.lo) * (kBottom - kTop); }
};

std::string header(const std::string& title) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n"
         "<title>" + xml_escape(title) + "</title>\n"
         "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" fill=\"white\"/>\n";
}

std::string frame(const Axes& a, const std::string& xlabel, const std::string& ylabel) {
  std::string s = "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kRight - kLeft) +
       "\" height=\"" + num(kBottom - kTop) + "\"/>\n";
  s += "</g>\n<g id=\"ticks\" font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = a.x.lo + k * (a.x.hi - a.x.lo) / 4.0;
    const double yv = a.y.lo + k * (a.y.hi - a.y.lo) / 4.0;
    s += "<text x=\"" + num(a.px(xv)) + "\" y=\"" + num(kBottom + 16) +
         "\" text-anchor=\"middle\">" + tick_label(xv) + "</text>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(a.py(yv) + 4) +
         "\" text-anchor=\"end\">" + tick_label(yv) + "</text>\n";
  }
  s += "</g>\n";
  s += "<text id=\"xlabel\" x=\"" + num((kLeft + kRight) / 2) + "\" y=\"" + num(kHeight - 18) +
       "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" +
       xml_escape(xlabel) + "</text>\n";
  s += "<text id=\"ylabel\" x=\"18\" y=\"" + num((kTop + kBottom) / 2) +
       "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
       "transform=\"rotate(-90 18 " + num((kTop + kBottom) / 2) + ")\">" + xml_escape(ylabel) +
       "</text>\n";
  return s;
}

std::string hline(const Axes& a, double y, const std::string& cls, const std::string& dash,
                  const std::string& color) {
  return "<line class=\"" + cls + "\" x1=\"" + num(kLeft) + "\" y1=\"" + num(a.py(y)) +
         "\" x2=\"" + num(kRight) + "\" y2=\"" + num(a.py(y)) + "\" stroke=\"" + color +
         "\" stroke-width=\"1.5\" stroke-dasharray=\"" + dash + "\"/>\n";
}

}  // namespace

std::string render_ba_svg(const BASummary& ba) {
  Axes a;
  for (const BAPoint& p : ba.points) {
    a.x.include(p.avg);
    a.y.include(p.diff);
  }
  a.y.include(ba.mean_diff);
  a.y.include(ba.loa_low);
  a.y.include(ba.loa_high);
  a.x.pad();
  a.y.pad();

  std::string scale_name;
  switch (ba.scale) {
    case BAScale::latent: scale_name = "latent scale"; break;
    case BAScale::probability: scale_name = "probability scale"; break;
    case BAScale::log_probability: scale_name = "log-probability scale"; break;
  }
  std::string s = header("Bland-Altman diagram (" + scale_name + ")");
  s += frame(a, "Average of methods 1 and 2 (" + scale_name + ")",
             "Difference, method 1 - method 2 (" + scale_name + ")");
  s += "<g id=\"lines\">\n";
  s += hline(a, ba.mean_diff, "mean", "6,4", "#444444");
  s += hline(a, ba.loa_low, "loa", "2,3", "#444444");
  s += hline(a, ba.loa_high, "loa", "2,3", "#444444");
  s += "</g>\n<g id=\"points\" fill=\"#1f77b4\" fill-opacity=\"0.7\">\n";
  for (const BAPoint& p : ba.points)
    s += "<circle class=\"point\" cx=\"" + num(a.px(p.avg)) + "\" cy=\"" + num(a.py(p.diff)) +
         "\" r=\"3.5\"/>\n";
  s += "</g>\n</svg>\n";
  return s;
}

std::string render_power_svg(const PowerTable& table) {
  Axes a;
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  std::vector<std::string> order;
  for (const PowerRow& r : table.rows) {
    if (!curves.count(r.spec_label)) order.push_back(r.spec_label);
    curves[r.spec_label].emplace_back(r.beta_1, r.rejection_rate);
    a.x.include(r.beta_1);
  }
  a.y.include(0.0);
  a.y.include(1.0);
  a.x.pad();
  a.y.pad();

  std::string s = header("Rejection rate of beta_1 = beta_2");
  s += frame(a, "beta_1", "Rejection rate");
  s += "<g id=\"reference\">\n" + hline(a, table.alpha, "alpha", "2,3", "#aaaaaa") + "</g>\n";
  s += "<g id=\"curves\" fill=\"none\" stroke-width=\"2\">\n";
  for (std::size_t k = 0; k < order.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    std::string pts;
    for (const auto& [x, y] : curves[order[k]]) {
      if (!pts.empty()) pts += ' ';
      pts += num(a.px(x)) + "," + num(a.py(y));
    }
    s += "<polyline class=\"curve\" data-spec=\"" + xml_escape(order[k]) + "\" stroke=\"" + color +
         "\" points=\"" + pts + "\"/>\n";
  }
  s += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double y = kTop + 16.0 + 16.0 * k;
    const char* color = kPalette[k % std::size(kPalette)];
    s += "<line x1=\"" + num(kLeft + 10) + "\" y1=\"" + num(y - 4) + "\" x2=\"" + num(kLeft + 34) +
         "\" y2=\"" + num(y - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(kLeft + 40) + "\" y=\"" + num(y) + "\">" + xml_escape(order[k]) +
         "</text>\n";
  }
  s += "</g>\n</svg>\n";
  return s;
}

}  // namespace binagree
