#include "binagree/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "binagree/csv.hpp"
#include "binagree/errors.hpp"

namespace binagree {

using csv::format_double;

void KeyValueReport::add(const std::string& key, const std::string& value) {
  lines_.emplace_back(key, value);
}
void KeyValueReport::add(const std::string& key, double value) { add(key, format_double(value)); }
void KeyValueReport::add(const std::string& key, int value) { add(key, std::to_string(value)); }
void KeyValueReport::add(const std::string& key, long value) { add(key, std::to_string(value)); }
void KeyValueReport::add(const std::string& key, bool value) {
  add(key, std::string(value ? "true" : "false"));
}

std::string KeyValueReport::str() const {
  std::string out;
  for (const auto& [k, v] : lines_) out += k + " = " + v + "\n";
  return out;
}

namespace {

std::string join_doubles(const Eigen::Ref<const Eigen::VectorXd>& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out;
}

void add_spec(KeyValueReport& r, const ModelSpec& spec) {
  r.add("time_trend", to_string(spec.time_trend));
  r.add("residual_correlation", to_string(spec.residual_correlation));
  r.add("rater_effect", to_string(spec.rater_effect));
  r.add("residual_scale", to_string(spec.residual_scale));
}

void add_components(KeyValueReport& r, const VarianceComponents& vc, const ModelSpec& spec) {
  r.add("sigma2_gamma", vc.sigma2_gamma);
  r.add("se_sigma2_gamma", vc.se_sigma2_gamma);
  if (spec.rater_effect == RaterEffect::included) {
    r.add("sigma2_alpha1", vc.sigma2_alpha1);
    r.add("se_sigma2_alpha1", vc.se_sigma2_alpha1);
    r.add("sigma2_alpha2", vc.sigma2_alpha2);
    r.add("se_sigma2_alpha2", vc.se_sigma2_alpha2);
  }
  if (spec.residual_correlation == ResidualCorrelation::ar1) {
    r.add("rho", vc.rho);
    r.add("se_rho", vc.se_rho);
  }
  if (spec.residual_scale == ResidualScale::estimated) {
    r.add("scale", vc.scale);
    r.add("se_scale", vc.se_scale);
  }
}

[[noreturn]] void fail(const std::string& what, long line) {
  throw ParseError("fit state: " + what, line);
}

double number(const std::string& s, long line) {
  double v = 0.0;
  if (!csv::parse_double(s, v)) fail("invalid number '" + s + "'", line);
  return v;
}

long integer(const std::string& s, long line) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail("invalid integer '" + s + "'", line);
  }
}

Eigen::VectorXd number_list(const std::string& s, long line) {
  std::istringstream in(s);
  std::vector<double> values;
  std::string tok;
  while (in >> tok) values.push_back(number(tok, line));
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string write_fit_state(const LongDataset& data, const FitResult& fit) {
  std::string out = "binagree-fit-state " + std::to_string(kFitStateVersion) + "\n";
  KeyValueReport model;
  add_spec(model, fit.spec);
  out += "[model]\n" + model.str();

  KeyValueReport est;
  est.add("beta_1", fit.fixed.beta_1);
  est.add("beta_2", fit.fixed.beta_2);
  if (fit.fixed.theta) est.add("theta", *fit.fixed.theta);
  const Eigen::Index p = fit.fixed.cov.rows();
  Eigen::VectorXd cov(p * p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) cov[i * p + j] = fit.fixed.cov(i, j);
  est.add("cov_dim", static_cast<int>(p));
  est.add("cov", join_doubles(cov));
  const VarianceComponents& vc = fit.vc;
  est.add("sigma2_gamma", vc.sigma2_gamma);
  est.add("sigma2_alpha1", vc.sigma2_alpha1);
  est.add("sigma2_alpha2", vc.sigma2_alpha2);
  est.add("rho", vc.rho);
  est.add("scale", vc.scale);
  est.add("se_sigma2_gamma", vc.se_sigma2_gamma);
  est.add("se_sigma2_alpha1", vc.se_sigma2_alpha1);
  est.add("se_sigma2_alpha2", vc.se_sigma2_alpha2);
  est.add("se_rho", vc.se_rho);
  est.add("se_scale", vc.se_scale);
  est.add("converged", fit.converged);
  est.add("n_outer_iterations", fit.n_outer_iterations);
  est.add("final_change", fit.final_change);
  est.add("reml_objective", fit.reml_objective);
  est.add("n_inner_evaluations", fit.n_inner_evaluations);
  for (const std::string& w : fit.warnings) est.add("warning", w);
  est.add("eblup_gamma", join_doubles(fit.eblup_gamma));
  est.add("eblup_alpha_1", join_doubles(fit.eblup_alpha.col(0)));
  est.add("eblup_alpha_2", join_doubles(fit.eblup_alpha.col(1)));
  out += "[estimates]\n" + est.str();

  out += "[subjects]\n";
  for (const std::string& s : data.subject_labels) out += csv::escape(s) + "\n";
  out += "[raters]\n";
  for (const std::string& s : data.rater_labels) out += csv::escape(s) + "\n";
  out += "[records]\n";
  for (const MeasurementRecord& r : data.records)
    out += std::to_string(r.subject) + "," + std::to_string(r.rater) + "," +
           std::to_string(static_cast<int>(r.method)) + "," + format_double(r.time) + "," +
           std::to_string(r.outcome) + "\n";
  return out;
}

FitState read_fit_state(std::string_view text) {
  std::vector<std::pair<long, std::string>> lines;
  {
    long n = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      const auto end = nl == std::string_view::npos ? text.size() : nl;
      ++n;
      std::string line(text.substr(pos, end - pos));
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lines.emplace_back(n, line);
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
  }
  if (lines.empty() || lines[0].second.rfind("binagree-fit-state ", 0) != 0)
    fail("missing 'binagree-fit-state' header", 1);
  const long version = integer(trim(lines[0].second.substr(19)), lines[0].first);
  if (version != kFitStateVersion)
    fail("unsupported version " + std::to_string(version), lines[0].first);

  std::map<std::string, std::vector<std::pair<long, std::string>>> sections;
  std::string current;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [ln, line] = lines[i];
    if (line.front() == '[' && line.back() == ']') {
      current = line.substr(1, line.size() - 2);
      sections[current];
      continue;
    }
    if (current.empty()) fail("content before the first section", ln);
    sections[current].emplace_back(ln, line);
  }
  for (const char* name : {"model", "estimates", "subjects", "raters", "records"})
    if (!sections.count(name)) fail(std::string("missing section [") + name + "]", lines.back().first);

  using KV = std::multimap<std::string, std::pair<long, std::string>>;
  const auto key_values = [](const std::vector<std::pair<long, std::string>>& body) {
    KV kv;
    for (const auto& [ln, line] : body) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected 'key = value'", ln);
      kv.emplace(trim(line.substr(0, eq)), std::make_pair(ln, trim(line.substr(eq + 1))));
    }
    return kv;
  };
  const auto get = [](const KV& kv, const std::string& key, long fallback_line)
      -> const std::pair<long, std::string>& {
    const auto it = kv.find(key);
    if (it == kv.end()) fail("missing key '" + key + "'", fallback_line);
    return it->second;
  };

  FitState st;
  const KV model = key_values(sections["model"]);
  const long model_line = sections["model"].empty() ? 1 : sections["model"].front().first;
  try {
    st.fit.spec.time_trend = parse_time_trend(get(model, "time_trend", model_line).second);
    st.fit.spec.residual_correlation =
        parse_residual_correlation(get(model, "residual_correlation", model_line).second);
    st.fit.spec.rater_effect = parse_rater_effect(get(model, "rater_effect", model_line).second);
    st.fit.spec.residual_scale =
        parse_residual_scale(get(model, "residual_scale", model_line).second);
  } catch (const DataError& e) {
    fail(e.what(), model_line);
  }

  const KV est = key_values(sections["estimates"]);
  const long est_line = sections["estimates"].empty() ? 1 : sections["estimates"].front().first;
  const auto num = [&](const std::string& key) {
    const auto& [ln, v] = get(est, key, est_line);
    return number(v, ln);
  };
  FitResult& f = st.fit;
  f.fixed.beta_1 = num("beta_1");
  f.fixed.beta_2 = num("beta_2");
  if (est.count("theta")) f.fixed.theta = num("theta");
  const long p = static_cast<long>(num("cov_dim"));
  {
    const auto& [ln, v] = get(est, "cov", est_line);
    const Eigen::VectorXd c = number_list(v, ln);
    if (p < 2 || p > 3 || c.size() != p * p) fail("covariance has the wrong size", ln);
    f.fixed.cov.resize(p, p);
    for (long i = 0; i < p; ++i)
      for (long j = 0; j < p; ++j) f.fixed.cov(i, j) = c[i * p + j];
  }
  f.vc.sigma2_gamma = num("sigma2_gamma");
  f.vc.sigma2_alpha1 = num("sigma2_alpha1");
  f.vc.sigma2_alpha2 = num("sigma2_alpha2");
  f.vc.rho = num("rho");
  f.vc.scale = num("scale");
  f.vc.se_sigma2_gamma = num("se_sigma2_gamma");
  f.vc.se_sigma2_alpha1 = num("se_sigma2_alpha1");
  f.vc.se_sigma2_alpha2 = num("se_sigma2_alpha2");
  f.vc.se_rho = num("se_rho");
  f.vc.se_scale = num("se_scale");
  {
    const auto& [ln, v] = get(est, "converged", est_line);
    if (v != "true" && v != "false") fail("invalid boolean '" + v + "'", ln);
    f.converged = v == "true";
  }
  f.n_outer_iterations = static_cast<int>(num("n_outer_iterations"));
  f.final_change = num("final_change");
  f.reml_objective = num("reml_objective");
  f.n_inner_evaluations = static_cast<int>(num("n_inner_evaluations"));
  const auto range = est.equal_range("warning");
  std::vector<std::pair<long, std::string>> warnings;
  for (auto it = range.first; it != range.second; ++it) warnings.push_back(it->second);
  std::sort(warnings.begin(), warnings.end());
  for (auto& w : warnings) f.warnings.push_back(w.second);

  LongDataset& d = st.data;
  for (const auto& [ln, line] : sections["subjects"]) {
    const auto rows = csv::parse(line);
    if (rows.size() != 1 || rows[0].fields.size() != 1) fail("invalid subject label", ln);
    d.subject_labels.push_back(rows[0].fields[0]);
  }
  for (const auto& [ln, line] : sections["raters"]) {
    const auto rows = csv::parse(line);
    if (rows.size() != 1 || rows[0].fields.size() != 1) fail("invalid rater label", ln);
    d.rater_labels.push_back(rows[0].fields[0]);
  }
  const long n_subjects = d.n_subjects(), n_raters = d.n_raters();
  d.subject_times.assign(n_subjects, {});
  for (const auto& [ln, line] : sections["records"]) {
    const auto rows = csv::parse(line);
    if (rows.size() != 1 || rows[0].fields.size() != 5) fail("record needs 5 fields", ln);
    const auto& x = rows[0].fields;
    MeasurementRecord r;
    r.subject = static_cast<int>(integer(x[0], ln));
    r.rater = static_cast<int>(integer(x[1], ln));
    const long m = integer(x[2], ln);
    r.time = number(x[3], ln);
    r.outcome = static_cast<int>(integer(x[4], ln));
    if (r.subject < 0 || r.subject >= n_subjects || r.rater < 0 || r.rater >= n_raters ||
        (m != 1 && m != 2) || (r.outcome != 0 && r.outcome != 1) || !std::isfinite(r.time))
      fail("record out of range", ln);
    r.method = m == 1 ? Method::first : Method::second;
    d.records.push_back(r);
    d.subject_times[r.subject].push_back(r.time);
  }
  for (auto& t : d.subject_times) {
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }

  const auto vec = [&](const std::string& key, long expected) {
    const auto& [ln, v] = get(est, key, est_line);
    Eigen::VectorXd out = number_list(v, ln);
    if (out.size() != expected) fail("'" + key + "' has the wrong length", ln);
    return out;
  };
  f.eblup_gamma = vec("eblup_gamma", n_subjects);
  f.eblup_alpha.resize(n_raters, 2);
  f.eblup_alpha.col(0) = vec("eblup_alpha_1", n_raters);
  f.eblup_alpha.col(1) = vec("eblup_alpha_2", n_raters);
  return st;
}

std::string format_validation_report(const ValidationReport& rep) {
  KeyValueReport r;
  r.add("n_subjects", rep.n_subjects);
  r.add("n_raters", rep.n_raters);
  r.add("n_records", static_cast<long>(rep.n_records));
  r.add("min_visits", rep.min_times);
  r.add("max_visits", rep.max_times);
  r.add("balanced", rep.balanced());
  r.add("prevalence_1", rep.prevalence_m1);
  r.add("prevalence_2", rep.prevalence_m2);
  r.add("n_constant_subjects", static_cast<long>(rep.constant_subjects.size()));
  r.add("n_single_method_raters", static_cast<long>(rep.single_method_raters.size()));
  for (const std::string& flag : rep.flags) r.add("flag", flag);
  return r.str();
}

std::string format_fit_report(const FitResult& fit, const WaldTest& test) {
  KeyValueReport r;
  add_spec(r, fit.spec);
  r.add("converged", fit.converged);
  r.add("n_outer_iterations", fit.n_outer_iterations);
  r.add("final_change", fit.final_change);
  r.add("reml_objective", fit.reml_objective);
  r.add("beta_1", fit.fixed.beta_1);
  r.add("se_beta_1", std::sqrt(fit.fixed.cov(0, 0)));
  r.add("beta_2", fit.fixed.beta_2);
  r.add("se_beta_2", std::sqrt(fit.fixed.cov(1, 1)));
  if (fit.fixed.theta) {
    r.add("theta", *fit.fixed.theta);
    r.add("se_theta", std::sqrt(fit.fixed.cov(2, 2)));
  }
  add_components(r, fit.vc, fit.spec);
  r.add("estimate", test.estimate);
  r.add("std_error", test.std_error);
  r.add("z", test.statistic);
  r.add("p_value", test.p_value);
  for (const std::string& w : fit.warnings) r.add("warning", w);
  return r.str();
}

std::string format_test_report(const WaldTest& test) {
  KeyValueReport r;
  r.add("hypothesis", std::string("beta_1 - beta_2 = 0"));
  r.add("estimate", test.estimate);
  r.add("std_error", test.std_error);
  r.add("z", test.statistic);
  r.add("p_value", test.p_value);
  r.add("level", test.level);
  r.add("ci_low", test.ci_low);
  r.add("ci_high", test.ci_high);
  return r.str();
}

namespace {
void add_kappa(KeyValueReport& r, const std::string& prefix, const KappaResult& k) {
  r.add(prefix + "a", k.a);
  r.add(prefix + "b", k.b);
  r.add(prefix + "c", k.c);
  r.add(prefix + "d", k.d);
  r.add(prefix + "p_observed", k.p_o);
  r.add(prefix + "p_expected", k.p_e);
  r.add(prefix + "kappa", k.kappa);
  r.add(prefix + "std_error", k.std_error);
  r.add(prefix + "ci_low", k.ci_low);
  r.add(prefix + "ci_high", k.ci_high);
  for (const std::string& w : k.warnings) r.add(prefix + "warning", w);
}
}  // namespace

std::string format_kappa_report(const KappaResult& model, const KappaResult& naive) {
  KeyValueReport r;
  r.add("level", model.level);
  add_kappa(r, "model_", model);
  add_kappa(r, "naive_", naive);
  return r.str();
}

std::string format_icc_report(const ICCResult& icc, const VarianceComponents& vc) {
  KeyValueReport r;
  r.add("sigma2_gamma", vc.sigma2_gamma);
  r.add("sigma2_alpha1", vc.sigma2_alpha1);
  r.add("sigma2_alpha2", vc.sigma2_alpha2);
  r.add("icc_1", icc.icc_m1);
  r.add("icc_2", icc.icc_m2);
  return r.str();
}

std::string format_ba_csv(const BASummary& ba, const LongDataset& data) {
  KeyValueReport r;
  r.add("scale", to_string(ba.scale));
  r.add("n_points", static_cast<long>(ba.points.size()));
  r.add("n_dropped", static_cast<long>(ba.dropped.size()));
  r.add("mean_diff", ba.mean_diff);
  r.add("sd_diff", ba.sd_diff);
  r.add("loa_low", ba.loa_low);
  r.add("loa_high", ba.loa_high);
  r.add("pct_within", ba.pct_within);
  if (ba.margin) {
    r.add("margin", *ba.margin);
    r.add("within_margin", ba.within_margin);
  }
  for (const std::string& w : ba.warnings) r.add("warning", w);
  std::string out;
  std::istringstream summary(r.str());
  for (std::string line; std::getline(summary, line);) out += "# " + line + "\n";
  out += "subject,avg,diff\n";
  for (const BAPoint& p : ba.points)
    out += csv::join({csv::escape(data.subject_labels.at(p.subject)), format_double(p.avg),
                      format_double(p.diff)}) +
           "\n";
  return out;
}

std::string format_recovery_csv(const SimCampaignResult& res) {
  std::string out = "parameter,mean,sd,n_used,n_failed\n";
  const auto row = [&](const char* name, const ParameterSummary& s) {
    out += csv::join({name, format_double(s.mean), format_double(s.sd), std::to_string(res.n_used),
                      std::to_string(res.n_failed)}) +
           "\n";
  };
  row("beta_1", res.beta_1);
  row("beta_2", res.beta_2);
  row("beta_1_minus_beta_2", res.difference);
  row("theta", res.theta);
  row("sigma2_gamma", res.sigma2_gamma);
  row("sigma2_alpha1", res.sigma2_alpha1);
  row("sigma2_alpha2", res.sigma2_alpha2);
  row("rho", res.rho);
  row("icc_1", res.icc_1);
  row("icc_2", res.icc_2);
  out += csv::join({"rejection_rate", format_double(res.rejection_rate), "",
                    std::to_string(res.n_used), std::to_string(res.n_failed)}) +
         "\n";
  return out;
}

std::string format_replicates_csv(const std::vector<ReplicateRecord>& records,
                                  const std::vector<double>& grid,
                                  const std::vector<std::string>& spec_labels, int n_replicates) {
  std::string out =
      "beta_1_true,spec,replicate,converged,beta_1,beta_2,theta,sigma2_gamma,sigma2_alpha1,"
      "sigma2_alpha2,rho,icc_1,icc_2,estimate,std_error,p_value,rejected,error\n";
  const std::size_t n_specs = spec_labels.size();
  for (std::size_t k = 0; k < records.size(); ++k) {
    const ReplicateRecord& r = records[k];
    const std::size_t s = (k / n_replicates) % n_specs;
    out += csv::join({format_double(grid.at(r.grid_point)), csv::escape(spec_labels[s]),
                      std::to_string(r.replicate), r.converged ? "true" : "false",
                      format_double(r.beta_1), format_double(r.beta_2), format_double(r.theta),
                      format_double(r.sigma2_gamma), format_double(r.sigma2_alpha1),
                      format_double(r.sigma2_alpha2), format_double(r.rho), format_double(r.icc_1),
                      format_double(r.icc_2), format_double(r.estimate),
                      format_double(r.std_error), format_double(r.p_value),
                      r.rejected ? "true" : "false", csv::escape(r.error)}) +
           "\n";
  }
  return out;
}

std::string format_power_csv(const PowerTable& table) {
  std::string out = "beta_1,spec,n_reps,rejection_rate,n_used,n_failed\n";
  for (const PowerRow& r : table.rows)
    out += csv::join({format_double(r.beta_1), csv::escape(r.spec_label),
                      std::to_string(r.n_replicates), format_double(r.rejection_rate),
                      std::to_string(r.n_used), std::to_string(r.n_failed)}) +
           "\n";
  return out;
}

}  // namespace binagree
