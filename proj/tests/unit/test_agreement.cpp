#include <doctest.h>

#include <cmath>
#include <random>

#include "binagree/agreement.hpp"
#include "binagree/errors.hpp"
#include "binagree/simulation.hpp"
#include "support.hpp"

using namespace binagree;
using testsupport::row;

namespace {

// Delta-method variance of kappa over multinomial cell proportions, with the
// gradient taken numerically. Independent of the closed-form expression.
double delta_method_se(long a, long b, long c, long d) {
  const double n = a + b + c + d;
  const auto kappa_of = [](const Eigen::Vector4d& q) {
    const Eigen::Vector4d p = q / q.sum();  // cells a, b, c, d
    const double po = p[0] + p[3];
    const double r1 = p[1] + p[3], c1 = p[2] + p[3];
    const double pe = r1 * c1 + (1 - r1) * (1 - c1);
    return (po - pe) / (1 - pe);
  };
  const Eigen::Vector4d p(a / n, b / n, c / n, d / n);
  Eigen::Vector4d g;
  for (int k = 0; k < 4; ++k) {
    Eigen::Vector4d up = p, dn = p;
    up[k] += 1e-6;
    dn[k] -= 1e-6;
    g[k] = (kappa_of(up) - kappa_of(dn)) / 2e-6;
  }
  const double mean = p.dot(g);
  return std::sqrt((p.dot(g.cwiseProduct(g)) - mean * mean) / n);
}

FitResult toy_fit(int n_subjects, int n_raters) {
  FitResult f;
  f.eblup_gamma = Eigen::VectorXd::Zero(n_subjects);
  f.eblup_alpha = Eigen::MatrixXd::Zero(n_raters, 2);
  return f;
}

}  // namespace

TEST_CASE("EBLUP summaries on hand-set fits") {
  const LongDataset ds =
      widen_to_long({row("s1", 1, 1, 0, "A", "B"), row("s1", 2, 1, 1, "B", "C"),
                     row("s2", 1, 0, 0, "C", "A"), row("s2", 4, 1, 0, "A", "B")});
  FitResult f = toy_fit(2, 3);
  f.fixed.beta_1 = 1.2;
  f.fixed.beta_2 = 0.7;
  f.fixed.theta = 0.0;
  for (const auto& s : eblup_summary(f, ds)) {
    CHECK(s.mu_hat_m1 == 1.2);
    CHECK(s.mu_hat_m2 == 0.7);
  }

  f.fixed.theta = -0.5;
  f.eblup_gamma << 0.3, -0.4;
  // Raters A, B, C -> indices 0, 1, 2.
  f.eblup_alpha << 0.1, -0.2, 0.2, 0.05, -0.6, 0.4;
  const auto s = eblup_summary(f, ds);
  // s1: times 1, 2; method 1 raters A, B; method 2 raters B, C.
  CHECK(s[0].mu_hat_m1 == doctest::Approx(1.2 - 0.75 + 0.3 + 0.15));
  CHECK(s[0].mu_hat_m2 == doctest::Approx(0.7 - 0.75 + 0.3 + 0.225));
  // s2: times 1, 4; method 1 raters C, A; method 2 raters A, B.
  CHECK(s[1].mu_hat_m1 == doctest::Approx(1.2 - 1.25 - 0.4 - 0.25));
  CHECK(s[1].mu_hat_m2 == doctest::Approx(0.7 - 1.25 - 0.4 - 0.075));

  SummaryOptions all;
  all.rater_average = RaterAverage::all_raters;
  const auto t = eblup_summary(f, ds, all);
  CHECK(t[0].mu_hat_m1 == doctest::Approx(1.2 - 0.75 + 0.3 + (0.1 + 0.2 - 0.6) / 3));
  CHECK(t[1].mu_hat_m2 == doctest::Approx(0.7 - 1.25 - 0.4 + (-0.2 + 0.05 + 0.4) / 3));

  SummaryOptions rw;
  rw.reweight = true;
  f.vc.sigma2_gamma = 0.8;
  f.vc.sigma2_alpha1 = 0.6;
  f.vc.sigma2_alpha2 = 0.3;
  const auto u = eblup_summary(f, ds, rw);
  const double w1 = 3 * 0.8 / (3 * 0.8 + 0.6);
  CHECK(u[0].mu_hat_m1 == doctest::Approx(1.2 - 0.75 + w1 * (0.3 + 0.15)));

  CHECK_THROWS_AS(eblup_summary(toy_fit(3, 3), ds), DataError);
}

TEST_CASE("subject summary differences do not track the subject effect") {
  RandomStream rng(42, 7);
  const SimulatedData sim = generate_with_truth(SimConfig::model1(), rng);
  const FitResult f = fit(sim.data, ModelSpec{});
  const auto s = eblup_summary(f, sim.data);
  Eigen::VectorXd diff(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) diff[i] = s[i].mu_hat_m1 - s[i].mu_hat_m2;
  const Eigen::VectorXd dc = diff.array() - diff.mean();
  const Eigen::VectorXd gc = sim.truth.gamma.array() - sim.truth.gamma.mean();
  const double corr = dc.dot(gc) / std::sqrt(dc.squaredNorm() * gc.squaredNorm());
  CHECK(std::abs(corr) < 0.3);
}

TEST_CASE("Bland-Altman summary examples") {
  std::vector<SubjectSummary> same = {{0, 0.4, 0.4}, {1, -1.0, -1.0}, {2, 2.0, 2.0}};
  BASummary b = ba_summary(same, BAScale::latent);
  CHECK(b.mean_diff == 0.0);
  CHECK(b.sd_diff == 0.0);
  CHECK(b.loa_low == 0.0);
  CHECK(b.loa_high == 0.0);
  CHECK(b.pct_within == 1.0);

  std::vector<SubjectSummary> spread = {{0, 1.0, 2.0}, {1, 0.5, 0.5}, {2, 3.0, 2.0}};
  b = ba_summary(spread, BAScale::latent);
  CHECK(b.mean_diff == doctest::Approx(0.0));
  CHECK(b.sd_diff == doctest::Approx(1.0));
  CHECK(b.loa_low == doctest::Approx(-1.96));
  CHECK(b.loa_high == doctest::Approx(1.96));
  CHECK(b.points[0].avg == 1.5);
  CHECK(b.points[0].diff == -1.0);
  CHECK(b.loa_low <= b.mean_diff);
  CHECK(b.mean_diff <= b.loa_high);

  b = ba_summary(spread, BAScale::probability);
  CHECK(b.points[1].diff == 0.0);
  CHECK(b.points[0].diff == doctest::Approx(testsupport::phi_cdf(1.0) - testsupport::phi_cdf(2.0)));
  CHECK(b.points[0].avg ==
        doctest::Approx(0.5 * (testsupport::phi_cdf(1.0) + testsupport::phi_cdf(2.0))));

  b = ba_summary(spread, BAScale::log_probability);
  CHECK(b.points[0].diff ==
        doctest::Approx(std::log(testsupport::phi_cdf(1.0) / testsupport::phi_cdf(2.0))));

  std::vector<SubjectSummary> extreme = spread;
  extreme.push_back({3, -9.0, 0.0});
  b = ba_summary(extreme, BAScale::log_probability);
  CHECK(b.dropped == std::vector<int>{3});
  CHECK(b.points.size() == 3);
  CHECK(b.warnings.size() == 1);
  CHECK(ba_summary(extreme, BAScale::latent).points.size() == 4);

  b = ba_summary(spread, BAScale::latent, 2.0);
  CHECK(b.within_margin);
  b = ba_summary(spread, BAScale::latent, 1.5);
  CHECK_FALSE(b.within_margin);

  CHECK_THROWS_AS(ba_summary({{0, 1.0, 1.0}}, BAScale::latent), DataError);
  CHECK_THROWS_AS(ba_summary({{0, -9, 0}, {1, 1, 1}}, BAScale::log_probability), DataError);
  CHECK(parse_ba_scale(to_string(BAScale::log_probability)) == BAScale::log_probability);
  CHECK_THROWS_AS(parse_ba_scale("logit"), DataError);
}

TEST_CASE("predicted binary scores") {
  const auto s = predicted_binary_scores({{0, 0.3, -0.2}, {1, 0.0, 0.0}, {2, -1e-300, 1e-300}});
  CHECK(s[0] == std::pair{1, 0});
  CHECK(s[1] == std::pair{0, 0});
  CHECK(s[2] == std::pair{0, 1});
}

TEST_CASE("Cohen's kappa examples and standard error") {
  KappaResult k = cohen_kappa(40, 10, 10, 40);
  CHECK(k.p_o == doctest::Approx(0.8));
  CHECK(k.p_e == doctest::Approx(0.5));
  CHECK(std::abs(k.kappa - 0.6) < 1e-12);
  CHECK(k.std_error == doctest::Approx(delta_method_se(40, 10, 10, 40)).epsilon(1e-6));
  CHECK(k.ci_low == doctest::Approx(0.6 - 1.959963984540054 * k.std_error));

  k = cohen_kappa(50, 0, 0, 50);
  CHECK(k.kappa == 1.0);
  CHECK(k.std_error == 0.0);
  CHECK(k.ci_low == 1.0);
  CHECK(k.warnings.size() == 1);

  std::mt19937_64 gen(8);
  for (int t = 0; t < 200; ++t) {
    const long a = gen() % 60, b = gen() % 30, c = gen() % 30, d = 1 + gen() % 60;
    if (a + b == 0 || a + c == 0) continue;
    const KappaResult r = cohen_kappa(a, b, c, d);
    CHECK(r.std_error == doctest::Approx(delta_method_se(a, b, c, d)).epsilon(1e-5));
    const KappaResult swapped = cohen_kappa(d, c, b, a);
    CHECK(swapped.kappa == doctest::Approx(r.kappa).epsilon(1e-12));
    CHECK(r.kappa <= r.p_o + 1e-12);
    CHECK(r.kappa >= -1.0);
    CHECK(r.ci_low >= -1.0);
    CHECK(r.ci_high <= 1.0);
    CHECK((r.kappa == doctest::Approx(1.0).epsilon(1e-12)) == (b == 0 && c == 0));
  }

  CHECK_THROWS_AS(cohen_kappa(10, 0, 0, 0), DataError);
  CHECK_THROWS_AS(cohen_kappa(0, 0, 0, 0), DataError);
  CHECK_THROWS_AS(cohen_kappa(-1, 2, 3, 4), DataError);
}

TEST_CASE("naive kappa limits") {
  std::vector<PairedRecord> same, indep;
  std::mt19937_64 gen(4);
  for (int i = 0; i < 4000; ++i) {
    const int y = gen() % 2;
    same.push_back(row(std::to_string(i), 1, y, y, "A", "B"));
    indep.push_back(row(std::to_string(i), 1, int(gen() % 2), int(gen() % 2), "A", "B"));
  }
  CHECK(naive_kappa(widen_to_long(same)).kappa == doctest::Approx(1.0));
  const KappaResult k = naive_kappa(widen_to_long(indep));
  CHECK(std::abs(k.kappa) < 4 * k.std_error);
  CHECK(k.total() == 4000);
}

TEST_CASE("ICC examples and monotonicity") {
  VarianceComponents vc;
  vc.sigma2_gamma = 0.8;
  vc.sigma2_alpha1 = 0.2;
  vc.sigma2_alpha2 = 0.4;
  ICCResult r = icc(vc);
  CHECK(std::abs(r.icc_m1 - 0.9) < 1e-12);
  CHECK(std::abs(r.icc_m2 - 1.8 / 2.2) < 1e-12);
  vc.sigma2_alpha1 = 0.0;
  CHECK(icc(vc).icc_m1 == 1.0);
  vc.sigma2_gamma = 0.0;
  vc.sigma2_alpha2 = 1.0;
  CHECK(icc(vc).icc_m2 == 0.5);
  vc.sigma2_gamma = -0.1;
  CHECK_THROWS_AS(icc(vc), DataError);

  for (double g = 0.0; g <= 3.0; g += 0.25)
    for (double a = 0.0; a < 3.0; a += 0.25) {
      VarianceComponents lo, hi_a, hi_g;
      lo.sigma2_gamma = g;
      lo.sigma2_alpha1 = a;
      hi_a = lo;
      hi_a.sigma2_alpha1 = a + 0.25;
      hi_g = lo;
      hi_g.sigma2_gamma = g + 0.25;
      CHECK(icc(hi_a).icc_m1 < icc(lo).icc_m1);
      if (a > 0.0) CHECK(icc(hi_g).icc_m1 > icc(lo).icc_m1);
      CHECK(icc(lo).icc_m1 > 0.0);
      CHECK(icc(lo).icc_m1 <= 1.0);
    }
}

TEST_CASE("model-based kappa resists the prevalence effect") {
  // Rare positives: intercept 0.5 with the usual downward time trend.
  double model = 0.0, naive = 0.0;
  int used = 0;
  for (int r = 0; r < 50; ++r) {
    SimConfig c = SimConfig::model1();
    c.beta_1 = c.beta_2 = 0.5;
    RandomStream rng(11, r);
    const LongDataset ds = generate(c, rng);
    const FitResult f = fit(ds, ModelSpec{});
    model += model_kappa(eblup_summary(f, ds)).kappa;
    naive += naive_kappa(ds).kappa;
    ++used;
  }
  CHECK(model / used - naive / used >= 0.1);
}
