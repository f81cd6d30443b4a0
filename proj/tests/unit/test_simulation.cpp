#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "binagree/agreement.hpp"
#include "binagree/errors.hpp"
#include "binagree/simulation.hpp"
#include "support.hpp"

using namespace binagree;

namespace {

SimConfig small_config() {
  SimConfig c = SimConfig::model1();
  c.n_subjects = 30;
  c.n_raters = 6;
  c.n_times = 3;
  c.seed = 9;
  return c;
}

bool same_record(const ReplicateRecord& a, const ReplicateRecord& b) {
  return a.converged == b.converged && a.beta_1 == b.beta_1 && a.beta_2 == b.beta_2 &&
         a.theta == b.theta && a.sigma2_gamma == b.sigma2_gamma && a.rho == b.rho &&
         a.p_value == b.p_value && a.std_error == b.std_error && a.grid_point == b.grid_point &&
         a.replicate == b.replicate;
}

}  // namespace

TEST_CASE("Model 1 generation") {
  RandomStream rng(1, 0);
  const SimulatedData sim = generate_with_truth(SimConfig::model1(), rng);
  CHECK(sim.data.records.size() == 1000);
  CHECK(sim.paired.size() == 500);
  CHECK(sim.data.n_subjects() == 100);
  CHECK(sim.data.n_raters() <= 30);
  CHECK(sim.truth.gamma.size() == 100);
  CHECK(sim.truth.alpha.rows() == 30);
  CHECK(sim.paired.front().subject_id == "1");
  CHECK(sim.paired.front().rater_m1.front() == 'R');

  RandomStream again(1, 0);
  CHECK(generate_with_truth(SimConfig::model1(), again).paired == sim.paired);
  RandomStream other(1, 1);
  CHECK_FALSE(generate_with_truth(SimConfig::model1(), other).paired == sim.paired);
}

TEST_CASE("marginal positive rate at the first visit") {
  SimConfig c = SimConfig::model1();
  c.n_subjects = 20000;
  c.n_raters = 2000;
  c.n_times = 1;
  RandomStream rng(3, 0);
  const SimulatedData sim = generate_with_truth(c, rng);
  double rate[2] = {0, 0};
  for (const auto& p : sim.paired) {
    rate[0] += p.outcome_m1;
    rate[1] += p.outcome_m2;
  }
  const double s2a[2] = {c.sigma2_alpha1, c.sigma2_alpha2};
  for (int m = 0; m < 2; ++m) {
    const double expected = testsupport::phi_cdf(1.1 / std::sqrt(1.0 + 0.8 + s2a[m]));
    CHECK(rate[m] / c.n_subjects == doctest::Approx(expected).epsilon(0.02));
  }
}

TEST_CASE("degenerate generator settings") {
  SimConfig c = small_config();
  c.sigma2_gamma = c.sigma2_alpha1 = c.sigma2_alpha2 = 0.0;
  c.rho = 0.0;
  c.beta_1 = c.beta_2 = 50.0;
  RandomStream rng(1, 0);
  for (const auto& r : generate(c, rng).records) CHECK(r.outcome == 1);

  SimConfig bad = small_config();
  bad.n_raters = 1;
  CHECK_THROWS_AS(bad.check(), DataError);
  bad = small_config();
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.check(), DataError);
  bad = small_config();
  bad.sigma2_gamma = -1.0;
  CHECK_THROWS_AS(bad.check(), DataError);
  bad = small_config();
  bad.subject_times = {{1.0, 2.0}, {3.0, 3.0}};
  CHECK_THROWS_AS(bad.check(), DataError);
}

TEST_CASE("latent errors carry the AR(1) lag-1 correlation") {
  for (double rho : {0.1, 0.6, -0.4}) {
    const Eigen::MatrixXd L = ar1_matrix({1, 2, 3, 4, 5}, rho).llt().matrixL();
    RandomStream rng(5, 0);
    double cross = 0.0, square = 0.0;
    for (int s = 0; s < 10000; ++s) {
      const Eigen::VectorXd e = sample_ar1(L, rng);
      for (int t = 0; t + 1 < 5; ++t) cross += e[t] * e[t + 1];
      square += e.squaredNorm();
    }
    CHECK(std::abs(cross / 40000.0 - rho) < 0.05);
    CHECK(square / 50000.0 == doctest::Approx(1.0).epsilon(0.03));
  }
}

TEST_CASE("rater assignment") {
  SimConfig c = SimConfig::model1();
  c.n_subjects = 2000;
  RandomStream rng(8, 0);
  const SimulatedData sim = generate_with_truth(c, rng);
  std::vector<long> usage(30, 0);
  for (const auto& p : sim.paired) {
    CHECK(p.rater_m1 != p.rater_m2);
    ++usage[std::stoi(p.rater_m1.substr(1)) - 1];
    ++usage[std::stoi(p.rater_m2.substr(1)) - 1];
  }
  const double total = 2.0 * sim.paired.size();
  const double expected = total / 30.0;
  const double sd = std::sqrt(total * (1.0 / 30.0) * (29.0 / 30.0));
  for (long u : usage) CHECK(std::abs(u - expected) <= 3.0 * sd);

  c.n_subjects = 50;
  c.assignment = RaterAssignment::persistent_pair;
  RandomStream rng2(8, 1);
  const SimulatedData persistent = generate_with_truth(c, rng2);
  for (const auto& p : persistent.paired) {
    CHECK(p.rater_m1 != p.rater_m2);
    const auto& first = *std::find_if(persistent.paired.begin(), persistent.paired.end(),
                                      [&](const PairedRecord& q) { return q.subject_id == p.subject_id; });
    CHECK(p.rater_m1 == first.rater_m1);
    CHECK(p.rater_m2 == first.rater_m2);
  }
}

TEST_CASE("campaigns are reproducible for any worker count") {
  const SimConfig c = small_config();
  CampaignOptions one, four;
  four.jobs = 4;
  const SimCampaignResult a = run_recovery(c, 6, ModelSpec{}, one);
  const SimCampaignResult b = run_recovery(c, 6, ModelSpec{}, four);
  REQUIRE(a.replicates.size() == 6);
  for (int r = 0; r < 6; ++r) CHECK(same_record(a.replicates[r], b.replicates[r]));
  CHECK(a.beta_1.mean == b.beta_1.mean);
  CHECK(a.icc_2.sd == b.icc_2.sd);

  const std::vector<double> grid = {1.6, 2.2};
  const PowerTable p = run_size_power(c, grid, 3, default_power_specs(), one);
  const PowerTable q = run_size_power(c, grid, 3, default_power_specs(), four);
  REQUIRE(p.rows.size() == 4);
  REQUIRE(p.replicates.size() == 12);
  for (std::size_t k = 0; k < p.replicates.size(); ++k)
    CHECK(same_record(p.replicates[k], q.replicates[k]));
  CHECK(p.rows[0].spec_label == "with_rater");
  CHECK(p.rows[1].spec_label == "without_rater");
  CHECK(p.rows[2].beta_1 == 2.2);
}

TEST_CASE("campaign edge cases") {
  const SimConfig c = small_config();
  CampaignOptions always;
  always.alpha = 1.0;
  const PowerTable p = run_size_power(c, {1.6}, 4, default_power_specs(), always);
  for (const auto& row : p.rows) CHECK(row.rejection_rate == 1.0);

  CampaignOptions starved;
  starved.fit.max_outer = 1;
  CHECK_THROWS_AS(run_recovery(c, 3, ModelSpec{}, starved), NumericalError);
  starved.max_failure_fraction = 1.0;
  const SimCampaignResult r = run_recovery(c, 3, ModelSpec{}, starved);
  CHECK(r.n_failed == 3);
  CHECK(r.n_used == 0);

  CHECK_THROWS_AS(run_recovery(c, 0, ModelSpec{}), DataError);
  CHECK_THROWS_AS(run_size_power(c, {}, 3, default_power_specs()), DataError);

  const std::vector<double> grid = make_grid(1.6, 2.8, 0.1);
  CHECK(grid.size() == 13);
  CHECK(grid.front() == 1.6);
  CHECK(grid.back() == doctest::Approx(2.8));
  CHECK_THROWS_AS(make_grid(2.0, 1.0, 0.1), DataError);
}

TEST_CASE("zero-variance recovery matches the probit oracle") {
  SimConfig c = small_config();
  c.sigma2_gamma = c.sigma2_alpha1 = c.sigma2_alpha2 = 0.0;
  c.rho = 0.0;
  CampaignOptions o;
  o.fit.fixed_components = VarianceComponents{};
  const int n = 8;
  const SimCampaignResult res = run_recovery(c, n, ModelSpec{}, o);
  double b1 = 0.0, b2 = 0.0;
  for (int r = 0; r < n; ++r) {
    RandomStream rng(c.seed, r);
    const LongDataset ds = generate(c, rng);
    const DesignBundle d = build_design(ds, ModelSpec{});
    const Eigen::VectorXd beta = testsupport::newton_probit(d.X, d.y);
    b1 += beta[0] / n;
    b2 += beta[1] / n;
  }
  CHECK(res.n_used == n);
  CHECK(res.beta_1.mean == doctest::Approx(b1).epsilon(1e-4));
  CHECK(res.beta_2.mean == doctest::Approx(b2).epsilon(1e-4));
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 7, [&](int i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](int i) {
                    if (i == 5) throw NumericalError("boom");
                  }),
                  NumericalError);
}
