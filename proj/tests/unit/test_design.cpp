#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "binagree/errors.hpp"
#include "binagree/glmm.hpp"
#include "binagree/rng.hpp"
#include "binagree/simulation.hpp"
#include "support.hpp"

using namespace binagree;
using testsupport::row;

TEST_CASE("one visit, one rater, no time trend gives an identity X") {
  const LongDataset ds = widen_to_long({row("1", 1, 0, 1, "A", "A")});
  ModelSpec spec;
  spec.time_trend = TimeTrend::none;
  spec.rater_effect = RaterEffect::omitted;
  const DesignBundle d = build_design(ds, spec);
  CHECK(d.X.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  CHECK(d.n_dense == 0);
  CHECK(d.n_diag == 1);
  // Rater effects need at least two raters.
  CHECK_THROWS_AS(build_design(ds, ModelSpec{}), DataError);
}

TEST_CASE("simulation-study design dimensions") {
  RandomStream rng(5, 0);
  const LongDataset ds = generate(SimConfig::model1(), rng);
  const DesignBundle d = build_design(ds, ModelSpec{});
  CHECK(d.X.rows() == 1000);
  CHECK(d.X.cols() == 3);
  CHECK(d.n_diag == 100);
  CHECK(d.n_dense == 60);
  CHECK(d.n_terms == 3);
  CHECK(d.estimate_rho);
  CHECK(d.blocks.size() == 200);
  CHECK(d.time_patterns.size() == 1);
  CHECK(d.n_variance_params() == 4);

  for (int r = 0; r < d.n_records(); ++r) {
    const MeasurementRecord& rec = ds.records[r];
    CHECK(d.X(r, slot(rec.method)) == 1.0);
    CHECK(d.X(r, 1 - slot(rec.method)) == 0.0);
    CHECK(d.X(r, 2) == rec.time);
    CHECK(d.diag_col[r] == rec.subject);
    CHECK(d.dense_col[r] == slot(rec.method) * ds.n_raters() + rec.rater);
    CHECK(d.y[r] == rec.outcome);
  }

  ModelSpec omitted;
  omitted.rater_effect = RaterEffect::omitted;
  omitted.residual_correlation = ResidualCorrelation::independent;
  const DesignBundle e = build_design(ds, omitted);
  CHECK(e.n_dense == 0);
  CHECK(e.n_terms == 1);
  CHECK_FALSE(e.estimate_rho);
  CHECK(e.n_variance_params() == 1);
}

TEST_CASE("residual blocks follow (subject, method) runs with their own times") {
  const LongDataset ds = widen_to_long({row("a", 1, 0, 1, "A", "B"), row("a", 3, 1, 1, "A", "B"),
                                        row("b", 2, 0, 0, "B", "A")});
  const DesignBundle d = build_design(ds, ModelSpec{});
  REQUIRE(d.blocks.size() == 4);
  CHECK(d.blocks[0].size == 2);
  CHECK(d.time_patterns[d.blocks[0].pattern] == std::vector<double>{0.0, 2.0});
  CHECK(d.blocks[2].size == 1);
}

TEST_CASE("ar1_matrix examples") {
  CHECK(ar1_matrix({0.5, 1.7, 9.0}, 0.0).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  const Eigen::MatrixXd m = ar1_matrix({1, 2, 3}, 0.5);
  CHECK(m(0, 1) == 0.5);
  CHECK(m(1, 2) == 0.5);
  CHECK(m(0, 2) == 0.25);
  CHECK(m(2, 0) == 0.25);
  CHECK(ar1_matrix({1, 3}, 0.1)(0, 1) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK_THROWS_AS(ar1_matrix({1, 2}, 1.0), DataError);
  CHECK_THROWS_AS(ar1_matrix({1, 2}, -1.0), DataError);
  CHECK_THROWS_AS(ar1_matrix({1, NAN}, 0.3), DataError);
  // Negative rho at integer gaps is the plain power.
  CHECK(ar1_matrix({1, 2, 4}, -0.6)(0, 1) == doctest::Approx(-0.6));
  CHECK(ar1_matrix({1, 2, 4}, -0.6)(0, 2) == doctest::Approx(-0.216));
}

TEST_CASE("ar1_matrix matches direct evaluation and stays positive definite") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> urho(-0.99, 0.99), ut(0.0, 20.0);
  for (int draw = 0; draw < 1000; ++draw) {
    const double rho = urho(gen);
    const int n = 1 + gen() % 50;
    std::vector<double> times(n);
    for (auto& t : times) t = ut(gen);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    const Eigen::MatrixXd m = ar1_matrix(times, rho);
    CHECK((m - m.transpose()).norm() == 0.0);
    for (std::size_t i = 0; i < times.size(); ++i) CHECK(m(i, i) == 1.0);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    CHECK(llt.info() == Eigen::Success);
    if (rho >= 0.0) {
      double worst = 0.0;
      for (std::size_t i = 0; i < times.size(); ++i)
        for (std::size_t j = 0; j < times.size(); ++j)
          worst = std::max(worst, std::abs(m(i, j) - std::pow(rho, std::abs(times[i] - times[j]))));
      CHECK(worst <= 1e-14);
    }
  }
}

TEST_CASE("unconstrained parametrisation round-trips") {
  RandomStream rng(5, 1);
  SimConfig c = SimConfig::model1();
  c.n_subjects = 5;
  c.n_raters = 3;
  const DesignBundle d = build_design(generate(c, rng), ModelSpec{});
  VarianceComponents vc;
  vc.sigma2_gamma = 0.8;
  vc.sigma2_alpha1 = 0.2;
  vc.sigma2_alpha2 = 0.0;
  vc.rho = -0.3;
  const Eigen::VectorXd p = to_unconstrained(d, vc);
  CHECK(p[0] == doctest::Approx(std::log(0.8)));
  CHECK(p[2] == doctest::Approx(std::log(1e-10)));
  const VarianceComponents back = from_unconstrained(d, p);
  CHECK(back.sigma2_gamma == doctest::Approx(0.8));
  CHECK(back.sigma2_alpha2 == doctest::Approx(1e-10));
  CHECK(back.rho == doctest::Approx(-0.3));
}

TEST_CASE("enum string conversions") {
  CHECK(parse_time_trend(to_string(TimeTrend::none)) == TimeTrend::none);
  CHECK(parse_residual_correlation(to_string(ResidualCorrelation::ar1)) == ResidualCorrelation::ar1);
  CHECK(parse_rater_effect(to_string(RaterEffect::omitted)) == RaterEffect::omitted);
  CHECK(parse_residual_scale(to_string(ResidualScale::estimated)) == ResidualScale::estimated);
  CHECK_THROWS_AS(parse_time_trend("quadratic"), DataError);
}
