#include "binagree/simulation.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "binagree/agreement.hpp"
#include "binagree/errors.hpp"

namespace binagree {

SimConfig SimConfig::model1() { return SimConfig{}; }

SimConfig SimConfig::model2() {
  SimConfig c;
  c.beta_1 = 2.2;
  return c;
}

int SimConfig::subject_count() const {
  return subject_times.empty() ? n_subjects : static_cast<int>(subject_times.size());
}

void SimConfig::check() const {
  if (subject_count() < 2) throw DataError("simulation needs at least 2 subjects");
  if (n_raters < 2) throw DataError("simulation needs at least 2 raters");
  if (subject_times.empty() && n_times < 1) throw DataError("simulation needs n_times >= 1");
  for (const auto& times : subject_times) {
    if (times.empty()) throw DataError("every simulated subject needs at least one time");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (!(times[k] > times[k - 1])) throw DataError("subject times must be strictly increasing");
  }
  if (sigma2_gamma < 0 || sigma2_alpha1 < 0 || sigma2_alpha2 < 0)
    throw DataError("variances must be non-negative");
  if (!(std::abs(rho) < 1.0)) throw DataError("rho must satisfy |rho| < 1");
}

Eigen::VectorXd sample_ar1(const Eigen::MatrixXd& chol_factor, RandomStream& rng) {
  Eigen::VectorXd z(chol_factor.rows());
  for (Eigen::Index t = 0; t < z.size(); ++t) z[t] = rng.normal();
  return chol_factor.triangularView<Eigen::Lower>() * z;
}

SimulatedData generate_with_truth(const SimConfig& config, RandomStream& rng) {
  config.check();
  const int n_subjects = config.subject_count();
  const int n_raters = config.n_raters;

  SimulatedData out;
  out.truth.gamma.resize(n_subjects);
  out.truth.alpha.resize(n_raters, 2);
  for (int i = 0; i < n_subjects; ++i)
    out.truth.gamma[i] = std::sqrt(config.sigma2_gamma) * rng.normal();
  for (int m = 0; m < 2; ++m) {
    const double sd = std::sqrt(m == 0 ? config.sigma2_alpha1 : config.sigma2_alpha2);
    for (int j = 0; j < n_raters; ++j) out.truth.alpha(j, m) = sd * rng.normal();
  }

  std::vector<double> balanced(config.n_times);
  for (int t = 0; t < config.n_times; ++t) balanced[t] = t + 1.0;

  std::vector<std::string> rater_labels(n_raters);
  for (int j = 0; j < n_raters; ++j) rater_labels[j] = "R" + std::to_string(j + 1);

  Eigen::MatrixXd chol;
  std::vector<double> chol_times;
  const double beta[2] = {config.beta_1, config.beta_2};
  for (int i = 0; i < n_subjects; ++i) {
    const std::vector<double>& times =
        config.subject_times.empty() ? balanced : config.subject_times[i];
    const auto T = static_cast<Eigen::Index>(times.size());
    if (times != chol_times) {
      Eigen::LLT<Eigen::MatrixXd> llt(ar1_matrix(times, config.rho));
      if (llt.info() != Eigen::Success) throw NumericalError("AR(1) matrix is not positive definite");
      chol = llt.matrixL();
      chol_times = times;
    }
    Eigen::MatrixXd eps(T, 2);
    for (int m = 0; m < 2; ++m) eps.col(m) = sample_ar1(chol, rng);

    int pair_first = -1, pair_second = -1;
    const auto draw_pair = [&](int& j1, int& j2) {
      j1 = static_cast<int>(rng.uniform_index(n_raters));
      j2 = static_cast<int>(rng.uniform_index(n_raters - 1));
      if (j2 >= j1) ++j2;
    };
    if (config.assignment == RaterAssignment::persistent_pair) draw_pair(pair_first, pair_second);

    for (Eigen::Index t = 0; t < T; ++t) {
      int j1 = pair_first, j2 = pair_second;
      if (config.assignment == RaterAssignment::fresh_pair) draw_pair(j1, j2);
      const int raters[2] = {j1, j2};
      int y[2];
      for (int m = 0; m < 2; ++m) {
        const double mu = beta[m] + config.time_slope * times[t] + out.truth.gamma[i] +
                          out.truth.alpha(raters[m], m);
        y[m] = mu + eps(t, m) > 0.0 ? 1 : 0;
      }
      out.paired.push_back({std::to_string(i + 1), times[t], y[0], y[1], rater_labels[j1],
                            rater_labels[j2]});
    }
  }
  out.data = widen_to_long(out.paired);
  return out;
}

LongDataset generate(const SimConfig& config, RandomStream& rng) {
  return generate_with_truth(config, rng).data;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& task) {
  if (n <= 0) return;
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& worker : workers) worker.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

ReplicateRecord fit_replicate(const LongDataset& data, const ModelSpec& spec,
                              const CampaignOptions& options) {
  ReplicateRecord rec;
  try {
    const FitResult f = fit(data, spec, options.fit);
    rec.converged = f.converged;
    rec.beta_1 = f.fixed.beta_1;
    rec.beta_2 = f.fixed.beta_2;
    rec.theta = f.fixed.theta.value_or(0.0);
    rec.sigma2_gamma = f.vc.sigma2_gamma;
    rec.sigma2_alpha1 = f.vc.sigma2_alpha1;
    rec.sigma2_alpha2 = f.vc.sigma2_alpha2;
    rec.rho = f.vc.rho;
    const ICCResult r = icc(f.vc);
    rec.icc_1 = r.icc_m1;
    rec.icc_2 = r.icc_m2;
    // The level only shapes the interval; alpha = 1 still needs a valid one.
    const double level =
        options.alpha > 0.0 && options.alpha < 1.0 ? 1.0 - options.alpha : 0.95;
    const WaldTest t = wald_test(f, level);
    rec.estimate = t.estimate;
    rec.std_error = t.std_error;
    rec.p_value = t.p_value;
    rec.rejected = t.p_value <= options.alpha;
    if (!f.converged) rec.error = "not converged";
  } catch (const std::exception& e) {
    rec.converged = false;
    rec.error = e.what();
  }
  return rec;
}

ParameterSummary summarize(const std::vector<const ReplicateRecord*>& used,
                           double ReplicateRecord::*field) {
  ParameterSummary s;
  if (used.empty()) return s;
  double sum = 0.0;
  for (const ReplicateRecord* r : used) sum += r->*field;
  s.mean = sum / used.size();
  double ss = 0.0;
  for (const ReplicateRecord* r : used) ss += (r->*field - s.mean) * (r->*field - s.mean);
  s.sd = used.size() > 1 ? std::sqrt(ss / (used.size() - 1)) : 0.0;
  return s;
}

void check_failures(int failed, int total, double max_fraction, const std::string& what) {
  if (total > 0 && static_cast<double>(failed) / total > max_fraction)
    throw NumericalError(what + ": " + std::to_string(failed) + " of " + std::to_string(total) +
                         " fits failed to converge (limit " +
                         std::to_string(static_cast<int>(max_fraction * 100)) + "%)");
}

}  // namespace

SimCampaignResult run_recovery(const SimConfig& config, int n_replicates, const ModelSpec& spec,
                               const CampaignOptions& options) {
  if (n_replicates < 1) throw DataError("n_replicates must be >= 1");
  config.check();
  std::vector<ReplicateRecord> records(n_replicates);
  parallel_for(n_replicates, options.jobs, [&](int r) {
    RandomStream rng(config.seed, static_cast<std::uint64_t>(r));
    const LongDataset data = generate(config, rng);
    records[r] = fit_replicate(data, spec, options);
    records[r].replicate = r;
  });

  SimCampaignResult res;
  res.n_replicates = n_replicates;
  std::vector<const ReplicateRecord*> used;
  int rejected = 0;
  for (const ReplicateRecord& r : records) {
    if (!r.converged) {
      ++res.n_failed;
      continue;
    }
    used.push_back(&r);
    rejected += r.rejected ? 1 : 0;
  }
  check_failures(res.n_failed, n_replicates, options.max_failure_fraction, "recovery campaign");
  res.n_used = static_cast<int>(used.size());
  res.rejection_rate = used.empty() ? 0.0 : static_cast<double>(rejected) / used.size();
  res.beta_1 = summarize(used, &ReplicateRecord::beta_1);
  res.beta_2 = summarize(used, &ReplicateRecord::beta_2);
  res.difference = summarize(used, &ReplicateRecord::estimate);
  res.theta = summarize(used, &ReplicateRecord::theta);
  res.sigma2_gamma = summarize(used, &ReplicateRecord::sigma2_gamma);
  res.sigma2_alpha1 = summarize(used, &ReplicateRecord::sigma2_alpha1);
  res.sigma2_alpha2 = summarize(used, &ReplicateRecord::sigma2_alpha2);
  res.rho = summarize(used, &ReplicateRecord::rho);
  res.icc_1 = summarize(used, &ReplicateRecord::icc_1);
  res.icc_2 = summarize(used, &ReplicateRecord::icc_2);
  res.replicates = std::move(records);
  return res;
}

PowerTable run_size_power(const SimConfig& base, const std::vector<double>& beta_1_grid,
                          int n_replicates, const std::vector<LabeledSpec>& specs,
                          const CampaignOptions& options) {
  if (n_replicates < 1) throw DataError("n_replicates must be >= 1");
  if (beta_1_grid.empty() || specs.empty()) throw DataError("power grid and spec list must be non-empty");
  base.check();
  const int n_grid = static_cast<int>(beta_1_grid.size());
  const int n_specs = static_cast<int>(specs.size());
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(n_grid) * n_replicates * n_specs);

  parallel_for(n_grid * n_replicates, options.jobs, [&](int task) {
    const int g = task / n_replicates, r = task % n_replicates;
    SimConfig config = base;
    config.beta_1 = beta_1_grid[g];
    RandomStream rng(base.seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(g) + 1);
    const LongDataset data = generate(config, rng);
    for (int s = 0; s < n_specs; ++s) {
      ReplicateRecord rec = fit_replicate(data, specs[s].spec, options);
      rec.grid_point = g;
      rec.replicate = r;
      records[(static_cast<std::size_t>(g) * n_specs + s) * n_replicates + r] = std::move(rec);
    }
  });

  PowerTable table;
  table.alpha = options.alpha;
  for (int g = 0; g < n_grid; ++g)
    for (int s = 0; s < n_specs; ++s) {
      PowerRow row;
      row.beta_1 = beta_1_grid[g];
      row.spec_label = specs[s].label;
      row.n_replicates = n_replicates;
      int rejected = 0;
      for (int r = 0; r < n_replicates; ++r) {
        const ReplicateRecord& rec =
            records[(static_cast<std::size_t>(g) * n_specs + s) * n_replicates + r];
        if (!rec.converged) {
          ++row.n_failed;
          continue;
        }
        ++row.n_used;
        rejected += rec.rejected ? 1 : 0;
      }
      check_failures(row.n_failed, n_replicates, options.max_failure_fraction,
                     "power campaign (beta_1 = " + std::to_string(row.beta_1) + ", " +
                         row.spec_label + ")");
      row.rejection_rate = row.n_used ? static_cast<double>(rejected) / row.n_used : 0.0;
      table.rows.push_back(row);
    }
  table.replicates = std::move(records);
  return table;
}

std::vector<LabeledSpec> default_power_specs() {
  ModelSpec with_rater;
  ModelSpec without_rater;
  without_rater.rater_effect = RaterEffect::omitted;
  return {{"with_rater", with_rater}, {"without_rater", without_rater}};
}

std::vector<double> make_grid(double from, double to, double step) {
  if (!(step > 0.0) || to < from) throw DataError("invalid grid specification");
  std::vector<double> grid;
  const auto n = static_cast<int>(std::floor((to - from) / step + 1e-9));
  for (int k = 0; k <= n; ++k) grid.push_back(from + k * step);
  return grid;
}

}  // namespace binagree
