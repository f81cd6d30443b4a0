#include "binagree/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "binagree/agreement.hpp"
#include "binagree/csv.hpp"
#include "binagree/errors.hpp"
#include "binagree/kvconfig.hpp"
#include "binagree/report.hpp"
#include "binagree/simulation.hpp"
#include "binagree/svg.hpp"

namespace binagree {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 42;

struct Options {
  std::string input;
  std::string state;
  std::string config;
  std::string out_dir = ".";
  bool no_timestamp = false;
  double level = 0.95;
  OutcomeLabels labels;
  CsvColumns columns;
  // ba
  std::string scale = "latent";
  std::string rater_average = "subject";
  bool reweight = false;
  double margin = 0.0;
  bool has_margin = false;
  // simulate / power
  std::uint64_t seed = kDefaultSeed;
  bool seed_given = false;
  int replicates = 0;
  int jobs = 1;
  bool per_replicate = false;
  bool dataset_only = false;
  double alpha = 0.05;
  bool svg = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("input not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed to read " + path);
  return ss.str();
}

class Outputs {
 public:
  Outputs(const Options& opt, std::ostream& log) : opt_(opt), log_(log) {}

  void write(const std::string& name, const std::string& body, bool stamp = true) const {
    std::error_code ec;
    fs::create_directories(opt_.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + opt_.out_dir + ": " + ec.message());
    const fs::path path = fs::path(opt_.out_dir) / name;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    if (stamp && !opt_.no_timestamp) os << "# generated_at = " << timestamp() << "\n";
    os << body;
    os.close();
    if (!os) throw IoError("failed to write " + path.string());
    log_ << "wrote " << path.string() << "\n";
  }

 private:
  static std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  const Options& opt_;
  std::ostream& log_;
};

KeyValueConfig load_config(const Options& opt) {
  return opt.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(opt.config);
}

void warn_unused(const KeyValueConfig& cfg, std::ostream& err) {
  for (const std::string& key : cfg.unused_keys())
    err << "warning: unknown configuration key '" << key << "'\n";
}

ModelSpec model_spec(const KeyValueConfig& cfg) {
  ModelSpec spec;
  if (auto v = cfg.get_string("time_trend")) spec.time_trend = parse_time_trend(*v);
  if (auto v = cfg.get_string("residual_correlation"))
    spec.residual_correlation = parse_residual_correlation(*v);
  if (auto v = cfg.get_string("rater_effect")) spec.rater_effect = parse_rater_effect(*v);
  if (auto v = cfg.get_string("residual_scale")) spec.residual_scale = parse_residual_scale(*v);
  return spec;
}

FitOptions fit_options(const KeyValueConfig& cfg, const Options& opt) {
  FitOptions fo;
  fo.tolerance = cfg.get_double("tolerance", fo.tolerance);
  fo.max_outer = static_cast<int>(cfg.get_int("max_outer", fo.max_outer));
  fo.max_inner_evaluations =
      static_cast<int>(cfg.get_int("max_inner_evaluations", fo.max_inner_evaluations));
  fo.level = opt.level;
  if (!(fo.tolerance > 0.0)) throw DataError("tolerance must be positive");
  if (fo.max_outer < 1) throw DataError("max_outer must be >= 1");
  if (fo.max_inner_evaluations < 1) throw DataError("max_inner_evaluations must be >= 1");
  return fo;
}

LongDataset load_dataset(const Options& opt) {
  if (opt.input.empty()) throw CLI::RequiredError("--input");
  return widen_to_long(parse_wide_csv(read_file(opt.input), opt.labels, opt.columns));
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const std::string& w : warnings) err << "warning: " << w << "\n";
}

// Fit state from --state, or a fresh fit of --input.
FitState obtain_state(const Options& opt, std::ostream& err) {
  if (!opt.state.empty()) {
    if (!opt.input.empty()) throw CLI::ValidationError("--state and --input are mutually exclusive");
    return read_fit_state(read_file(opt.state));
  }
  if (opt.input.empty()) throw CLI::RequiredError("--state or --input");
  const KeyValueConfig cfg = load_config(opt);
  FitState st;
  st.data = load_dataset(opt);
  st.fit = fit(st.data, model_spec(cfg), fit_options(cfg, opt));
  warn_unused(cfg, err);
  print_warnings(st.fit.warnings, err);
  return st;
}

SummaryOptions summary_options(const Options& opt) {
  SummaryOptions so;
  if (opt.rater_average == "subject")
    so.rater_average = RaterAverage::subject_raters;
  else if (opt.rater_average == "all")
    so.rater_average = RaterAverage::all_raters;
  else
    throw CLI::ValidationError("--rater-average must be subject or all");
  so.reweight = opt.reweight;
  return so;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& row : csv::parse(text))
    for (const std::string& f : row.fields) {
      double v = 0.0;
      if (!csv::parse_double(f, v)) throw DataError("invalid number '" + f + "' in list");
      out.push_back(v);
    }
  return out;
}

SimConfig sim_config(const KeyValueConfig& cfg, const Options& opt, std::ostream& err) {
  SimConfig c = SimConfig::model1();
  if (auto v = cfg.get_string("model")) {
    if (*v == "model1" || *v == "1")
      c = SimConfig::model1();
    else if (*v == "model2" || *v == "2")
      c = SimConfig::model2();
    else
      throw DataError("unknown model preset '" + *v + "' (expected model1|model2)");
  }
  c.n_subjects = static_cast<int>(cfg.get_int("n_subjects", c.n_subjects));
  c.n_raters = static_cast<int>(cfg.get_int("n_raters", c.n_raters));
  c.n_times = static_cast<int>(cfg.get_int("n_times", c.n_times));
  if (auto v = cfg.get_string("times")) {
    const std::vector<double> times = parse_number_list(*v);
    c.subject_times.assign(c.n_subjects, times);
  }
  c.beta_1 = cfg.get_double("beta_1", c.beta_1);
  c.beta_2 = cfg.get_double("beta_2", c.beta_2);
  c.time_slope = cfg.get_double("time_slope", c.time_slope);
  c.sigma2_gamma = cfg.get_double("sigma2_gamma", c.sigma2_gamma);
  c.sigma2_alpha1 = cfg.get_double("sigma2_alpha1", c.sigma2_alpha1);
  c.sigma2_alpha2 = cfg.get_double("sigma2_alpha2", c.sigma2_alpha2);
  c.rho = cfg.get_double("rho", c.rho);
  if (auto v = cfg.get_string("assignment")) {
    if (*v == "fresh")
      c.assignment = RaterAssignment::fresh_pair;
    else if (*v == "persistent")
      c.assignment = RaterAssignment::persistent_pair;
    else
      throw DataError("unknown assignment '" + *v + "' (expected fresh|persistent)");
  }
  const auto cfg_seed = cfg.get_uint64("seed");
  if (opt.seed_given)
    c.seed = opt.seed;
  else if (cfg_seed)
    c.seed = *cfg_seed;
  else {
    c.seed = kDefaultSeed;
    err << "notice: no seed given; using default seed " << kDefaultSeed << "\n";
  }
  c.check();
  return c;
}

int cmd_validate(const Options& opt, const Outputs& outputs, std::ostream& out) {
  const LongDataset ds = load_dataset(opt);
  const std::string report = format_validation_report(validate(ds));
  outputs.write("validation.txt", report);
  out << report;
  return kExitOk;
}

int cmd_fit(const Options& opt, const Outputs& outputs, std::ostream& out, std::ostream& err) {
  if (!opt.state.empty()) throw CLI::ValidationError("fit takes --input, not --state");
  const FitState st = obtain_state(opt, err);
  const std::string report = format_fit_report(st.fit, wald_test(st.fit, opt.level));
  outputs.write("fit.txt", report);
  outputs.write("fit.state", write_fit_state(st.data, st.fit), false);
  out << report;
  return kExitOk;
}

int cmd_test(const Options& opt, const Outputs& outputs, std::ostream& out, std::ostream& err) {
  const FitState st = obtain_state(opt, err);
  const std::string report = format_test_report(wald_test(st.fit, opt.level));
  outputs.write("test.txt", report);
  out << report;
  return kExitOk;
}

int cmd_ba(const Options& opt, const Outputs& outputs, std::ostream& out, std::ostream& err) {
  const BAScale scale = parse_ba_scale(opt.scale);
  const SummaryOptions so = summary_options(opt);
  const FitState st = obtain_state(opt, err);
  const BASummary ba =
      ba_summary(eblup_summary(st.fit, st.data, so), scale,
                 opt.has_margin ? std::optional<double>(opt.margin) : std::nullopt);
  print_warnings(ba.warnings, err);
  outputs.write("ba.csv", format_ba_csv(ba, st.data));
  outputs.write("ba.svg", render_ba_svg(ba), false);
  out << "mean_diff = " << csv::format_double(ba.mean_diff) << "\n"
      << "loa_low = " << csv::format_double(ba.loa_low) << "\n"
      << "loa_high = " << csv::format_double(ba.loa_high) << "\n"
      << "pct_within = " << csv::format_double(ba.pct_within) << "\n";
  return kExitOk;
}

int cmd_kappa(const Options& opt, const Outputs& outputs, std::ostream& out, std::ostream& err) {
  const SummaryOptions so = summary_options(opt);
  const FitState st = obtain_state(opt, err);
  const KappaResult model = model_kappa(eblup_summary(st.fit, st.data, so), opt.level);
  const KappaResult naive = naive_kappa(st.data, opt.level);
  print_warnings(model.warnings, err);
  print_warnings(naive.warnings, err);
  const std::string report = format_kappa_report(model, naive);
  outputs.write("kappa.txt", report);
  out << report;
  return kExitOk;
}

int cmd_icc(const Options& opt, const Outputs& outputs, std::ostream& out, std::ostream& err) {
  const FitState st = obtain_state(opt, err);
  const std::string report = format_icc_report(icc(st.fit.vc), st.fit.vc);
  outputs.write("icc.txt", report);
  out << report;
  return kExitOk;
}

int cmd_simulate(const Options& opt, const Outputs& outputs, std::ostream& out,
                 std::ostream& err) {
  const KeyValueConfig cfg = load_config(opt);
  const SimConfig sc = sim_config(cfg, opt, err);
  if (opt.dataset_only) {
    warn_unused(cfg, err);
    RandomStream rng(sc.seed, 0);
    const SimulatedData sim = generate_with_truth(sc, rng);
    outputs.write("data.csv", write_wide_csv(sim.paired, opt.labels, opt.columns), false);
    return kExitOk;
  }
  const ModelSpec spec = model_spec(cfg);
  CampaignOptions co;
  co.fit = fit_options(cfg, opt);
  co.jobs = opt.jobs;
  co.alpha = cfg.get_double("alpha", opt.alpha);
  const int reps = opt.replicates > 0 ? opt.replicates : static_cast<int>(cfg.get_int("replicates", 200));
  warn_unused(cfg, err);
  const SimCampaignResult res = run_recovery(sc, reps, spec, co);
  const std::string body = format_recovery_csv(res);
  outputs.write("recovery.csv", body);
  if (opt.per_replicate)
    outputs.write("replicates.csv",
                  format_replicates_csv(res.replicates, {sc.beta_1}, {"fit"}, reps));
  out << body;
  return kExitOk;
}

int cmd_power(const Options& opt, const Outputs& outputs, std::ostream& out, std::ostream& err) {
  const KeyValueConfig cfg = load_config(opt);
  SimConfig sc = sim_config(cfg, opt, err);
  const ModelSpec base = model_spec(cfg);
  std::vector<LabeledSpec> specs = default_power_specs();
  for (LabeledSpec& s : specs) {
    s.spec.time_trend = base.time_trend;
    s.spec.residual_correlation = base.residual_correlation;
    s.spec.residual_scale = base.residual_scale;
  }
  std::vector<double> grid;
  if (auto v = cfg.get_string("grid"))
    grid = parse_number_list(*v);
  else
    grid = make_grid(cfg.get_double("grid_from", 1.6), cfg.get_double("grid_to", 2.8),
                     cfg.get_double("grid_step", 0.1));
  CampaignOptions co;
  co.fit = fit_options(cfg, opt);
  co.jobs = opt.jobs;
  co.alpha = cfg.get_double("alpha", opt.alpha);
  if (!(co.alpha > 0.0 && co.alpha <= 1.0)) throw DataError("alpha must lie in (0, 1]");
  const int reps = opt.replicates > 0 ? opt.replicates : static_cast<int>(cfg.get_int("replicates", 300));
  warn_unused(cfg, err);
  const PowerTable table = run_size_power(sc, grid, reps, specs, co);
  const std::string body = format_power_csv(table);
  outputs.write("power.csv", body);
  if (opt.svg) outputs.write("power.svg", render_power_svg(table), false);
  if (opt.per_replicate) {
    std::vector<std::string> labels;
    for (const LabeledSpec& s : specs) labels.push_back(s.label);
    outputs.write("replicates.csv", format_replicates_csv(table.replicates, grid, labels, reps));
  }
  out << body;
  return kExitOk;
}

void add_data_flags(CLI::App* sub, Options& opt) {
  sub->add_option("--positive", opt.labels.positive, "Label of a positive outcome")
      ->capture_default_str();
  sub->add_option("--negative", opt.labels.negative, "Label of a negative outcome")
      ->capture_default_str();
  sub->add_option("--col-id", opt.columns.id, "Subject id column")->capture_default_str();
  sub->add_option("--col-time", opt.columns.time, "Visit time column")->capture_default_str();
  sub->add_option("--col-y1", opt.columns.outcome_m1, "Method 1 outcome column")
      ->capture_default_str();
  sub->add_option("--col-y2", opt.columns.outcome_m2, "Method 2 outcome column")
      ->capture_default_str();
  sub->add_option("--col-rater1", opt.columns.rater_m1, "Method 1 rater column")
      ->capture_default_str();
  sub->add_option("--col-rater2", opt.columns.rater_m2, "Method 2 rater column")
      ->capture_default_str();
}

void add_common(CLI::App* sub, Options& opt) {
  sub->add_option("-o,--out", opt.out_dir, "Output directory (created if absent)")
      ->capture_default_str();
  sub->add_flag("--no-timestamp", opt.no_timestamp, "Omit the generated_at header line");
}

void add_model_input(CLI::App* sub, Options& opt, bool allow_state) {
  sub->add_option("-i,--input", opt.input, "Wide-format CSV input");
  sub->add_option("-c,--config", opt.config, "key = value model configuration");
  if (allow_state) sub->add_option("-s,--state", opt.state, "Fit state written by 'fit'");
  sub->add_option("--level", opt.level, "Confidence level")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0).description("(0, 1)"));
  add_data_flags(sub, opt);
  add_common(sub, opt);
}

void add_campaign(CLI::App* sub, Options& opt) {
  sub->add_option("-c,--config", opt.config, "key = value simulation configuration");
  sub->add_option("--seed", opt.seed, "Root seed (default 42)");
  sub->add_option("--replicates", opt.replicates, "Number of replicates")
      ->check(CLI::PositiveNumber);
  sub->add_option("-j,--jobs", opt.jobs, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_flag("--per-replicate", opt.per_replicate, "Also write replicates.csv");
  sub->add_option("--alpha", opt.alpha, "Test level for rejection rates")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  add_common(sub, opt);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Agreement between two binary measuring methods with multiple raters"};
  app.name("binagree");
  app.require_subcommand(1, 1);
  Options opt;

  auto* validate_cmd = app.add_subcommand("validate", "Check a dataset and summarise it");
  validate_cmd->add_option("-i,--input", opt.input, "Wide-format CSV input")->required();
  add_data_flags(validate_cmd, opt);
  add_common(validate_cmd, opt);

  auto* fit_cmd = app.add_subcommand("fit", "Fit the probit GLMM; writes fit.txt and fit.state");
  add_model_input(fit_cmd, opt, false);
  auto* test_cmd = app.add_subcommand("test", "Wald test of beta_1 = beta_2; writes test.txt");
  add_model_input(test_cmd, opt, true);
  auto* ba_cmd = app.add_subcommand("ba", "Bland-Altman data and diagram; writes ba.csv, ba.svg");
  add_model_input(ba_cmd, opt, true);
  ba_cmd->add_option("--scale", opt.scale, "latent | probability | log_probability")
      ->capture_default_str();
  ba_cmd->add_option("--delta", opt.margin, "Pre-specified acceptance margin +-delta")
      ->each([&](const std::string&) { opt.has_margin = true; });
  ba_cmd->add_option("--rater-average", opt.rater_average,
                     "Rater EBLUPs in subject summaries: subject | all")
      ->capture_default_str();
  ba_cmd->add_flag("--reweight", opt.reweight, "Shrink summaries by J s2_gamma / (J s2_gamma + s2_alpha)");
  auto* kappa_cmd = app.add_subcommand("kappa", "Model-based and naive Cohen's kappa");
  add_model_input(kappa_cmd, opt, true);
  kappa_cmd->add_option("--rater-average", opt.rater_average, "subject | all")
      ->capture_default_str();
  kappa_cmd->add_flag("--reweight", opt.reweight, "Shrink subject summaries");
  auto* icc_cmd = app.add_subcommand("icc", "Per-method intraclass correlations");
  add_model_input(icc_cmd, opt, true);

  auto* sim_cmd = app.add_subcommand("simulate", "Parameter-recovery campaign; writes recovery.csv");
  add_campaign(sim_cmd, opt);
  sim_cmd->add_flag("--dataset", opt.dataset_only, "Write one simulated dataset (data.csv) and stop");
  add_data_flags(sim_cmd, opt);
  auto* power_cmd = app.add_subcommand("power", "Size and power campaign; writes power.csv");
  add_campaign(power_cmd, opt);
  power_cmd->add_flag("--svg", opt.svg, "Also write power.svg");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    for (auto* sub : {sim_cmd, power_cmd})
      if (sub->parsed() && sub->count("--seed")) opt.seed_given = true;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (app.get_subcommands().empty()) err << app.help();
    return kExitUsage;
  }

  const Outputs outputs(opt, err);
  try {
    if (validate_cmd->parsed()) return cmd_validate(opt, outputs, out);
    if (fit_cmd->parsed()) return cmd_fit(opt, outputs, out, err);
    if (test_cmd->parsed()) return cmd_test(opt, outputs, out, err);
    if (ba_cmd->parsed()) return cmd_ba(opt, outputs, out, err);
    if (kappa_cmd->parsed()) return cmd_kappa(opt, outputs, out, err);
    if (icc_cmd->parsed()) return cmd_icc(opt, outputs, out, err);
    if (sim_cmd->parsed()) return cmd_simulate(opt, outputs, out, err);
    if (power_cmd->parsed()) return cmd_power(opt, outputs, out, err);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace binagree
