#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "binagree/agreement.hpp"
#include "binagree/cli.hpp"
#include "binagree/data.hpp"
#include "binagree/errors.hpp"
#include "binagree/glmm.hpp"
#include "binagree/report.hpp"
#include "binagree/simulation.hpp"
#include "binagree/svg.hpp"

namespace py = pybind11;
using namespace binagree;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("input not found: " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

PYBIND11_MODULE(_binagree, m) {
  m.doc() = "Agreement between two binary methods with multiple raters over time";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::enum_<Method>(m, "Method").value("first", Method::first).value("second", Method::second);
  py::enum_<TimeTrend>(m, "TimeTrend")
      .value("none", TimeTrend::none)
      .value("linear", TimeTrend::linear);
  py::enum_<ResidualCorrelation>(m, "ResidualCorrelation")
      .value("independent", ResidualCorrelation::independent)
      .value("ar1", ResidualCorrelation::ar1);
  py::enum_<RaterEffect>(m, "RaterEffect")
      .value("included", RaterEffect::included)
      .value("omitted", RaterEffect::omitted);
  py::enum_<ResidualScale>(m, "ResidualScale")
      .value("fixed", ResidualScale::fixed)
      .value("estimated", ResidualScale::estimated);
  py::enum_<BAScale>(m, "BAScale")
      .value("latent", BAScale::latent)
      .value("probability", BAScale::probability)
      .value("log_probability", BAScale::log_probability);
  py::enum_<RaterAverage>(m, "RaterAverage")
      .value("subject_raters", RaterAverage::subject_raters)
      .value("all_raters", RaterAverage::all_raters);
  py::enum_<RaterAssignment>(m, "RaterAssignment")
      .value("fresh_pair", RaterAssignment::fresh_pair)
      .value("persistent_pair", RaterAssignment::persistent_pair);

  py::class_<PairedRecord>(m, "PairedRecord")
      .def(py::init<>())
      .def(py::init([](std::string id, double t, int y1, int y2, std::string r1, std::string r2) {
             return PairedRecord{std::move(id), t, y1, y2, std::move(r1), std::move(r2)};
           }),
           py::arg("subject_id"), py::arg("time"), py::arg("outcome_m1"), py::arg("outcome_m2"),
           py::arg("rater_m1"), py::arg("rater_m2"))
      .def_readwrite("subject_id", &PairedRecord::subject_id)
      .def_readwrite("time", &PairedRecord::time)
      .def_readwrite("outcome_m1", &PairedRecord::outcome_m1)
      .def_readwrite("outcome_m2", &PairedRecord::outcome_m2)
      .def_readwrite("rater_m1", &PairedRecord::rater_m1)
      .def_readwrite("rater_m2", &PairedRecord::rater_m2)
      .def("__eq__", [](const PairedRecord& a, const PairedRecord& b) { return a == b; });

  py::class_<MeasurementRecord>(m, "MeasurementRecord")
      .def_readonly("subject", &MeasurementRecord::subject)
      .def_readonly("rater", &MeasurementRecord::rater)
      .def_readonly("method", &MeasurementRecord::method)
      .def_readonly("time", &MeasurementRecord::time)
      .def_readonly("outcome", &MeasurementRecord::outcome);

  py::class_<LongDataset>(m, "LongDataset")
      .def_readonly("records", &LongDataset::records)
      .def_readonly("subject_labels", &LongDataset::subject_labels)
      .def_readonly("rater_labels", &LongDataset::rater_labels)
      .def_readonly("subject_times", &LongDataset::subject_times)
      .def_property_readonly("n_subjects", &LongDataset::n_subjects)
      .def_property_readonly("n_raters", &LongDataset::n_raters)
      .def("__len__", [](const LongDataset& d) { return d.records.size(); });

  py::class_<OutcomeLabels>(m, "OutcomeLabels")
      .def(py::init<>())
      .def_readwrite("positive", &OutcomeLabels::positive)
      .def_readwrite("negative", &OutcomeLabels::negative);
  py::class_<CsvColumns>(m, "CsvColumns")
      .def(py::init<>())
      .def_readwrite("id", &CsvColumns::id)
      .def_readwrite("time", &CsvColumns::time)
      .def_readwrite("outcome_m1", &CsvColumns::outcome_m1)
      .def_readwrite("outcome_m2", &CsvColumns::outcome_m2)
      .def_readwrite("rater_m1", &CsvColumns::rater_m1)
      .def_readwrite("rater_m2", &CsvColumns::rater_m2);

  m.def("parse_wide_csv", &parse_wide_csv, py::arg("text"), py::arg("labels") = OutcomeLabels{},
        py::arg("columns") = CsvColumns{});
  m.def("write_wide_csv", &write_wide_csv, py::arg("paired"),
        py::arg("labels") = OutcomeLabels{}, py::arg("columns") = CsvColumns{});
  m.def("widen_to_long", &widen_to_long, py::arg("paired"));
  m.def("pair_up", &pair_up, py::arg("dataset"));
  m.def(
      "load_csv",
      [](const std::string& path, const OutcomeLabels& labels, const CsvColumns& columns) {
        return widen_to_long(parse_wide_csv(read_text(path), labels, columns));
      },
      py::arg("path"), py::arg("labels") = OutcomeLabels{}, py::arg("columns") = CsvColumns{},
      "Reads a wide CSV file straight into long format.");

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("n_subjects", &ValidationReport::n_subjects)
      .def_readonly("n_raters", &ValidationReport::n_raters)
      .def_readonly("n_records", &ValidationReport::n_records)
      .def_readonly("min_times", &ValidationReport::min_times)
      .def_readonly("max_times", &ValidationReport::max_times)
      .def_readonly("prevalence_m1", &ValidationReport::prevalence_m1)
      .def_readonly("prevalence_m2", &ValidationReport::prevalence_m2)
      .def_readonly("constant_response", &ValidationReport::constant_response)
      .def_readonly("constant_subjects", &ValidationReport::constant_subjects)
      .def_readonly("single_method_raters", &ValidationReport::single_method_raters)
      .def_readonly("flags", &ValidationReport::flags)
      .def_property_readonly("balanced", &ValidationReport::balanced);
  m.def("validate", &validate, py::arg("dataset"));

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init<>())
      .def(py::init([](TimeTrend t, ResidualCorrelation c, RaterEffect r, ResidualScale s) {
             return ModelSpec{t, c, r, s};
           }),
           py::arg("time_trend") = TimeTrend::linear,
           py::arg("residual_correlation") = ResidualCorrelation::ar1,
           py::arg("rater_effect") = RaterEffect::included,
           py::arg("residual_scale") = ResidualScale::fixed)
      .def_readwrite("time_trend", &ModelSpec::time_trend)
      .def_readwrite("residual_correlation", &ModelSpec::residual_correlation)
      .def_readwrite("rater_effect", &ModelSpec::rater_effect)
      .def_readwrite("residual_scale", &ModelSpec::residual_scale);

  py::class_<VarianceComponents>(m, "VarianceComponents")
      .def(py::init<>())
      .def(py::init([](double g, double a1, double a2, double rho, double scale) {
             VarianceComponents vc;
             vc.sigma2_gamma = g;
             vc.sigma2_alpha1 = a1;
             vc.sigma2_alpha2 = a2;
             vc.rho = rho;
             vc.scale = scale;
             return vc;
           }),
           py::arg("sigma2_gamma"), py::arg("sigma2_alpha1") = 0.0,
           py::arg("sigma2_alpha2") = 0.0, py::arg("rho") = 0.0, py::arg("scale") = 1.0)
      .def_readwrite("sigma2_gamma", &VarianceComponents::sigma2_gamma)
      .def_readwrite("sigma2_alpha1", &VarianceComponents::sigma2_alpha1)
      .def_readwrite("sigma2_alpha2", &VarianceComponents::sigma2_alpha2)
      .def_readwrite("rho", &VarianceComponents::rho)
      .def_readwrite("scale", &VarianceComponents::scale)
      .def_readonly("se_sigma2_gamma", &VarianceComponents::se_sigma2_gamma)
      .def_readonly("se_sigma2_alpha1", &VarianceComponents::se_sigma2_alpha1)
      .def_readonly("se_sigma2_alpha2", &VarianceComponents::se_sigma2_alpha2)
      .def_readonly("se_rho", &VarianceComponents::se_rho)
      .def_readonly("se_scale", &VarianceComponents::se_scale);

  py::class_<FitOptions>(m, "FitOptions")
      .def(py::init<>())
      .def_readwrite("tolerance", &FitOptions::tolerance)
      .def_readwrite("max_outer", &FitOptions::max_outer)
      .def_readwrite("max_inner_evaluations", &FitOptions::max_inner_evaluations)
      .def_readwrite("level", &FitOptions::level)
      .def_readwrite("variance_floor", &FitOptions::variance_floor)
      .def_readwrite("fixed_components", &FitOptions::fixed_components);

  py::class_<FixedEffects>(m, "FixedEffects")
      .def_readonly("beta_1", &FixedEffects::beta_1)
      .def_readonly("beta_2", &FixedEffects::beta_2)
      .def_readonly("theta", &FixedEffects::theta)
      .def_readonly("cov", &FixedEffects::cov);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("spec", &FitResult::spec)
      .def_readonly("fixed", &FitResult::fixed)
      .def_readonly("vc", &FitResult::vc)
      .def_readonly("eblup_gamma", &FitResult::eblup_gamma)
      .def_readonly("eblup_alpha", &FitResult::eblup_alpha)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("n_outer_iterations", &FitResult::n_outer_iterations)
      .def_readonly("final_change", &FitResult::final_change)
      .def_readonly("reml_objective", &FitResult::reml_objective)
      .def_readonly("warnings", &FitResult::warnings);

  py::class_<WaldTest>(m, "WaldTest")
      .def_readonly("estimate", &WaldTest::estimate)
      .def_readonly("std_error", &WaldTest::std_error)
      .def_readonly("statistic", &WaldTest::statistic)
      .def_readonly("p_value", &WaldTest::p_value)
      .def_readonly("ci_low", &WaldTest::ci_low)
      .def_readonly("ci_high", &WaldTest::ci_high)
      .def_readonly("level", &WaldTest::level);

  m.def("ar1_matrix", &ar1_matrix, py::arg("times"), py::arg("rho"));
  m.def("fit", &fit, py::arg("dataset"), py::arg("spec") = ModelSpec{},
        py::arg("options") = FitOptions{}, py::call_guard<py::gil_scoped_release>());
  m.def("wald_test", &wald_test, py::arg("fit"), py::arg("level") = 0.95);

  py::class_<SubjectSummary>(m, "SubjectSummary")
      .def(py::init([](int subject, double mu1, double mu2) {
             return SubjectSummary{subject, mu1, mu2};
           }),
           py::arg("subject"), py::arg("mu_hat_m1"), py::arg("mu_hat_m2"))
      .def_readonly("subject", &SubjectSummary::subject)
      .def_readonly("mu_hat_m1", &SubjectSummary::mu_hat_m1)
      .def_readonly("mu_hat_m2", &SubjectSummary::mu_hat_m2);
  py::class_<SummaryOptions>(m, "SummaryOptions")
      .def(py::init<>())
      .def_readwrite("rater_average", &SummaryOptions::rater_average)
      .def_readwrite("reweight", &SummaryOptions::reweight);
  py::class_<BAPoint>(m, "BAPoint")
      .def_readonly("subject", &BAPoint::subject)
      .def_readonly("avg", &BAPoint::avg)
      .def_readonly("diff", &BAPoint::diff);
  py::class_<BASummary>(m, "BASummary")
      .def_readonly("scale", &BASummary::scale)
      .def_readonly("points", &BASummary::points)
      .def_readonly("mean_diff", &BASummary::mean_diff)
      .def_readonly("sd_diff", &BASummary::sd_diff)
      .def_readonly("loa_low", &BASummary::loa_low)
      .def_readonly("loa_high", &BASummary::loa_high)
      .def_readonly("pct_within", &BASummary::pct_within)
      .def_readonly("dropped", &BASummary::dropped)
      .def_readonly("warnings", &BASummary::warnings)
      .def_readonly("margin", &BASummary::margin)
      .def_readonly("within_margin", &BASummary::within_margin);
  py::class_<KappaResult>(m, "KappaResult")
      .def_readonly("a", &KappaResult::a)
      .def_readonly("b", &KappaResult::b)
      .def_readonly("c", &KappaResult::c)
      .def_readonly("d", &KappaResult::d)
      .def_readonly("kappa", &KappaResult::kappa)
      .def_readonly("std_error", &KappaResult::std_error)
      .def_readonly("ci_low", &KappaResult::ci_low)
      .def_readonly("ci_high", &KappaResult::ci_high)
      .def_readonly("p_o", &KappaResult::p_o)
      .def_readonly("p_e", &KappaResult::p_e)
      .def_readonly("level", &KappaResult::level)
      .def_readonly("warnings", &KappaResult::warnings);
  py::class_<ICCResult>(m, "ICCResult")
      .def_readonly("icc_m1", &ICCResult::icc_m1)
      .def_readonly("icc_m2", &ICCResult::icc_m2);

  m.def("eblup_summary", &eblup_summary, py::arg("fit"), py::arg("dataset"),
        py::arg("options") = SummaryOptions{});
  m.def("ba_summary", &ba_summary, py::arg("summaries"), py::arg("scale") = BAScale::latent,
        py::arg("margin") = std::nullopt);
  m.def("predicted_binary_scores", &predicted_binary_scores, py::arg("summaries"));
  m.def("cohen_kappa", &cohen_kappa, py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"),
        py::arg("level") = 0.95);
  m.def("model_kappa", &model_kappa, py::arg("summaries"), py::arg("level") = 0.95);
  m.def("naive_kappa", &naive_kappa, py::arg("dataset"), py::arg("level") = 0.95);
  m.def("icc", &icc, py::arg("vc"));

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_static("model1", &SimConfig::model1)
      .def_static("model2", &SimConfig::model2)
      .def_readwrite("n_subjects", &SimConfig::n_subjects)
      .def_readwrite("n_raters", &SimConfig::n_raters)
      .def_readwrite("n_times", &SimConfig::n_times)
      .def_readwrite("subject_times", &SimConfig::subject_times)
      .def_readwrite("beta_1", &SimConfig::beta_1)
      .def_readwrite("beta_2", &SimConfig::beta_2)
      .def_readwrite("time_slope", &SimConfig::time_slope)
      .def_readwrite("sigma2_gamma", &SimConfig::sigma2_gamma)
      .def_readwrite("sigma2_alpha1", &SimConfig::sigma2_alpha1)
      .def_readwrite("sigma2_alpha2", &SimConfig::sigma2_alpha2)
      .def_readwrite("rho", &SimConfig::rho)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("assignment", &SimConfig::assignment)
      .def("check", &SimConfig::check);

  m.def(
      "generate",
      [](const SimConfig& config, std::uint64_t stream) {
        RandomStream rng(config.seed, stream);
        return generate(config, rng);
      },
      py::arg("config"), py::arg("stream") = 0,
      "Draws one dataset from stream (config.seed, stream).");

  py::class_<ParameterSummary>(m, "ParameterSummary")
      .def_readonly("mean", &ParameterSummary::mean)
      .def_readonly("sd", &ParameterSummary::sd);
  py::class_<ReplicateRecord>(m, "ReplicateRecord")
      .def_readonly("grid_point", &ReplicateRecord::grid_point)
      .def_readonly("replicate", &ReplicateRecord::replicate)
      .def_readonly("converged", &ReplicateRecord::converged)
      .def_readonly("error", &ReplicateRecord::error)
      .def_readonly("beta_1", &ReplicateRecord::beta_1)
      .def_readonly("beta_2", &ReplicateRecord::beta_2)
      .def_readonly("p_value", &ReplicateRecord::p_value)
      .def_readonly("rejected", &ReplicateRecord::rejected);
  py::class_<CampaignOptions>(m, "CampaignOptions")
      .def(py::init<>())
      .def_readwrite("jobs", &CampaignOptions::jobs)
      .def_readwrite("alpha", &CampaignOptions::alpha)
      .def_readwrite("fit", &CampaignOptions::fit)
      .def_readwrite("max_failure_fraction", &CampaignOptions::max_failure_fraction);
  py::class_<SimCampaignResult>(m, "SimCampaignResult")
      .def_readonly("n_replicates", &SimCampaignResult::n_replicates)
      .def_readonly("n_used", &SimCampaignResult::n_used)
      .def_readonly("n_failed", &SimCampaignResult::n_failed)
      .def_readonly("rejection_rate", &SimCampaignResult::rejection_rate)
      .def_readonly("beta_1", &SimCampaignResult::beta_1)
      .def_readonly("beta_2", &SimCampaignResult::beta_2)
      .def_readonly("difference", &SimCampaignResult::difference)
      .def_readonly("theta", &SimCampaignResult::theta)
      .def_readonly("sigma2_gamma", &SimCampaignResult::sigma2_gamma)
      .def_readonly("sigma2_alpha1", &SimCampaignResult::sigma2_alpha1)
      .def_readonly("sigma2_alpha2", &SimCampaignResult::sigma2_alpha2)
      .def_readonly("rho", &SimCampaignResult::rho)
      .def_readonly("icc_1", &SimCampaignResult::icc_1)
      .def_readonly("icc_2", &SimCampaignResult::icc_2)
      .def_readonly("replicates", &SimCampaignResult::replicates);
  py::class_<PowerRow>(m, "PowerRow")
      .def_readonly("beta_1", &PowerRow::beta_1)
      .def_readonly("spec_label", &PowerRow::spec_label)
      .def_readonly("n_replicates", &PowerRow::n_replicates)
      .def_readonly("n_used", &PowerRow::n_used)
      .def_readonly("n_failed", &PowerRow::n_failed)
      .def_readonly("rejection_rate", &PowerRow::rejection_rate);
  py::class_<LabeledSpec>(m, "LabeledSpec")
      .def(py::init([](std::string label, ModelSpec spec) { return LabeledSpec{label, spec}; }),
           py::arg("label"), py::arg("spec"))
      .def_readonly("label", &LabeledSpec::label)
      .def_readonly("spec", &LabeledSpec::spec);
  py::class_<PowerTable>(m, "PowerTable")
      .def_readonly("alpha", &PowerTable::alpha)
      .def_readonly("rows", &PowerTable::rows)
      .def_readonly("replicates", &PowerTable::replicates);

  m.def("run_recovery", &run_recovery, py::arg("config"), py::arg("n_replicates"),
        py::arg("spec") = ModelSpec{}, py::arg("options") = CampaignOptions{},
        py::call_guard<py::gil_scoped_release>());
  m.def("run_size_power", &run_size_power, py::arg("config"), py::arg("beta_1_grid"),
        py::arg("n_replicates"), py::arg("specs") = default_power_specs(),
        py::arg("options") = CampaignOptions{}, py::call_guard<py::gil_scoped_release>());
  m.def("default_power_specs", &default_power_specs);
  m.def("make_grid", &make_grid, py::arg("start"), py::arg("stop"), py::arg("step"));

  m.def("write_fit_state", &write_fit_state, py::arg("dataset"), py::arg("fit"));
  m.def(
      "read_fit_state",
      [](const std::string& text) {
        FitState st = read_fit_state(text);
        return py::make_tuple(std::move(st.data), std::move(st.fit));
      },
      py::arg("text"), "Returns (dataset, fit).");
  m.def("render_ba_svg", &render_ba_svg, py::arg("ba"));
  m.def("render_power_svg", &render_power_svg, py::arg("table"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line front end; returns (exit_code, stdout, stderr).");
}
