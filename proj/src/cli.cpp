#include "oodcert/cli.hpp"

#include "oodcert/bounds.hpp"
#include "oodcert/conformal.hpp"
#include "oodcert/error.hpp"
#include "oodcert/harness.hpp"
#include "oodcert/io.hpp"
#include "oodcert/latent_model.hpp"
#include "oodcert/verifier.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace oodcert {

namespace {

namespace fs = std::filesystem;

constexpr const char* kModelFormat =
  "Latent-model file (JSON): {\"dim\": int, \"mean\": [float...], "
  "\"cov_type\": \"diag\"|\"full\", \"cov\": [float...] | [[float...]...], "
  "\"label\": string}";
constexpr const char* kCalibrationFormat =
  "Calibration file (CSV): header line \"dim=<k>\", then one row of k "
  "comma-separated floats per point.";
constexpr const char* kPredictorFormat =
  "Predictor snapshot (JSON): {\"beta\", \"bandwidth\", \"kernel\", "
  "\"threshold\", \"threshold_index\", \"scores\", \"calibration_ref\", "
  "\"normalizer\", \"leave_one_out\"}; calibration_ref is relative to the "
  "snapshot's directory.";
constexpr const char* kSpecFormat =
  "Experiment spec (JSON): {\"n_grid\": [int...], \"delta_grid\": "
  "[float...], \"trials_per_cell\": int, \"beta\": float, "
  "\"calibration_size\": int, \"scenario\": "
  "\"synthetic_gaussian\"|\"from_files\", \"seed\": int}; optional \"dim\", "
  "\"kernel\", \"bandwidth\", \"workers\", \"reference\" "
  "(\"pilot\"|\"per_trial\"), \"reference_epsilon\", \"recalibrate_per_cell\", \"model\", "
  "\"calibration\".";

void write_bound(JsonWriter& w, const EpsilonBound& b)
{
  w.begin_object();
  w.key("value").value(b.value);
  w.key("method").value(to_string(b.method));
  w.key("clamped").value(b.clamped);
  w.end_object();
}

std::string calibration_reference(const fs::path& calibration,
                                  const fs::path& snapshot)
{
  const auto snapshot_dir = fs::absolute(snapshot).parent_path();
  const auto rel = fs::absolute(calibration).lexically_relative(snapshot_dir);
  return rel.empty() ? fs::absolute(calibration).string() : rel.generic_string();
}

struct CalibrateArgs
{
  std::string calibration, out, kernel = "uniform";
  double beta = 0.0;
  std::optional<double> bandwidth;
  bool include_self = false;
};

struct VerifyArgs
{
  std::string model, predictor, out;
  std::uint64_t n = 0, seed = 0, stream = 0;
  double delta = 0.0;
  unsigned workers = 1;
};

struct BoundArgs
{
  std::uint64_t n = 0, r = 0, d = 1;
  double delta = 0.0;
  std::optional<double> beta;
};

struct ScenarioArgs
{
  std::string predictor, model, out;
  std::uint64_t n = 0, seed = 0, stream = 0;
  double u = 1.0;
};

struct ExperimentArgs
{
  std::string spec, out_dir;
};

int do_calibrate(const CalibrateArgs& a, std::ostream& out)
{
  const auto cal = load_calibration_csv(a.calibration);
  KernelSpec kernel{parse_kernel_kind(a.kernel), a.bandwidth};
  CalibrationOptions options;
  options.leave_one_out = !a.include_self;
  const auto pred = calibrate(cal, kernel, a.beta, options);
  const auto json =
    predictor_to_json(pred, calibration_reference(a.calibration, a.out));
  write_text_file(a.out, json);
  out << json;
  return 0;
}

int do_verify(const VerifyArgs& a, std::ostream& out)
{
  const auto model = load_model(a.model);
  const auto pred = load_predictor(a.predictor);
  VerificationConfig config;
  config.n_samples = a.n;
  config.delta = a.delta;
  config.stream = {a.seed, a.stream};
  config.workers = a.workers;
  const auto json = report_to_json(verify(model, pred, config));
  if (!a.out.empty())
    write_text_file(a.out, json);
  out << json;
  return 0;
}

int do_bound(const BoundArgs& a, std::ostream& out)
{
  if (a.r > a.n)
    throw ArgumentError("r must not exceed N");
  JsonWriter w;
  w.begin_object();
  w.key("n").value(a.n);
  w.key("r").value(a.r);
  w.key("delta").value(a.delta);
  w.key("chernoff");
  write_bound(w, epsilon_chernoff(a.n, static_cast<double>(a.r), a.delta));
  if (a.beta) {
    w.key("beta").value(*a.beta);
    w.key("adjusted");
    write_bound(w, epsilon_adjusted(a.n, a.r, a.delta, *a.beta));
  }
  if (a.r == 0) {
    w.key("no_violation");
    write_bound(w, epsilon_no_violations(a.n, a.delta));
  }
  w.end_object();
  out << w.str();
  return 0;
}

int do_exact_bound(const BoundArgs& a, std::ostream& out)
{
  JsonWriter w;
  w.begin_object();
  w.key("n").value(a.n);
  w.key("r").value(a.r);
  w.key("d").value(a.d);
  w.key("delta").value(a.delta);
  w.key("exact");
  write_bound(w, exact_epsilon(a.n, a.r, a.d, a.delta));
  w.end_object();
  out << w.str();
  return 0;
}

int do_scenario(const ScenarioArgs& a, std::ostream& out)
{
  const auto model = load_model(a.model);
  const auto pred = load_predictor(a.predictor);
  if (model.dim() != pred.dim())
    throw ArgumentError("model and predictor differ in dimension");
  const auto samples = sample(model, a.n, {a.seed, a.stream});
  const auto json = scenario_to_json(scenario_relax(pred, samples, a.u));
  if (!a.out.empty())
    write_text_file(a.out, json);
  out << json;
  return 0;
}

void prepare_out_dir(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory " + dir.string());
}

int do_experiment(const ExperimentArgs& a, std::ostream& out)
{
  const auto spec = load_experiment_spec(a.spec);
  const auto records = run_grid(spec);
  const fs::path dir = a.out_dir;
  prepare_out_dir(dir);
  write_text_file(dir / "table.csv", emit_table(records));
  write_text_file(dir / "plot_data.csv", emit_plot_data(records));
  write_text_file(dir / "trials.csv", emit_trials(records));
  out << emit_table(records);
  return 0;
}

int do_violation_study(const ExperimentArgs& a, std::ostream& out)
{
  const auto spec = load_experiment_spec(a.spec);
  const auto study = violation_study(spec);
  const fs::path dir = a.out_dir;
  prepare_out_dir(dir);
  write_text_file(dir / "violation_stats.csv", emit_violation_stats(study.stats));
  write_text_file(dir / "plot_data.csv", emit_plot_data(study.records));
  write_text_file(dir / "trials.csv", emit_trials(study.records));
  out << emit_violation_stats(study.stats);
  return 0;
}

void error_line(std::ostream& err, std::string_view kind, std::string_view msg)
{
  err << "{\"error\": \"" << escape_json(kind) << "\", \"message\": \""
      << escape_json(msg) << "\"}\n";
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err)
{
  CLI::App app{"Conformal OOD safety constraints over a latent space and "
               "PAC certification of the detection failure rate.",
               "oodcert"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  CalibrateArgs ca;
  auto* calibrate_cmd = app.add_subcommand(
    "calibrate", "Build a conformal predictor from a calibration set");
  calibrate_cmd->add_option("--calibration", ca.calibration, "Calibration CSV")
    ->required();
  calibrate_cmd->add_option("--beta", ca.beta, "Significance level in (0, 1)")
    ->required();
  calibrate_cmd
    ->add_option("--kernel", ca.kernel, "Kernel: uniform or gaussian")
    ->check(CLI::IsMember({"uniform", "gaussian"}))
    ->capture_default_str();
  calibrate_cmd->add_option(
    "--bandwidth", ca.bandwidth,
    "Kernel bandwidth; default Scott's rule (uniform kernel: scaled to the "
    "equivalent ball radius)");
  calibrate_cmd->add_flag("--include-self", ca.include_self,
                          "Score calibration points including themselves "
                          "(default: leave-one-out)");
  calibrate_cmd->add_option("--out", ca.out, "Predictor snapshot to write")
    ->required();
  calibrate_cmd->footer(std::string(kCalibrationFormat) + "\n" + kPredictorFormat);

  VerifyArgs va;
  auto* verify_cmd = app.add_subcommand(
    "verify", "Sample the latent model, count violations and certify epsilon");
  verify_cmd->add_option("--model", va.model, "Latent-model JSON")->required();
  verify_cmd->add_option("--predictor", va.predictor, "Predictor snapshot")
    ->required();
  verify_cmd->add_option("--n", va.n, "Number of samples N")
    ->required()
    ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--delta", va.delta, "Confidence parameter in (0, 1)")
    ->required();
  verify_cmd->add_option("--seed", va.seed, "Random seed")->capture_default_str();
  verify_cmd->add_option("--stream", va.stream, "Substream index")
    ->capture_default_str();
  verify_cmd->add_option("--workers", va.workers, "Worker threads")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  verify_cmd->add_option("--out", va.out, "Report JSON to write");
  verify_cmd->footer(std::string(kModelFormat) + "\n" + kPredictorFormat +
                     "\nThe report is also printed on standard output.");

  BoundArgs ba;
  auto* bound_cmd = app.add_subcommand(
    "bound", "Closed-form epsilon (Chernoff, beta-adjusted, r = 0 exact)");
  bound_cmd->add_option("--n", ba.n, "Number of samples N")
    ->required()
    ->check(CLI::PositiveNumber);
  bound_cmd->add_option("--r", ba.r, "Observed violations r")->required();
  bound_cmd->add_option("--delta", ba.delta, "Confidence parameter in (0, 1)")
    ->required();
  bound_cmd->add_option("--beta", ba.beta,
                        "Conformal significance; adds the adjusted bound");
  bound_cmd->footer("Prints a JSON object on standard output.");

  BoundArgs ea;
  auto* exact_cmd = app.add_subcommand(
    "exact-bound", "Invert the scenario binomial condition numerically");
  exact_cmd->add_option("--n", ea.n, "Number of samples N")
    ->required()
    ->check(CLI::PositiveNumber);
  exact_cmd->add_option("--r", ea.r, "Observed violations r")->required();
  exact_cmd->add_option("--d", ea.d, "Number of optimization variables")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  exact_cmd->add_option("--delta", ea.delta, "Confidence parameter in (0, 1)")
    ->required();
  exact_cmd->footer("Prints a JSON object on standard output.");

  ScenarioArgs sa;
  auto* scenario_cmd = app.add_subcommand(
    "scenario", "Scenario relaxation: least slack lambda over sampled points");
  scenario_cmd->add_option("--predictor", sa.predictor, "Predictor snapshot")
    ->required();
  scenario_cmd->add_option("--model", sa.model, "Latent-model JSON")->required();
  scenario_cmd->add_option("--n", sa.n, "Number of samples")
    ->required()
    ->check(CLI::PositiveNumber);
  scenario_cmd->add_option("--u", sa.u, "Upper bound U on lambda")
    ->capture_default_str();
  scenario_cmd->add_option("--seed", sa.seed, "Random seed")
    ->capture_default_str();
  scenario_cmd->add_option("--stream", sa.stream, "Substream index")
    ->capture_default_str();
  scenario_cmd->add_option("--out", sa.out, "Result JSON to write");
  scenario_cmd->footer(std::string(kModelFormat) + "\n" + kPredictorFormat +
                       "\nOutput: {\"lambda_star\", \"upper_bound\", "
                       "\"violating_count\"}.");

  ExperimentArgs xa;
  auto* experiment_cmd = app.add_subcommand(
    "experiment", "Run an (N, delta) grid of verifications");
  experiment_cmd->add_option("--spec", xa.spec, "Experiment spec JSON")
    ->required();
  experiment_cmd->add_option("--out-dir", xa.out_dir, "Output directory")
    ->required();
  experiment_cmd->footer(std::string(kSpecFormat) +
                         "\nWrites table.csv (N,delta,r,r/N,epsilon), "
                         "plot_data.csv and trials.csv.");

  ExperimentArgs wa;
  auto* study_cmd = app.add_subcommand(
    "violation-study", "Fraction of fresh trials exceeding a pre-fixed bound");
  study_cmd->add_option("--spec", wa.spec, "Experiment spec JSON")->required();
  study_cmd->add_option("--out-dir", wa.out_dir, "Output directory")->required();
  study_cmd->footer(std::string(kSpecFormat) +
                    "\nWrites violation_stats.csv, plot_data.csv and "
                    "trials.csv.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == static_cast<int>(CLI::ExitCodes::Success))
      return 0;
    error_line(err, "usage", e.what());
    return 2;
  }

  try {
    if (calibrate_cmd->parsed())
      return do_calibrate(ca, out);
    if (verify_cmd->parsed())
      return do_verify(va, out);
    if (bound_cmd->parsed())
      return do_bound(ba, out);
    if (exact_cmd->parsed())
      return do_exact_bound(ea, out);
    if (scenario_cmd->parsed())
      return do_scenario(sa, out);
    if (experiment_cmd->parsed())
      return do_experiment(xa, out);
    if (study_cmd->parsed())
      return do_violation_study(wa, out);
  } catch (const Error& e) {
    error_line(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    error_line(err, "runtime", e.what());
    return 1;
  }
  error_line(err, "usage", "no subcommand given");
  return 2;
}

} // namespace oodcert
