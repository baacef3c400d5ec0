#include "oodcert/harness.hpp"

#include "oodcert/bounds.hpp"
#include "oodcert/error.hpp"
#include "oodcert/io.hpp"
#include "oodcert/verifier.hpp"

#include <cmath>
#include <limits>

namespace oodcert {

namespace {

constexpr std::uint64_t kCalibrationSlot = 0;
constexpr std::uint64_t kPilotSlot = 1;
constexpr std::uint64_t kFirstTrialSlot = 2;

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& value)
{
  std::filesystem::path p = value;
  if (p.is_relative() && !base.empty())
    p = base / p;
  return p;
}

std::vector<std::uint64_t> require_count_array(const nlohmann::json& doc,
                                               std::string_view field)
{
  const auto& v = require_field(doc, field);
  if (!v.is_array())
    throw FormatError("field '" + std::string(field) + "' must be an array");
  std::vector<std::uint64_t> out;
  for (const auto& item : v) {
    if (item.is_number_unsigned())
      out.push_back(item.get<std::uint64_t>());
    else if (item.is_number_float() && item.get<double>() >= 1.0 &&
             std::floor(item.get<double>()) == item.get<double>())
      out.push_back(static_cast<std::uint64_t>(item.get<double>()));
    else
      throw FormatError("field '" + std::string(field) +
                        "' must contain positive integers");
  }
  return out;
}

std::uint64_t require_count(const nlohmann::json& doc, std::string_view field)
{
  const auto v = require_integer(doc, field);
  if (v < 0)
    throw FormatError("field '" + std::string(field) + "' must be non-negative");
  return static_cast<std::uint64_t>(v);
}

double fresh_rate(const CellScenario& sc, std::uint64_t n,
                  const SampleStream& stream, unsigned workers,
                  std::uint64_t& violations)
{
  violations =
    count_sampled_violations(sc.model, sc.predictor, n, stream, workers);
  return static_cast<double>(violations) / static_cast<double>(n);
}

void append_row(std::string& out, std::initializer_list<std::string> cells)
{
  bool first = true;
  for (const auto& c : cells) {
    if (!first)
      out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

} // namespace

void ExperimentSpec::validate() const
{
  if (n_grid.empty() || delta_grid.empty())
    throw ArgumentError("n_grid and delta_grid must be non-empty");
  for (const auto n : n_grid)
    if (n < 1)
      throw ArgumentError("every N in n_grid must be at least 1");
  for (const auto d : delta_grid)
    if (!(d > 0.0 && d < 1.0))
      throw ArgumentError("every delta in delta_grid must lie in (0, 1)");
  if (trials_per_cell < 1)
    throw ArgumentError("trials_per_cell must be at least 1");
  if (!(beta > 0.0 && beta < 1.0))
    throw ArgumentError("beta must lie in (0, 1)");
  if (dim < 1)
    throw ArgumentError("dim must be at least 1");
  if (workers < 1)
    throw ArgumentError("workers must be at least 1");
  if (scenario == ScenarioKind::synthetic_gaussian && calibration_size < 2)
    throw ArgumentError("calibration_size must be at least 2");
  if (reference_epsilon && !(*reference_epsilon > 0.0 && *reference_epsilon <= 1.0))
    throw ArgumentError("reference_epsilon must lie in (0, 1]");
  if (scenario == ScenarioKind::from_files &&
      (model_path.empty() || calibration_path.empty()))
    throw ArgumentError("from_files scenario needs 'model' and 'calibration'");
}

ExperimentSpec parse_experiment_spec(std::string_view json_text,
                                     const std::filesystem::path& base_dir)
{
  const auto doc = parse_json(json_text, "experiment spec");
  ExperimentSpec spec;
  spec.n_grid = require_count_array(doc, "n_grid");
  spec.delta_grid = require_number_array(doc, "delta_grid");
  spec.trials_per_cell = require_count(doc, "trials_per_cell");
  spec.beta = require_number(doc, "beta");
  spec.calibration_size = require_count(doc, "calibration_size");
  const auto scenario = require_string(doc, "scenario");
  if (scenario == "synthetic_gaussian")
    spec.scenario = ScenarioKind::synthetic_gaussian;
  else if (scenario == "from_files")
    spec.scenario = ScenarioKind::from_files;
  else
    throw FormatError("field 'scenario' must be synthetic_gaussian or from_files");
  spec.seed = require_count(doc, "seed");

  if (doc.contains("dim"))
    spec.dim = static_cast<int>(require_integer(doc, "dim"));
  if (doc.contains("kernel"))
    spec.kernel.kind = parse_kernel_kind(require_string(doc, "kernel"));
  if (doc.contains("bandwidth")) {
    const auto& bw = doc["bandwidth"];
    if (bw.is_string() && bw.get<std::string>() == "scott")
      spec.kernel.bandwidth.reset();
    else if (bw.is_number())
      spec.kernel.bandwidth = bw.get<double>();
    else
      throw FormatError("field 'bandwidth' must be a number or \"scott\"");
  }
  if (doc.contains("workers"))
    spec.workers = static_cast<unsigned>(require_count(doc, "workers"));
  if (doc.contains("reference")) {
    const auto mode = require_string(doc, "reference");
    if (mode == "pilot")
      spec.reference = ReferenceMode::pilot;
    else if (mode == "per_trial")
      spec.reference = ReferenceMode::per_trial;
    else
      throw FormatError("field 'reference' must be pilot or per_trial");
  }
  if (doc.contains("reference_epsilon"))
    spec.reference_epsilon = require_number(doc, "reference_epsilon");
  if (doc.contains("recalibrate_per_cell")) {
    const auto& v = doc["recalibrate_per_cell"];
    if (!v.is_boolean())
      throw FormatError("field 'recalibrate_per_cell' must be a boolean");
    spec.recalibrate_per_cell = v.get<bool>();
  }
  if (doc.contains("model"))
    spec.model_path = resolve(base_dir, require_string(doc, "model"));
  if (doc.contains("calibration"))
    spec.calibration_path = resolve(base_dir, require_string(doc, "calibration"));
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path)
{
  return parse_experiment_spec(read_text_file(path), path.parent_path());
}

SampleStream cell_stream(std::uint64_t seed, std::uint64_t cell,
                         std::uint64_t slot)
{
  return {seed, (cell << 32) | slot};
}

CellScenario build_scenario(const ExperimentSpec& spec, std::uint64_t cell)
{
  if (spec.scenario == ScenarioKind::from_files) {
    if (!std::filesystem::exists(spec.model_path))
      throw IoError("model file not found: " + spec.model_path.string());
    if (!std::filesystem::exists(spec.calibration_path))
      throw IoError("calibration file not found: " +
                    spec.calibration_path.string());
    auto model = load_model(spec.model_path);
    auto cal = load_calibration_csv(spec.calibration_path);
    auto pred = calibrate(cal, spec.kernel, spec.beta);
    if (pred.dim() != model.dim())
      throw ArgumentError("model and calibration set differ in dimension");
    return {std::move(model), std::move(pred)};
  }
  auto model = GaussianLatentModel::standard_normal(spec.dim, "synthetic");
  const std::uint64_t cal_cell = spec.recalibrate_per_cell ? cell : 0;
  const auto points = sample(model, spec.calibration_size,
                             cell_stream(spec.seed, cal_cell, kCalibrationSlot));
  CalibrationSet cal(points, "synthetic cell " + std::to_string(cal_cell));
  auto pred = calibrate(cal, spec.kernel, spec.beta);
  return {std::move(model), std::move(pred)};
}

std::vector<TrialRecord> run_grid(const ExperimentSpec& spec)
{
  spec.validate();
  std::vector<TrialRecord> records;
  std::uint64_t cell = 0;
  for (const auto n : spec.n_grid) {
    for (const auto delta : spec.delta_grid) {
      const auto sc = build_scenario(spec, cell);
      for (std::uint64_t t = 0; t < spec.trials_per_cell; ++t) {
        VerificationConfig config;
        config.n_samples = n;
        config.delta = delta;
        config.stream = cell_stream(spec.seed, cell, kFirstTrialSlot + t);
        config.workers = spec.workers;
        const auto report = verify(sc.model, sc.predictor, config);
        TrialRecord rec;
        rec.n = n;
        rec.delta = delta;
        rec.trial_index = t;
        rec.violations = report.violations;
        rec.observed_rate = report.observed_rate;
        rec.epsilon = report.epsilon.value;
        rec.exceeded = rec.observed_rate > rec.epsilon;
        records.push_back(rec);
      }
      ++cell;
    }
  }
  return records;
}

ViolationStudy violation_study(const ExperimentSpec& spec)
{
  spec.validate();
  ViolationStudy study;
  std::uint64_t cell = 0;
  for (const auto n : spec.n_grid) {
    for (const auto delta : spec.delta_grid) {
      const auto sc = build_scenario(spec, cell);
      const double beta = sc.predictor.beta();

      double reference = std::numeric_limits<double>::quiet_NaN();
      if (spec.reference_epsilon) {
        reference = *spec.reference_epsilon;
      } else if (spec.reference == ReferenceMode::pilot) {
        std::uint64_t pilot_r = 0;
        fresh_rate(sc, n, cell_stream(spec.seed, cell, kPilotSlot), spec.workers,
                   pilot_r);
        reference = epsilon_adjusted(n, pilot_r, delta, beta).value;
      }

      std::uint64_t exceeded = 0;
      for (std::uint64_t t = 0; t < spec.trials_per_cell; ++t) {
        double bound = reference;
        if (std::isnan(bound)) {
          std::uint64_t pilot_r = 0;
          fresh_rate(sc, n,
                     cell_stream(spec.seed, cell,
                                 kFirstTrialSlot + spec.trials_per_cell + t),
                     spec.workers, pilot_r);
          bound = epsilon_adjusted(n, pilot_r, delta, beta).value;
        }
        TrialRecord rec;
        rec.n = n;
        rec.delta = delta;
        rec.trial_index = t;
        rec.observed_rate =
          fresh_rate(sc, n, cell_stream(spec.seed, cell, kFirstTrialSlot + t),
                     spec.workers, rec.violations);
        rec.epsilon = bound;
        rec.exceeded = rec.observed_rate > rec.epsilon;
        exceeded += rec.exceeded ? 1 : 0;
        study.records.push_back(rec);
      }

      ViolationStats stats;
      stats.n = n;
      stats.delta = delta;
      stats.trials = spec.trials_per_cell;
      stats.exceed_fraction = static_cast<double>(exceeded) /
                              static_cast<double>(spec.trials_per_cell);
      stats.reference_epsilon = reference;
      study.stats.push_back(stats);
      ++cell;
    }
  }
  return study;
}

std::string emit_table(const std::vector<TrialRecord>& records)
{
  std::string out = "N,delta,r,r/N,epsilon\n";
  for (const auto& r : records)
    append_row(out, {std::to_string(r.n), format_double(r.delta),
                     std::to_string(r.violations), format_double(r.observed_rate),
                     format_double(r.epsilon)});
  return out;
}

std::string emit_plot_data(const std::vector<TrialRecord>& records)
{
  std::string out = "delta,N,trial,observed_rate,epsilon\n";
  for (const auto& r : records)
    append_row(out, {format_double(r.delta), std::to_string(r.n),
                     std::to_string(r.trial_index), format_double(r.observed_rate),
                     format_double(r.epsilon)});
  return out;
}

std::string emit_trials(const std::vector<TrialRecord>& records)
{
  std::string out = "N,delta,trial,r,observed_rate,epsilon,exceeded\n";
  for (const auto& r : records)
    append_row(out, {std::to_string(r.n), format_double(r.delta),
                     std::to_string(r.trial_index), std::to_string(r.violations),
                     format_double(r.observed_rate), format_double(r.epsilon),
                     r.exceeded ? "1" : "0"});
  return out;
}

std::string emit_violation_stats(const std::vector<ViolationStats>& stats)
{
  std::string out = "N,delta,trials,exceed_fraction,reference_epsilon\n";
  for (const auto& s : stats)
    append_row(out, {std::to_string(s.n), format_double(s.delta),
                     std::to_string(s.trials), format_double(s.exceed_fraction),
                     std::isnan(s.reference_epsilon)
                       ? std::string("per_trial")
                       : format_double(s.reference_epsilon)});
  return out;
}

} // namespace oodcert
