#pragma once

#include "oodcert/conformal.hpp"
#include "oodcert/latent_model.hpp"
#include "oodcert/random.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oodcert {

enum class ScenarioKind
{
  synthetic_gaussian,
  from_files
};

// How the violation study fixes the bound each fresh trial is checked against.
enum class ReferenceMode
{
  pilot,    // one pilot verification per (N, delta) cell
  per_trial // an independent pilot batch for every trial
};

//! Experiment description, read from JSON:
//!   {"n_grid": [...], "delta_grid": [...], "trials_per_cell": int,
//!    "beta": float, "calibration_size": int, "scenario": string, "seed": int}
//! Optional members: "dim" (synthetic latent dimension, default 2),
//! "kernel" ("uniform"), "bandwidth" (number or "scott"), "workers" (1),
//! "reference" ("pilot" | "per_trial"), "reference_epsilon" (forces the
//! violation-study bound), "recalibrate_per_cell" (false), and for
//! from_files: "model", "calibration" paths.
struct ExperimentSpec
{
  std::vector<std::uint64_t> n_grid;
  std::vector<double> delta_grid;
  std::uint64_t trials_per_cell = 1;
  double beta = 0.0275;
  std::uint64_t calibration_size = 200;
  ScenarioKind scenario = ScenarioKind::synthetic_gaussian;
  std::uint64_t seed = 0;

  int dim = 2;
  KernelSpec kernel = KernelSpec::scott(KernelKind::uniform);
  unsigned workers = 1;
  ReferenceMode reference = ReferenceMode::pilot;
  std::optional<double> reference_epsilon;
  // Synthetic scenario: by default every cell rebuilds the same calibration
  // set from the seed, so all cells share one detector.
  bool recalibrate_per_cell = false;
  std::filesystem::path model_path;
  std::filesystem::path calibration_path;

  // Throws ArgumentError on empty grids or out-of-range values.
  void validate() const;
};

// Relative file paths are resolved against `base_dir`.
ExperimentSpec parse_experiment_spec(std::string_view json_text,
                                     const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct TrialRecord
{
  std::uint64_t n = 0;
  double delta = 0.0;
  std::uint64_t trial_index = 0;
  std::uint64_t violations = 0;
  double observed_rate = 0.0;
  double epsilon = 0.0;
  bool exceeded = false; // observed_rate > epsilon

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct ViolationStats
{
  std::uint64_t n = 0;
  double delta = 0.0;
  std::uint64_t trials = 0;
  double exceed_fraction = 0.0;
  double reference_epsilon = 0.0; // NaN in per-trial mode
};

struct ViolationStudy
{
  std::vector<ViolationStats> stats;
  std::vector<TrialRecord> records;
};

// The latent model and calibrated predictor used by one grid cell.
struct CellScenario
{
  GaussianLatentModel model;
  ConformalPredictor predictor;
};

// Substream for (cell, slot). Slot 0 draws the calibration set (always cell 0
// unless recalibrate_per_cell), slot 1 the pilot, slot 2 + t trial t.
SampleStream cell_stream(std::uint64_t seed, std::uint64_t cell,
                         std::uint64_t slot);

CellScenario build_scenario(const ExperimentSpec& spec, std::uint64_t cell);

// Cells enumerate n_grid (outer) by delta_grid (inner). Each cell gets a
// fresh scenario and trials_per_cell verifications on independent substreams.
std::vector<TrialRecord> run_grid(const ExperimentSpec& spec);

// Per cell: fix a reference epsilon from a pilot run (or take
// reference_epsilon), then count how many fresh trials exceed it.
ViolationStudy violation_study(const ExperimentSpec& spec);

// Header "N,delta,r,r/N,epsilon".
std::string emit_table(const std::vector<TrialRecord>& records);
// Header "delta,N,trial,observed_rate,epsilon"; one row per trial.
std::string emit_plot_data(const std::vector<TrialRecord>& records);
// Header "N,delta,trial,r,observed_rate,epsilon,exceeded".
std::string emit_trials(const std::vector<TrialRecord>& records);
// Header "N,delta,trials,exceed_fraction,reference_epsilon".
std::string emit_violation_stats(const std::vector<ViolationStats>& stats);

} // namespace oodcert
