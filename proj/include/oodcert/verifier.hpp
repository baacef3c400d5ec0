#pragma once

#include "oodcert/bounds.hpp"
#include "oodcert/conformal.hpp"
#include "oodcert/latent_model.hpp"
#include "oodcert/random.hpp"

#include <cstdint>
#include <span>
#include <string>

namespace oodcert {

struct VerificationConfig
{
  std::uint64_t n_samples = 1;
  double delta = 0.05;
  SampleStream stream;
  // Sample i is drawn and scored by worker i mod workers. Samples are keyed by
  // their index, so the worker count never changes the result.
  unsigned workers = 1;
};

struct VerificationReport
{
  std::uint64_t n_samples = 0;
  std::uint64_t violations = 0;
  double observed_rate = 0.0;
  EpsilonBound epsilon;             // adjusted; the headline value
  EpsilonBound epsilon_unadjusted;  // chernoff
  EpsilonBound epsilon_exact;       // binomial inversion, d = 1
  double delta = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;
  double elapsed_seconds = 0.0;
};

// Number of samples whose set prediction is empty.
std::uint64_t count_violations(const ConformalPredictor& predictor,
                               std::span<const LatentVector> samples);

// Draws elements 0..n-1 of `stream` from the model and counts empty
// predictions, fanning the indices out round-robin over `workers` threads.
std::uint64_t count_sampled_violations(const GaussianLatentModel& model,
                                       const ConformalPredictor& predictor,
                                       std::uint64_t n,
                                       const SampleStream& stream,
                                       unsigned workers = 1);

// Counts violations r over N model draws and certifies epsilon.
VerificationReport verify(const GaussianLatentModel& model,
                          const ConformalPredictor& predictor,
                          const VerificationConfig& config);

// With include_elapsed = false the output is a pure function of the inputs.
std::string report_to_json(const VerificationReport& report,
                           bool include_elapsed = true);

struct ScenarioResult
{
  double lambda_star = 0.0;
  double upper_bound = 1.0;
  std::uint64_t violating_count = 0;
};

// Scenario relaxation over sampled constraints S(x) = t* - conformity(x):
// lambda* is the smallest lambda in [0, U] with S(x_i) <= lambda for all i.
ScenarioResult scenario_relax(const ConformalPredictor& predictor,
                              std::span<const LatentVector> samples,
                              double upper_bound = 1.0);

std::string scenario_to_json(const ScenarioResult& result);

} // namespace oodcert
