#include "oodcert/verifier.hpp"

#include "oodcert/error.hpp"
#include "oodcert/io.hpp"

#include <algorithm>
#include <chrono>
#include <thread>
#include <vector>

namespace oodcert {

namespace {

void require_matching_dims(const ConformalPredictor& predictor, Eigen::Index dim)
{
  if (dim != predictor.dim())
    throw ArgumentError("dimension mismatch: predictor has k=" +
                        std::to_string(predictor.dim()) + ", got " +
                        std::to_string(dim));
}

std::uint64_t count_strided(const GaussianLatentModel& model,
                            const ConformalPredictor& predictor,
                            std::uint64_t n, const SampleStream& stream,
                            std::uint64_t first, std::uint64_t stride)
{
  LatentVector x(model.dim());
  const double threshold = predictor.threshold();
  std::uint64_t r = 0;
  for (std::uint64_t i = first; i < n; i += stride) {
    model.draw(stream, i, x);
    if (predictor.conformity_unchecked(x.data()) < threshold)
      ++r;
  }
  return r;
}

void write_bound(JsonWriter& w, const EpsilonBound& b)
{
  w.begin_object();
  w.key("value").value(b.value);
  w.key("method").value(to_string(b.method));
  w.key("clamped").value(b.clamped);
  w.end_object();
}

} // namespace

std::uint64_t count_violations(const ConformalPredictor& predictor,
                               std::span<const LatentVector> samples)
{
  std::uint64_t r = 0;
  for (const auto& x : samples)
    if (predictor.predict_set(x) == PredictionSet::empty)
      ++r;
  return r;
}

std::uint64_t count_sampled_violations(const GaussianLatentModel& model,
                                       const ConformalPredictor& predictor,
                                       std::uint64_t n,
                                       const SampleStream& stream,
                                       unsigned workers)
{
  require_matching_dims(predictor, model.dim());
  if (n == 0)
    throw ArgumentError("sample count must be positive");
  if (workers == 0)
    throw ArgumentError("workers must be at least 1");
  const std::uint64_t w = std::min<std::uint64_t>(workers, n);
  if (w == 1)
    return count_strided(model, predictor, n, stream, 0, 1);

  std::vector<std::uint64_t> partial(w, 0);
  {
    std::vector<std::jthread> threads;
    threads.reserve(w);
    for (std::uint64_t j = 0; j < w; ++j)
      threads.emplace_back([&, j] {
        partial[j] = count_strided(model, predictor, n, stream, j, w);
      });
  }
  std::uint64_t r = 0;
  for (const auto p : partial)
    r += p;
  return r;
}

VerificationReport verify(const GaussianLatentModel& model,
                          const ConformalPredictor& predictor,
                          const VerificationConfig& config)
{
  require_matching_dims(predictor, model.dim());
  const auto start = std::chrono::steady_clock::now();

  VerificationReport report;
  report.n_samples = config.n_samples;
  report.delta = config.delta;
  report.beta = predictor.beta();
  report.seed = config.stream.seed;
  report.stream_index = config.stream.stream_index;
  if (!(config.delta > 0.0 && config.delta < 1.0))
    throw ArgumentError("delta must lie in (0, 1)");

  report.violations = count_sampled_violations(model, predictor, config.n_samples,
                                               config.stream, config.workers);
  report.observed_rate = static_cast<double>(report.violations) /
                         static_cast<double>(report.n_samples);
  report.epsilon = epsilon_adjusted(report.n_samples, report.violations,
                                    report.delta, report.beta);
  report.epsilon_unadjusted = epsilon_chernoff(
    report.n_samples, static_cast<double>(report.violations), report.delta);
  report.epsilon_exact =
    exact_epsilon(report.n_samples, report.violations, 1, report.delta);

  report.elapsed_seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
  return report;
}

std::string report_to_json(const VerificationReport& report,
                           bool include_elapsed)
{
  JsonWriter w;
  w.begin_object();
  w.key("n_samples").value(report.n_samples);
  w.key("violations").value(report.violations);
  w.key("observed_rate").value(report.observed_rate);
  w.key("epsilon");
  write_bound(w, report.epsilon);
  w.key("epsilon_unadjusted");
  write_bound(w, report.epsilon_unadjusted);
  w.key("epsilon_exact");
  write_bound(w, report.epsilon_exact);
  w.key("delta").value(report.delta);
  w.key("beta").value(report.beta);
  w.key("seed").value(report.seed);
  w.key("stream_index").value(report.stream_index);
  if (include_elapsed)
    w.key("elapsed").value(report.elapsed_seconds);
  w.end_object();
  return w.str();
}

ScenarioResult scenario_relax(const ConformalPredictor& predictor,
                              std::span<const LatentVector> samples,
                              double upper_bound)
{
  if (!(upper_bound > 0.0))
    throw ArgumentError("upper bound U must be positive");
  ScenarioResult result;
  result.upper_bound = upper_bound;
  double worst_slack = 0.0;
  for (const auto& x : samples) {
    const double slack = predictor.threshold() - predictor.conformity(x);
    if (slack > 0.0) {
      ++result.violating_count;
      worst_slack = std::max(worst_slack, slack);
    }
  }
  result.lambda_star = std::clamp(worst_slack, 0.0, upper_bound);
  return result;
}

std::string scenario_to_json(const ScenarioResult& result)
{
  JsonWriter w;
  w.begin_object();
  w.key("lambda_star").value(result.lambda_star);
  w.key("upper_bound").value(result.upper_bound);
  w.key("violating_count").value(result.violating_count);
  w.end_object();
  return w.str();
}

} // namespace oodcert
