#include "oodcert/error.hpp"
#include "oodcert/verifier.hpp"

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace oodcert;

namespace {

ConformalPredictor standard_predictor(int dim = 2, std::uint64_t seed = 1)
{
  const auto model = GaussianLatentModel::standard_normal(dim);
  return calibrate(CalibrationSet(sample(model, 200, {seed, 0})),
                   KernelSpec::scott(KernelKind::uniform), 0.0275);
}

} // namespace

TEST(CountViolations, CalibrationPointsAndFarPoints)
{
  const auto pred = standard_predictor();
  std::vector<LatentVector> cal;
  for (std::size_t i = 0; i < pred.calibration().size(); ++i)
    cal.emplace_back(pred.calibration().point(i));
  // Each calibration point's full-set score is at least its leave-one-out
  // score, so only points strictly below t* can be flagged.
  std::uint64_t below = 0;
  const auto raw = calibration_scores(pred.calibration(), pred.kernel(),
                                      pred.bandwidth());
  for (const double s : raw)
    below += s / pred.normalizer() < pred.threshold() ? 1 : 0;
  EXPECT_LE(count_violations(pred, cal), below);

  std::vector<LatentVector> far(7, LatentVector::Constant(2, 100.0));
  EXPECT_EQ(count_violations(pred, far), 7u);
  EXPECT_EQ(count_violations(pred, {}), 0u);
}

TEST(CountViolations, SampledMatchesExplicitLoop)
{
  const auto model = GaussianLatentModel::standard_normal(2);
  const auto pred = standard_predictor();
  const SampleStream stream{42, 3};
  const auto samples = sample(model, 5000, stream);
  EXPECT_EQ(count_sampled_violations(model, pred, 5000, stream),
            count_violations(pred, samples));
}

TEST(CountViolations, WorkerCountDoesNotChangeResult)
{
  const auto model = GaussianLatentModel::standard_normal(2);
  const auto pred = standard_predictor();
  const auto one = count_sampled_violations(model, pred, 20001, {5, 0}, 1);
  for (const unsigned w : {2u, 3u, 4u, 7u})
    EXPECT_EQ(count_sampled_violations(model, pred, 20001, {5, 0}, w), one);
  EXPECT_EQ(count_sampled_violations(model, pred, 3, {5, 0}, 8),
            count_sampled_violations(model, pred, 3, {5, 0}, 1));
}

TEST(Verify, ReportFieldsAndDeterminism)
{
  const auto model = GaussianLatentModel::standard_normal(2);
  const auto pred = standard_predictor();
  VerificationConfig config;
  config.n_samples = 10000;
  config.delta = 1e-6;
  config.stream = {7, 0};
  const auto a = verify(model, pred, config);
  config.workers = 4;
  const auto b = verify(model, pred, config);
  EXPECT_EQ(report_to_json(a, false), report_to_json(b, false));

  EXPECT_EQ(a.n_samples, 10000u);
  EXPECT_EQ(a.observed_rate, static_cast<double>(a.violations) / 10000.0);
  EXPECT_EQ(a.epsilon, epsilon_adjusted(10000, a.violations, 1e-6, pred.beta()));
  EXPECT_GE(a.epsilon_unadjusted.value, a.epsilon_exact.value);
  EXPECT_GE(a.epsilon_unadjusted.value, a.epsilon.value);
  EXPECT_GT(a.epsilon.value, a.observed_rate);
  EXPECT_EQ(a.beta, pred.beta());
  EXPECT_GE(a.elapsed_seconds, 0.0);

  const auto doc = nlohmann::json::parse(report_to_json(a));
  for (const char* field : {"n_samples", "violations", "observed_rate",
                            "epsilon", "delta", "beta", "elapsed"})
    EXPECT_TRUE(doc.contains(field)) << field;
}

TEST(Verify, NoViolationsGiveTwoLogOverN)
{
  // A very wide bandwidth makes every sample safe.
  const auto model = GaussianLatentModel::standard_normal(1);
  const auto pred = calibrate(CalibrationSet(sample(model, 50, {1, 0})),
                              KernelSpec::fixed(KernelKind::uniform, 1e6), 0.1);
  VerificationConfig config;
  config.n_samples = 1000;
  config.delta = 1e-3;
  const auto r = verify(model, pred, config);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_NEAR(r.epsilon.value, 2.0 * std::log(1e3) / 1000.0, 1e-16);
}

TEST(Verify, RejectsBadConfig)
{
  const auto pred = standard_predictor();
  VerificationConfig config;
  config.n_samples = 10;
  EXPECT_THROW(verify(GaussianLatentModel::standard_normal(3), pred, config),
               ArgumentError);
  config.delta = 1.0;
  EXPECT_THROW(verify(GaussianLatentModel::standard_normal(2), pred, config),
               ArgumentError);
  config.delta = 0.1;
  config.n_samples = 0;
  EXPECT_THROW(verify(GaussianLatentModel::standard_normal(2), pred, config),
               ArgumentError);
}

TEST(Scenario, AllSafeGivesZero)
{
  const auto pred = standard_predictor();
  std::vector<LatentVector> samples;
  const auto raw = calibration_scores(pred.calibration(), pred.kernel(),
                                      pred.bandwidth());
  const auto densest = static_cast<std::size_t>(
    std::max_element(raw.begin(), raw.end()) - raw.begin());
  samples.emplace_back(pred.calibration().point(densest));
  const auto res = scenario_relax(pred, samples);
  EXPECT_EQ(res.lambda_star, 0.0);
  EXPECT_EQ(res.violating_count, 0u);
}

TEST(Scenario, BindingConstraintAndClamp)
{
  const auto pred = standard_predictor();
  std::vector<LatentVector> samples = {LatentVector::Constant(2, 100.0)};
  // A far point has conformity 0, so its constraint is t* - 0.
  const auto res = scenario_relax(pred, samples);
  EXPECT_EQ(res.lambda_star, pred.threshold());
  EXPECT_EQ(res.violating_count, 1u);
  const auto clamped = scenario_relax(pred, samples, 0.5 * pred.threshold());
  EXPECT_EQ(clamped.lambda_star, 0.5 * pred.threshold());
  EXPECT_THROW(scenario_relax(pred, samples, 0.0), ArgumentError);
}

TEST(Scenario, MatchesMaxSlackAndViolationCount)
{
  const auto model = GaussianLatentModel::standard_normal(2);
  const auto pred = standard_predictor();
  const auto samples = sample(model, 3000, {9, 1});
  double worst = 0.0;
  for (const auto& x : samples)
    worst = std::max(worst, pred.threshold() - pred.conformity(x));
  const auto res = scenario_relax(pred, samples);
  EXPECT_EQ(res.lambda_star, std::min(worst, 1.0));
  EXPECT_EQ(res.violating_count, count_violations(pred, samples));
  for (const auto& x : samples)
    EXPECT_LE(pred.threshold() - pred.conformity(x), res.lambda_star);
}

TEST(CountViolations, DenseCalibrationPointsAreNeverFlagged)
{
  // A calibration point with leave-one-out count c has full count c + 1, and
  // (c + 1) / n >= c / (n - 1) whenever c <= n - 1.
  const auto pred = standard_predictor();
  const auto raw = calibration_scores(pred.calibration(), pred.kernel(),
                                      pred.bandwidth());
  std::vector<LatentVector> dense;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (raw[i] / pred.normalizer() >= pred.threshold())
      dense.emplace_back(pred.calibration().point(i));
  EXPECT_GE(dense.size(), 190u);
  EXPECT_EQ(count_violations(pred, dense), 0u);
}

TEST(Verify, LargeRunTracksTrueRate)
{
  const auto model = GaussianLatentModel::standard_normal(2);
  const auto pred = calibrate(CalibrationSet(sample(model, 200, {3, 0})),
                              KernelSpec::scott(KernelKind::uniform), 0.045);
  // Independent estimate of the true violation probability.
  const double p = count_sampled_violations(model, pred, 2000000, {3, 77}) / 2e6;
  VerificationConfig config;
  config.n_samples = 100000;
  config.delta = 1e-6;
  config.stream = {3, 1};
  const auto report = verify(model, pred, config);
  const double n = 1e5;
  EXPECT_NEAR(static_cast<double>(report.violations), n * p,
              3.0 * std::sqrt(n * p * (1.0 - p)) + 3.0 * std::sqrt(n * n * p / 2e6));
  const double slack = report.epsilon.value - report.observed_rate;
  const double L = std::log(1e6);
  EXPECT_LT(slack, (L + std::sqrt(L * L + 2.0 * report.violations * L)) / n);
  EXPECT_GT(report.epsilon_unadjusted.value, report.observed_rate);
}
