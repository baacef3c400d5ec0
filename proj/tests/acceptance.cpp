// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
// criterion fails, except those named with --known-failure <name>, which are
// still reported as FAIL but tagged and not counted.

#include "oodcert/bounds.hpp"
#include "oodcert/conformal.hpp"
#include "oodcert/harness.hpp"
#include "oodcert/latent_model.hpp"
#include "oodcert/verifier.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace oodcert;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::vector<std::string> known_failures;

void criterion(const char* name, double limit_seconds,
               const std::function<Outcome()>& body)
{
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= limit_seconds) {
    out.pass = false;
    out.detail += " [over time limit]";
  }
  const bool known = std::find(known_failures.begin(), known_failures.end(),
                               name) != known_failures.end();
  if (out.pass == known)
    ++failures;
  std::printf("%s %s: %s (%.2f s, limit %.0f s)%s\n", out.pass ? "PASS" : "FAIL",
              name, out.detail.c_str(), secs, limit_seconds,
              known ? (out.pass ? " [expected to fail]" : " [known failure]") : "");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// (r + L + sqrt(L^2 + 2 r L)) / N in 50 digits, clamped at 1.
double chernoff_big(std::uint64_t n, const Big& r, double delta)
{
  const Big L = -boost::multiprecision::log(Big(delta));
  const Big v = (r + L + boost::multiprecision::sqrt(L * L + 2 * r * L)) / Big(n);
  return v > 1 ? 1.0 : static_cast<double>(v);
}

double log_uniform(std::mt19937_64& rng, double lo, double hi)
{
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

Outcome bound_formulas()
{
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::uint64_t>(log_uniform(rng, 1.0, 1e7));
    const auto r = static_cast<std::uint64_t>(unit(rng) * unit(rng) * (n + 1)) % (n + 1);
    const double delta = log_uniform(rng, 1e-12, 0.99);
    const double beta = 0.5 * unit(rng);
    const double c = epsilon_chernoff(n, static_cast<double>(r), delta).value;
    const double a = epsilon_adjusted(n, r, delta, beta).value;
    const double c_ref = chernoff_big(n, Big(r), delta);
    const double a_ref = chernoff_big(n, Big(r) * (1 - Big(beta)), delta);
    worst = std::max({worst, std::abs(c - c_ref) / c_ref, std::abs(a - a_ref) / a_ref});
  }
  return {worst < 1e-9, fmt("1000 points, max relative error %.3g (tol 1e-9)", worst)};
}

Outcome published_values()
{
  struct Row { std::uint64_t n, r; double published; };
  const Row rows[] = {{10000, 436, 0.0559}, {100000, 4301, 0.0457},
                      {1000000, 43235, 0.0433}};
  bool ok = true;
  std::string detail;
  for (const auto& row : rows) {
    const double e = epsilon_adjusted(row.n, row.r, 1e-6, 0.0275).value;
    ok = ok && std::abs(e - row.published) <= 0.002;
    detail += fmt("N=%.0f eps=%.4f vs %.4f; ", static_cast<double>(row.n), e, row.published);
  }
  return {ok, detail + "tol 0.002"};
}

Outcome exact_dominance()
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int triples = 0, unclamped = 0, sound = 0, dominated = 0;
  for (; triples < 600; ++triples) {
    const auto n = static_cast<std::uint64_t>(log_uniform(rng, 10.0, 1e6));
    const auto r = static_cast<std::uint64_t>(unit(rng) * unit(rng) * 0.3 * n);
    const double delta = log_uniform(rng, 1e-9, 0.5);
    const auto c = epsilon_chernoff(n, static_cast<double>(r), delta);
    if (!c.clamped) {
      ++unclamped;
      sound += binomial_condition_holds(n, r, 1, c.value, delta) ? 1 : 0;
    }
    dominated += exact_epsilon(n, r, 1, delta).value <= c.value ? 1 : 0;
  }
  return {sound == unclamped && dominated == triples && triples >= 500,
          fmt("condition holds at chernoff in %.0f/%.0f unclamped; ",
              sound, unclamped) +
            fmt("exact <= chernoff in %.0f/%.0f triples", dominated, triples)};
}

Outcome no_violation_closed_form()
{
  double worst = 0.0;
  for (const std::uint64_t n : {1u, 10u, 1000u, 1000000u})
    for (const double delta : {0.5, 0.01, 1e-6})
      worst = std::max(worst, std::abs(exact_epsilon(n, 0, 1, delta).value -
                                       (1.0 - std::pow(delta, 1.0 / n))));
  return {worst < 1e-10, fmt("max |exact - (1 - delta^(1/N))| = %.3g (tol 1e-10)", worst)};
}

Outcome coverage()
{
  // The 5/201 oracle is a marginal statement over calibration and test draws,
  // so the 1e5 samples are spread over 100 independent calibration sets.
  const auto model = GaussianLatentModel::standard_normal(2);
  const double target = 5.0 / 201.0;
  std::uint64_t nulls = 0, total = 0;
  std::size_t index = 0;
  double single = 0.0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    const auto pred = calibrate(CalibrationSet(sample(model, 200, {rep, 0})),
                                KernelSpec::scott(KernelKind::uniform), 0.0275);
    index = pred.threshold_index();
    const auto r = count_sampled_violations(model, pred, 1000, {rep, 1});
    if (rep == 0)
      single = count_sampled_violations(model, pred, 100000, {rep, 1}) / 1e5;
    nulls += r;
    total += 1000;
  }
  const double rate = static_cast<double>(nulls) / static_cast<double>(total);
  return {std::abs(rate - target) <= 0.01 && index == 5,
          fmt("null rate %.4f vs 5/201 = %.4f (tol 0.01), threshold index ", rate,
              target) +
            std::to_string(index) +
            fmt("; single calibration draw, N=1e5: %.4f (informational)", single)};
}

Outcome violation_study_gate()
{
  ExperimentSpec spec;
  spec.n_grid = {10000};
  spec.delta_grid = {0.25, 0.1, 0.05, 0.01};
  spec.trials_per_cell = 500;
  spec.beta = 0.0275;
  spec.calibration_size = 200;
  spec.seed = 0;
  const auto study = violation_study(spec);
  bool ok = study.stats.size() == 4;
  std::string detail;
  for (const auto& s : study.stats) {
    ok = ok && s.exceed_fraction < s.delta;
    detail += fmt("delta=%.2f frac=%.3f; ", s.delta, s.exceed_fraction);
  }
  detail += "need frac < delta";

  // Informational: the guarantee the bound actually makes is on the true
  // violation probability. Estimate it once, then count trials whose own
  // epsilon falls below it.
  const auto sc = build_scenario(spec, 0);
  const double p = count_sampled_violations(sc.model, sc.predictor, 4000000,
                                            {spec.seed, ~0ULL}) / 4e6;
  detail += fmt(" | true rate %.4f; P(true rate > trial eps):", p);
  for (const auto delta : spec.delta_grid) {
    std::uint64_t below = 0, total = 0;
    for (const auto& r : study.records)
      if (r.delta == delta) {
        ++total;
        below += epsilon_adjusted(r.n, r.violations, delta, spec.beta).value < p;
      }
    detail += fmt(" %.3f", static_cast<double>(below) / total);
  }
  return {ok, detail};
}

Outcome trends()
{
  ExperimentSpec spec;
  spec.n_grid = {100, 1000, 10000, 100000};
  spec.delta_grid = {1e-6};
  spec.trials_per_cell = 5;
  spec.beta = 0.0275;
  spec.calibration_size = 200;
  spec.seed = 0;
  const auto records = run_grid(spec);
  std::vector<double> eps(4, 0.0), gap(4, 0.0);
  for (const auto& r : records) {
    const auto cell = static_cast<std::size_t>(
      std::find(spec.n_grid.begin(), spec.n_grid.end(), r.n) - spec.n_grid.begin());
    eps[cell] += r.epsilon / spec.trials_per_cell;
    gap[cell] += (r.epsilon - r.observed_rate) / spec.trials_per_cell;
  }
  bool ok = true;
  std::string detail = "cell-mean eps:";
  for (std::size_t i = 0; i < 4; ++i) {
    if (i > 0)
      ok = ok && eps[i] < eps[i - 1] && gap[i] < gap[i - 1];
    detail += fmt(" %.4f", eps[i]);
  }
  detail += "; eps - r/N:";
  for (const double g : gap)
    detail += fmt(" %.4f", g);
  return {ok, detail};
}

Outcome determinism()
{
  const auto model = GaussianLatentModel::standard_normal(2);
  const auto pred = calibrate(CalibrationSet(sample(model, 200, {11, 0})),
                              KernelSpec::scott(KernelKind::uniform), 0.0275);
  std::vector<std::string> reports;
  for (const unsigned w : {1u, 1u, 4u, 4u}) {
    VerificationConfig config;
    config.n_samples = 200000;
    config.delta = 1e-6;
    config.stream = {11, 1};
    config.workers = w;
    reports.push_back(report_to_json(verify(model, pred, config), false));
  }

  ExperimentSpec spec;
  spec.n_grid = {1000, 10000};
  spec.delta_grid = {0.05, 1e-6};
  spec.trials_per_cell = 3;
  spec.seed = 11;
  std::vector<std::string> grids;
  for (const unsigned w : {1u, 1u, 4u, 4u}) {
    spec.workers = w;
    const auto records = run_grid(spec);
    grids.push_back(emit_table(records) + emit_plot_data(records) +
                    emit_trials(records));
  }
  const bool ok =
    std::all_of(reports.begin(), reports.end(),
                [&](const std::string& s) { return s == reports[0]; }) &&
    std::all_of(grids.begin(), grids.end(),
                [&](const std::string& s) { return s == grids[0]; });
  return {ok, "verify JSON and run_grid CSV identical over 2 runs x workers {1, 4}"};
}

} // namespace

int main(int argc, char** argv)
{
  for (int i = 1; i + 1 < argc; i += 2)
    if (std::string(argv[i]) == "--known-failure")
      known_failures.emplace_back(argv[i + 1]);

  criterion("bound-formula correctness", 1, bound_formulas);
  criterion("published epsilon values", 1, published_values);
  criterion("exact-oracle dominance", 30, exact_dominance);
  criterion("no-violation closed form", 1, no_violation_closed_form);
  criterion("conformal coverage", 60, coverage);
  criterion("violation study", 900, violation_study_gate);
  criterion("trend checks", 300, trends);
  criterion("determinism", 120, determinism);
  std::printf("%d unexpected results\n", failures);
  return failures == 0 ? 0 : 1;
}
