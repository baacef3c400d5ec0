#include "oodcert/bounds.hpp"

#include "oodcert/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oodcert {

namespace {

constexpr double kBracketLow = 1e-15;
constexpr double kBracketHigh = 1.0 - 1e-15;
constexpr double kBisectionTolerance = 1e-12;
constexpr int kMaxBisectionSteps = 200;
// Stop summing once a term no longer moves the scaled sum.
constexpr double kNegligible = 1e-18;

void require_open_unit(double value, const char* name)
{
  if (!(value > 0.0 && value < 1.0))
    throw ArgumentError(std::string(name) + " must lie in (0, 1)");
}

void require_samples(std::uint64_t n)
{
  if (n < 1)
    throw ArgumentError("N must be at least 1");
}

double log_binomial_term(std::uint64_t n, std::uint64_t i, double log_eps,
                         double log_one_minus_eps)
{
  const double nd = static_cast<double>(n);
  const double id = static_cast<double>(i);
  return log_binomial_coefficient(n, i) + id * log_eps +
         (nd - id) * log_one_minus_eps;
}

} // namespace

std::string_view to_string(BoundMethod method) noexcept
{
  switch (method) {
  case BoundMethod::no_violation: return "no_violation";
  case BoundMethod::chernoff: return "chernoff";
  case BoundMethod::adjusted: return "adjusted";
  case BoundMethod::exact: return "exact";
  }
  return "unknown";
}

void BoundQuery::validate() const
{
  require_samples(n_samples);
  if (!(violations >= 0.0) || violations > static_cast<double>(n_samples))
    throw ArgumentError("violations must lie in [0, N]");
  if (dims < 1)
    throw ArgumentError("d must be at least 1");
  require_open_unit(delta, "delta");
  if (!(beta >= 0.0 && beta < 1.0))
    throw ArgumentError("beta must lie in [0, 1)");
}

double log_binomial_coefficient(std::uint64_t n, std::uint64_t k)
{
  if (k > n)
    throw ArgumentError("binomial coefficient with k > n");
  if (k == 0 || k == n)
    return 0.0;
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) -
         std::lgamma(nd - kd + 1.0);
}

double log_binomial_lower_tail(std::uint64_t n, std::uint64_t k, double eps)
{
  require_open_unit(eps, "eps");
  if (k >= n)
    return 0.0;

  const double log_eps = std::log(eps);
  const double log_q = std::log1p(-eps);
  const double odds = eps / (1.0 - eps);
  const double nd = static_cast<double>(n);
  const auto mode = static_cast<std::uint64_t>(
    std::min(std::floor((nd + 1.0) * eps), nd));

  if (k < mode) {
    // Terms increase up to the mode, so t_k is the largest in [0, k]; walk
    // down from it.
    double sum = 1.0;
    double term = 1.0;
    for (std::uint64_t i = k; i > 0; --i) {
      term *= static_cast<double>(i) / ((nd - static_cast<double>(i) + 1.0) * odds);
      sum += term;
      if (term < kNegligible * sum)
        break;
    }
    return log_binomial_term(n, k, log_eps, log_q) + std::log(sum);
  }

  // k >= mode: the upper tail from k+1 is decreasing; take the complement.
  double sum = 1.0;
  double term = 1.0;
  for (std::uint64_t i = k + 1; i < n; ++i) {
    term *= (nd - static_cast<double>(i)) / (static_cast<double>(i) + 1.0) * odds;
    sum += term;
    if (term < kNegligible * sum)
      break;
  }
  const double log_upper = log_binomial_term(n, k + 1, log_eps, log_q) +
                           std::log(sum);
  return std::log1p(-std::exp(log_upper));
}

bool binomial_condition_holds(std::uint64_t n, std::uint64_t r, std::uint64_t d,
                              double eps, double delta)
{
  require_samples(n);
  if (d < 1)
    throw ArgumentError("d must be at least 1");
  if (r + d - 1 > n)
    throw ArgumentError("r + d - 1 must not exceed N");
  require_open_unit(eps, "eps");
  require_open_unit(delta, "delta");
  const std::uint64_t k = r + d - 1;
  const double lhs = log_binomial_coefficient(k, r) +
                     log_binomial_lower_tail(n, k, eps);
  const double rhs = std::log(delta);
  // Absorbs last-ulp noise at exact equality, e.g. (1 - 0.5)^1 <= 0.5.
  return lhs <= rhs + 1e-13 * std::max(1.0, std::abs(rhs));
}

EpsilonBound exact_epsilon(std::uint64_t n, std::uint64_t r, std::uint64_t d,
                           double delta)
{
  if (!binomial_condition_holds(n, r, d, kBracketHigh, delta))
    return {1.0, BoundMethod::exact, true};
  if (binomial_condition_holds(n, r, d, kBracketLow, delta))
    return {kBracketLow, BoundMethod::exact, false};

  double lo = kBracketLow;
  double hi = kBracketHigh;
  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    if (hi - lo <= kBisectionTolerance)
      return {hi, BoundMethod::exact, false};
    const double mid = 0.5 * (lo + hi);
    if (binomial_condition_holds(n, r, d, mid, delta))
      hi = mid;
    else
      lo = mid;
  }
  throw InternalError("exact_epsilon: bisection did not converge");
}

EpsilonBound epsilon_no_violations(std::uint64_t n, double delta)
{
  require_samples(n);
  require_open_unit(delta, "delta");
  // 1 - delta^(1/N), written to avoid cancellation for large N.
  return {-std::expm1(std::log(delta) / static_cast<double>(n)),
          BoundMethod::no_violation, false};
}

EpsilonBound epsilon_chernoff(std::uint64_t n, double r, double delta)
{
  require_samples(n);
  if (!(r >= 0.0) || !std::isfinite(r))
    throw ArgumentError("r must be a finite non-negative number");
  require_open_unit(delta, "delta");
  const double log_inv_delta = -std::log(delta);
  const double value =
    (r + log_inv_delta +
     std::sqrt(log_inv_delta * log_inv_delta + 2.0 * r * log_inv_delta)) /
    static_cast<double>(n);
  if (value > 1.0)
    return {1.0, BoundMethod::chernoff, true};
  return {value, BoundMethod::chernoff, false};
}

EpsilonBound epsilon_adjusted(std::uint64_t n, std::uint64_t r, double delta,
                              double beta)
{
  if (!(beta >= 0.0 && beta < 1.0))
    throw ArgumentError("beta must lie in [0, 1)");
  auto bound = epsilon_chernoff(n, static_cast<double>(r) * (1.0 - beta), delta);
  bound.method = BoundMethod::adjusted;
  return bound;
}

std::uint64_t pac_sample_complexity(double eps, double delta,
                                    double ln_hypothesis_space)
{
  require_open_unit(eps, "eps");
  require_open_unit(delta, "delta");
  if (!(ln_hypothesis_space >= 0.0) || !std::isfinite(ln_hypothesis_space))
    throw ArgumentError("ln(H) must be a finite non-negative number");
  const double bound = (ln_hypothesis_space - std::log(delta)) / eps;
  // Relative slack so that an exact integer bound is not pushed up by
  // rounding in log().
  return static_cast<std::uint64_t>(std::ceil(bound * (1.0 - 1e-12)));
}

} // namespace oodcert
