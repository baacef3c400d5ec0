#pragma once

#include <cstdint>
#include <string_view>

namespace oodcert {

enum class BoundMethod
{
  no_violation, // 1 - delta^(1/N)
  chernoff,     // closed form from the lower-tail Chernoff bound
  adjusted,     // chernoff with r discounted to r (1 - beta)
  exact         // numerical inversion of the scenario binomial condition
};

std::string_view to_string(BoundMethod method) noexcept;

// A certified violation probability. `clamped` records that the min{1, .}
// branch fired (or, for the exact method, that no epsilon below 1 satisfies
// the condition).
struct EpsilonBound
{
  double value = 1.0;
  BoundMethod method = BoundMethod::chernoff;
  bool clamped = false;

  friend bool operator==(const EpsilonBound&, const EpsilonBound&) = default;
};

// Inputs shared by the bound operations. `violations` is real so the
// beta-discounted count r (1 - beta) can be fed through unchanged.
struct BoundQuery
{
  std::uint64_t n_samples = 1;
  double violations = 0.0;
  std::uint64_t dims = 1;
  double delta = 0.05;
  double beta = 0.0;

  // Throws ArgumentError if any field is outside its domain.
  void validate() const;
};

double log_binomial_coefficient(std::uint64_t n, std::uint64_t k);

// log P[X <= k] for X ~ Binomial(n, eps), eps in (0, 1). Terms are summed
// outward from the largest one in scaled form, so nothing underflows and the
// cost is O(sqrt(n eps (1 - eps))) terms rather than O(k).
double log_binomial_lower_tail(std::uint64_t n, std::uint64_t k, double eps);

// C(r+d-1, r) * sum_{i=0}^{r+d-1} C(N,i) eps^i (1-eps)^(N-i) <= delta,
// evaluated in log space.
bool binomial_condition_holds(std::uint64_t n, std::uint64_t r, std::uint64_t d,
                              double eps, double delta);

// Smallest eps (to 1e-12 absolute) for which binomial_condition_holds, found
// by bisection on [1e-15, 1 - 1e-15]. Returns 1 with clamped set when no eps
// in the bracket qualifies.
EpsilonBound exact_epsilon(std::uint64_t n, std::uint64_t r, std::uint64_t d,
                           double delta);

// 1 - delta^(1/N).
EpsilonBound epsilon_no_violations(std::uint64_t n, double delta);

// min{1, (r + ln(1/delta) + sqrt(ln^2(1/delta) + 2 r ln(1/delta))) / N}.
EpsilonBound epsilon_chernoff(std::uint64_t n, double r, double delta);

// epsilon_chernoff(n, r (1 - beta), delta), beta in [0, 1).
EpsilonBound epsilon_adjusted(std::uint64_t n, std::uint64_t r, double delta,
                              double beta);

// Smallest integer N with N >= (ln H + ln(1/delta)) / eps.
std::uint64_t pac_sample_complexity(double eps, double delta,
                                    double ln_hypothesis_space);

} // namespace oodcert
