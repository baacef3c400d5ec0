#pragma once

#include "oodcert/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace oodcert {

// A point in the k-dimensional latent space.
using LatentVector = Eigen::VectorXd;

// Throws ArgumentError unless every coordinate of `x` is finite and `x` is
// non-empty. `what` prefixes the message.
void require_finite(const LatentVector& x, std::string_view what);

enum class CovarianceType
{
  diagonal,
  full
};

//! Multivariate Gaussian over the latent space. Immutable once constructed;
//! the Cholesky factor is computed up front and shared by all samplers.
class GaussianLatentModel
{
public:
  // Full covariance. Throws ValidationError if it is not symmetric positive
  // definite, ArgumentError on shape mismatch or non-finite entries.
  GaussianLatentModel(LatentVector mean, Eigen::MatrixXd covariance,
                      std::string label = {});

  // Diagonal covariance given by its variances.
  static GaussianLatentModel diagonal(LatentVector mean, LatentVector variances,
                                      std::string label = {});

  static GaussianLatentModel standard_normal(int dim, std::string label = {});

  int dim() const noexcept { return static_cast<int>(mean_.size()); }
  const LatentVector& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }
  const Eigen::MatrixXd& cholesky_factor() const noexcept { return lower_; }
  CovarianceType covariance_type() const noexcept { return type_; }
  const std::string& label() const noexcept { return label_; }
  double log_det_covariance() const noexcept { return log_det_; }

  // Writes element `index` of `stream` into `out` (resized to dim()):
  // mean + L z with z standard normal.
  void draw(const SampleStream& stream, std::uint64_t index,
            LatentVector& out) const;

private:
  GaussianLatentModel(LatentVector mean, Eigen::MatrixXd covariance,
                      CovarianceType type, std::string label);

  LatentVector mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd lower_;
  CovarianceType type_;
  std::string label_;
  double log_det_ = 0.0;
};

// n i.i.d. draws, elements 0..n-1 of `stream`.
std::vector<LatentVector> sample(const GaussianLatentModel& model, std::size_t n,
                                 const SampleStream& stream);

double log_density(const GaussianLatentModel& model, const LatentVector& x);

// Latent-model interchange format:
//   {"dim": int, "mean": [...], "cov_type": "diag"|"full",
//    "cov": [...] | [[...], ...], "label": string}
GaussianLatentModel parse_model(std::string_view json_text);
GaussianLatentModel load_model(const std::filesystem::path& path);
std::string model_to_json(const GaussianLatentModel& model);
void save_model(const GaussianLatentModel& model,
                const std::filesystem::path& path);

} // namespace oodcert
