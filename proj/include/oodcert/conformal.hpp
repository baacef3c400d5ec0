#pragma once

#include "oodcert/latent_model.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oodcert {

//! Held-out in-distribution encodings that fix the conformal threshold.
//! Points are stored column-wise (dim x size).
class CalibrationSet
{
public:
  // Requires at least two finite points of one dimension.
  explicit CalibrationSet(Eigen::MatrixXd points, std::string source_label = {});
  explicit CalibrationSet(const std::vector<LatentVector>& points,
                          std::string source_label = {});

  std::size_t size() const noexcept
  {
    return static_cast<std::size_t>(points_.cols());
  }
  int dim() const noexcept { return static_cast<int>(points_.rows()); }
  auto point(std::size_t i) const { return points_.col(static_cast<Eigen::Index>(i)); }
  const Eigen::MatrixXd& points() const noexcept { return points_; }
  const std::string& source_label() const noexcept { return source_label_; }

private:
  Eigen::MatrixXd points_;
  std::string source_label_;
};

enum class KernelKind
{
  uniform,
  gaussian
};

std::string_view to_string(KernelKind kind) noexcept;
KernelKind parse_kernel_kind(std::string_view name);

// Kernel choice plus bandwidth. An empty bandwidth selects Scott's rule.
struct KernelSpec
{
  KernelKind kind = KernelKind::uniform;
  std::optional<double> bandwidth;

  static KernelSpec scott(KernelKind kind) { return {kind, std::nullopt}; }
  static KernelSpec fixed(KernelKind kind, double h) { return {kind, h}; }
};

// Scott's rule h = sigma * n^(-1/(k+4)), sigma the mean per-dimension sample
// standard deviation. This is the Gaussian-kernel bandwidth.
double scott_bandwidth(const CalibrationSet& cal);

// Ratio of canonical bandwidths between the k-ball uniform kernel and the
// Gaussian kernel: ((k+2)^2 2^k Gamma(k/2+1))^(1/(k+4)). Equals 2 for k=2.
double uniform_kernel_scale(int dim);

// Explicit bandwidth if given (must be > 0); otherwise Scott's rule, rescaled
// by uniform_kernel_scale for the uniform kernel.
double resolve_bandwidth(const CalibrationSet& cal, const KernelSpec& kernel);

// Kernel density estimate of the calibration points at x, optionally leaving
// out one calibration index. Uniform: (#points with |x-z| <= h) / (n V_k h^k).
// Gaussian: sum exp(-|x-z|^2 / 2h^2) / (n (2 pi)^(k/2) h^k).
double kde_score(const CalibrationSet& cal, const KernelSpec& kernel,
                 const LatentVector& x,
                 std::optional<std::size_t> exclude_index = std::nullopt);

struct CalibrationOptions
{
  // Score each calibration point against the others only. The self-inclusive
  // variant is kept for sensitivity studies.
  bool leave_one_out = true;
};

// Unnormalized calibration scores in calibration-index order.
std::vector<double> calibration_scores(const CalibrationSet& cal,
                                       KernelKind kind, double bandwidth,
                                       const CalibrationOptions& options = {});

// 1-based threshold index floor(beta * n). Throws ArgumentError when beta is
// outside (0, 1) or the index would be zero.
std::size_t threshold_index_for(double beta, std::size_t calibration_size);

enum class PredictionSet
{
  empty,
  in_distribution
};

//! Calibrated single-label conformal predictor. Immutable; safe to share.
class ConformalPredictor
{
public:
  const CalibrationSet& calibration() const noexcept { return calibration_; }
  KernelKind kernel() const noexcept { return kernel_; }
  double bandwidth() const noexcept { return bandwidth_; }
  double beta() const noexcept { return beta_; }
  // Ascending, normalized so the maximum is exactly 1.
  const std::vector<double>& scores() const noexcept { return scores_; }
  double threshold() const noexcept { return threshold_; }
  std::size_t threshold_index() const noexcept { return threshold_index_; }
  // Raw density mapping to conformity 1.
  double normalizer() const noexcept { return normalizer_; }
  bool leave_one_out() const noexcept { return leave_one_out_; }
  int dim() const noexcept { return calibration_.dim(); }

  // Normalized density against the full calibration set. Not clamped, so a
  // point denser than every calibration point may score above 1.
  double conformity(const LatentVector& x) const;
  // Same as conformity() without the dimension check; for hot loops.
  double conformity_unchecked(const double* x) const noexcept;

  PredictionSet predict_set(const LatentVector& x) const;
  // conformity >= threshold.
  bool is_safe(const LatentVector& x) const;

private:
  friend ConformalPredictor calibrate(const CalibrationSet&, const KernelSpec&,
                                      double, const CalibrationOptions&);
  ConformalPredictor(CalibrationSet cal) : calibration_(std::move(cal)) {}

  CalibrationSet calibration_;
  KernelKind kernel_ = KernelKind::uniform;
  double bandwidth_ = 0.0;
  double beta_ = 0.0;
  std::vector<double> scores_;
  double threshold_ = 0.0;
  std::size_t threshold_index_ = 0;
  double normalizer_ = 1.0;
  bool leave_one_out_ = true;
  double density_scale_ = 1.0; // 1 / (n V_k h^k) or its Gaussian analogue
};

// Builds the predictor from max-normalized scores sorted ascending, with
// t* = scores[floor(beta n)] (1-based).
// Throws ArgumentError when beta is unusable and ValidationError when every
// score is zero (bandwidth too small).
ConformalPredictor calibrate(const CalibrationSet& cal, const KernelSpec& kernel,
                             double beta, const CalibrationOptions& options = {});

// Calibration CSV: a header line "dim=<k>" then one row of k floats per point.
CalibrationSet parse_calibration_csv(std::string_view text,
                                     std::string source_label = {});
CalibrationSet load_calibration_csv(const std::filesystem::path& path);
std::string calibration_to_csv(const CalibrationSet& cal);
void save_calibration_csv(const CalibrationSet& cal,
                          const std::filesystem::path& path);

// Predictor snapshot JSON. `calibration_ref` is stored verbatim; relative
// references are resolved against the snapshot's directory on load.
std::string predictor_to_json(const ConformalPredictor& predictor,
                              const std::string& calibration_ref);
void save_predictor(const ConformalPredictor& predictor,
                    const std::string& calibration_ref,
                    const std::filesystem::path& path);
// Reloads the calibration set, recalibrates with the stored settings and
// checks the result reproduces the stored threshold and scores.
ConformalPredictor load_predictor(const std::filesystem::path& path);

} // namespace oodcert
