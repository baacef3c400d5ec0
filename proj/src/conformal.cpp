#include "oodcert/conformal.hpp"

#include "oodcert/error.hpp"
#include "oodcert/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace oodcert {

namespace {

constexpr std::ptrdiff_t kNoExclusion = -1;

Eigen::MatrixXd stack_points(const std::vector<LatentVector>& points)
{
  if (points.empty())
    return {};
  Eigen::MatrixXd out(points.front().size(),
                      static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != out.rows())
      throw ArgumentError("calibration points must share one dimension");
    out.col(static_cast<Eigen::Index>(i)) = points[i];
  }
  return out;
}

double unit_ball_volume(int dim)
{
  const double half = 0.5 * dim;
  return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

// 1 / (n V_k h^k) for the uniform kernel, 1 / (n (2 pi)^(k/2) h^k) for the
// Gaussian kernel.
double density_scale(KernelKind kind, int dim, double h, std::size_t n)
{
  const double hk = std::pow(h, dim);
  const double volume = kind == KernelKind::uniform
                          ? unit_ball_volume(dim)
                          : std::pow(2.0 * std::numbers::pi, 0.5 * dim);
  return 1.0 / (static_cast<double>(n) * volume * hk);
}

// Unscaled kernel sum over the calibration columns, skipping `exclude`.
double kernel_sum(const Eigen::MatrixXd& pts, KernelKind kind, double h,
                  const double* x, std::ptrdiff_t exclude) noexcept
{
  const Eigen::Index dim = pts.rows();
  const Eigen::Index n = pts.cols();
  const double* data = pts.data();
  double total = 0.0;
  if (kind == KernelKind::uniform) {
    const double radius2 = h * h;
    std::size_t count = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == exclude)
        continue;
      const double* z = data + j * dim;
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < dim; ++c) {
        const double diff = x[c] - z[c];
        d2 += diff * diff;
      }
      count += d2 <= radius2 ? 1 : 0;
    }
    total = static_cast<double>(count);
  } else {
    const double inv_two_h2 = 1.0 / (2.0 * h * h);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == exclude)
        continue;
      const double* z = data + j * dim;
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < dim; ++c) {
        const double diff = x[c] - z[c];
        d2 += diff * diff;
      }
      total += std::exp(-d2 * inv_two_h2);
    }
  }
  return total;
}

void require_dim(int expected, Eigen::Index actual)
{
  if (actual != expected)
    throw ArgumentError("dimension mismatch: calibration has k=" +
                        std::to_string(expected) + ", point has " +
                        std::to_string(actual));
}

} // namespace

CalibrationSet::CalibrationSet(Eigen::MatrixXd points, std::string source_label)
  : points_(std::move(points)), source_label_(std::move(source_label))
{
  if (points_.cols() < 2)
    throw ArgumentError("calibration set needs at least 2 points");
  if (points_.rows() < 1)
    throw ArgumentError("calibration points must have dimension >= 1");
  if (!points_.allFinite())
    throw ArgumentError("calibration set contains non-finite coordinates");
}

CalibrationSet::CalibrationSet(const std::vector<LatentVector>& points,
                               std::string source_label)
  : CalibrationSet(stack_points(points), std::move(source_label))
{}

std::string_view to_string(KernelKind kind) noexcept
{
  return kind == KernelKind::uniform ? "uniform" : "gaussian";
}

KernelKind parse_kernel_kind(std::string_view name)
{
  if (name == "uniform")
    return KernelKind::uniform;
  if (name == "gaussian")
    return KernelKind::gaussian;
  throw ArgumentError("unknown kernel '" + std::string(name) +
                      "' (expected uniform or gaussian)");
}

double scott_bandwidth(const CalibrationSet& cal)
{
  const auto& pts = cal.points();
  const double n = static_cast<double>(pts.cols());
  const Eigen::VectorXd mean = pts.rowwise().mean();
  const Eigen::VectorXd var =
    (pts.colwise() - mean).array().square().rowwise().sum() / (n - 1.0);
  const double sigma = var.array().sqrt().mean();
  if (!(sigma > 0.0))
    throw ValidationError(
      "calibration points have zero spread; Scott bandwidth is undefined");
  return sigma * std::pow(n, -1.0 / (cal.dim() + 4.0));
}

double uniform_kernel_scale(int dim)
{
  const double k = dim;
  return std::pow((k + 2.0) * (k + 2.0) * std::pow(2.0, k) *
                    std::tgamma(0.5 * k + 1.0),
                  1.0 / (k + 4.0));
}

double resolve_bandwidth(const CalibrationSet& cal, const KernelSpec& kernel)
{
  if (kernel.bandwidth) {
    const double h = *kernel.bandwidth;
    if (!(h > 0.0) || !std::isfinite(h))
      throw ArgumentError("bandwidth must be a positive finite number");
    return h;
  }
  const double h = scott_bandwidth(cal);
  return kernel.kind == KernelKind::uniform ? h * uniform_kernel_scale(cal.dim())
                                            : h;
}

double kde_score(const CalibrationSet& cal, const KernelSpec& kernel,
                 const LatentVector& x, std::optional<std::size_t> exclude_index)
{
  require_dim(cal.dim(), x.size());
  require_finite(x, "query point");
  std::size_t effective = cal.size();
  std::ptrdiff_t exclude = kNoExclusion;
  if (exclude_index) {
    if (*exclude_index >= cal.size())
      throw ArgumentError("exclude_index out of range");
    exclude = static_cast<std::ptrdiff_t>(*exclude_index);
    --effective;
  }
  if (effective == 0)
    throw ArgumentError("no calibration points left after exclusion");
  const double h = resolve_bandwidth(cal, kernel);
  return kernel_sum(cal.points(), kernel.kind, h, x.data(), exclude) *
         density_scale(kernel.kind, cal.dim(), h, effective);
}

std::vector<double> calibration_scores(const CalibrationSet& cal,
                                       KernelKind kind, double bandwidth,
                                       const CalibrationOptions& options)
{
  const std::size_t n = cal.size();
  const std::size_t effective = options.leave_one_out ? n - 1 : n;
  const double scale = density_scale(kind, cal.dim(), bandwidth, effective);
  std::vector<double> scores(n);
  const double* data = cal.points().data();
  for (std::size_t i = 0; i < n; ++i) {
    const auto exclude =
      options.leave_one_out ? static_cast<std::ptrdiff_t>(i) : kNoExclusion;
    scores[i] = kernel_sum(cal.points(), kind, bandwidth,
                           data + i * static_cast<std::size_t>(cal.dim()),
                           exclude) *
                scale;
  }
  return scores;
}

std::size_t threshold_index_for(double beta, std::size_t calibration_size)
{
  if (!(beta > 0.0 && beta < 1.0))
    throw ArgumentError("beta must lie in (0, 1)");
  // The 1e-9 slack keeps decimal products such as 0.29 * 100 from flooring
  // one below their exact value.
  const double product = beta * static_cast<double>(calibration_size);
  const auto index = static_cast<std::size_t>(std::floor(product + 1e-9));
  if (index < 1)
    throw ArgumentError("beta too small for calibration size: floor(" +
                        format_double(beta) + " * " +
                        std::to_string(calibration_size) + ") < 1");
  return index;
}

ConformalPredictor calibrate(const CalibrationSet& cal, const KernelSpec& kernel,
                             double beta, const CalibrationOptions& options)
{
  const std::size_t index = threshold_index_for(beta, cal.size());
  const double h = resolve_bandwidth(cal, kernel);

  ConformalPredictor pred(cal);
  pred.kernel_ = kernel.kind;
  pred.bandwidth_ = h;
  pred.beta_ = beta;
  pred.threshold_index_ = index;
  pred.leave_one_out_ = options.leave_one_out;
  pred.density_scale_ = density_scale(kernel.kind, cal.dim(), h, cal.size());

  auto scores = calibration_scores(cal, kernel.kind, h, options);
  const double max_score = *std::max_element(scores.begin(), scores.end());
  if (!(max_score > 0.0))
    throw ValidationError("degenerate calibration: every calibration score is "
                          "zero; enlarge the bandwidth");
  for (auto& s : scores)
    s /= max_score;
  std::sort(scores.begin(), scores.end());
  pred.normalizer_ = max_score;
  pred.threshold_ = scores[index - 1];
  pred.scores_ = std::move(scores);
  return pred;
}

double ConformalPredictor::conformity_unchecked(const double* x) const noexcept
{
  return kernel_sum(calibration_.points(), kernel_, bandwidth_, x,
                    kNoExclusion) *
         density_scale_ / normalizer_;
}

double ConformalPredictor::conformity(const LatentVector& x) const
{
  require_dim(dim(), x.size());
  return conformity_unchecked(x.data());
}

PredictionSet ConformalPredictor::predict_set(const LatentVector& x) const
{
  return conformity(x) >= threshold_ ? PredictionSet::in_distribution
                                     : PredictionSet::empty;
}

bool ConformalPredictor::is_safe(const LatentVector& x) const
{
  return predict_set(x) != PredictionSet::empty;
}

CalibrationSet parse_calibration_csv(std::string_view text,
                                     std::string source_label)
{
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("calibration CSV: missing header 'dim=<k>'");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line.rfind("dim=", 0) != 0)
    throw FormatError("calibration CSV: header must be 'dim=<k>'");
  int dim = 0;
  {
    const char* first = line.data() + 4;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, dim);
    if (ec != std::errc() || ptr != last || dim < 1)
      throw FormatError("calibration CSV: header field 'dim' must be a "
                        "positive integer");
  }

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      continue;
    int columns = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      std::size_t a = pos, b = comma;
      while (a < b && (line[a] == ' ' || line[a] == '\t'))
        ++a;
      while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t'))
        --b;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(line.data() + a, line.data() + b, v);
      if (a == b || ec != std::errc() || ptr != line.data() + b)
        throw FormatError("calibration CSV line " + std::to_string(line_no) +
                          ": invalid number in column " +
                          std::to_string(columns + 1));
      values.push_back(v);
      ++columns;
      pos = comma + 1;
    }
    if (columns != dim)
      throw FormatError("calibration CSV line " + std::to_string(line_no) +
                        ": expected " + std::to_string(dim) + " columns, got " +
                        std::to_string(columns));
    ++rows;
  }
  Eigen::MatrixXd points =
    Eigen::Map<Eigen::MatrixXd>(values.data(), dim,
                                static_cast<Eigen::Index>(rows));
  return CalibrationSet(std::move(points), std::move(source_label));
}

CalibrationSet load_calibration_csv(const std::filesystem::path& path)
{
  return parse_calibration_csv(read_text_file(path), path.string());
}

std::string calibration_to_csv(const CalibrationSet& cal)
{
  std::string out = "dim=" + std::to_string(cal.dim()) + "\n";
  for (std::size_t i = 0; i < cal.size(); ++i) {
    const auto p = cal.point(i);
    for (int c = 0; c < cal.dim(); ++c) {
      if (c > 0)
        out += ',';
      out += format_double(p[c]);
    }
    out += '\n';
  }
  return out;
}

void save_calibration_csv(const CalibrationSet& cal,
                          const std::filesystem::path& path)
{
  write_text_file(path, calibration_to_csv(cal));
}

std::string predictor_to_json(const ConformalPredictor& predictor,
                              const std::string& calibration_ref)
{
  JsonWriter w;
  w.begin_object();
  w.key("beta").value(predictor.beta());
  w.key("bandwidth").value(predictor.bandwidth());
  w.key("kernel").value(to_string(predictor.kernel()));
  w.key("threshold").value(predictor.threshold());
  w.key("threshold_index").value(
    static_cast<std::uint64_t>(predictor.threshold_index()));
  w.key("scores").array(predictor.scores());
  w.key("calibration_ref").value(calibration_ref);
  w.key("normalizer").value(predictor.normalizer());
  w.key("leave_one_out").value(predictor.leave_one_out());
  w.end_object();
  return w.str();
}

void save_predictor(const ConformalPredictor& predictor,
                    const std::string& calibration_ref,
                    const std::filesystem::path& path)
{
  write_text_file(path, predictor_to_json(predictor, calibration_ref));
}

ConformalPredictor load_predictor(const std::filesystem::path& path)
{
  const auto doc = parse_json(read_text_file(path), "predictor snapshot");
  const double beta = require_number(doc, "beta");
  const double bandwidth = require_number(doc, "bandwidth");
  const KernelKind kind = parse_kernel_kind(require_string(doc, "kernel"));
  const double threshold = require_number(doc, "threshold");
  const auto index = require_integer(doc, "threshold_index");
  const auto stored_scores = require_number_array(doc, "scores");
  std::filesystem::path ref = require_string(doc, "calibration_ref");
  CalibrationOptions options;
  if (doc.contains("leave_one_out")) {
    if (!doc["leave_one_out"].is_boolean())
      throw FormatError("field 'leave_one_out' must be a boolean");
    options.leave_one_out = doc["leave_one_out"].get<bool>();
  }

  if (ref.is_relative())
    ref = path.parent_path() / ref;
  const auto cal = load_calibration_csv(ref);
  auto pred = calibrate(cal, KernelSpec::fixed(kind, bandwidth), beta, options);

  if (static_cast<std::int64_t>(pred.threshold_index()) != index)
    throw ValidationError("predictor snapshot: threshold_index does not match "
                          "its calibration set");
  if (pred.threshold() != threshold || pred.scores() != stored_scores)
    throw ValidationError("predictor snapshot: scores or threshold do not "
                          "match its calibration set");
  return pred;
}

} // namespace oodcert
