#include "oodcert/latent_model.hpp"

#include "oodcert/error.hpp"
#include "oodcert/io.hpp"

#include <cmath>
#include <numbers>

namespace oodcert {

void require_finite(const LatentVector& x, std::string_view what)
{
  if (x.size() == 0)
    throw ArgumentError(std::string(what) + ": empty vector");
  if (!x.allFinite())
    throw ArgumentError(std::string(what) + ": non-finite coordinate");
}

GaussianLatentModel::GaussianLatentModel(LatentVector mean,
                                         Eigen::MatrixXd covariance,
                                         std::string label)
  : GaussianLatentModel(std::move(mean), std::move(covariance),
                        CovarianceType::full, std::move(label))
{}

GaussianLatentModel::GaussianLatentModel(LatentVector mean,
                                         Eigen::MatrixXd covariance,
                                         CovarianceType type,
                                         std::string label)
  : mean_(std::move(mean)), covariance_(std::move(covariance)), type_(type),
    label_(std::move(label))
{
  require_finite(mean_, "model mean");
  const auto k = mean_.size();
  if (covariance_.rows() != k || covariance_.cols() != k)
    throw ArgumentError("covariance must be " + std::to_string(k) + "x" +
                        std::to_string(k));
  if (!covariance_.allFinite())
    throw ArgumentError("covariance has non-finite entries");

  const double scale = covariance_.cwiseAbs().maxCoeff();
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * scale)
    throw ValidationError("covariance is not symmetric");

  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success)
    throw ValidationError("covariance is not positive definite");
  lower_ = llt.matrixL();
  const auto diag = lower_.diagonal();
  if ((diag.array() <= 0.0).any())
    throw ValidationError("covariance is not positive definite");
  log_det_ = 2.0 * diag.array().log().sum();
}

GaussianLatentModel GaussianLatentModel::diagonal(LatentVector mean,
                                                  LatentVector variances,
                                                  std::string label)
{
  if (variances.size() != mean.size())
    throw ArgumentError("variance vector length differs from mean length");
  if ((variances.array() <= 0.0).any())
    throw ValidationError("diagonal covariance must be strictly positive");
  Eigen::MatrixXd cov = variances.asDiagonal();
  return GaussianLatentModel(std::move(mean), std::move(cov),
                             CovarianceType::diagonal, std::move(label));
}

GaussianLatentModel GaussianLatentModel::standard_normal(int dim,
                                                         std::string label)
{
  if (dim < 1)
    throw ArgumentError("latent dimension must be at least 1");
  return diagonal(LatentVector::Zero(dim), LatentVector::Ones(dim),
                  std::move(label));
}

void GaussianLatentModel::draw(const SampleStream& stream, std::uint64_t index,
                               LatentVector& out) const
{
  LatentVector z(dim());
  standard_normals(stream, index, std::span<double>(z.data(), z.size()));
  if (type_ == CovarianceType::diagonal)
    out = mean_ + lower_.diagonal().cwiseProduct(z);
  else
    out = mean_ + lower_.triangularView<Eigen::Lower>() * z;
}

std::vector<LatentVector> sample(const GaussianLatentModel& model, std::size_t n,
                                 const SampleStream& stream)
{
  if (n == 0)
    throw ArgumentError("sample count must be positive");
  std::vector<LatentVector> out(n);
  for (std::size_t i = 0; i < n; ++i)
    model.draw(stream, i, out[i]);
  return out;
}

double log_density(const GaussianLatentModel& model, const LatentVector& x)
{
  if (x.size() != model.dim())
    throw ArgumentError("dimension mismatch: model has k=" +
                        std::to_string(model.dim()) + ", point has " +
                        std::to_string(x.size()));
  const LatentVector centered = x - model.mean();
  const LatentVector whitened =
    model.cholesky_factor().triangularView<Eigen::Lower>().solve(centered);
  const double k = model.dim();
  return -0.5 * (k * std::log(2.0 * std::numbers::pi) +
                 model.log_det_covariance() + whitened.squaredNorm());
}

namespace {

LatentVector to_vector(const std::vector<double>& values)
{
  return Eigen::Map<const LatentVector>(values.data(),
                                        static_cast<Eigen::Index>(values.size()));
}

} // namespace

GaussianLatentModel parse_model(std::string_view json_text)
{
  const auto doc = parse_json(json_text, "latent model");
  const auto dim = require_integer(doc, "dim");
  if (dim < 1)
    throw FormatError("field 'dim' must be a positive integer");
  const auto mean = require_number_array(doc, "mean");
  if (static_cast<std::int64_t>(mean.size()) != dim)
    throw FormatError("field 'mean' must have dim entries");
  const auto cov_type = require_string(doc, "cov_type");
  std::string label;
  if (doc.contains("label")) {
    if (!doc["label"].is_string())
      throw FormatError("field 'label' must be a string");
    label = doc["label"].get<std::string>();
  }

  if (cov_type == "diag") {
    const auto variances = require_number_array(doc, "cov");
    if (static_cast<std::int64_t>(variances.size()) != dim)
      throw FormatError("field 'cov' must have dim entries for cov_type diag");
    return GaussianLatentModel::diagonal(to_vector(mean), to_vector(variances),
                                         std::move(label));
  }
  if (cov_type != "full")
    throw FormatError("field 'cov_type' must be \"diag\" or \"full\"");

  const auto& rows = require_field(doc, "cov");
  if (!rows.is_array() || static_cast<std::int64_t>(rows.size()) != dim)
    throw FormatError("field 'cov' must be a dim x dim array for cov_type full");
  Eigen::MatrixXd cov(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<std::int64_t>(row.size()) != dim)
      throw FormatError("field 'cov' row " + std::to_string(i) +
                        " must have dim entries");
    for (Eigen::Index j = 0; j < dim; ++j) {
      const auto& cell = row[static_cast<std::size_t>(j)];
      if (!cell.is_number())
        throw FormatError("field 'cov' must contain only numbers");
      cov(i, j) = cell.get<double>();
    }
  }
  return GaussianLatentModel(to_vector(mean), std::move(cov), std::move(label));
}

GaussianLatentModel load_model(const std::filesystem::path& path)
{
  return parse_model(read_text_file(path));
}

std::string model_to_json(const GaussianLatentModel& model)
{
  JsonWriter w;
  w.begin_object();
  w.key("dim").value(model.dim());
  w.key("mean").array(model.mean());
  if (model.covariance_type() == CovarianceType::diagonal) {
    w.key("cov_type").value("diag");
    w.key("cov").array(LatentVector(model.covariance().diagonal()));
  } else {
    w.key("cov_type").value("full");
    w.key("cov").begin_array();
    for (Eigen::Index i = 0; i < model.dim(); ++i)
      w.array(LatentVector(model.covariance().row(i).transpose()));
    w.end_array();
  }
  w.key("label").value(model.label());
  w.end_object();
  return w.str();
}

void save_model(const GaussianLatentModel& model,
                const std::filesystem::path& path)
{
  write_text_file(path, model_to_json(model));
}

} // namespace oodcert
