#include "oodcert/bounds.hpp"
#include "oodcert/conformal.hpp"
#include "oodcert/error.hpp"
#include "oodcert/harness.hpp"
#include "oodcert/latent_model.hpp"
#include "oodcert/verifier.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace oodcert;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Python side works with (n, k) arrays; the core stores points column-wise.
RowMatrix to_rows(const std::vector<LatentVector>& points, Eigen::Index dim)
{
  RowMatrix out(static_cast<Eigen::Index>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return out;
}

std::vector<LatentVector> from_rows(const Eigen::Ref<const RowMatrix>& rows)
{
  std::vector<LatentVector> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    out.emplace_back(rows.row(i).transpose());
  return out;
}

KernelSpec kernel_spec(const std::string& kernel, std::optional<double> bandwidth)
{
  return {parse_kernel_kind(kernel), bandwidth};
}

py::dict bound_dict(const EpsilonBound& b)
{
  return py::dict("value"_a = b.value, "method"_a = std::string(to_string(b.method)),
                  "clamped"_a = b.clamped);
}

py::dict record_dict(const TrialRecord& r)
{
  return py::dict("n"_a = r.n, "delta"_a = r.delta, "trial"_a = r.trial_index,
                  "violations"_a = r.violations, "observed_rate"_a = r.observed_rate,
                  "epsilon"_a = r.epsilon, "exceeded"_a = r.exceeded);
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Conformal OOD detector certification core";

  auto base = py::register_exception<Error>(m, "OodcertError", PyExc_RuntimeError);
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<InternalError>(m, "InternalError", base.ptr());

  py::class_<GaussianLatentModel>(m, "GaussianLatentModel")
    .def(py::init<LatentVector, Eigen::MatrixXd, std::string>(), "mean"_a,
         "covariance"_a, "label"_a = "")
    .def_static("diagonal", &GaussianLatentModel::diagonal, "mean"_a,
                "variances"_a, "label"_a = "")
    .def_static("standard_normal", &GaussianLatentModel::standard_normal, "dim"_a,
                "label"_a = "")
    .def_property_readonly("dim", &GaussianLatentModel::dim)
    .def_property_readonly("mean", &GaussianLatentModel::mean)
    .def_property_readonly("covariance", &GaussianLatentModel::covariance)
    .def_property_readonly("label", &GaussianLatentModel::label)
    .def(
      "sample",
      [](const GaussianLatentModel& model, std::size_t n, std::uint64_t seed,
         std::uint64_t stream) {
        return to_rows(sample(model, n, {seed, stream}), model.dim());
      },
      "n"_a, "seed"_a = 0, "stream"_a = 0, "Draw n samples as an (n, dim) array.")
    .def("log_density",
         [](const GaussianLatentModel& model, const LatentVector& x) {
           return log_density(model, x);
         })
    .def("to_json", [](const GaussianLatentModel& model) { return model_to_json(model); })
    .def("save", [](const GaussianLatentModel& model,
                    const std::filesystem::path& path) { save_model(model, path); });

  m.def("load_model", &load_model, "path"_a);
  m.def("parse_model", &parse_model, "text"_a);

  py::class_<CalibrationSet>(m, "CalibrationSet")
    .def(py::init([](const Eigen::Ref<const RowMatrix>& rows, std::string label) {
           return CalibrationSet(from_rows(rows), std::move(label));
         }),
         "points"_a, "label"_a = "", "Build from an (n, dim) array.")
    .def_property_readonly("size", &CalibrationSet::size)
    .def_property_readonly("dim", &CalibrationSet::dim)
    .def_property_readonly("points",
                           [](const CalibrationSet& cal) {
                             return RowMatrix(cal.points().transpose());
                           })
    .def("__len__", &CalibrationSet::size)
    .def("to_csv", [](const CalibrationSet& cal) { return calibration_to_csv(cal); })
    .def("save", [](const CalibrationSet& cal, const std::filesystem::path& path) {
      save_calibration_csv(cal, path);
    });

  m.def("load_calibration", &load_calibration_csv, "path"_a);
  m.def("parse_calibration", [](const std::string& text) {
    return parse_calibration_csv(text);
  }, "text"_a);

  py::class_<ConformalPredictor>(m, "ConformalPredictor")
    .def_property_readonly("kernel",
                           [](const ConformalPredictor& p) {
                             return std::string(to_string(p.kernel()));
                           })
    .def_property_readonly("bandwidth", &ConformalPredictor::bandwidth)
    .def_property_readonly("beta", &ConformalPredictor::beta)
    .def_property_readonly("threshold", &ConformalPredictor::threshold)
    .def_property_readonly("threshold_index", &ConformalPredictor::threshold_index)
    .def_property_readonly("scores", &ConformalPredictor::scores)
    .def_property_readonly("dim", &ConformalPredictor::dim)
    .def("conformity", &ConformalPredictor::conformity, "x"_a)
    .def("is_safe", &ConformalPredictor::is_safe, "x"_a)
    .def(
      "conformity_many",
      [](const ConformalPredictor& p, const Eigen::Ref<const RowMatrix>& rows) {
        if (rows.cols() != p.dim())
          throw ArgumentError("expected an (n, " + std::to_string(p.dim()) +
                              ") array");
        LatentVector out(rows.rows());
        LatentVector x(p.dim());
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
          x = rows.row(i).transpose();
          out[i] = p.conformity(x);
        }
        return out;
      },
      "points"_a, "Conformity of each row of an (n, dim) array.")
    .def("to_json", [](const ConformalPredictor& p, const std::string& ref) {
      return predictor_to_json(p, ref);
    }, "calibration_ref"_a)
    .def("save", [](const ConformalPredictor& p, const std::string& ref,
                    const std::filesystem::path& path) { save_predictor(p, ref, path); },
         "calibration_ref"_a, "path"_a);

  m.def(
    "calibrate",
    [](const CalibrationSet& cal, double beta, const std::string& kernel,
       std::optional<double> bandwidth, bool leave_one_out) {
      CalibrationOptions options;
      options.leave_one_out = leave_one_out;
      return calibrate(cal, kernel_spec(kernel, bandwidth), beta, options);
    },
    "calibration"_a, "beta"_a, "kernel"_a = "uniform", "bandwidth"_a = py::none(),
    "leave_one_out"_a = true);
  m.def("load_predictor", &load_predictor, "path"_a);

  m.def("epsilon_chernoff",
        [](std::uint64_t n, double r, double delta) {
          return bound_dict(epsilon_chernoff(n, r, delta));
        },
        "n"_a, "r"_a, "delta"_a);
  m.def("epsilon_adjusted",
        [](std::uint64_t n, std::uint64_t r, double delta, double beta) {
          return bound_dict(epsilon_adjusted(n, r, delta, beta));
        },
        "n"_a, "r"_a, "delta"_a, "beta"_a);
  m.def("epsilon_no_violations",
        [](std::uint64_t n, double delta) {
          return bound_dict(epsilon_no_violations(n, delta));
        },
        "n"_a, "delta"_a);
  m.def("exact_epsilon",
        [](std::uint64_t n, std::uint64_t r, std::uint64_t d, double delta) {
          return bound_dict(exact_epsilon(n, r, d, delta));
        },
        "n"_a, "r"_a, "d"_a, "delta"_a);
  m.def("binomial_condition_holds", &binomial_condition_holds, "n"_a, "r"_a, "d"_a,
        "eps"_a, "delta"_a);
  m.def("pac_sample_complexity", &pac_sample_complexity, "eps"_a, "delta"_a,
        "ln_hypothesis_space"_a = 0.0);

  m.def(
    "verify",
    [](const GaussianLatentModel& model, const ConformalPredictor& predictor,
       std::uint64_t n, double delta, std::uint64_t seed, std::uint64_t stream,
       unsigned workers) {
      VerificationConfig config;
      config.n_samples = n;
      config.delta = delta;
      config.stream = {seed, stream};
      config.workers = workers;
      VerificationReport report;
      {
        py::gil_scoped_release release;
        report = verify(model, predictor, config);
      }
      return py::dict("n_samples"_a = report.n_samples,
                      "violations"_a = report.violations,
                      "observed_rate"_a = report.observed_rate,
                      "epsilon"_a = bound_dict(report.epsilon),
                      "epsilon_unadjusted"_a = bound_dict(report.epsilon_unadjusted),
                      "epsilon_exact"_a = bound_dict(report.epsilon_exact),
                      "delta"_a = report.delta, "beta"_a = report.beta,
                      "seed"_a = report.seed, "stream_index"_a = report.stream_index,
                      "elapsed"_a = report.elapsed_seconds);
    },
    "model"_a, "predictor"_a, "n"_a, "delta"_a, "seed"_a = 0, "stream"_a = 0,
    "workers"_a = 1);

  m.def(
    "scenario_relax",
    [](const ConformalPredictor& predictor, const Eigen::Ref<const RowMatrix>& rows,
       double upper_bound) {
      const auto result = scenario_relax(predictor, from_rows(rows), upper_bound);
      return py::dict("lambda_star"_a = result.lambda_star,
                      "upper_bound"_a = result.upper_bound,
                      "violating_count"_a = result.violating_count);
    },
    "predictor"_a, "samples"_a, "upper_bound"_a = 1.0);

  m.def(
    "run_grid",
    [](const std::string& spec_json, const std::filesystem::path& base_dir) {
      const auto spec = parse_experiment_spec(spec_json, base_dir);
      std::vector<TrialRecord> records;
      {
        py::gil_scoped_release release;
        records = run_grid(spec);
      }
      py::list out;
      for (const auto& r : records)
        out.append(record_dict(r));
      return out;
    },
    "spec_json"_a, "base_dir"_a = std::filesystem::path{},
    "Run an experiment grid described by a JSON spec; one dict per trial.");
  m.def(
    "violation_study",
    [](const std::string& spec_json, const std::filesystem::path& base_dir) {
      const auto spec = parse_experiment_spec(spec_json, base_dir);
      ViolationStudy study;
      {
        py::gil_scoped_release release;
        study = violation_study(spec);
      }
      py::list stats;
      for (const auto& s : study.stats)
        stats.append(py::dict("n"_a = s.n, "delta"_a = s.delta, "trials"_a = s.trials,
                              "exceed_fraction"_a = s.exceed_fraction,
                              "reference_epsilon"_a = s.reference_epsilon));
      return stats;
    },
    "spec_json"_a, "base_dir"_a = std::filesystem::path{});
}
