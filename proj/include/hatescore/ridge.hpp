#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hatescore/error.hpp"

namespace hatescore {

enum class Scaling { standardize, center_only };

inline std::string_view to_string(Scaling s) noexcept {
  return s == Scaling::standardize ? "standardize" : "center_only";
}

struct RidgeOptions {
  double lambda = 1.0;
  Scaling scaling = Scaling::standardize;
};

/// Linear model fitted on centered (and optionally unit-scaled) features.
/// `weights` live in the transformed space; raw_weights() maps them back.
class RidgeModel {
 public:
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double lambda = 0.0;
  Scaling scaling = Scaling::standardize;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;  // 1 for center-only or zero-variance columns

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(weights.size()); }

  double predict(std::span<const double> x) const {
    if (x.size() != dimension())
      throw InputError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                       std::to_string(dimension()));
    double y = intercept;
    for (Eigen::Index j = 0; j < weights.size(); ++j)
      y += weights[j] * (x[static_cast<std::size_t>(j)] - feature_mean[j]) / feature_scale[j];
    return y;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.cols()) != dimension()) throw InputError("feature matrix width mismatch");
    Eigen::MatrixXd Z = (X.rowwise() - feature_mean.transpose()).array().rowwise() / feature_scale.transpose().array();
    return (Z * weights).array() + intercept;
  }

  Eigen::VectorXd raw_weights() const { return weights.array() / feature_scale.array(); }

  double raw_intercept() const { return intercept - raw_weights().dot(feature_mean); }
};

/// Closed-form ridge: solves (Z'Z + lambda I) w = Z'(y - mean(y)) where Z is
/// X centered and, by default, scaled to unit population variance using the
/// statistics of X itself.
inline RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeOptions& options = {}) {
  if (X.rows() != y.size()) throw InputError("ridge: X has " + std::to_string(X.rows()) + " rows, y has " +
                                             std::to_string(y.size()));
  if (X.rows() == 0 || X.cols() == 0) throw DegenerateInputError("ridge: empty design matrix");
  if (!(options.lambda >= 0.0) || !std::isfinite(options.lambda))
    throw ConfigError("ridge: lambda must be finite and >= 0");
  if (!X.allFinite() || !y.allFinite()) throw DegenerateInputError("ridge: non-finite input");

  const double n = static_cast<double>(X.rows());
  RidgeModel m;
  m.lambda = options.lambda;
  m.scaling = options.scaling;
  m.feature_mean = X.colwise().mean().transpose();
  Eigen::MatrixXd Z = X.rowwise() - m.feature_mean.transpose();
  m.feature_scale = Eigen::VectorXd::Ones(X.cols());
  if (options.scaling == Scaling::standardize) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double sd = std::sqrt(Z.col(j).squaredNorm() / n);
      if (sd > 0.0) {
        m.feature_scale[j] = sd;
        Z.col(j) /= sd;
      }
    }
  }
  const double y_mean = y.mean();
  Eigen::MatrixXd A = Z.transpose() * Z;
  A.diagonal().array() += options.lambda;
  const Eigen::VectorXd rhs = Z.transpose() * (y.array() - y_mean).matrix();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  // rcond() alone misses exact zero pivots, so also compare the pivots.
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  const bool degenerate = pivots.size() > 0 && !(pivots.minCoeff() > 1e-12 * pivots.maxCoeff());
  if (ldlt.info() != Eigen::Success || degenerate || ldlt.rcond() < 1e-12)
    throw SolverError("ridge system is singular or ill-conditioned (collinear or constant features); use lambda > 0");
  m.weights = ldlt.solve(rhs);
  if (!m.weights.allFinite()) throw SolverError("ridge solve produced non-finite weights; use lambda > 0");
  m.intercept = y_mean;
  return m;
}

}  // namespace hatescore
