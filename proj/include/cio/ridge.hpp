#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "cio/model_spec.hpp"

namespace cio {

class RidgeModel final : public ModelBase {
 public:
  RidgeModel(Eigen::VectorXd w, double b) : w_(std::move(w)), b_(b) {}

  ModelKind kind() const override { return ModelKind::ridge; }
  Eigen::Index p() const override { return w_.size(); }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return (X * w_).array() + b_;
  }

  const Eigen::VectorXd& coefficients() const { return w_; }
  double intercept() const { return b_; }

 private:
  Eigen::VectorXd w_;
  double b_;
};

// Exact minimizer of sum_i w_i (y_i - x_i'w - b)^2 + lambda ||w||^2 with an
// unpenalized intercept. Sample weights are normalized to sum to n so the
// penalty keeps the scale of the unweighted problem; the unweighted case is
// plainly ||y - Xw - b||^2 + lambda ||w||^2. The solve runs on centered,
// scaled columns (penalty transformed to match) and maps back to raw scale.
inline FittedModel fit_ridge(const RidgeSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, const Eigen::VectorXd* weights) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(n);
  const double wsum = w.sum();
  if (wsum <= 0) throw std::invalid_argument("fit_ridge: weights must have positive sum");
  w *= static_cast<double>(n) / wsum;

  const Eigen::VectorXd xbar = (X.transpose() * w) / static_cast<double>(n);
  const double ybar = y.dot(w) / static_cast<double>(n);
  Eigen::MatrixXd Xc = X.rowwise() - xbar.transpose();
  Eigen::VectorXd yc = y.array() - ybar;

  // Column scales for conditioning; constant columns stay at coefficient 0.
  Eigen::VectorXd scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double ss = (Xc.col(j).array().square() * w.array()).sum() / static_cast<double>(n);
    scale[j] = ss > 0 ? std::sqrt(ss) : 1.0;
    Xc.col(j) /= scale[j];
  }

  // Penalty on raw-scale coefficients: lambda * (w_raw_j)^2 = lambda / s_j^2 * (w_scaled_j)^2.
  const Eigen::VectorXd sw = w.array().sqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * Xc;
  const Eigen::VectorXd yw = sw.asDiagonal() * yc;
  Eigen::MatrixXd A = Xw.transpose() * Xw;
  for (Eigen::Index j = 0; j < p; ++j) A(j, j) += spec.lambda / (scale[j] * scale[j]);
  Eigen::VectorXd rhs = Xw.transpose() * yw;

  Eigen::VectorXd ws = A.ldlt().solve(rhs);
  // Rank-deficient unpenalized solves fall back to the minimum-norm solution.
  if (spec.lambda == 0.0 && !((A * ws - rhs).norm() <= 1e-8 * (rhs.norm() + 1.0)))
    ws = Xw.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(yw);

  Eigen::VectorXd w_raw = ws.array() / scale.array();
  double b = ybar - xbar.dot(w_raw);
  return std::make_shared<RidgeModel>(std::move(w_raw), b);
}

}  // namespace cio
