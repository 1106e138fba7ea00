#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cio/models.hpp"
#include "cio/rng.hpp"

using namespace cio;

namespace {

ModelSpec ridge_spec(double lambda) {
  ModelSpec spec;
  spec.kind = ModelKind::ridge;
  spec.ridge.lambda = lambda;
  return spec;
}

}  // namespace

TEST_CASE("unpenalized fit recovers an exact linear relation") {
  // y = 2x, lambda = 0 -> w = 2, b = 0
  Eigen::MatrixXd X(3, 1);
  X << 1.0, 2.0, 3.0;
  Eigen::VectorXd y = 2.0 * X.col(0);
  auto m = fit(ridge_spec(0.0), X, y, 0);
  const auto* rm = dynamic_cast<const RidgeModel*>(m.get());
  REQUIRE(rm != nullptr);
  CHECK(rm->coefficients()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rm->intercept() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("huge penalty shrinks to the mean-only model") {
  Eigen::MatrixXd X(4, 1);
  X << 1.0, 2.0, 3.0, 4.0;
  Eigen::VectorXd y(4);
  y << 2.0, 4.0, 4.0, 6.0;  // mean 4
  auto m = fit(ridge_spec(1e9), X, y, 0);
  const auto* rm = dynamic_cast<const RidgeModel*>(m.get());
  CHECK(std::abs(rm->coefficients()[0]) < 1e-6);
  CHECK(rm->intercept() == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("first-order optimality of the raw-coordinate objective") {
  // gradient of sum_i w_i (y_i - x_i'w - b)^2 + lambda ||w||^2 at the solution
  Rng rng(3);
  const Eigen::Index n = 80, p = 4;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.normal();
    y[i] = X(i, 0) - 2.0 * X(i, 2) + 0.5 + rng.normal();
    w[i] = rng.uniform(0.2, 2.0);
  }
  const double lambda = 1.7;
  RidgeSpec spec{lambda};
  auto m = fit_ridge(spec, X, y, &w);
  const auto* rm = dynamic_cast<const RidgeModel*>(m.get());

  // the solver normalizes the weights to sum n; the optimality condition is
  // stated in those units
  Eigen::VectorXd wn = w * (static_cast<double>(n) / w.sum());
  Eigen::VectorXd r = y - X * rm->coefficients() - Eigen::VectorXd::Constant(n, rm->intercept());
  Eigen::VectorXd grad_w =
      -2.0 * X.transpose() * (wn.asDiagonal() * r) + 2.0 * lambda * rm->coefficients();
  double grad_b = -2.0 * wn.dot(r);
  CHECK(grad_w.lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(std::abs(grad_b) < 1e-8);
}

TEST_CASE("weights shift the fit toward the heavy samples") {
  // two clusters with contradictory labels; all weight on the first cluster
  Eigen::MatrixXd X(4, 1);
  X << 0.0, 0.0, 1.0, 1.0;
  Eigen::VectorXd y(4);
  y << 1.0, 1.0, 5.0, -5.0;
  Eigen::VectorXd w(4);
  w << 1.0, 1.0, 1e-9, 1e-9;
  RidgeSpec spec{0.0};
  auto m = fit_ridge(spec, X, y, &w);
  // nearly all mass at x=0, y=1
  CHECK(predict(m, X)(0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("rank-deficient unpenalized solve stays finite (minimum norm)") {
  Eigen::MatrixXd X(3, 2);
  X << 1.0, 1.0, 2.0, 2.0, 3.0, 3.0;  // duplicated column
  Eigen::VectorXd y(3);
  y << 2.0, 4.0, 6.0;
  auto m = fit(ridge_spec(0.0), X, y, 0);
  Eigen::VectorXd pred = predict(m, X);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-8));
}

TEST_CASE("closed form ignores seed and warm start bit-identically") {
  Rng rng(9);
  Eigen::MatrixXd X(20, 3);
  Eigen::VectorXd y(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = rng.normal();
    y[i] = rng.normal();
  }
  auto a = fit(ridge_spec(1.0), X, y, 1);
  auto b = fit(ridge_spec(1.0), X, y, 999);
  auto warm = warm_start_of(a);
  auto c = fit(ridge_spec(1.0), X, y, 5, &warm);
  Eigen::MatrixXd probe = X.topRows(5);
  CHECK((predict(a, probe) - predict(b, probe)).norm() == 0.0);
  CHECK((predict(a, probe) - predict(c, probe)).norm() == 0.0);
}

TEST_CASE("input validation") {
  Eigen::MatrixXd X(2, 1);
  X << 1.0, 2.0;
  Eigen::VectorXd y(2);
  y << 1.0, 2.0;
  CHECK_THROWS_AS(fit(ridge_spec(-1.0), X, y, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit(ridge_spec(1.0), Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), 0),
                  std::invalid_argument);
  Eigen::VectorXd bad = y;
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(fit(ridge_spec(1.0), X, bad, 0), "non-finite outcome at row 1",
                       std::invalid_argument);
  auto m = fit(ridge_spec(1.0), X, y, 0);
  CHECK_THROWS_AS(predict(m, Eigen::MatrixXd(1, 2)), std::invalid_argument);
  CHECK(predict(m, Eigen::MatrixXd(0, 1)).size() == 0);
}
