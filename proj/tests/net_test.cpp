#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cio/models.hpp"
#include "cio/rng.hpp"

using namespace cio;

namespace {

ModelSpec net_spec(std::vector<int> widths, int epochs, double step, bool shared) {
  ModelSpec spec;
  spec.kind = ModelKind::net;
  spec.net = NetSpec{std::move(widths), epochs, step, shared};
  return spec;
}

// central finite differences over every parameter
double numeric_grad(NetParams params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::vector<int>& arm, const Eigen::VectorXd& w, double* slot) {
  const double h = 1e-6;
  const double orig = *slot;
  *slot = orig + h;
  const double up = net_loss_grad(params, X, y, arm, w, nullptr);
  *slot = orig - h;
  const double down = net_loss_grad(params, X, y, arm, w, nullptr);
  *slot = orig;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(21);
  const Eigen::Index n = 12, p = 3;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n), w(n);
  std::vector<int> arm;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.normal();
    y[i] = rng.normal();
    w[i] = rng.uniform(0.1, 1.0);
    arm.push_back(static_cast<int>(i % 2));
  }
  NetSpec spec{{5, 4}, 0, 1e-3, true};
  NetParams params = NetParams::init(p, spec, 2, 99);

  NetGrad grad;
  net_loss_grad(params, X, y, arm, w, &grad);

  auto check_slot = [&](double analytic, double* slot) {
    const double numeric = numeric_grad(params, X, y, arm, w, slot);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    CHECK(std::abs(analytic - numeric) / scale < 1e-4);
  };
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    for (Eigen::Index k = 0; k < params.W[l].size(); ++k)
      check_slot(grad.W[l].data()[k], params.W[l].data() + k);
    for (Eigen::Index k = 0; k < params.b[l].size(); ++k)
      check_slot(grad.b[l].data()[k], params.b[l].data() + k);
  }
  for (std::size_t a = 0; a < params.hw.size(); ++a) {
    for (Eigen::Index k = 0; k < params.hw[a].size(); ++k)
      check_slot(grad.hw[a][k], params.hw[a].data() + k);
    check_slot(grad.hb[a], &params.hb[a]);
  }
}

TEST_CASE("training reduces the loss on a learnable target") {
  Rng rng(31);
  const Eigen::Index n = 100;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    y[i] = std::tanh(X(i, 0)) - X(i, 1);
  }
  NetSpec spec{{16}, 500, 5e-2, false};
  NetParams params = NetParams::init(2, spec, 1, 7);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const double before = net_loss_grad(params, X, y, {}, w, nullptr);
  net_train(params, X, y, {}, w, spec.epochs, spec.step_size);
  const double after = net_loss_grad(params, X, y, {}, w, nullptr);
  CHECK(after < 0.2 * before);
}

TEST_CASE("zero-epoch warm start is a prediction no-op") {
  Rng rng(41);
  Eigen::MatrixXd X(30, 2);
  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    y[i] = X(i, 0);
  }
  auto base = fit(net_spec({8}, 50, 1e-2, false), X, y, 5);
  auto warm = warm_start_of(base);
  auto again = fit(net_spec({8}, 0, 1e-2, false), X, y, 123, &warm);
  CHECK((predict(base, X) - predict(again, X)).norm() == 0.0);
}

TEST_CASE("warm start state survives the original model's further use") {
  // deep-copy semantics: refitting from a snapshot must not mutate the source
  Rng rng(43);
  Eigen::MatrixXd X(20, 1);
  Eigen::VectorXd y(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    X(i, 0) = rng.normal();
    y[i] = 2.0 * X(i, 0);
  }
  auto base = fit(net_spec({6}, 100, 1e-2, false), X, y, 1);
  Eigen::VectorXd before = predict(base, X);
  auto warm = warm_start_of(base);
  (void)fit(net_spec({6}, 200, 1e-2, false), X, y, 2, &warm);
  CHECK((predict(base, X) - before).norm() == 0.0);
}

TEST_CASE("same seed reproduces the fit exactly") {
  Rng rng(51);
  Eigen::MatrixXd X(40, 3);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = rng.normal();
    y[i] = rng.normal();
  }
  auto spec = net_spec({10, 10}, 40, 1e-3, false);
  CHECK((predict(fit(spec, X, y, 9), X) - predict(fit(spec, X, y, 9), X)).norm() == 0.0);
}

TEST_CASE("shared trunk pair routes rows through per-arm heads") {
  // arm 1 learns y = +3, arm 0 learns y = -3 over the same x
  Rng rng(61);
  const Eigen::Index n = 60;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  std::vector<int> arm;
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    arm.push_back(static_cast<int>(i % 2));
    y[i] = arm.back() == 1 ? 3.0 : -3.0;
  }
  auto spec = net_spec({8}, 3000, 1e-1, true);
  PairFit pair = fit_arm_pair(spec, X, y, arm, w, 17);
  const auto* m1 = dynamic_cast<const NetModel*>(pair.m1.get());
  const auto* m0 = dynamic_cast<const NetModel*>(pair.m0.get());
  REQUIRE(m1 != nullptr);
  REQUIRE(m0 != nullptr);
  CHECK(m1->shared_params() == m0->shared_params());  // one trunk
  Eigen::MatrixXd probe(1, 1);
  probe << 0.3;
  CHECK(predict(pair.m1, probe)(0) == doctest::Approx(3.0).epsilon(0.05));
  CHECK(predict(pair.m0, probe)(0) == doctest::Approx(-3.0).epsilon(0.05));
}

TEST_CASE("weight normalization keeps the gradient scale sample-size free") {
  // identical data duplicated 10x must give the same fit as the original
  Rng rng(71);
  Eigen::MatrixXd X(10, 1);
  Eigen::VectorXd y(10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    X(i, 0) = rng.normal();
    y[i] = X(i, 0);
  }
  Eigen::MatrixXd X10(100, 1);
  Eigen::VectorXd y10(100);
  for (int rep = 0; rep < 10; ++rep) {
    X10.middleRows(rep * 10, 10) = X;
    y10.segment(rep * 10, 10) = y;
  }
  auto spec = net_spec({4}, 200, 1e-2, false);
  auto a = fit(spec, X, y, 3);
  auto b = fit(spec, X10, y10, 3);
  CHECK((predict(a, X) - predict(b, X)).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("spec validation") {
  Eigen::MatrixXd X(5, 1);
  X.setRandom();
  Eigen::VectorXd y = X.col(0);
  CHECK_THROWS_AS(fit(net_spec({}, 10, 1e-3, false), X, y, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit(net_spec({4}, -1, 1e-3, false), X, y, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit(net_spec({4}, 10, 0.0, false), X, y, 0), std::invalid_argument);
}
