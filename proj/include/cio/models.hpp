#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "cio/forest.hpp"
#include "cio/model_spec.hpp"
#include "cio/net.hpp"
#include "cio/ridge.hpp"

namespace cio {

// Uniform fit entry point. Weights, when given, scale the per-sample squared
// errors; the fuse layer uses them to realize the per-group-mean objectives.
inline FittedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::uint64_t seed, const FittedModel* warm_start = nullptr,
                       const Eigen::VectorXd* weights = nullptr) {
  if (X.rows() == 0) throw std::invalid_argument("fit: empty training set");
  if (X.rows() != y.size()) throw std::invalid_argument("fit: X and y are not row-aligned");
  spec.validate(X.cols());
  check_finite(X, y);
  if (warm_start && *warm_start) {
    if ((*warm_start)->kind() != spec.kind)
      throw std::invalid_argument("fit: warm start has a different model kind");
    if ((*warm_start)->p() != X.cols())
      throw std::invalid_argument("fit: warm start has a different input dimension");
  }

  switch (spec.kind) {
    case ModelKind::ridge:
      // Closed form; initialization is irrelevant.
      return fit_ridge(spec.ridge, X, y, weights);
    case ModelKind::forest:
      // No parameter notion to warm-start; this is a documented refit.
      return fit_forest(spec.forest, spec.effective_mtry(X.cols()), X, y, seed, weights);
    case ModelKind::net: {
      const NetModel* warm =
          warm_start && *warm_start ? dynamic_cast<const NetModel*>(warm_start->get()) : nullptr;
      return fit_net(spec.net, X, y, seed, weights, warm);
    }
  }
  throw std::logic_error("fit: unreachable");
}

// Snapshot usable as initialization for a later fit. Models are immutable, so
// sharing the underlying parameters is a faithful deep copy.
inline FittedModel warm_start_of(const FittedModel& model) { return model; }

struct PairFit {
  FittedModel m1;  // arm-1 regressor
  FittedModel m0;  // arm-0 regressor
};

struct PairOptions {
  const FittedModel* warm1 = nullptr;  // initial values for the arm-1 model
  // Pooled control data for the net's f0 pre-training rule; epochs match stage 1.
  const Eigen::MatrixXd* pretrain0_X = nullptr;
  const Eigen::VectorXd* pretrain0_y = nullptr;
  int pretrain0_epochs = 0;
};

namespace detail {

inline PairFit fit_pair_separate(const ModelSpec& spec, const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, const std::vector<int>& arm,
                                 const Eigen::VectorXd& weights, std::uint64_t seed,
                                 const PairOptions& opts) {
  std::vector<Eigen::Index> i1, i0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    (arm[static_cast<std::size_t>(i)] == 1 ? i1 : i0).push_back(i);
  auto gather = [&](const std::vector<Eigen::Index>& idx, Eigen::MatrixXd& Xs,
                    Eigen::VectorXd& ys, Eigen::VectorXd& ws) {
    Xs.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
    ys.resize(static_cast<Eigen::Index>(idx.size()));
    ws.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Xs.row(static_cast<Eigen::Index>(k)) = X.row(idx[k]);
      ys[static_cast<Eigen::Index>(k)] = y[idx[k]];
      ws[static_cast<Eigen::Index>(k)] = weights[idx[k]];
    }
  };

  Eigen::MatrixXd X1, X0;
  Eigen::VectorXd y1, y0, w1, w0;
  gather(i1, X1, y1, w1);
  gather(i0, X0, y0, w0);

  FittedModel m1 = fit(spec, X1, y1, derive_seed(seed, "arm1"), opts.warm1, &w1);

  FittedModel m0;
  if (spec.kind == ModelKind::net && opts.pretrain0_X && opts.pretrain0_epochs > 0) {
    NetSpec pre = spec.net;
    pre.epochs = opts.pretrain0_epochs;
    FittedModel base = fit_net(pre, *opts.pretrain0_X, *opts.pretrain0_y,
                               derive_seed(seed, "arm0-pre"), nullptr, nullptr);
    m0 = fit(spec, X0, y0, derive_seed(seed, "arm0"), &base, &w0);
  } else {
    m0 = fit(spec, X0, y0, derive_seed(seed, "arm0"), nullptr, &w0);
  }
  return {std::move(m1), std::move(m0)};
}

inline PairFit fit_pair_shared_net(const ModelSpec& spec, const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& y, const std::vector<int>& arm,
                                   const Eigen::VectorXd& weights, std::uint64_t seed,
                                   const PairOptions& opts) {
  const NetSpec& net = spec.net;
  NetParams params;
  const NetModel* warm1 =
      opts.warm1 && *opts.warm1 ? dynamic_cast<const NetModel*>(opts.warm1->get()) : nullptr;
  if (warm1) {
    // Adopt the warm model's trunk and its head as head 1; head 0 restarts.
    params = warm1->params();
    NetParams fresh = NetParams::init(X.cols(), net, 2, derive_seed(seed, "head0"));
    Eigen::VectorXd h1 = params.hw[static_cast<std::size_t>(warm1->head())];
    double b1 = params.hb[static_cast<std::size_t>(warm1->head())];
    params.hw = {h1, fresh.hw[1]};
    params.hb = {b1, fresh.hb[1]};
  } else {
    params = NetParams::init(X.cols(), net, 2, seed);
  }

  // Same normalization as fit_net: the joint loss is a weighted mean.
  Eigen::VectorXd wn = weights / weights.sum();

  if (opts.pretrain0_X && opts.pretrain0_epochs > 0) {
    // Pre-train head 0 on pooled controls, trunk frozen so head 1's warm
    // start survives.
    const Eigen::Index k = opts.pretrain0_X->rows();
    Eigen::VectorXd wpre = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    std::vector<int> arm0(static_cast<std::size_t>(k), 0);
    net_train(params, *opts.pretrain0_X, *opts.pretrain0_y, arm0, wpre, opts.pretrain0_epochs,
              net.step_size, /*trunk_frozen=*/warm1 != nullptr);
  }

  net_train(params, X, y, arm, wn, net.epochs, net.step_size);
  auto shared = std::make_shared<NetParams>(std::move(params));
  return {std::make_shared<NetModel>(shared, 1, net), std::make_shared<NetModel>(shared, 0, net)};
}

}  // namespace detail

// Fits the (arm-1, arm-0) regressor pair on arm-labeled rows. For ridge,
// forest and a plain net this is two independent weighted fits; a shared_rep
// net trains one trunk with two heads jointly.
inline PairFit fit_arm_pair(const ModelSpec& spec, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& y, const std::vector<int>& arm,
                            const Eigen::VectorXd& weights, std::uint64_t seed,
                            const PairOptions& opts = {}) {
  if (static_cast<Eigen::Index>(arm.size()) != X.rows() || X.rows() != y.size() ||
      weights.size() != X.rows())
    throw std::invalid_argument("fit_arm_pair: misaligned inputs");
  std::size_t n1 = 0;
  for (int a : arm) {
    if (a != 0 && a != 1) throw std::invalid_argument("fit_arm_pair: arm flags must be binary");
    n1 += static_cast<std::size_t>(a);
  }
  if (n1 == 0) throw std::invalid_argument("fit_arm_pair: treated arm empty");
  if (n1 == arm.size()) throw std::invalid_argument("fit_arm_pair: control arm empty");
  spec.validate(X.cols());
  check_finite(X, y);

  if (spec.kind == ModelKind::net && spec.net.shared_rep)
    return detail::fit_pair_shared_net(spec, X, y, arm, weights, seed, opts);
  return detail::fit_pair_separate(spec, X, y, arm, weights, seed, opts);
}

}  // namespace cio
