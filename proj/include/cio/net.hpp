#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "cio/model_spec.hpp"
#include "cio/rng.hpp"

namespace cio {

// Fully-connected tanh trunk with one or two linear output heads. A two-head
// net is the shared-representation ("TARNet-style") variant: each sample's
// loss flows through the head named by its arm.
struct NetParams {
  std::vector<Eigen::MatrixXd> W;   // trunk weights, layer l: (width_l x width_{l-1})
  std::vector<Eigen::VectorXd> b;   // trunk biases
  std::vector<Eigen::VectorXd> hw;  // head weights (1 or 2)
  std::vector<double> hb;           // head biases

  Eigen::Index input_dim() const { return W.front().cols(); }

  static NetParams init(Eigen::Index p, const NetSpec& spec, int n_heads, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "net-init"));
    NetParams params;
    Eigen::Index in = p;
    for (int width : spec.hidden_widths) {
      Eigen::MatrixXd W(width, in);
      for (Eigen::Index i = 0; i < W.size(); ++i)
        W.data()[i] = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
      params.W.push_back(std::move(W));
      params.b.push_back(Eigen::VectorXd::Zero(width));
      in = width;
    }
    for (int h = 0; h < n_heads; ++h) {
      Eigen::VectorXd hw(in);
      for (Eigen::Index i = 0; i < in; ++i)
        hw[i] = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
      params.hw.push_back(std::move(hw));
      params.hb.push_back(0.0);
    }
    return params;
  }

  // Trunk activations per layer; out[l] is n x width_l.
  std::vector<Eigen::MatrixXd> forward_trunk(const Eigen::MatrixXd& X) const {
    std::vector<Eigen::MatrixXd> h;
    h.reserve(W.size());
    Eigen::MatrixXd cur = X;
    for (std::size_t l = 0; l < W.size(); ++l) {
      cur = ((cur * W[l].transpose()).rowwise() + b[l].transpose()).array().tanh().matrix();
      h.push_back(cur);
    }
    return h;
  }

  Eigen::VectorXd predict_head(const Eigen::MatrixXd& X, const std::vector<int>& arm) const {
    const Eigen::MatrixXd h = forward_trunk(X).back();
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int a = arm.empty() ? 0 : arm[static_cast<std::size_t>(i)];
      out[i] = h.row(i).dot(hw[a]) + hb[a];
    }
    return out;
  }
};

struct NetGrad {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
  std::vector<Eigen::VectorXd> hw;
  std::vector<double> hb;
};

// Loss and analytic gradient of L = sum_i w_i (f_{arm_i}(x_i) - y_i)^2.
inline double net_loss_grad(const NetParams& params, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& y, const std::vector<int>& arm,
                            const Eigen::VectorXd& w, NetGrad* grad) {
  const Eigen::Index n = X.rows();
  const std::size_t L = params.W.size();
  const auto h = params.forward_trunk(X);

  Eigen::VectorXd pred(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = arm.empty() ? 0 : arm[static_cast<std::size_t>(i)];
    pred[i] = h[L - 1].row(i).dot(params.hw[a]) + params.hb[a];
  }
  const Eigen::VectorXd r = pred - y;
  const double loss = (w.array() * r.array().square()).sum();
  if (!grad) return loss;

  grad->W.assign(L, {});
  grad->b.assign(L, {});
  grad->hw.assign(params.hw.size(), Eigen::VectorXd::Zero(params.hw[0].size()));
  grad->hb.assign(params.hb.size(), 0.0);

  const Eigen::VectorXd dpred = 2.0 * (w.array() * r.array()).matrix();
  Eigen::MatrixXd delta(n, params.hw[0].size());  // dL/dh_last
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = arm.empty() ? 0 : arm[static_cast<std::size_t>(i)];
    (*grad).hw[a] += dpred[i] * h[L - 1].row(i).transpose();
    (*grad).hb[a] += dpred[i];
    delta.row(i) = dpred[i] * params.hw[a].transpose();
  }

  for (std::size_t l = L; l-- > 0;) {
    // tanh' = 1 - h^2
    Eigen::MatrixXd dz = delta.array() * (1.0 - h[l].array().square());
    const Eigen::MatrixXd& prev = l == 0 ? X : h[l - 1];
    grad->W[l] = dz.transpose() * prev;
    grad->b[l] = dz.colwise().sum().transpose();
    if (l > 0) delta = dz * params.W[l];
  }
  return loss;
}

inline void net_gd_step(NetParams& params, const NetGrad& grad, double step) {
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    params.W[l] -= step * grad.W[l];
    params.b[l] -= step * grad.b[l];
  }
  for (std::size_t a = 0; a < params.hw.size(); ++a) {
    params.hw[a] -= step * grad.hw[a];
    params.hb[a] -= step * grad.hb[a];
  }
}

// Full-batch fixed-step gradient descent; heads_frozen / trunk_frozen let the
// stage-2 pre-training rules touch only part of the parameter set.
inline void net_train(NetParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<int>& arm, const Eigen::VectorXd& w, int epochs,
                      double step, bool trunk_frozen = false) {
  NetGrad grad;
  for (int e = 0; e < epochs; ++e) {
    net_loss_grad(params, X, y, arm, w, &grad);
    if (trunk_frozen) {
      for (auto& g : grad.W) g.setZero();
      for (auto& g : grad.b) g.setZero();
    }
    net_gd_step(params, grad, step);
  }
}

class NetModel final : public ModelBase {
 public:
  NetModel(std::shared_ptr<const NetParams> params, int head, NetSpec spec)
      : params_(std::move(params)), head_(head), spec_(std::move(spec)) {}

  ModelKind kind() const override { return ModelKind::net; }
  Eigen::Index p() const override { return params_->input_dim(); }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return params_->predict_head(X, std::vector<int>(static_cast<std::size_t>(X.rows()), head_));
  }

  const NetParams& params() const { return *params_; }
  std::shared_ptr<const NetParams> shared_params() const { return params_; }
  int head() const { return head_; }
  const NetSpec& spec() const { return spec_; }

 private:
  std::shared_ptr<const NetParams> params_;
  int head_;
  NetSpec spec_;
};

inline FittedModel fit_net(const NetSpec& spec, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& y, std::uint64_t seed,
                           const Eigen::VectorXd* weights, const NetModel* warm) {
  const Eigen::Index n = X.rows();
  // Weights are normalized to sum to 1 so the loss is a weighted mean squared
  // error regardless of sample count; relative group weighting is preserved
  // and the stated step size keeps a sane scale.
  Eigen::VectorXd w = weights ? Eigen::VectorXd(*weights / weights->sum())
                              : Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  NetParams params;
  if (warm) {
    params = warm->params();
    // Collapse to the warm model's own head so training stays single-output.
    params.hw = {params.hw[static_cast<std::size_t>(warm->head())]};
    params.hb = {params.hb[static_cast<std::size_t>(warm->head())]};
  } else {
    params = NetParams::init(X.cols(), spec, 1, seed);
  }
  net_train(params, X, y, {}, w, spec.epochs, spec.step_size);
  return std::make_shared<NetModel>(std::make_shared<NetParams>(std::move(params)), 0, spec);
}

}  // namespace cio
