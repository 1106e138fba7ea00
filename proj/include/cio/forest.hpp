#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "cio/model_spec.hpp"
#include "cio/rng.hpp"

namespace cio {

// Flat CART node; leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::VectorXd& x) const {
    int idx = 0;
    while (nodes[idx].feature >= 0)
      idx = x[nodes[idx].feature] < nodes[idx].threshold ? nodes[idx].left : nodes[idx].right;
    return nodes[idx].value;
  }
};

class ForestModel final : public ModelBase {
 public:
  ForestModel(std::vector<Tree> trees, Eigen::Index p) : trees_(std::move(trees)), p_(p) {}

  ModelKind kind() const override { return ModelKind::forest; }
  Eigen::Index p() const override { return p_; }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double acc = 0.0;
      for (const Tree& t : trees_) acc += t.predict_row(X.row(i));
      out[i] = acc / static_cast<double>(trees_.size());
    }
    return out;
  }

  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::vector<Tree> trees_;
  Eigen::Index p_;
};

namespace detail {

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const Eigen::VectorXd& y;
  const Eigen::VectorXd& w;
  const ForestSpec& spec;
  int mtry;
  Rng& rng;
  std::vector<TreeNode> nodes;

  int build(std::vector<int>& idx, int lo, int hi, int depth) {
    double wsum = 0.0, wy = 0.0;
    for (int k = lo; k < hi; ++k) {
      wsum += w[idx[k]];
      wy += w[idx[k]] * y[idx[k]];
    }
    const double mean = wy / wsum;

    int node_id = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{-1, 0.0, -1, -1, mean});
    const int n = hi - lo;
    if (depth >= spec.max_depth || n < 2 * spec.min_leaf) return node_id;

    double sse = 0.0;
    for (int k = lo; k < hi; ++k) sse += w[idx[k]] * (y[idx[k]] - mean) * (y[idx[k]] - mean);
    if (sse <= 1e-12) return node_id;

    // Feature subsample without replacement.
    const int p = static_cast<int>(X.cols());
    std::vector<int> feats(p);
    std::iota(feats.begin(), feats.end(), 0);
    for (int j = 0; j < mtry; ++j) {
      int r = j + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(p - j));
      std::swap(feats[j], feats[r]);
    }

    int best_feat = -1, best_cut = -1;
    double best_gain = 0.0, best_thr = 0.0;
    std::vector<int> order(idx.begin() + lo, idx.begin() + hi);
    std::vector<int> best_order;
    for (int j = 0; j < mtry; ++j) {
      const int f = feats[j];
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return X(a, f) < X(b, f); });
      // Prefix scan of weighted sums; candidate cuts between distinct values.
      double lw = 0.0, ly = 0.0;
      for (int k = 0; k + 1 < n; ++k) {
        lw += w[order[k]];
        ly += w[order[k]] * y[order[k]];
        if (k + 1 < spec.min_leaf || n - k - 1 < spec.min_leaf) continue;
        if (X(order[k], f) == X(order[k + 1], f)) continue;
        const double rw = wsum - lw, ry = wy - ly;
        const double gain = ly * ly / lw + ry * ry / rw - wy * wy / wsum;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feat = f;
          best_cut = k;
          best_thr = 0.5 * (X(order[k], f) + X(order[k + 1], f));
          best_order = order;
        }
      }
    }
    if (best_feat < 0) return node_id;

    std::copy(best_order.begin(), best_order.end(), idx.begin() + lo);
    const int mid = lo + best_cut + 1;
    nodes[node_id].feature = best_feat;
    nodes[node_id].threshold = best_thr;
    int l = build(idx, lo, mid, depth + 1);
    int r = build(idx, mid, hi, depth + 1);
    nodes[node_id].left = l;
    nodes[node_id].right = r;
    return node_id;
  }
};

}  // namespace detail

// Bagged variance-reduction CART ensemble. All randomness (bootstrap draws,
// feature subsets) flows from the seed, tree by tree.
inline FittedModel fit_forest(const ForestSpec& spec, int mtry, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y, std::uint64_t seed,
                              const Eigen::VectorXd* weights) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(n);
  std::vector<Tree> trees;
  trees.reserve(spec.n_trees);
  for (int t = 0; t < spec.n_trees; ++t) {
    Rng rng(derive_seed(seed, "tree", static_cast<std::uint64_t>(t)));
    std::vector<int> idx;
    Eigen::VectorXd wt = Eigen::VectorXd::Zero(n);
    if (spec.bootstrap) {
      for (Eigen::Index i = 0; i < n; ++i) {
        int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
        wt[k] += w[k];
        if (wt[k] == w[k]) idx.push_back(k);
      }
      std::sort(idx.begin(), idx.end());
    } else {
      idx.resize(n);
      std::iota(idx.begin(), idx.end(), 0);
      wt = w;
    }
    detail::TreeBuilder builder{X, y, wt, spec, mtry, rng, {}};
    builder.build(idx, 0, static_cast<int>(idx.size()), 0);
    trees.push_back(Tree{std::move(builder.nodes)});
  }
  return std::make_shared<ForestModel>(std::move(trees), X.cols());
}

}  // namespace cio
