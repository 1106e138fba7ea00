#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cio/dataset.hpp"
#include "cio/models.hpp"

namespace cio {

// Pair of outcome regressors whose signed difference is the HTE estimate.
// sign = -1 when the pair was fitted on inverted treatments, so estimates
// still refer to the original assignment. RHC carries an extra linear
// correction term on top of the pair difference.
struct EffectModel {
  FittedModel f1;
  FittedModel f0;
  int sign = +1;
  std::string method;
  Eigen::VectorXd corr_w;  // RHC linear correction; empty otherwise
  double corr_b = 0.0;
};

struct ConfoundingModel {
  FittedModel p1;
  FittedModel p0;

  Eigen::VectorXd tau_c(const Eigen::MatrixXd& X) const {
    return predict(p1, X) - predict(p0, X);
  }
};

inline Eigen::VectorXd estimate_effects(const EffectModel& em, const Eigen::MatrixXd& X) {
  Eigen::VectorXd est = static_cast<double>(em.sign) * (predict(em.f1, X) - predict(em.f0, X));
  if (em.corr_w.size() > 0) est += (X * em.corr_w).array().matrix() + Eigen::VectorXd::Constant(X.rows(), em.corr_b);
  return est;
}

// Sum of per-group mean squared residuals -- the weighting the stage
// objectives are written in (not a pooled mean).
inline double group_mean_loss(const std::vector<Eigen::VectorXd>& group_residuals) {
  double loss = 0.0;
  for (const Eigen::VectorXd& r : group_residuals) {
    if (r.size() == 0) continue;  // empty groups drop out of the objective
    loss += r.squaredNorm() / static_cast<double>(r.size());
  }
  return loss;
}

namespace detail {

struct Stacked {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> arm;
  Eigen::VectorXd w;
};

// Stacks (dataset, arm, per-unit weight) groups into aligned fit inputs.
inline Stacked stack(const std::vector<std::pair<const Dataset*, int>>& groups,
                     bool group_mean_weights) {
  std::size_t total = 0;
  Eigen::Index p = 0;
  for (auto& [ds, a] : groups) {
    total += ds->size();
    if (ds->p() > 0) p = ds->p();
  }
  Stacked s;
  s.X.resize(static_cast<Eigen::Index>(total), p);
  s.y.resize(static_cast<Eigen::Index>(total));
  s.w.resize(static_cast<Eigen::Index>(total));
  s.arm.reserve(total);
  Eigen::Index row = 0;
  for (auto& [ds, a] : groups) {
    const double w = ds->empty() || !group_mean_weights ? 1.0 : 1.0 / static_cast<double>(ds->size());
    for (const Unit& unit : ds->units()) {
      s.X.row(row) = unit.x;
      s.y[row] = unit.y;
      s.w[row] = w;
      s.arm.push_back(a);
      ++row;
    }
  }
  return s;
}

}  // namespace detail

// Plain T-learner: f1 on the treated group, f0 on the control group.
inline EffectModel fit_t_learner(const Dataset& treated, const Dataset& control,
                                 const ModelSpec& spec, std::uint64_t seed,
                                 bool group_mean_weights = false) {
  if (treated.empty()) throw std::invalid_argument("fit_t_learner: treated arm empty");
  if (control.empty()) throw std::invalid_argument("fit_t_learner: control arm empty");
  auto s = detail::stack({{&treated, 1}, {&control, 0}}, group_mean_weights);
  PairFit pair = fit_arm_pair(spec, s.X, s.y, s.arm, s.w, seed);
  return {pair.m1, pair.m0, +1, "t_learner", {}, 0.0};
}

// Stage 1: p1 on the pseudo-experimental group (OS treated, D = 1), p0 on all
// RCT units (D = 0) with the per-group-mean loss over the two RCT arms.
inline ConfoundingModel fit_stage1(const Dataset& os_treated, const Dataset& rct_all,
                                   const ModelSpec& spec, std::uint64_t seed) {
  if (os_treated.empty()) throw std::invalid_argument("fit_stage1: pseudo-experimental group empty");
  if (rct_all.empty()) throw std::invalid_argument("fit_stage1: pseudo-control group empty");
  Partition rct = partition(rct_all);
  auto s = detail::stack({{&os_treated, 1}, {&rct.rct_treated, 0}, {&rct.rct_control, 0}}, true);
  PairFit pair = fit_arm_pair(spec, s.X, s.y, s.arm, s.w, seed);
  return {pair.m1, pair.m0};
}

// Corrected outcome: OS treated units get y - tau_c(x); everything else is
// passed through unchanged (D = T(1-S) annihilates the correction).
inline Dataset correct_outcomes(const Dataset& os, const ConfoundingModel& cm) {
  if (cm.p1 && cm.p1->p() != os.p())
    throw std::invalid_argument("correct_outcomes: dimension mismatch");
  std::vector<Unit> out;
  out.reserve(os.size());
  for (Unit unit : os.units()) {
    if (pseudo_label(unit) == 1) {
      Eigen::MatrixXd x(1, os.p());
      x.row(0) = unit.x;
      unit.y -= cm.tau_c(x)[0];
      // The correction shifts the observed outcome away from its potential
      // outcome, so carried ground truth no longer satisfies the unit
      // invariant; drop it rather than store an inconsistent trio.
      unit.y0_true.reset();
      unit.y1_true.reset();
      unit.tau_true.reset();
    }
    out.push_back(std::move(unit));
  }
  return Dataset(std::move(out), os.p());
}

// Stage 2: f1 over corrected OS treated + RCT treated, f0 over OS controls +
// RCT controls, both with the per-group-mean weighting; empty groups drop out
// of the objective. f1 is warm-started from stage 1's p1; for the net, f0 is
// pre-trained on the pooled control data for stage 1's epoch count.
inline EffectModel fit_stage2(const Dataset& os_corrected, const Dataset& rct,
                              const ModelSpec& spec, std::uint64_t seed,
                              const ConfoundingModel& warm, bool pooled_mean = false) {
  Partition os = partition(os_corrected);
  Partition r = partition(rct);
  if (os.os_treated.empty() && r.rct_treated.empty())
    throw std::invalid_argument("fit_stage2: no treated units anywhere");
  if (os.os_control.empty() && r.rct_control.empty())
    throw std::invalid_argument("fit_stage2: no control units anywhere");

  auto s = detail::stack({{&os.os_treated, 1},
                          {&r.rct_treated, 1},
                          {&os.os_control, 0},
                          {&r.rct_control, 0}},
                         !pooled_mean);

  PairOptions opts;
  opts.warm1 = warm.p1 ? &warm.p1 : nullptr;
  Eigen::MatrixXd pre_X;
  Eigen::VectorXd pre_y;
  if (spec.kind == ModelKind::net) {
    Dataset controls = merge(os.os_control, r.rct_control);
    if (!controls.empty()) {
      pre_X = controls.covariates();
      pre_y = controls.outcomes();
      opts.pretrain0_X = &pre_X;
      opts.pretrain0_y = &pre_y;
      opts.pretrain0_epochs = spec.net.epochs;
    }
  }
  PairFit pair = fit_arm_pair(spec, s.X, s.y, s.arm, s.w, seed, opts);
  return {pair.m1, pair.m0, +1, "cio_stage2", {}, 0.0};
}

// Two-stage CIO. When the OS treated arm is missing and inversion is enabled,
// both inputs are inverted, the pipeline runs in the flipped world and the
// returned model carries sign = -1 so estimates refer to the original
// treatment.
inline EffectModel fit_cio(const Dataset& os, const Dataset& rct, const ModelSpec& spec,
                           std::uint64_t seed, bool invert_if_treated_missing = true,
                           bool pooled_mean = false) {
  if (os.empty()) throw std::invalid_argument("fit_cio: OS data empty (use SF_RCT instead)");
  if (rct.n_t() == 0 || rct.n_c() == 0)
    throw std::invalid_argument("fit_cio: RCT must contain both arms");

  if (os.m_t() == 0) {
    if (!invert_if_treated_missing)
      throw std::invalid_argument("fit_cio: OS treated arm empty and inversion disabled");
    EffectModel em = fit_cio(invert_treatments(os), invert_treatments(rct), spec, seed,
                             /*invert_if_treated_missing=*/false, pooled_mean);
    em.sign = -em.sign;
    em.method = "cio_inverted";
    return em;
  }

  Partition osp = partition(os);
  ConfoundingModel cm = fit_stage1(osp.os_treated, rct, spec, derive_seed(seed, "stage1"));
  Dataset corrected = correct_outcomes(os, cm);
  EffectModel em = fit_stage2(corrected, rct, spec, derive_seed(seed, "stage2"), cm, pooled_mean);
  em.method = "cio";
  return em;
}

// RHC-style baseline: biased T-learner on the complete OS data, then a linear
// correction fitted on RCT Horvitz-Thompson pseudo-effects.
inline EffectModel fit_rhc(const Dataset& os, const Dataset& rct, const ModelSpec& spec,
                           double rct_propensity, std::uint64_t seed) {
  if (os.m_t() == 0 || os.m_c() == 0)
    throw std::invalid_argument("fit_rhc: requires complete OS data (both arms)");
  if (!(rct_propensity > 0.0 && rct_propensity < 1.0))
    throw std::invalid_argument("fit_rhc: rct_propensity must be in (0,1)");

  Partition osp = partition(os);
  EffectModel tau_os =
      fit_t_learner(osp.os_treated, osp.os_control, spec, derive_seed(seed, "rhc-os"));

  const double e = rct_propensity;
  const Eigen::Index n = static_cast<Eigen::Index>(rct.size());
  Eigen::MatrixXd X = rct.covariates();
  Eigen::VectorXd resid(n);
  Eigen::VectorXd tau_hat = estimate_effects(tau_os, X);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Unit& unit = rct[static_cast<std::size_t>(i)];
    const double psi = (unit.t - e) / (e * (1.0 - e)) * unit.y;
    resid[i] = psi - tau_hat[i];
  }

  // OLS of the pseudo-effect residual on (1, x).
  Eigen::MatrixXd Z(n, X.cols() + 1);
  Z.col(0).setOnes();
  Z.rightCols(X.cols()) = X;
  Eigen::VectorXd theta = (Z.transpose() * Z).ldlt().solve(Z.transpose() * resid);

  EffectModel em = tau_os;
  em.method = "rhc";
  em.corr_b = theta[0];
  em.corr_w = theta.tail(X.cols());
  return em;
}

}  // namespace cio
