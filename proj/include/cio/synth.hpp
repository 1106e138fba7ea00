#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cio/dataset.hpp"
#include "cio/rng.hpp"

namespace cio {

struct SimulationConfig {
  int p = 5;
  int n_rct = 200;
  int n_os = 3000;
  int n_test = 1000;
  double beta = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (p < 1) throw std::invalid_argument("simulation: p must be >= 1");
    if (n_rct < 1 || n_os < 1 || n_test < 1)
      throw std::invalid_argument("simulation: sample counts must be positive");
  }
};

struct FusionSplit {
  Dataset os;
  Dataset rct;
  Dataset test;
};

// ---- Simulation DGP ------------------------------------------------------

inline double sim_tau(const Eigen::VectorXd& x) {
  return 1.0 + x.sum() + x.squaredNorm();
}

// Baseline common to both sources: 1 + 2*sum x^3 + sum x (no U term).
inline double sim_baseline(const Eigen::VectorXd& x) {
  return 1.0 + 2.0 * x.array().cube().sum() + x.sum();
}

// Analytic confounding function of the OS arms: the treated and control U
// means sit at +/- beta * sum(x), so the arm gap beyond tau is 10*beta*sum(x).
inline double sim_confounding(const Eigen::VectorXd& x, double beta) {
  return 10.0 * beta * x.sum();
}

// Exact conditional mean E[Y | x, t, s] under the DGP, U marginalized given
// the assigned treatment. Used by the residual-invariant checks.
inline double sim_conditional_mean(const Eigen::VectorXd& x, int t, int s, double beta) {
  double mu = sim_baseline(x) + t * sim_tau(x);
  if (s == 0) mu += 5.0 * beta * x.sum() * (2 * t - 1);
  return mu;
}

namespace detail {

inline Unit sim_unit(int p, int s, bool test_unit, double beta, Rng& rng) {
  Unit unit;
  unit.x.resize(p);
  for (int j = 0; j < p; ++j) unit.x[j] = rng.normal();
  unit.s = s;
  if (s == 1) {
    unit.t = rng.bernoulli(0.5);
  } else {
    unit.t = rng.bernoulli(1.0 / (1.0 + std::exp(-unit.x.sum())));
  }
  const double base = sim_baseline(unit.x);
  const double tau = sim_tau(unit.x);
  if (test_unit) {
    // Clean potential outcomes for PEHE ground truth.
    unit.y0_true = base;
    unit.y1_true = base + tau;
  } else {
    double u_term = 0.0;
    if (s == 0) {
      const double u = rng.normal(unit.x.sum() * beta * (2 * unit.t - 1), 1.0);
      u_term = 5.0 * u;
    }
    unit.y0_true = base + u_term + rng.normal();
    unit.y1_true = base + tau + u_term + rng.normal();
  }
  unit.tau_true = *unit.y1_true - *unit.y0_true;
  unit.y = unit.t == 1 ? *unit.y1_true : *unit.y0_true;
  return unit;
}

}  // namespace detail

inline FusionSplit gen_simulation(const SimulationConfig& cfg) {
  cfg.validate();
  auto make = [&](int n, int s, bool test_unit, std::string_view tag) {
    Rng rng(derive_seed(cfg.seed, tag));
    std::vector<Unit> units;
    units.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) units.push_back(detail::sim_unit(cfg.p, s, test_unit, cfg.beta, rng));
    return Dataset(std::move(units), cfg.p);
  };
  return {make(cfg.n_os, 0, false, "os"), make(cfg.n_rct, 1, false, "rct"),
          make(cfg.n_test, 1, true, "test")};
}

// ---- STAR / NSW outcome simulators ---------------------------------------

struct SimulatedOutcomes {
  Eigen::VectorXd y0;
  Eigen::VectorXd y1;
  Eigen::VectorXd tau;
};

inline double star_tau(const Eigen::VectorXd& x) {
  const double s = x.sum();
  return s + std::sqrt(std::abs(s));
}

inline double star_baseline(const Eigen::VectorXd& x) {
  return 2.0 * x.sum() + x.squaredNorm();
}

inline SimulatedOutcomes star_outcomes(const Eigen::MatrixXd& X, Rng& rng) {
  if (!X.allFinite()) throw std::invalid_argument("star_outcomes: non-finite covariates");
  SimulatedOutcomes out;
  out.y0.resize(X.rows());
  out.y1.resize(X.rows());
  out.tau.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd x = X.row(i);
    out.tau[i] = star_tau(x);
    out.y0[i] = star_baseline(x) + rng.normal();
    out.y1[i] = star_baseline(x) + out.tau[i] + rng.normal();
  }
  return out;
}

inline double nsw_tau(const Eigen::VectorXd& x) { return x.squaredNorm(); }

inline double nsw_baseline(const Eigen::VectorXd& x) { return 2.0 * x.array().exp().sum(); }

inline SimulatedOutcomes nsw_outcomes(const Eigen::MatrixXd& X, Rng& rng) {
  if (!X.allFinite()) throw std::invalid_argument("nsw_outcomes: non-finite covariates");
  SimulatedOutcomes out;
  out.y0.resize(X.rows());
  out.y1.resize(X.rows());
  out.tau.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd x = X.row(i);
    out.tau[i] = nsw_tau(x);
    out.y0[i] = nsw_baseline(x) + rng.uniform(-1.0, 1.0);
    out.y1[i] = nsw_baseline(x) + out.tau[i] + rng.uniform(-1.0, 1.0);
  }
  return out;
}

// ---- Fusion-split constructors -------------------------------------------

namespace detail {

// Indices of the bottom (ascending) or top half by observed outcome; ties and
// odd counts resolve by stable original order with floor(count/2) selected.
inline std::vector<std::size_t> half_by_outcome(const std::vector<std::size_t>& idx,
                                                const Dataset& ds, bool bottom) {
  std::vector<std::size_t> order = idx;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return bottom ? ds[a].y < ds[b].y : ds[a].y > ds[b].y;
  });
  order.resize(idx.size() / 2);
  return order;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  return idx;
}

}  // namespace detail

// Builds the biased STAR-style split. RCT = a random trial_fraction of the
// u=1 stratum; OS = non-trial controls plus, per u stratum, the eligible
// treated whose simulated outcomes rank in the bottom half; test = everything
// outside the RCT. Source flags are assigned here (s=1 for trial units).
inline FusionSplit construct_star_fusion(const Dataset& units, double trial_fraction,
                                         std::uint64_t seed) {
  if (trial_fraction < 0.0 || trial_fraction > 1.0)
    throw std::invalid_argument("construct_star_fusion: trial_fraction must be in [0,1]");
  std::vector<std::size_t> u1;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (!units[i].u) throw std::invalid_argument("construct_star_fusion: missing u-flag at row " +
                                                 std::to_string(i));
    if (*units[i].u == 1) u1.push_back(i);
  }

  Rng rng(derive_seed(seed, "star-trial"));
  std::vector<std::size_t> shuffled = detail::shuffled_indices(u1.size(), rng);
  const std::size_t n_trial = static_cast<std::size_t>(
      std::floor(trial_fraction * static_cast<double>(u1.size())));
  std::vector<char> in_trial(units.size(), 0);
  for (std::size_t k = 0; k < n_trial; ++k) in_trial[u1[shuffled[k]]] = 1;

  // Bottom-half treated per u stratum, ranked among non-trial treated peers.
  std::vector<std::size_t> treated_u0, treated_u1;
  for (std::size_t i = 0; i < units.size(); ++i)
    if (!in_trial[i] && units[i].t == 1)
      (*units[i].u == 1 ? treated_u1 : treated_u0).push_back(i);
  std::vector<char> os_keep(units.size(), 0);
  for (std::size_t i : detail::half_by_outcome(treated_u0, units, /*bottom=*/true)) os_keep[i] = 1;
  for (std::size_t i : detail::half_by_outcome(treated_u1, units, /*bottom=*/true)) os_keep[i] = 1;
  for (std::size_t i = 0; i < units.size(); ++i)
    if (!in_trial[i] && units[i].t == 0) os_keep[i] = 1;

  std::vector<Unit> rct, os, test;
  for (std::size_t i = 0; i < units.size(); ++i) {
    Unit unit = units[i];
    if (in_trial[i]) {
      unit.s = 1;
      rct.push_back(unit);
    } else {
      unit.s = 0;
      if (os_keep[i]) os.push_back(unit);
      Unit t = units[i];
      t.s = 1;  // test units carry RCT semantics for evaluation
      test.push_back(std::move(t));
    }
  }
  return {Dataset(std::move(os), units.p()), Dataset(std::move(rct), units.p()),
          Dataset(std::move(test), units.p())};
}

// Builds the NSW-style split: a both-arm random draw from the randomized pool
// as RCT, the upper half of the PSID controls by simulated outcome as OS, the
// rest as test -- then flips every treatment label via invert_treatments, so
// the OS ends up one-armed by construction.
inline FusionSplit construct_nsw_fusion(const Dataset& randomized, const Dataset& psid_controls,
                                        int n_rct_draw, std::uint64_t seed) {
  if (static_cast<std::size_t>(n_rct_draw) > randomized.size())
    throw std::invalid_argument("construct_nsw_fusion: n_rct_draw exceeds randomized pool");
  if (randomized.n_t() + randomized.m_t() == 0 || randomized.n_c() + randomized.m_c() == 0)
    throw std::invalid_argument("construct_nsw_fusion: randomized pool must contain both arms");
  for (std::size_t i = 0; i < psid_controls.size(); ++i)
    if (psid_controls[i].t != 0)
      throw std::invalid_argument("construct_nsw_fusion: psid_controls must be all-control");

  // Draw until both arms are present; each retry re-derives the stream.
  std::vector<char> in_rct(randomized.size(), 0);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    Rng rng(derive_seed(seed, "nsw-draw", static_cast<std::uint64_t>(attempt)));
    std::fill(in_rct.begin(), in_rct.end(), 0);
    auto shuffled = detail::shuffled_indices(randomized.size(), rng);
    int nt = 0, nc = 0;
    for (int k = 0; k < n_rct_draw; ++k) {
      in_rct[shuffled[static_cast<std::size_t>(k)]] = 1;
      (randomized[shuffled[static_cast<std::size_t>(k)]].t == 1 ? nt : nc)++;
    }
    ok = n_rct_draw == 0 || (nt > 0 && nc > 0);
  }
  if (!ok) throw std::runtime_error("construct_nsw_fusion: could not draw a two-armed RCT");

  std::vector<std::size_t> psid_idx(psid_controls.size());
  std::iota(psid_idx.begin(), psid_idx.end(), 0);
  std::vector<std::size_t> top = detail::half_by_outcome(psid_idx, psid_controls, /*bottom=*/false);
  std::vector<char> in_os(psid_controls.size(), 0);
  for (std::size_t i : top) in_os[i] = 1;

  std::vector<Unit> rct, os, test;
  for (std::size_t i = 0; i < randomized.size(); ++i) {
    Unit unit = randomized[i];
    unit.s = in_rct[i] ? 1 : 0;
    if (in_rct[i]) rct.push_back(std::move(unit));
    else {
      unit.s = 1;
      test.push_back(std::move(unit));
    }
  }
  for (std::size_t i = 0; i < psid_controls.size(); ++i) {
    Unit unit = psid_controls[i];
    unit.s = in_os[i] ? 0 : 1;
    if (in_os[i]) os.push_back(std::move(unit));
    else test.push_back(std::move(unit));
  }

  const Eigen::Index p = randomized.p();
  return {invert_treatments(Dataset(std::move(os), p)),
          invert_treatments(Dataset(std::move(rct), p)),
          invert_treatments(Dataset(std::move(test), p))};
}

// ---- Offline surrogates ----------------------------------------------------

// Seven covariates mimicking the STAR fields (binary flags plus small scaled
// integers) with a u-flag correlated with two of them. Clearly a surrogate;
// never a STAR reproduction.
inline Dataset star_surrogate_units(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "star-surrogate"));
  std::vector<Unit> units;
  units.reserve(static_cast<std::size_t>(n));
  Rng noise(derive_seed(seed, "star-surrogate-outcome"));
  for (int i = 0; i < n; ++i) {
    Unit unit;
    unit.x.resize(7);
    unit.x[0] = rng.bernoulli(0.5);                         // gender
    unit.x[1] = rng.bernoulli(0.35);                        // race flag
    unit.x[2] = rng.uniform_int(1, 12) / 12.0;              // birth month
    unit.x[3] = rng.uniform_int(1, 28) / 28.0;              // birthday
    unit.x[4] = rng.uniform_int(-1, 1);                     // birth-year offset
    unit.x[5] = rng.bernoulli(0.3);                         // free lunch
    unit.x[6] = rng.uniform(0.0, 1.0);                      // teacher id, scaled
    const double z = 1.5 * (unit.x[5] - 0.3) + 1.0 * (unit.x[1] - 0.35) + 0.4;
    unit.u = rng.bernoulli(1.0 / (1.0 + std::exp(-z)));
    unit.t = rng.bernoulli(1774.0 / 4139.0);
    unit.s = 0;
    const double tau = star_tau(unit.x);
    unit.y0_true = star_baseline(unit.x) + noise.normal();
    unit.y1_true = star_baseline(unit.x) + tau + noise.normal();
    unit.tau_true = *unit.y1_true - *unit.y0_true;
    unit.y = unit.t == 1 ? *unit.y1_true : *unit.y0_true;
    units.push_back(std::move(unit));
  }
  return Dataset(std::move(units), 7);
}

struct NswPools {
  Dataset randomized;  // 297 treated + 425 control by default
  Dataset psid;        // all-control observational pool
};

// Six standardized covariates shaped like the NSW schema; the PSID pool gets
// a covariate shift on the first two columns.
inline NswPools nsw_surrogate_pools(std::uint64_t seed, int n_treated = 297, int n_control = 425,
                                    int n_psid = 2490) {
  Rng rng(derive_seed(seed, "nsw-surrogate"));
  Rng noise(derive_seed(seed, "nsw-surrogate-outcome"));
  auto draw = [&](bool shift) {
    Eigen::VectorXd x(6);
    x[0] = rng.normal(shift ? 0.5 : 0.0, 1.0);  // age, standardized
    x[1] = rng.normal(shift ? 0.5 : 0.0, 1.0);  // education, standardized
    x[2] = rng.bernoulli(0.8);                  // ethnicity flag 1
    x[3] = rng.bernoulli(0.1);                  // ethnicity flag 2
    x[4] = rng.bernoulli(0.2);                  // married
    x[5] = rng.bernoulli(0.7);                  // no degree
    return x;
  };
  auto make_unit = [&](Eigen::VectorXd x, int t) {
    Unit unit;
    unit.x = std::move(x);
    unit.t = t;
    unit.s = 0;
    const double tau = nsw_tau(unit.x);
    unit.y0_true = nsw_baseline(unit.x) + noise.uniform(-1.0, 1.0);
    unit.y1_true = nsw_baseline(unit.x) + tau + noise.uniform(-1.0, 1.0);
    unit.tau_true = *unit.y1_true - *unit.y0_true;
    unit.y = unit.t == 1 ? *unit.y1_true : *unit.y0_true;
    return unit;
  };
  std::vector<Unit> pool, psid;
  for (int i = 0; i < n_treated; ++i) pool.push_back(make_unit(draw(false), 1));
  for (int i = 0; i < n_control; ++i) pool.push_back(make_unit(draw(false), 0));
  for (int i = 0; i < n_psid; ++i) psid.push_back(make_unit(draw(true), 0));
  return {Dataset(std::move(pool), 6), Dataset(std::move(psid), 6)};
}

}  // namespace cio
