#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cio {

// One subject. Ground-truth potential outcomes are present only for
// simulated / semi-synthetic data; `u` is the STAR-style stratum flag.
struct Unit {
  Eigen::VectorXd x;
  int t = 0;  // treatment {0,1}
  int s = 0;  // source {0 = OS, 1 = RCT}
  double y = 0.0;
  std::optional<double> y0_true;
  std::optional<double> y1_true;
  std::optional<double> tau_true;
  std::optional<int> u;

  bool has_truth() const { return y0_true.has_value() && y1_true.has_value(); }
};

// Dummy treatment D = T(1-S): 1 exactly for OS treated units.
inline int pseudo_label(const Unit& unit) { return unit.t * (1 - unit.s); }

// Immutable ordered collection of units with a fixed covariate dimension.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Eigen::Index p) : p_(p) {
    if (p < 1) throw std::invalid_argument("covariate dimension must be >= 1");
  }

  Dataset(std::vector<Unit> units, Eigen::Index p) : units_(std::move(units)), p_(p) {
    if (p < 1) throw std::invalid_argument("covariate dimension must be >= 1");
    for (std::size_t i = 0; i < units_.size(); ++i) {
      const Unit& unit = units_[i];
      if (unit.x.size() != p_)
        throw std::invalid_argument("covariate dimension mismatch at row " + std::to_string(i));
      if (unit.t != 0 && unit.t != 1)
        throw std::invalid_argument("non-binary treatment at row " + std::to_string(i));
      if (unit.s != 0 && unit.s != 1)
        throw std::invalid_argument("non-binary source at row " + std::to_string(i));
    }
  }

  Eigen::Index p() const { return p_; }
  std::size_t size() const { return units_.size(); }
  bool empty() const { return units_.empty(); }
  const std::vector<Unit>& units() const { return units_; }
  const Unit& operator[](std::size_t i) const { return units_[i]; }

  // Group sizes in the m / n notation: m* for OS, n* for RCT.
  std::size_t count(int t, int s) const {
    std::size_t c = 0;
    for (const Unit& unit : units_)
      if (unit.t == t && unit.s == s) ++c;
    return c;
  }
  std::size_t m() const { return count(0, 0) + count(1, 0); }
  std::size_t m_t() const { return count(1, 0); }
  std::size_t m_c() const { return count(0, 0); }
  std::size_t n() const { return count(0, 1) + count(1, 1); }
  std::size_t n_t() const { return count(1, 1); }
  std::size_t n_c() const { return count(0, 1); }

  Eigen::MatrixXd covariates() const {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(units_.size()), p_);
    for (std::size_t i = 0; i < units_.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = units_[i].x;
    return X;
  }
  Eigen::VectorXd outcomes() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(units_.size()));
    for (std::size_t i = 0; i < units_.size(); ++i) y[static_cast<Eigen::Index>(i)] = units_[i].y;
    return y;
  }
  Eigen::VectorXd tau_truth() const {
    Eigen::VectorXd tau(static_cast<Eigen::Index>(units_.size()));
    for (std::size_t i = 0; i < units_.size(); ++i) {
      if (!units_[i].tau_true)
        throw std::invalid_argument("missing tau_true at row " + std::to_string(i));
      tau[static_cast<Eigen::Index>(i)] = *units_[i].tau_true;
    }
    return tau;
  }

 private:
  std::vector<Unit> units_;
  Eigen::Index p_ = 1;
};

struct Partition {
  Dataset os_treated;
  Dataset os_control;
  Dataset rct_treated;
  Dataset rct_control;
};

inline Dataset build_dataset(std::vector<Unit> rows, Eigen::Index p) {
  return Dataset(std::move(rows), p);
}

inline Partition partition(const Dataset& ds) {
  std::vector<Unit> ot, oc, rt, rc;
  for (const Unit& unit : ds.units()) {
    if (unit.s == 0 && unit.t == 1) ot.push_back(unit);
    else if (unit.s == 0 && unit.t == 0) oc.push_back(unit);
    else if (unit.s == 1 && unit.t == 1) rt.push_back(unit);
    else rc.push_back(unit);
  }
  return {Dataset(std::move(ot), ds.p()), Dataset(std::move(oc), ds.p()),
          Dataset(std::move(rt), ds.p()), Dataset(std::move(rc), ds.p())};
}

// Flips every treatment flag. Ground truth is swapped and tau negated so the
// unit invariants keep holding; s, x and the observed y are untouched.
inline Dataset invert_treatments(const Dataset& ds) {
  std::vector<Unit> out;
  out.reserve(ds.size());
  for (Unit unit : ds.units()) {
    unit.t = 1 - unit.t;
    std::swap(unit.y0_true, unit.y1_true);
    if (unit.tau_true) unit.tau_true = -*unit.tau_true;
    out.push_back(std::move(unit));
  }
  return Dataset(std::move(out), ds.p());
}

inline Dataset merge(const Dataset& a, const Dataset& b) {
  if (a.p() != b.p())
    throw std::invalid_argument("merge: covariate dimension mismatch (" +
                                std::to_string(a.p()) + " vs " + std::to_string(b.p()) + ")");
  std::vector<Unit> out;
  out.reserve(a.size() + b.size());
  for (const Unit& unit : a.units()) out.push_back(unit);
  for (const Unit& unit : b.units()) out.push_back(unit);
  return Dataset(std::move(out), a.p());
}

}  // namespace cio
