#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cio/csv.hpp"
#include "cio/dataset.hpp"
#include "cio/fuse.hpp"
#include "cio/synth.hpp"

namespace cio {

// ---- Metric ----------------------------------------------------------------

inline double pehe(const Eigen::VectorXd& tau_true, const Eigen::VectorXd& tau_hat) {
  if (tau_true.size() != tau_hat.size()) throw std::invalid_argument("pehe: length mismatch");
  if (tau_true.size() == 0) throw std::invalid_argument("pehe: empty input");
  return std::sqrt((tau_true - tau_hat).squaredNorm() / static_cast<double>(tau_true.size()));
}

// ---- Welch's t -------------------------------------------------------------

namespace detail {

// Regularized incomplete beta via the standard continued fraction.
inline double betacf(double a, double b, double x) {
  const double eps = 3e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Two-sided Welch unequal-variance t-test on two samples.
inline double welch_t(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t: need >= 2 samples each");
  auto stats = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= (n - 1.0);
    return std::pair{mean, var};
  };
  auto [ma, va] = stats(a);
  auto [mb, vb] = stats(b);
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  if (sa + sb == 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) /
                    (sa * sa / (static_cast<double>(a.size()) - 1.0) +
                     sb * sb / (static_cast<double>(b.size()) - 1.0));
  return detail::betai(df / 2.0, 0.5, df / (df + t * t));
}

// ---- Experiment harness ----------------------------------------------------

enum class Recipe { simulation, star_surrogate, star_csv, nsw_csv, nsw_surrogate };

inline std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::simulation: return "simulation";
    case Recipe::star_surrogate: return "star_surrogate";
    case Recipe::star_csv: return "star_csv";
    case Recipe::nsw_csv: return "nsw_csv";
    case Recipe::nsw_surrogate: return "nsw_surrogate";
  }
  return "?";
}

struct RecipeConfig {
  Recipe kind = Recipe::simulation;
  SimulationConfig sim;         // simulation parameters (beta is set per axis)
  int star_n = 4139;            // surrogate population size
  double star_trial_fraction = 0.5;
  int nsw_rct_draw = 100;
  std::string csv_path;         // star_csv / nsw_csv covariate file
  std::map<std::string, ColumnRole> csv_schema;
};

struct TaggedModel {
  std::string tag;  // "ridge" | "forest" | "net"
  ModelSpec spec;
};

struct ExperimentDesc {
  RecipeConfig recipe;
  std::vector<std::string> methods;  // sf_os, sf_rct, si, rhc, cio, cio_io
  std::vector<TaggedModel> base_models;
  double p_r = 0.2;
  double beta = 1.0;
  std::optional<int> os_control_count;
  int n_runs = 10;
  std::uint64_t base_seed = 0;
  double rct_propensity = 0.5;
  bool pooled_mean = false;  // ablation switch for the stage losses
  int threads = 1;
};

struct ResultRow {
  std::string dataset;
  std::string method;
  std::string base_model;
  double p_r = 1.0;
  double beta = 0.0;
  std::optional<int> os_control_count;
  int run_index = 0;
  std::uint64_t seed = 0;
  double sqrt_pehe = 0.0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population flavor (divide by n)
  int n_runs = 0;
};

using SummaryKey = std::tuple<std::string, std::string, double, double, std::string>;
// (method, base_model, axis p_r, axis beta, os_control_count as text)

struct SweepTable {
  std::vector<ResultRow> rows;
  std::map<SummaryKey, Summary> summaries;
};

namespace detail {

inline std::uint64_t axis_hash(const ExperimentDesc& exp) {
  std::uint64_t h = mix64(std::bit_cast<std::uint64_t>(exp.p_r));
  h = mix64(h ^ std::bit_cast<std::uint64_t>(exp.beta));
  h = mix64(h ^ static_cast<std::uint64_t>(exp.os_control_count ? *exp.os_control_count + 1 : 0));
  return h;
}

inline Dataset subsample_rct(const Dataset& rct, double p_r, std::uint64_t seed) {
  if (p_r <= 0.0 || p_r > 1.0) throw std::invalid_argument("p_r must be in (0,1]");
  const std::size_t k = static_cast<std::size_t>(
      std::llround(p_r * static_cast<double>(rct.size())));
  if (k >= rct.size()) return rct;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, "rct-subsample", static_cast<std::uint64_t>(attempt)));
    auto idx = shuffled_indices(rct.size(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    std::vector<Unit> units;
    units.reserve(k);
    bool t1 = false, t0 = false;
    for (std::size_t i : idx) {
      units.push_back(rct[i]);
      (rct[i].t == 1 ? t1 : t0) = true;
    }
    if (t1 && t0) return Dataset(std::move(units), rct.p());
  }
  throw std::runtime_error("RCT subsample could not retain both arms after 100 retries");
}

inline Dataset subsample_os_controls(const Dataset& os, int count, std::uint64_t seed) {
  std::vector<std::size_t> controls;
  for (std::size_t i = 0; i < os.size(); ++i)
    if (os[i].t == 0) controls.push_back(i);
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(count), controls.size());
  Rng rng(derive_seed(seed, "os-control-subsample"));
  auto order = shuffled_indices(controls.size(), rng);
  std::vector<char> keep_flag(os.size(), 0);
  for (std::size_t k = 0; k < keep; ++k) keep_flag[controls[order[k]]] = 1;
  std::vector<Unit> units;
  for (std::size_t i = 0; i < os.size(); ++i)
    if (os[i].t == 1 || keep_flag[i]) units.push_back(os[i]);
  return Dataset(std::move(units), os.p());
}

inline Dataset drop_os_controls(const Dataset& os) {
  std::vector<Unit> units;
  for (const Unit& unit : os.units())
    if (unit.t == 1) units.push_back(unit);
  return Dataset(std::move(units), os.p());
}

inline FusionSplit build_split(const RecipeConfig& recipe, double beta, std::uint64_t seed) {
  switch (recipe.kind) {
    case Recipe::simulation: {
      SimulationConfig cfg = recipe.sim;
      cfg.beta = beta;
      cfg.seed = seed;
      return gen_simulation(cfg);
    }
    case Recipe::star_surrogate: {
      Dataset units = star_surrogate_units(recipe.star_n, seed);
      return construct_star_fusion(units, recipe.star_trial_fraction, seed);
    }
    case Recipe::star_csv: {
      IngestTable tbl = ingest_covariates_csv(recipe.csv_path, recipe.csv_schema);
      if (tbl.t.empty() || tbl.u.empty())
        throw std::runtime_error("star_csv schema must declare treatment and u_flag columns");
      Rng noise(derive_seed(seed, "star-csv-outcome"));
      SimulatedOutcomes sim = star_outcomes(tbl.X, noise);
      std::vector<Unit> units;
      for (Eigen::Index i = 0; i < tbl.X.rows(); ++i) {
        Unit unit;
        unit.x = tbl.X.row(i);
        unit.t = tbl.t[static_cast<std::size_t>(i)];
        unit.u = tbl.u[static_cast<std::size_t>(i)];
        unit.s = 0;
        unit.y0_true = sim.y0[i];
        unit.y1_true = sim.y1[i];
        unit.tau_true = sim.y1[i] - sim.y0[i];
        unit.y = unit.t == 1 ? *unit.y1_true : *unit.y0_true;
        units.push_back(std::move(unit));
      }
      Dataset ds(std::move(units), tbl.X.cols());
      return construct_star_fusion(ds, recipe.star_trial_fraction, seed);
    }
    case Recipe::nsw_csv: {
      IngestTable tbl = ingest_covariates_csv(recipe.csv_path, recipe.csv_schema);
      if (tbl.t.empty() || tbl.s.empty())
        throw std::runtime_error(
            "nsw_csv schema must declare treatment and source columns "
            "(source 1 = randomized pool, 0 = PSID control)");
      Rng noise(derive_seed(seed, "nsw-csv-outcome"));
      SimulatedOutcomes sim = nsw_outcomes(tbl.X, noise);
      std::vector<Unit> pool, psid;
      for (Eigen::Index i = 0; i < tbl.X.rows(); ++i) {
        Unit unit;
        unit.x = tbl.X.row(i);
        unit.t = tbl.t[static_cast<std::size_t>(i)];
        unit.s = 0;
        unit.y0_true = sim.y0[i];
        unit.y1_true = sim.y1[i];
        unit.tau_true = sim.y1[i] - sim.y0[i];
        unit.y = unit.t == 1 ? *unit.y1_true : *unit.y0_true;
        (tbl.s[static_cast<std::size_t>(i)] == 1 ? pool : psid).push_back(std::move(unit));
      }
      return construct_nsw_fusion(Dataset(std::move(pool), tbl.X.cols()),
                                  Dataset(std::move(psid), tbl.X.cols()), recipe.nsw_rct_draw,
                                  seed);
    }
    case Recipe::nsw_surrogate: {
      NswPools pools = nsw_surrogate_pools(seed);
      return construct_nsw_fusion(pools.randomized, pools.psid, recipe.nsw_rct_draw, seed);
    }
  }
  throw std::logic_error("build_split: unreachable");
}

}  // namespace detail

// Runs one repetition of the experiment grid: builds the split under a
// derived seed, subsamples the RCT to p_r (both arms enforced), optionally
// thins the OS controls, fits every requested (method, base model) and scores
// sqrt-PEHE on the test split. Methods impossible on the split emit no row.
inline std::vector<ResultRow> run_experiment(const ExperimentDesc& exp, int run_index,
                                             std::vector<std::string>* diagnostics = nullptr) {
  const std::uint64_t run_seed =
      derive_seed(exp.base_seed ^ detail::axis_hash(exp), "run", static_cast<std::uint64_t>(run_index));
  FusionSplit split = detail::build_split(exp.recipe, exp.beta, derive_seed(run_seed, "data"));
  Dataset rct_train = detail::subsample_rct(split.rct, exp.p_r, run_seed);
  Dataset os_train = split.os;
  if (exp.os_control_count)
    os_train = detail::subsample_os_controls(os_train, *exp.os_control_count, run_seed);

  const Eigen::MatrixXd X_test = split.test.covariates();
  const Eigen::VectorXd tau_true = split.test.tau_truth();

  std::vector<ResultRow> rows;
  for (const TaggedModel& model : exp.base_models) {
    for (const std::string& method : exp.methods) {
      const std::uint64_t fit_seed = derive_seed(run_seed, "fit-" + method + "-" + model.tag);
      std::optional<EffectModel> em;
      std::string skip;
      try {
        if (method == "sf_os") {
          if (os_train.m_t() == 0 || os_train.m_c() == 0) skip = "one-armed OS data";
          else {
            Partition p = partition(os_train);
            em = fit_t_learner(p.os_treated, p.os_control, model.spec, fit_seed);
          }
        } else if (method == "sf_rct") {
          Partition p = partition(rct_train);
          em = fit_t_learner(p.rct_treated, p.rct_control, model.spec, fit_seed);
        } else if (method == "si") {
          Dataset merged = merge(os_train, rct_train);
          Partition p = partition(merged);
          Dataset treated = merge(p.os_treated, p.rct_treated);
          Dataset control = merge(p.os_control, p.rct_control);
          if (treated.empty() || control.empty()) skip = "one-armed pooled data";
          else em = fit_t_learner(treated, control, model.spec, fit_seed);
        } else if (method == "rhc") {
          if (os_train.m_t() == 0 || os_train.m_c() == 0) skip = "one-armed OS data";
          else em = fit_rhc(os_train, rct_train, model.spec, exp.rct_propensity, fit_seed);
        } else if (method == "cio") {
          if (os_train.empty()) skip = "empty OS data";
          else em = fit_cio(os_train, rct_train, model.spec, fit_seed, true, exp.pooled_mean);
        } else if (method == "cio_io") {
          Dataset os_io = os_train.m_t() > 0 ? detail::drop_os_controls(os_train) : os_train;
          if (os_io.empty()) skip = "empty OS data after control removal";
          else em = fit_cio(os_io, rct_train, model.spec, fit_seed, true, exp.pooled_mean);
        } else {
          throw std::invalid_argument("unknown method tag: " + method);
        }
      } catch (const std::invalid_argument& e) {
        skip = e.what();
      }
      if (!em) {
        if (diagnostics)
          diagnostics->push_back("skipped " + method + "/" + model.tag + " run " +
                                 std::to_string(run_index) + ": " + skip);
        continue;
      }
      ResultRow row;
      row.dataset = to_string(exp.recipe.kind);
      row.method = method;
      row.base_model = model.tag;
      row.p_r = exp.p_r;
      row.beta = exp.beta;
      row.os_control_count = exp.os_control_count;
      row.run_index = run_index;
      row.seed = run_seed;
      row.sqrt_pehe = pehe(tau_true, estimate_effects(*em, X_test));
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace detail {

inline void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    auto key = [](const ResultRow& r) {
      return std::tuple(r.method, r.base_model, r.p_r, r.beta,
                        r.os_control_count.value_or(-1), r.run_index);
    };
    return key(a) < key(b);
  });
}

}  // namespace detail

// n_runs repetitions under independent derived seeds; summaries are mean and
// population std per (method, model, axis point), ordered canonically so the
// output is scheduling-independent.
inline SweepTable repeat(const ExperimentDesc& exp, std::vector<std::string>* diagnostics = nullptr) {
  if (exp.n_runs < 1) throw std::invalid_argument("n_runs must be >= 1");
  std::vector<std::vector<ResultRow>> per_run(static_cast<std::size_t>(exp.n_runs));
  std::vector<std::vector<std::string>> per_diag(static_cast<std::size_t>(exp.n_runs));

  if (exp.threads > 1) {
    std::vector<std::future<void>> futures;
    std::atomic<int> next{0};
    const int workers = std::min(exp.threads, exp.n_runs);
    for (int w = 0; w < workers; ++w) {
      futures.push_back(std::async(std::launch::async, [&] {
        for (int r = next.fetch_add(1); r < exp.n_runs; r = next.fetch_add(1))
          per_run[static_cast<std::size_t>(r)] =
              run_experiment(exp, r, &per_diag[static_cast<std::size_t>(r)]);
      }));
    }
    for (auto& f : futures) f.get();
  } else {
    for (int r = 0; r < exp.n_runs; ++r)
      per_run[static_cast<std::size_t>(r)] =
          run_experiment(exp, r, &per_diag[static_cast<std::size_t>(r)]);
  }

  SweepTable table;
  for (auto& rows : per_run)
    for (auto& row : rows) table.rows.push_back(std::move(row));
  if (diagnostics)
    for (auto& d : per_diag)
      for (auto& line : d) diagnostics->push_back(line);
  detail::sort_rows(table.rows);

  std::map<SummaryKey, std::vector<double>> groups;
  for (const ResultRow& row : table.rows) {
    SummaryKey key{row.method, row.base_model, row.p_r, row.beta,
                   row.os_control_count ? std::to_string(*row.os_control_count) : ""};
    groups[key].push_back(row.sqrt_pehe);
  }
  for (auto& [key, vals] : groups) {
    Summary s;
    s.n_runs = static_cast<int>(vals.size());
    for (double v : vals) s.mean += v;
    s.mean /= static_cast<double>(vals.size());
    for (double v : vals) s.std += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(s.std / static_cast<double>(vals.size()));
    table.summaries[key] = s;
  }
  return table;
}

enum class SweepAxis { p_r, beta, os_control_count };

inline SweepAxis parse_axis(const std::string& name) {
  if (name == "p_r") return SweepAxis::p_r;
  if (name == "beta") return SweepAxis::beta;
  if (name == "os_control_count") return SweepAxis::os_control_count;
  throw std::invalid_argument("unknown sweep axis: " + name);
}

inline SweepTable sweep(const ExperimentDesc& exp, SweepAxis axis, const std::vector<double>& values,
                        std::vector<std::string>* diagnostics = nullptr) {
  if (values.empty()) throw std::invalid_argument("sweep: values nonempty required");
  if (axis == SweepAxis::beta && exp.recipe.kind != Recipe::simulation)
    throw std::invalid_argument("beta axis requires simulation recipe");
  SweepTable out;
  for (double v : values) {
    ExperimentDesc point = exp;
    switch (axis) {
      case SweepAxis::p_r:
        if (v <= 0.0 || v > 1.0) throw std::invalid_argument("sweep: p_r values must be in (0,1]");
        point.p_r = v;
        break;
      case SweepAxis::beta:
        if (v < 0.0) throw std::invalid_argument("sweep: beta values must be >= 0");
        point.beta = v;
        break;
      case SweepAxis::os_control_count:
        if (v < 0.0 || v != std::floor(v))
          throw std::invalid_argument("sweep: os_control_count values must be whole and >= 0");
        point.os_control_count = static_cast<int>(v);
        break;
    }
    SweepTable t = repeat(point, diagnostics);
    for (auto& row : t.rows) out.rows.push_back(std::move(row));
    for (auto& [k, s] : t.summaries) out.summaries[k] = s;
  }
  return out;
}

}  // namespace cio
