#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "cio/csv.hpp"
#include "cio/models.hpp"
#include "cio/synth.hpp"

using namespace cio;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index j = 0;
  for (double x : xs) v[j++] = x;
  return v;
}

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = std::string("synth_test_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("simulation effect and baseline hand values") {
  CHECK(sim_tau(vec({0.0, 0.0})) == 1.0);                 // 1 + 0 + 0
  CHECK(sim_tau(vec({1.0, 2.0})) == 9.0);                 // 1 + 3 + 5
  CHECK(sim_baseline(vec({0.0})) == 1.0);                 // 1 + 0 + 0
  CHECK(sim_baseline(vec({2.0})) == 19.0);                // 1 + 16 + 2
  CHECK(sim_confounding(vec({1.0, 1.0}), 0.5) == 10.0);   // 10 * 0.5 * 2
  CHECK(sim_conditional_mean(vec({2.0}), 1, 1, 1.0) == 26.0);        // 19 + 7
  CHECK(sim_conditional_mean(vec({2.0}), 1, 0, 1.0) == 36.0);        // + 5*2
  CHECK(sim_conditional_mean(vec({2.0}), 0, 0, 1.0) == 9.0);         // 19 - 10
}

TEST_CASE("simulation split has the configured counts and clean test truth") {
  SimulationConfig cfg;
  cfg.seed = 13;
  FusionSplit split = gen_simulation(cfg);
  CHECK(split.os.size() == 3000);
  CHECK(split.rct.size() == 200);
  CHECK(split.test.size() == 1000);
  CHECK(split.os.n() == 0);
  CHECK(split.rct.m() == 0);
  for (const Unit& u : split.test.units()) {
    CHECK(u.s == 1);
    // noiseless potentials on the test split
    CHECK(*u.y1_true - *u.y0_true == doctest::Approx(sim_tau(u.x)).epsilon(1e-12));
    CHECK(*u.y0_true == doctest::Approx(sim_baseline(u.x)).epsilon(1e-12));
  }
  for (const Unit& u : split.rct.units())
    CHECK(u.y == (u.t == 1 ? *u.y1_true : *u.y0_true));
}

TEST_CASE("same simulation seed reproduces the split exactly") {
  SimulationConfig cfg;
  cfg.seed = 99;
  FusionSplit a = gen_simulation(cfg);
  FusionSplit b = gen_simulation(cfg);
  REQUIRE(a.os.size() == b.os.size());
  for (std::size_t i = 0; i < a.os.size(); ++i) {
    CHECK((a.os[i].x - b.os[i].x).norm() == 0.0);
    CHECK(a.os[i].y == b.os[i].y);
    CHECK(a.os[i].t == b.os[i].t);
  }
  cfg.seed = 100;
  FusionSplit c = gen_simulation(cfg);
  CHECK(a.os[0].y != c.os[0].y);
}

TEST_CASE("RCT treatment is a fair coin, OS follows the logistic rule") {
  SimulationConfig cfg;
  cfg.n_rct = 4000;
  cfg.seed = 3;
  FusionSplit split = gen_simulation(cfg);
  const double frac =
      static_cast<double>(split.rct.n_t()) / static_cast<double>(split.rct.size());
  CHECK(std::abs(frac - 0.5) < 3.0 * 0.5 / std::sqrt(4000.0));  // 3 sigma

  // OS units with strongly positive covariate sums should be mostly treated
  int pos_treated = 0, pos_total = 0;
  for (const Unit& u : split.os.units()) {
    if (u.x.sum() > 2.0) {
      ++pos_total;
      pos_treated += u.t;
    }
  }
  REQUIRE(pos_total > 50);
  CHECK(static_cast<double>(pos_treated) / pos_total > 0.8);
}

TEST_CASE("confounding oracle: the OS arm gap matches 10*beta*sum(x)") {
  // bin 50k OS units by sum(x) and compare the treated-control outcome gap,
  // minus tau, against the analytic confounding function at the bin center
  SimulationConfig cfg;
  cfg.n_os = 50000;
  cfg.beta = 0.7;
  cfg.seed = 17;
  FusionSplit split = gen_simulation(cfg);
  struct Cell {
    double sum_r = 0, sum_s = 0;
    int n = 0;
  };
  std::map<std::pair<int, int>, Cell> cells;  // (bin of sum x, arm)
  for (const Unit& u : split.os.units()) {
    const double s = u.x.sum();
    if (std::abs(s) > 2.0) continue;
    Cell& c = cells[{static_cast<int>(std::floor(s * 2.0)), u.t}];
    // remove the known baseline and effect so only the confounding term and
    // noise remain: resid = 5U + eps, E[resid | arm, x] = 5*beta*sumx*(2t-1)
    c.sum_r += u.y - sim_baseline(u.x) - u.t * sim_tau(u.x);
    c.sum_s += s;
    ++c.n;
  }
  int checked = 0;
  for (auto& [key, c] : cells) {
    if (c.n < 300) continue;
    const auto [bin, t] = key;
    const double expected = 5.0 * cfg.beta * (c.sum_s / c.n) * (2 * t - 1);
    // residual sd is sqrt(25 + 1) per unit; 5-sigma band on the cell mean
    CHECK(std::abs(c.sum_r / c.n - expected) < 5.0 * std::sqrt(26.0 / c.n));
    ++checked;
  }
  CHECK(checked >= 8);
  // the arm gap these cell means imply is the analytic confounding function:
  // 5*beta*sumx - (-5*beta*sumx) = 10*beta*sumx = sim_confounding
  Eigen::VectorXd probe = Eigen::VectorXd::Constant(5, 0.3);
  CHECK(sim_confounding(probe, cfg.beta) == doctest::Approx(10.0 * cfg.beta * 1.5));
}

TEST_CASE("STAR-style effect and outcome hand values") {
  CHECK(star_tau(vec({1.0, 3.0})) == 6.0);   // 4 + 2
  CHECK(star_tau(vec({-1.0})) == 0.0);       // -1 + 1
  CHECK(star_baseline(vec({1.0, 2.0})) == 11.0);  // 6 + 5
  Rng rng(1);
  Eigen::MatrixXd X(3, 2);
  X << 1.0, 3.0, 0.0, 0.0, -0.5, -0.5;
  SimulatedOutcomes out = star_outcomes(X, rng);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(out.tau[i] == doctest::Approx(star_tau(X.row(i))).epsilon(1e-12));
    // unit-variance noise keeps outcomes near the mean surface
    CHECK(std::abs(out.y0[i] - star_baseline(X.row(i))) < 6.0);
  }
}

TEST_CASE("NSW-style effect and outcome hand values") {
  CHECK(nsw_tau(Eigen::VectorXd::Ones(6)) == 6.0);
  CHECK(nsw_baseline(Eigen::VectorXd::Zero(3)) == 6.0);  // 2 * 3 * e^0
  Rng rng(2);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(5, 2);
  SimulatedOutcomes out = nsw_outcomes(X, rng);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(out.tau[i] == 0.0);
    CHECK(std::abs(out.y0[i] - 4.0) < 1.0);  // uniform(-1,1) noise
    CHECK(std::abs(out.y1[i] - 4.0) < 1.0);
  }
}

TEST_CASE("STAR-style fusion split obeys its selection rules") {
  Dataset units = star_surrogate_units(4139, 7);
  CHECK(units.size() == 4139);
  FusionSplit split = construct_star_fusion(units, 0.5, 7);

  std::size_t u1 = 0;
  for (const Unit& u : units.units()) u1 += static_cast<std::size_t>(*u.u);
  CHECK(split.rct.size() == u1 / 2);
  for (const Unit& u : split.rct.units()) {
    CHECK(u.s == 1);
    CHECK(*u.u == 1);
  }
  // test = all non-trial units
  CHECK(split.test.size() == units.size() - split.rct.size());

  // every non-trial control is in the OS
  std::size_t nontrial_controls = 0;
  for (const Unit& u : split.test.units()) nontrial_controls += static_cast<std::size_t>(u.t == 0);
  CHECK(split.os.m_c() == nontrial_controls);

  // bottom-half rule per u stratum: max kept treated outcome <= min excluded
  for (int stratum : {0, 1}) {
    double max_kept = -1e300, min_excl = 1e300;
    std::size_t kept = 0, eligible = 0;
    for (const Unit& u : split.os.units())
      if (u.t == 1 && *u.u == stratum) {
        max_kept = std::max(max_kept, u.y);
        ++kept;
      }
    for (const Unit& u : split.test.units())
      if (u.t == 1 && *u.u == stratum) ++eligible;
    for (const Unit& u : split.test.units())
      if (u.t == 1 && *u.u == stratum && u.y > max_kept) min_excl = std::min(min_excl, u.y);
    CHECK(kept == eligible / 2);
    if (kept > 0 && kept < eligible) CHECK(max_kept <= min_excl);
  }
}

TEST_CASE("trial_fraction = 0 yields an empty RCT") {
  Dataset units = star_surrogate_units(500, 3);
  FusionSplit split = construct_star_fusion(units, 0.0, 3);
  CHECK(split.rct.empty());
  CHECK(split.test.size() == 500);
  CHECK_THROWS_AS(construct_star_fusion(units, 1.5, 3), std::invalid_argument);
}

TEST_CASE("NSW-style fusion split is one-armed after inversion") {
  NswPools pools = nsw_surrogate_pools(5);
  CHECK(pools.randomized.size() == 722);   // 297 treated + 425 control
  CHECK(pools.psid.size() == 2490);
  FusionSplit split = construct_nsw_fusion(pools.randomized, pools.psid, 100, 5);

  CHECK(split.rct.size() == 100);
  CHECK(split.rct.n_t() > 0);
  CHECK(split.rct.n_c() > 0);
  CHECK(split.os.size() == 1245);  // top half of the PSID controls
  // PSID controls flip to all-treated: OS ends up with no control arm
  CHECK(split.os.m_c() == 0);
  CHECK(split.os.m_t() == 1245);
  CHECK(split.test.size() == 722 - 100 + 2490 - 1245);

  // selection keeps the upper half: flipping back to the pre-inversion
  // outcome scale, every OS outcome must be >= every excluded PSID outcome
  double min_os = 1e300, max_excluded = -1e300;
  for (const Unit& u : split.os.units()) min_os = std::min(min_os, u.y);
  for (const Unit& u : split.test.units())
    if (u.t == 0) max_excluded = std::max(max_excluded, u.y);  // flipped PSID rows
  CHECK(min_os >= max_excluded);
}

TEST_CASE("NSW-style fusion rejects bad pools") {
  NswPools pools = nsw_surrogate_pools(5);
  CHECK_THROWS_AS(construct_nsw_fusion(pools.randomized, pools.psid, 100000, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(construct_nsw_fusion(pools.randomized, pools.randomized, 100, 5),
                  std::invalid_argument);  // psid pool must be all-control
}

TEST_CASE("CSV ingestion drops incomplete rows and validates the schema") {
  const std::string path = write_temp("ingest.csv",
                                      "a,b,t,junk,y\n"
                                      "1.0,2.0,1,zzz,3.5\n"
                                      "4.0,,0,zzz,1.0\n"
                                      "5.0,6.0,1,zzz,\n"
                                      "7.0,8.0,0,zzz,2.0\n");
  std::map<std::string, ColumnRole> schema{{"a", ColumnRole::covariate},
                                           {"b", ColumnRole::covariate},
                                           {"t", ColumnRole::treatment},
                                           {"y", ColumnRole::outcome}};
  IngestTable tbl = ingest_covariates_csv(path, schema);
  CHECK(tbl.X.rows() == 2);
  CHECK(tbl.dropped == 2);
  CHECK(tbl.X(1, 1) == 8.0);
  CHECK(tbl.t == std::vector<int>{1, 0});
  CHECK(tbl.y == std::vector<double>{3.5, 2.0});

  schema["missing_col"] = ColumnRole::covariate;
  CHECK_THROWS_AS(ingest_covariates_csv(path, schema), std::invalid_argument);
  std::remove(path.c_str());

  const std::string empty = write_temp("empty.csv", "");
  CHECK_THROWS_AS(ingest_covariates_csv(empty, {{"a", ColumnRole::covariate}}),
                  std::runtime_error);
  std::remove(empty.c_str());

  const std::string headeronly = write_temp("headeronly.csv", "a,t\n");
  CHECK_THROWS_AS(
      ingest_covariates_csv(headeronly,
                            {{"a", ColumnRole::covariate}, {"t", ColumnRole::treatment}}),
      std::runtime_error);
  std::remove(headeronly.c_str());

  const std::string nonbin = write_temp("nonbin.csv", "a,t\n1.0,2\n");
  CHECK_THROWS_WITH_AS(
      ingest_covariates_csv(nonbin,
                            {{"a", ColumnRole::covariate}, {"t", ColumnRole::treatment}}),
      "non-binary treatment at data row 0", std::invalid_argument);
  std::remove(nonbin.c_str());
}
