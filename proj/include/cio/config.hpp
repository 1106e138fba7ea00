#pragma once

#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cio/bench.hpp"

namespace cio {

inline constexpr const char* kToolVersion = "0.1.0";

// Configuration problems exit the CLI with code 1; runtime/data problems with 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for \"" + key + "\"");
  }
}

inline RecipeConfig parse_recipe(const json& j) {
  RecipeConfig recipe;
  const std::string kind = get_or<std::string>(j, "kind", "simulation");
  if (kind == "simulation") {
    require_keys(j, "recipe", {"kind", "p", "n_rct", "n_os", "n_test"});
    recipe.kind = Recipe::simulation;
    recipe.sim.p = get_or(j, "p", 5);
    recipe.sim.n_rct = get_or(j, "n_rct", 200);
    recipe.sim.n_os = get_or(j, "n_os", 3000);
    recipe.sim.n_test = get_or(j, "n_test", 1000);
    try {
      recipe.sim.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (kind == "star_surrogate") {
    require_keys(j, "recipe", {"kind", "n", "trial_fraction"});
    recipe.kind = Recipe::star_surrogate;
    recipe.star_n = get_or(j, "n", 4139);
    recipe.star_trial_fraction = get_or(j, "trial_fraction", 0.5);
    if (recipe.star_n < 1) throw ConfigError("recipe.n must be positive");
  } else if (kind == "star_csv" || kind == "nsw_csv") {
    require_keys(j, "recipe", {"kind", "path", "schema", "trial_fraction", "n_rct_draw"});
    recipe.kind = kind == "star_csv" ? Recipe::star_csv : Recipe::nsw_csv;
    if (!j.contains("path")) throw ConfigError("recipe.path required for " + kind);
    recipe.csv_path = j.at("path").get<std::string>();
    if (!j.contains("schema")) throw ConfigError("recipe.schema required for " + kind);
    for (auto it = j.at("schema").begin(); it != j.at("schema").end(); ++it) {
      try {
        recipe.csv_schema[it.key()] = parse_role(it.value().get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    recipe.star_trial_fraction = get_or(j, "trial_fraction", 0.5);
    recipe.nsw_rct_draw = get_or(j, "n_rct_draw", 100);
  } else if (kind == "nsw_surrogate") {
    require_keys(j, "recipe", {"kind", "n_rct_draw"});
    recipe.kind = Recipe::nsw_surrogate;
    recipe.nsw_rct_draw = get_or(j, "n_rct_draw", 100);
  } else {
    throw ConfigError("unknown recipe kind \"" + kind + "\"");
  }
  return recipe;
}

inline TaggedModel parse_model(const json& j) {
  TaggedModel model;
  const std::string kind = get_or<std::string>(j, "kind", "");
  if (kind == "ridge") {
    require_keys(j, "base_models entry", {"kind", "lambda"});
    model.spec.kind = ModelKind::ridge;
    model.spec.ridge.lambda = get_or(j, "lambda", 1.0);
  } else if (kind == "forest") {
    require_keys(j, "base_models entry",
                 {"kind", "n_trees", "max_depth", "min_leaf", "mtry", "bootstrap"});
    model.spec.kind = ModelKind::forest;
    model.spec.forest.n_trees = get_or(j, "n_trees", 100);
    model.spec.forest.max_depth = get_or(j, "max_depth", 10);
    model.spec.forest.min_leaf = get_or(j, "min_leaf", 5);
    model.spec.forest.mtry = get_or(j, "mtry", 0);
    model.spec.forest.bootstrap = get_or(j, "bootstrap", true);
  } else if (kind == "net") {
    require_keys(j, "base_models entry",
                 {"kind", "hidden_widths", "epochs", "step_size", "shared_rep"});
    model.spec.kind = ModelKind::net;
    model.spec.net.hidden_widths = get_or(j, "hidden_widths", std::vector<int>{64, 64});
    model.spec.net.epochs = get_or(j, "epochs", 300);
    model.spec.net.step_size = get_or(j, "step_size", 1e-3);
    model.spec.net.shared_rep = get_or(j, "shared_rep", true);
  } else {
    throw ConfigError("unknown base model kind \"" + kind + "\"");
  }
  model.tag = kind;
  try {
    model.spec.validate(std::numeric_limits<Eigen::Index>::max());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return model;
}

}  // namespace detail

struct RunConfig {
  ExperimentDesc exp;
  std::string config_hash;  // FNV-1a over the raw config bytes, hex
};

inline RunConfig parse_config_text(const std::string& text) {
  using detail::get_or;
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  detail::require_keys(j, "config",
                       {"recipe", "methods", "base_models", "p_r", "beta", "n_runs", "base_seed",
                        "threads", "pooled_mean", "rct_propensity"});

  RunConfig cfg;
  cfg.exp.recipe = detail::parse_recipe(j.value("recipe", json::object()));
  cfg.exp.methods = get_or(j, "methods", std::vector<std::string>{"cio"});
  static const std::set<std::string> valid_methods{"sf_os", "sf_rct", "si", "rhc", "cio", "cio_io"};
  for (const std::string& m : cfg.exp.methods)
    if (!valid_methods.count(m)) throw ConfigError("unknown method tag \"" + m + "\"");
  if (cfg.exp.methods.empty()) throw ConfigError("methods must be nonempty");

  if (j.contains("base_models")) {
    for (const auto& mj : j.at("base_models")) cfg.exp.base_models.push_back(detail::parse_model(mj));
  } else {
    cfg.exp.base_models.push_back({"ridge", ModelSpec{}});
  }

  cfg.exp.p_r = get_or(j, "p_r", 0.2);
  if (!(cfg.exp.p_r > 0.0 && cfg.exp.p_r <= 1.0)) throw ConfigError("p_r must be in (0,1]");
  cfg.exp.beta = get_or(j, "beta", 1.0);
  if (cfg.exp.beta < 0.0) throw ConfigError("beta must be >= 0");
  cfg.exp.n_runs = get_or(j, "n_runs", 10);
  if (cfg.exp.n_runs < 1) throw ConfigError("n_runs must be >= 1");
  cfg.exp.base_seed = get_or<std::uint64_t>(j, "base_seed", 0);
  cfg.exp.threads = get_or(j, "threads", 1);
  if (cfg.exp.threads < 1) throw ConfigError("threads must be >= 1");
  cfg.exp.pooled_mean = get_or(j, "pooled_mean", false);
  cfg.exp.rct_propensity = get_or(j, "rct_propensity", 0.5);
  if (!(cfg.exp.rct_propensity > 0.0 && cfg.exp.rct_propensity < 1.0))
    throw ConfigError("rct_propensity must be in (0,1)");

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  cfg.config_hash = hex.str();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace cio
