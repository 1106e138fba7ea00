// Command line driver: gen writes a fused dataset split to CSV, run executes
// the configured experiment grid, sweep varies one axis across a value list.
// Exit codes: 0 ok, 1 bad config, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cio/bench.hpp"
#include "cio/config.hpp"
#include "cio/io.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    if (field.empty()) continue;
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size()) throw cio::ConfigError("bad value in --values: \"" + field + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw cio::ConfigError("--values must list at least one number");
  return out;
}

void flush_diagnostics(const std::vector<std::string>& diag) {
  for (const std::string& line : diag) std::cerr << line << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterogeneous effect estimation from fused trial + observational data"};
  app.require_subcommand(1);

  std::string config_path, out_path, axis_name, values_csv;
  std::optional<std::uint64_t> seed_override;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--out", out_path, "output path")->required();
    cmd->add_option("--seed", seed_override, "override base_seed from the config");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a dataset split (os/rct/test CSVs)");
  add_common(gen);
  CLI::App* run = app.add_subcommand("run", "run the experiment grid, write results CSV");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "repeat the experiment along one axis");
  add_common(sweep);
  sweep->add_option("--axis", axis_name, "p_r | beta | os_control_count")->required();
  sweep->add_option("--values", values_csv, "comma separated axis values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    cio::RunConfig cfg = cio::load_config(config_path);
    if (seed_override) cfg.exp.base_seed = *seed_override;

    if (gen->parsed()) {
      cio::FusionSplit split =
          cio::detail::build_split(cfg.exp.recipe, cfg.exp.beta, cfg.exp.base_seed);
      cio::write_split(split, out_path);
      std::cerr << "wrote " << split.os.size() << " os, " << split.rct.size() << " rct, "
                << split.test.size() << " test rows under " << out_path << "\n";
    } else if (run->parsed()) {
      std::vector<std::string> diag;
      cio::SweepTable table = cio::repeat(cfg.exp, &diag);
      flush_diagnostics(diag);
      cio::write_results(table, cfg.config_hash, out_path);
    } else {
      cio::SweepAxis axis;
      try {
        axis = cio::parse_axis(axis_name);
      } catch (const std::invalid_argument& e) {
        throw cio::ConfigError(e.what());
      }
      std::vector<double> values = parse_values(values_csv);
      std::vector<std::string> diag;
      cio::SweepTable table;
      try {
        table = cio::sweep(cfg.exp, axis, values, &diag);
      } catch (const std::invalid_argument& e) {
        // axis/value validation happens before any run starts
        throw cio::ConfigError(e.what());
      }
      flush_diagnostics(diag);
      cio::write_results(table, cfg.config_hash, out_path);
    }
  } catch (const cio::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
