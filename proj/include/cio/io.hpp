#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cio/bench.hpp"
#include "cio/config.hpp"
#include "cio/csv.hpp"
#include "cio/synth.hpp"

namespace cio {

namespace detail {

// write-temp-then-rename so readers never observe a partial file
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string opt_real(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

}  // namespace detail

inline std::string dataset_to_csv(const Dataset& ds) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < ds.p(); ++j) out << "x_" << j << ",";
  out << "t,s,y,y0_true,y1_true,tau_true\n";
  for (const Unit& unit : ds.units()) {
    for (Eigen::Index j = 0; j < ds.p(); ++j) out << format_real(unit.x[j]) << ",";
    out << unit.t << "," << unit.s << "," << format_real(unit.y) << ","
        << detail::opt_real(unit.y0_true) << "," << detail::opt_real(unit.y1_true) << ","
        << detail::opt_real(unit.tau_true) << "\n";
  }
  return out.str();
}

inline void write_split(const FusionSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::atomic_write(dir / "os.csv", dataset_to_csv(split.os));
  detail::atomic_write(dir / "rct.csv", dataset_to_csv(split.rct));
  detail::atomic_write(dir / "test.csv", dataset_to_csv(split.test));
}

inline std::string results_to_csv(const SweepTable& table, const std::string& config_hash) {
  std::ostringstream out;
  out << "# tool_version=" << kToolVersion << "\n";
  out << "# config_hash=" << config_hash << "\n";
  out << "dataset,method,base_model,p_r,beta,os_control_count,run_index,seed,sqrt_pehe\n";
  for (const ResultRow& row : table.rows) {
    out << row.dataset << "," << row.method << "," << row.base_model << ","
        << format_real(row.p_r) << "," << format_real(row.beta) << ","
        << (row.os_control_count ? std::to_string(*row.os_control_count) : std::string()) << ","
        << row.run_index << "," << row.seed << "," << format_real(row.sqrt_pehe) << "\n";
  }
  out << "# summary\n";
  out << "method,base_model,p_r,beta,os_control_count,n_runs,mean_sqrt_pehe,std_sqrt_pehe\n";
  for (const auto& [key, s] : table.summaries) {
    const auto& [method, model, p_r, beta, osc] = key;
    out << method << "," << model << "," << format_real(p_r) << "," << format_real(beta) << ","
        << osc << "," << s.n_runs << "," << format_real(s.mean) << "," << format_real(s.std)
        << "\n";
  }
  return out.str();
}

inline void write_results(const SweepTable& table, const std::string& config_hash,
                          const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::atomic_write(path, results_to_csv(table, config_hash));
}

}  // namespace cio
