#pragma once

#include <optional>
#include <string>
#include <vector>

#include <flexasm/scenario.hpp>

namespace flexasm::tools {

/// Settings shared by every command.
struct RunManifest {
  std::string scenario_path;  // empty: built-in Table 1-2 scenario with N = 4
  std::string command;
  std::string out_dir;
  unsigned seed = 1;
  int threads = 0;
};

struct AnalyzeOptions {
  std::vector<std::string> channels{"T_G[1]:omega_dot[1]"};
  double fmin_hz = 0.01;
  double fmax_hz = 100.0;
  int points = 400;
  bool closed = false;
  scenario::AssemblyState state;
};

struct OptimizeOptions {
  std::string cost = "hinf-wrench";
  std::string hard_cap;  // "3.5" or "-10dB"
  std::string from = "1,1";
  std::string to = "*";
  std::string graph;     // pickup | assemble; inferred from `to` when empty
  int n = 0;             // structure size; 0 means N - 1 (or N when N = 1)
};

scenario::ScenarioConfig load_config(const RunManifest& m);

int cmd_analyze(const RunManifest& m, const AnalyzeOptions& o);
int cmd_optimize(const RunManifest& m, const OptimizeOptions& o);
int cmd_full_assembly(const RunManifest& m, const std::string& cost,
                      const std::string& hard_cap);
int cmd_validate(const RunManifest& m, const std::vector<std::string>& body_files);

/// "3.5" -> 3.5, "-6dB" -> 10^(-6/20).
std::optional<double> parse_hard_cap(const std::string& text);

}  // namespace flexasm::tools
