#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include <flexasm/error.hpp>

#include "commands.hpp"

namespace {

int exit_code(flexasm::ErrorCode c) {
  using flexasm::ErrorCode;
  switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
    case ErrorCode::UnitError:
    case ErrorCode::LayoutError:
    case ErrorCode::DisconnectedLayout:
    case ErrorCode::InvalidArgument:
    case ErrorCode::StateInvalid:
    case ErrorCode::NegativeCount:
    case ErrorCode::MissingStructureData:
      return 2;
    case ErrorCode::Unreachable:
      return 4;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace flexasm::tools;
  CLI::App app{"Flexible spacecraft assembly modeling and path optimization"};
  app.require_subcommand(1);

  RunManifest m;
  if (const char* env = std::getenv("FLEXASM_OUT_DIR")) m.out_dir = env;
  app.add_option("--scenario", m.scenario_path, "Scenario YAML file");
  app.add_option("--out", m.out_dir, "Output directory (default $FLEXASM_OUT_DIR or ./flexasm_out)");
  app.add_option("--seed", m.seed, "Seed recorded in the run log");
  app.add_option("--threads", m.threads, "Worker threads (0 = hardware concurrency)");

  AnalyzeOptions ao;
  std::string loop = "open";
  std::vector<int> state;
  auto* analyze = app.add_subcommand("analyze", "Frequency responses of the open or closed loop");
  analyze->add_option("--channel", ao.channels, "in[i]:out[k], repeatable")->take_all();
  analyze->add_option("--fmin", ao.fmin_hz, "Lowest frequency [Hz]");
  analyze->add_option("--fmax", ao.fmax_hz, "Highest frequency [Hz]");
  analyze->add_option("--points", ao.points, "Number of log-spaced points");
  analyze->add_option("--loop", loop, "open or closed")->check(CLI::IsMember({"open", "closed"}));
  analyze->add_option("--state", state, "n j arm delta")->expected(4);

  OptimizeOptions oo;
  auto* optimize = app.add_subcommand("optimize", "Weighted vs unweighted path on one node graph");
  optimize->add_option("--cost", oo.cost, "hinf-wrench | h2-theta | hinf-isens | mu");
  optimize->add_option("--hard-cap", oo.hard_cap, "Per-grid-point cap, absolute or in dB");
  optimize->add_option("--from", oo.from, "Start node tile,arm");
  optimize->add_option("--to", oo.to, "Goal node tile,arm or 0 (stack) or * (next cell)");
  optimize->add_option("--graph", oo.graph, "pickup or assemble");
  optimize->add_option("--n", oo.n, "Structure size of the graph");

  std::string fa_cost = "hinf-wrench", fa_cap;
  auto* full = app.add_subcommand("full-assembly", "Plan the whole assembly sequence");
  full->add_option("--cost", fa_cost, "hinf-wrench | h2-theta | hinf-isens | mu");
  full->add_option("--hard-cap", fa_cap, "Per-grid-point cap, absolute or in dB");

  std::vector<std::string> bodies;
  auto* validate = app.add_subcommand("validate", "Check data invariants");
  validate->add_option("bodies", bodies, "Body files to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*analyze) {
      m.command = "analyze";
      ao.closed = loop == "closed";
      if (!state.empty()) ao.state = {state[0], state[1], state[2], state[3]};
      return cmd_analyze(m, ao);
    }
    if (*optimize) {
      m.command = "optimize";
      return cmd_optimize(m, oo);
    }
    if (*full) {
      m.command = "full-assembly";
      return cmd_full_assembly(m, fa_cost, fa_cap);
    }
    m.command = "validate";
    return cmd_validate(m, bodies);
  } catch (const flexasm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
