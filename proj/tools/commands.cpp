#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <regex>

#include <fmt/format.h>
#include <json.hpp>

#include <flexasm/error.hpp>
#include <flexasm/linss.hpp>
#include <flexasm/modal.hpp>
#include <flexasm/pathopt.hpp>

#include "svg.hpp"

namespace flexasm::tools {

namespace fs = std::filesystem;
using nlohmann::json;
using pathopt::CostSpec;
using pathopt::GraphKind;
using pathopt::NodeGraph;
using pathopt::Plan;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidArgument, "cannot write '" + path.string() + "'");
  out << text;
}

fs::path out_dir(const RunManifest& m) {
  fs::path dir = m.out_dir.empty() ? fs::path("flexasm_out") : fs::path(m.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::InvalidArgument, "cannot create output directory '" + dir.string() + "'");
  return dir;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.10e}", v);
}

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct ChannelSpec {
  std::string in, out;
  int in_index = 0;  // 1-based, 0 for the whole channel
  int out_index = 0;
  std::string text;
};

ChannelSpec parse_channel(const std::string& text) {
  static const std::regex re(R"(^\s*([A-Za-z_]\w*)(?:\[(\d+)\])?\s*:\s*([A-Za-z_]\w*)(?:\[(\d+)\])?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    fail(ErrorCode::InvalidArgument,
         "channel '" + text + "' must look like T_G[1]:omega_dot[1]");
  }
  ChannelSpec c;
  c.text = text;
  c.in = m[1];
  c.out = m[3];
  if (m[2].matched) c.in_index = std::stoi(m[2]);
  if (m[4].matched) c.out_index = std::stoi(m[4]);
  return c;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

pathopt::Node parse_node(const std::string& text) {
  if (text == "0" || text == "*") return {0, 0};
  static const std::regex re(R"(^\s*(\d+)\s*,\s*(\d+)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    fail(ErrorCode::InvalidArgument, "node '" + text + "' must be tile,arm or 0 or *");
  }
  return {std::stoi(m[1]), std::stoi(m[2])};
}

std::string action_name(const NodeGraph& g, const pathopt::Edge& e) {
  return g.nodes[e.to].is_action() ? pathopt::to_string(g.kind) : "walk";
}

json grid_json(const pathopt::GridPoint& p) {
  json q = json::array();
  for (const auto& arm : p.config.q) q.push_back(std::vector<double>(arm.begin(), arm.end()));
  return {{"n", p.state.n}, {"tile", p.state.j}, {"arm", p.state.arm},
          {"delta", p.state.delta}, {"hub_distance_m", p.hub_distance}, {"joints_rad", q}};
}

json edge_json(pathopt::Planner& pl, const NodeGraph& g, const pathopt::Edge& e,
               double cost) {
  json j = {{"graph", pathopt::to_string(g.kind)}, {"n", g.n},
            {"from", g.label(e.from)}, {"to", g.label(e.to)},
            {"action", action_name(g, e)}, {"cost", num_json(cost)}};
  if (auto arr = pl.models(g, e)) {
    j["mean_hub_distance_m"] = arr->mean_hub_distance();
    json wp = json::array();
    for (const auto* leg : {&arr->leg1, &arr->leg2}) {
      for (const auto& p : *leg) wp.push_back(grid_json(p));
    }
    j["waypoints"] = wp;
  }
  return j;
}

struct MetricRow {
  int grid = 0;
  double value = 0.0;
  int edge = 0;
  std::string action;
};

void write_metrics(const fs::path& path, const std::vector<std::pair<std::string, std::vector<MetricRow>>>& plans) {
  std::string csv = "plan,grid_index,metric,edge_id,action\n";
  for (const auto& [name, rows] : plans) {
    for (const auto& r : rows) {
      csv += fmt::format("{},{},{},{},{}\n", name, r.grid, num(r.value), r.edge, r.action);
    }
  }
  write_file(path, csv);
}

void write_compare_plot(const fs::path& path, const std::string& title,
                        const std::vector<MetricRow>& weighted,
                        const std::vector<MetricRow>& unweighted) {
  std::vector<Series> s(2);
  s[0].label = "weighted (Dijkstra)";
  s[1].label = "unweighted (BFS)";
  for (const auto& r : weighted) {
    s[0].x.push_back(r.grid);
    s[0].y.push_back(r.value);
  }
  for (const auto& r : unweighted) {
    s[1].x.push_back(r.grid);
    s[1].y.push_back(r.value);
  }
  PlotOptions o;
  o.title = title;
  o.x_label = "grid point";
  o.y_label = "metric";
  write_file(path, line_plot(s, o));
}

void print_comparison(double weighted, double unweighted) {
  fmt::print("cumulative weighted:   {:.6g}\n", weighted);
  fmt::print("cumulative unweighted: {:.6g}\n", unweighted);
  if (weighted > 0.0 && std::isfinite(weighted) && std::isfinite(unweighted)) {
    fmt::print("unweighted is {:.2f}% higher than weighted\n",
               100.0 * (unweighted - weighted) / weighted);
  }
}

}  // namespace

std::optional<double> parse_hard_cap(const std::string& text) {
  if (text.empty()) return std::nullopt;
  static const std::regex re(R"(^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(dB|db)?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    fail(ErrorCode::InvalidArgument, "hard cap '" + text + "' is not a number or dB value");
  }
  const double v = std::stod(m[1]);
  const double cap = m[2].matched ? std::pow(10.0, v / 20.0) : v;
  if (!(cap > 0.0)) fail(ErrorCode::InvalidArgument, "hard cap must be positive");
  return cap;
}

scenario::ScenarioConfig load_config(const RunManifest& m) {
  if (m.scenario_path.empty()) return scenario::ScenarioConfig::defaults(4);
  if (!fs::exists(m.scenario_path)) {
    fail(ErrorCode::ParseError, "scenario file '" + m.scenario_path + "' not found");
  }
  auto cfg = scenario::load_scenario(m.scenario_path);
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
  return cfg;
}

int cmd_analyze(const RunManifest& m, const AnalyzeOptions& o) {
  if (!(o.fmin_hz > 0.0) || !(o.fmax_hz > o.fmin_hz) || o.points < 2) {
    fail(ErrorCode::InvalidArgument, "need 0 < fmin < fmax and points >= 2");
  }
  const scenario::Scenario sc(load_config(m));
  scenario::check_state(sc.config(), o.state);
  const scenario::RobotConfiguration rc;
  const auto plant = o.closed ? sc.closed_loop(o.state, rc) : sc.build_open_loop(o.state, rc);
  const std::array<double, 3> deltas{-1.0, 0.0, 1.0};
  std::vector<linss::StateSpace> systems;
  for (double d : deltas) systems.push_back(linss::lft_upper(plant, d, "w_omega", "z_omega"));
  const auto grid = linss::FrequencyGrid::logspace(2.0 * std::numbers::pi * o.fmin_hz,
                                                   2.0 * std::numbers::pi * o.fmax_hz, o.points);
  const fs::path dir = out_dir(m);

  for (const auto& text : o.channels) {
    const auto ch = parse_channel(text);
    const auto& s0 = systems[1];
    if (!s0.has_input(ch.in)) fail(ErrorCode::UnknownChannel, "no input '" + ch.in + "'");
    if (!s0.has_output(ch.out)) fail(ErrorCode::UnknownChannel, "no output '" + ch.out + "'");
    auto range = [](int offset, int width, int index, const std::string& name) {
      if (index == 0) return std::pair{offset, width};
      if (index < 1 || index > width) {
        fail(ErrorCode::WidthMismatch, "index " + std::to_string(index) + " outside '" + name + "'");
      }
      return std::pair{offset + index - 1, 1};
    };
    const auto [ci, ni] = range(s0.input_offset(ch.in), s0.input_width(ch.in), ch.in_index, ch.in);
    const auto [co, no] = range(s0.output_offset(ch.out), s0.output_width(ch.out), ch.out_index, ch.out);

    std::vector<Series> traces(3);
    const char* labels[] = {"delta = -1", "delta = 0 (nominal)", "delta = +1"};
    std::string csv = "freq_hz,sigma_max,sigma_delta_m1,sigma_delta_0,sigma_delta_p1\n";
    for (double w : grid.points()) {
      std::array<double, 3> sig{};
      for (int k = 0; k < 3; ++k) {
        const auto G = linss::evaluate(systems[k], {0.0, w});
        sig[k] = linss::sigma_max(G.block(co, ci, no, ni));
        traces[k].x.push_back(w / (2.0 * std::numbers::pi));
        traces[k].y.push_back(sig[k]);
      }
      csv += fmt::format("{},{},{},{},{}\n", num(w / (2.0 * std::numbers::pi)), num(sig[1]),
                         num(sig[0]), num(sig[1]), num(sig[2]));
    }
    for (int k = 0; k < 3; ++k) traces[k].label = labels[k];
    const std::string base = "analyze_" + slug(ch.text);
    write_file(dir / (base + ".csv"), csv);
    PlotOptions po;
    po.title = ch.text + (o.closed ? " (closed loop)" : " (open loop)");
    po.x_label = "frequency [Hz]";
    po.y_label = "maximum singular value";
    po.log_x = po.log_y = true;
    write_file(dir / (base + ".svg"), line_plot(traces, po));
    const auto dc = linss::evaluate(systems[1], {0.0, 0.0});
    fmt::print("{}: {} points written to {}; nominal DC gain {:.6g}\n", ch.text, grid.size(),
               (dir / (base + ".csv")).string(), linss::sigma_max(dc.block(co, ci, no, ni)));
  }
  return 0;
}

int cmd_optimize(const RunManifest& m, const OptimizeOptions& o) {
  const scenario::Scenario sc(load_config(m));
  const int N = sc.config().tiles_total;
  const pathopt::Node from = parse_node(o.from);
  const pathopt::Node to = parse_node(o.to);
  GraphKind kind;
  if (!o.graph.empty()) {
    if (o.graph == "pickup") {
      kind = GraphKind::Pickup;
    } else if (o.graph == "assemble") {
      kind = GraphKind::Assemble;
    } else {
      fail(ErrorCode::InvalidArgument, "graph must be pickup or assemble");
    }
  } else {
    kind = o.to == "0" ? GraphKind::Pickup : GraphKind::Assemble;
  }
  const int n = o.n > 0 ? o.n : std::max(1, N - 1);
  const CostSpec spec{pathopt::parse_cost_kind(o.cost), parse_hard_cap(o.hard_cap)};

  pathopt::Planner pl(sc, sc.config().grid_points, m.threads);
  const NodeGraph& g = pl.graph(kind, n);
  const int src = g.index_of(from), dst = g.index_of(to);
  const Eigen::MatrixXd W = pl.weights(g, spec);
  const auto weighted = pathopt::shortest_path(W, src, dst, pathopt::SearchMode::Dijkstra);
  const auto unweighted = pathopt::shortest_path(W, src, dst, pathopt::SearchMode::BfsUnit);

  const fs::path dir = out_dir(m);
  json log = {{"scenario", sc.config().name}, {"command", "optimize"},
              {"cost", o.cost}, {"seed", m.seed}, {"graph", pathopt::to_string(kind)},
              {"n", n}, {"grid_points", sc.config().grid_points}};
  if (spec.hard_cap) log["hard_cap"] = *spec.hard_cap;
  std::vector<std::pair<std::string, std::vector<MetricRow>>> rows;
  for (const auto& [name, path] : {std::pair{"weighted", weighted}, std::pair{"unweighted", unweighted}}) {
    json plan = {{"cumulative", num_json(path.weight)}, {"hops", path.hops}};
    json nodes = json::array(), edges = json::array();
    std::vector<MetricRow> series;
    for (int v : path.nodes) nodes.push_back(g.label(v));
    for (std::size_t k = 1; k < path.nodes.size(); ++k) {
      const pathopt::Edge e{kind, n, path.nodes[k - 1], path.nodes[k]};
      edges.push_back(edge_json(pl, g, e, W(e.from, e.to)));
      const auto v = pl.metric(g, e, spec.kind);
      for (double x : v.value()) {
        series.push_back({static_cast<int>(series.size()), x, static_cast<int>(k - 1), action_name(g, e)});
      }
    }
    plan["nodes"] = nodes;
    plan["edges"] = edges;
    log[name] = plan;
    rows.push_back({name, series});
  }
  log["dropped_edges"] = pl.log();
  write_file(dir / "optimize_trajectory.json", log.dump(2) + "\n");
  write_metrics(dir / "optimize_metrics.csv", rows);
  write_compare_plot(dir / "optimize_compare.svg",
                     fmt::format("{} F{} {} -> {} ({})", pathopt::to_string(kind), n, o.from, o.to, o.cost),
                     rows[0].second, rows[1].second);
  fmt::print("weighted path:  ");
  for (int v : weighted.nodes) fmt::print(" ({})", g.label(v));
  fmt::print("\nunweighted path:");
  for (int v : unweighted.nodes) fmt::print(" ({})", g.label(v));
  fmt::print("\ngrid points: {} weighted, {} unweighted\n", rows[0].second.size(), rows[1].second.size());
  print_comparison(weighted.weight, unweighted.weight);
  return 0;
}

int cmd_full_assembly(const RunManifest& m, const std::string& cost,
                      const std::string& hard_cap) {
  const scenario::Scenario sc(load_config(m));
  const CostSpec spec{pathopt::parse_cost_kind(cost), parse_hard_cap(hard_cap)};
  pathopt::Planner pl(sc, sc.config().grid_points, m.threads);
  const auto res = pl.plan_full_assembly(spec);
  const fs::path dir = out_dir(m);

  json log = {{"scenario", sc.config().name}, {"command", "full-assembly"}, {"cost", cost},
              {"seed", m.seed}, {"graphs", res.graphs_built},
              {"grid_points", sc.config().grid_points}};
  if (spec.hard_cap) log["hard_cap"] = *spec.hard_cap;
  std::vector<std::pair<std::string, std::vector<MetricRow>>> rows;
  for (const auto& [name, plan] : {std::pair<std::string, const Plan&>{"weighted", res.weighted},
                                   std::pair<std::string, const Plan&>{"unweighted", res.unweighted}}) {
    json steps = json::array();
    std::vector<MetricRow> series;
    int edge_id = 0;
    for (const auto& st : plan.steps) {
      const NodeGraph& g = pl.graph(st.kind, st.n);
      json path = json::array(), edges = json::array();
      for (const auto& v : st.path) path.push_back(g.label(g.index_of(v)));
      for (std::size_t k = 0; k < st.edges.size(); ++k) {
        edges.push_back(edge_json(pl, g, st.edges[k], st.edge_costs[k]));
      }
      for (std::size_t i = 0; i < st.metric.size(); ++i) {
        const auto& e = st.edges[st.metric_edge[i]];
        series.push_back({static_cast<int>(series.size()), st.metric[i],
                          edge_id + st.metric_edge[i], action_name(g, e)});
      }
      edge_id += static_cast<int>(st.edges.size());
      steps.push_back({{"graph", pathopt::to_string(st.kind)}, {"n", st.n}, {"path", path},
                       {"edges", edges}, {"mean_hub_distance_m", st.mean_hub_distance}});
    }
    log[name] = {{"cumulative", num_json(plan.cumulative)}, {"hops", plan.hops},
                 {"mean_hub_distance_m", plan.mean_hub_distance}, {"steps", steps}};
    rows.push_back({name, series});
  }
  log["dropped_edges"] = res.log;
  write_file(dir / "full_assembly_trajectory.json", log.dump(2) + "\n");
  write_metrics(dir / "full_assembly_metrics.csv", rows);
  write_compare_plot(dir / "full_assembly_compare.svg", "full assembly (" + cost + ")",
                     rows[0].second, rows[1].second);

  json graphs = json::array();
  for (int n = 1; n <= sc.config().tiles_total; ++n) {
    for (auto kind : {GraphKind::Pickup, GraphKind::Assemble}) {
      const NodeGraph& g = pl.graph(kind, n);
      json labels = json::array(), adj = json::array(), w = json::array();
      for (int i = 0; i < g.size(); ++i) labels.push_back(g.label(i));
      const bool weighted = n < sc.config().tiles_total;
      const Eigen::MatrixXd W = weighted ? pl.weights(g, spec) : Eigen::MatrixXd();
      for (int i = 0; i < g.size(); ++i) {
        json ra = json::array(), rw = json::array();
        for (int j = 0; j < g.size(); ++j) {
          ra.push_back(static_cast<int>(g.adjacency(i, j)));
          rw.push_back(weighted ? num_json(W(i, j)) : json(nullptr));
        }
        adj.push_back(ra);
        w.push_back(rw);
      }
      graphs.push_back({{"graph", pathopt::to_string(kind)}, {"n", n}, {"nodes", labels},
                        {"adjacency", adj}, {"weights", w}});
    }
  }
  write_file(dir / "node_graphs.json", graphs.dump(1) + "\n");

  fmt::print("graphs: {}\n", res.graphs_built);
  for (const auto& st : res.weighted.steps) {
    const NodeGraph& g = pl.graph(st.kind, st.n);
    fmt::print("  {:8} F{}:", pathopt::to_string(st.kind), st.n);
    for (const auto& v : st.path) fmt::print(" ({})", g.label(g.index_of(v)));
    fmt::print("\n");
  }
  fmt::print("grid points: {} weighted, {} unweighted\n", rows[0].second.size(), rows[1].second.size());
  fmt::print("mean robot-hub distance: {:.4f} m weighted, {:.4f} m unweighted\n",
             res.weighted.mean_hub_distance, res.unweighted.mean_hub_distance);
  print_comparison(res.weighted.cumulative, res.unweighted.cumulative);
  return 0;
}

int cmd_validate(const RunManifest& m, const std::vector<std::string>& body_files) {
  int parse_failures = 0, failures = 0;
  auto check = [&](const std::string& name, auto&& fn) {
    try {
      const std::vector<std::string> warnings = fn();
      if (warnings.empty()) {
        fmt::print("PASS {}\n", name);
      } else {
        for (const auto& w : warnings) fmt::print("WARN {}: {}\n", name, w);
      }
      return true;
    } catch (const Error& e) {
      fmt::print("FAIL {}: {}\n", name, e.what());
      const auto c = e.code();
      if (c == ErrorCode::ParseError || c == ErrorCode::SchemaError || c == ErrorCode::UnitError) {
        ++parse_failures;
      } else {
        ++failures;
      }
      return false;
    }
  };

  for (const auto& f : body_files) {
    check("body " + f, [&] { return modal::load_body_file(f).warnings; });
  }
  if (!m.scenario_path.empty() || body_files.empty()) {
    std::optional<scenario::ScenarioConfig> cfg;
    const std::string label = m.scenario_path.empty() ? "built-in" : m.scenario_path;
    check("scenario " + label, [&] {
      cfg = load_config(m);
      return cfg->warnings;
    });
    if (cfg) {
      check("hub inertia", [&] {
        multibody::validate(cfg->hub);
        return std::vector<std::string>{};
      });
      check("tile inertia", [&] {
        multibody::validate(cfg->tile);
        return std::vector<std::string>{};
      });
      check("solar array modal data", [&] { return multibody::validate(cfg->solar_array); });
      check("robot geometry", [&] {
        robot::validate(cfg->robot.arm);
        multibody::validate(cfg->robot.hub);
        return std::vector<std::string>{};
      });
      check("layout connectivity", [&] {
        modal::validate(cfg->layout);
        modal::build_lattice(cfg->layout.prefix(cfg->tiles_total), cfg->lattice);
        return std::vector<std::string>{};
      });
      for (const auto& f : cfg->structure_files) {
        check(fmt::format("structure file n={} j={}", f.n, f.j),
              [&] { return multibody::validate(f.data); });
      }
      if (cfg->use_lattice) {
        check(fmt::format("structure modes F{}", cfg->tiles_total), [&] {
          const scenario::Scenario sc(*cfg);
          return multibody::validate(sc.structure(cfg->tiles_total, 1));
        });
      }
    }
  }
  if (parse_failures) return 2;
  return failures ? 3 : 0;
}

}  // namespace flexasm::tools
