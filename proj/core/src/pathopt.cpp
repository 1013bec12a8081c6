#include "flexasm/pathopt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <queue>
#include <thread>

#include "flexasm/error.hpp"
#include "flexasm/robust.hpp"

namespace flexasm::pathopt {

using linss::StateSpace;
using multibody::Mat3;
using multibody::Vec3;

std::string to_string(GraphKind k) {
  return k == GraphKind::Pickup ? "pickup" : "assemble";
}

std::string to_string(CostKind k) {
  switch (k) {
    case CostKind::HinfWrench: return "hinf-wrench";
    case CostKind::H2Theta: return "h2-theta";
    case CostKind::HinfInputSens: return "hinf-isens";
    case CostKind::Mu: return "mu";
  }
  return "?";
}

CostKind parse_cost_kind(const std::string& text) {
  for (auto k : {CostKind::HinfWrench, CostKind::H2Theta, CostKind::HinfInputSens,
                 CostKind::Mu}) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown cost '" + text + "'");
}

int NodeGraph::index_of(const Node& node) const {
  if (node.is_action()) return action_index();
  if (node.tile < 1 || node.tile > n || (node.arm != 1 && node.arm != 2)) {
    fail(ErrorCode::InvalidArgument, "node (" + std::to_string(node.tile) + "," +
                                         std::to_string(node.arm) + ") not in graph");
  }
  return 2 * (node.tile - 1) + (node.arm - 1);
}

std::string NodeGraph::label(int index) const {
  const Node& v = nodes.at(index);
  if (v.is_action()) return kind == GraphKind::Pickup ? "0" : "*";
  return std::to_string(v.tile) + "," + std::to_string(v.arm);
}

int NodeGraph::num_edges() const {
  return static_cast<int>((adjacency.array() != 0.0).count());
}

std::pair<NodeGraph, NodeGraph> build_node_graphs(const modal::TileLayout& layout,
                                                  int n,
                                                  const std::vector<bool>& near_stack) {
  if (n < 1 || n > layout.size()) {
    fail(ErrorCode::LayoutError, "graph size " + std::to_string(n) + " exceeds layout");
  }
  modal::validate(layout.prefix(n));
  NodeGraph base;
  base.n = n;
  for (int t = 1; t <= n; ++t) {
    base.nodes.push_back({t, 1});
    base.nodes.push_back({t, 2});
  }
  base.nodes.push_back({0, 0});
  const int size = 2 * n + 1;
  base.adjacency = Eigen::MatrixXd::Zero(size, size);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b || !modal::adjacent(layout.cells[a], layout.cells[b])) continue;
      base.adjacency(2 * a, 2 * b + 1) = 1.0;
      base.adjacency(2 * a + 1, 2 * b) = 1.0;
    }
  }
  NodeGraph pick = base, assemble = base;
  pick.kind = GraphKind::Pickup;
  assemble.kind = GraphKind::Assemble;
  const int act = 2 * n;
  for (int a = 0; a < n; ++a) {
    if (a < static_cast<int>(near_stack.size()) && near_stack[a]) {
      pick.adjacency(2 * a, act) = pick.adjacency(2 * a + 1, act) = 1.0;
    }
    if (n < layout.size() && modal::adjacent(layout.cells[a], layout.cells[n])) {
      assemble.adjacency(2 * a, act) = assemble.adjacency(2 * a + 1, act) = 1.0;
    }
  }
  return {std::move(pick), std::move(assemble)};
}

std::pair<NodeGraph, NodeGraph> build_node_graphs(const scenario::ScenarioConfig& cfg,
                                                  int n) {
  if (n < 1 || n > cfg.tiles_total) {
    fail(ErrorCode::LayoutError, "n must lie in 1..N");
  }
  std::vector<bool> near(n);
  const Vec3 c0 = scenario::stack_position(cfg);
  for (int t = 1; t <= n; ++t) {
    near[t - 1] = (scenario::tile_position(cfg, t) - c0).norm() <= cfg.stack_reach + 1e-9;
  }
  const auto layout = cfg.layout.size() > cfg.tiles_total
                          ? cfg.layout.prefix(cfg.tiles_total)
                          : cfg.layout;
  return build_node_graphs(layout, n, near);
}

std::string describe(const NodeGraph& g, const Edge& e) {
  return to_string(g.kind) + " F" + std::to_string(g.n) + " (" + g.label(e.from) +
         ") -> (" + g.label(e.to) + ")";
}

double EdgeModelArray::mean_hub_distance() const {
  double sum = 0.0;
  int count = 0;
  for (const auto* leg : {&leg1, &leg2}) {
    for (const auto& p : *leg) {
      sum += p.hub_distance;
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

namespace {

struct EdgeGeometry {
  Node src, dst;   // dst.arm is the reaching arm (3 for actions)
  Vec3 target_p;
  Mat3 target_R;
};

EdgeGeometry edge_geometry(const scenario::Scenario& sc, const NodeGraph& g,
                           const Edge& e) {
  if (g.adjacency(e.from, e.to) == 0.0) {
    fail(ErrorCode::InvalidArgument, "no edge " + describe(g, e));
  }
  const auto& cfg = sc.config();
  EdgeGeometry out;
  out.src = g.nodes[e.from];
  const Node to = g.nodes[e.to];
  if (!to.is_action()) {
    out.dst = to;
    out.target_p = scenario::tile_position(cfg, to.tile);
    out.target_R = Mat3::Identity();
  } else if (g.kind == GraphKind::Pickup) {
    out.dst = {0, 3};
    out.target_p = scenario::stack_position(cfg);
    out.target_R = cfg.stack_dcm;
  } else {
    out.dst = {0, 3};
    out.target_p = scenario::tile_position(cfg, g.n + 1);
    out.target_R = Mat3::Identity();
  }
  return out;
}

std::array<robot::JointVector, 3> split_joints(const EdgeGeometry& eg,
                                               const Eigen::VectorXd& q10) {
  std::array<robot::JointVector, 3> q{};
  for (int j = 0; j < 5; ++j) {
    q[eg.src.arm - 1][j] = q10(j);
    q[eg.dst.arm - 1][j] = q10(5 + j);
  }
  return q;
}

GridPoint grid_point(const scenario::Scenario& sc, const AssemblyState& s,
                     const std::array<robot::JointVector, 3>& q) {
  GridPoint p;
  p.state = s;
  p.config.q = q;
  p.hub_distance = sc.frames(s, p.config).hub.p.norm();
  return p;
}

}  // namespace

Eigen::VectorXd action_pose(const scenario::Scenario& sc, const NodeGraph& g,
                            const Edge& e) {
  const auto eg = edge_geometry(sc, g, e);
  const auto& cfg = sc.config();
  const auto chain = robot::robot_chain(cfg.robot, eg.src.arm - 1, eg.dst.arm - 1);
  robot::Pose base;
  base.p = scenario::tile_position(cfg, eg.src.tile);
  robot::Pose target;
  target.p = eg.target_p;
  target.R = eg.target_R;
  return robot::solve_ik(chain, base, target, Eigen::VectorXd::Zero(10));
}

EdgeModelArray grid_edge_models(const scenario::Scenario& sc, const NodeGraph& g,
                                const Edge& e, int z) {
  if (z < 2) fail(ErrorCode::InvalidArgument, "need at least two grid points");
  const auto eg = edge_geometry(sc, g, e);
  const auto q_end = split_joints(eg, action_pose(sc, g, e));
  const int carrying = g.kind == GraphKind::Assemble ? 1 : 0;

  AssemblyState pre{g.n, eg.src.tile, eg.src.arm, carrying};
  AssemblyState post = pre;
  if (!g.nodes[e.to].is_action()) {
    post.j = eg.dst.tile;
    post.arm = eg.dst.arm;
  } else if (g.kind == GraphKind::Pickup) {
    post.delta = 1;
  } else {
    post.n = g.n + 1;
    post.delta = 0;
  }

  std::array<std::vector<robot::JointVector>, 3> ramps;
  for (int k = 0; k < 3; ++k) ramps[k] = robot::quintic_waypoints({}, q_end[k], z);

  EdgeModelArray out;
  out.edge = e;
  for (int i = 0; i < z; ++i) {
    std::array<robot::JointVector, 3> q1, q2;
    for (int k = 0; k < 3; ++k) {
      q1[k] = ramps[k][i];
      q2[k] = ramps[k][z - 1 - i];
    }
    out.leg1.push_back(grid_point(sc, pre, q1));
    out.leg2.push_back(grid_point(sc, post, q2));
  }
  for (const auto* leg : {&out.leg1, &out.leg2}) {
    for (const auto& p : *leg) {
      out.open_loop.push_back(sc.build_open_loop(p.state, p.config));
      out.closed_loop.push_back(scenario::close_loop(out.open_loop.back(), sc.controller()));
    }
  }
  return out;
}

double system_metric(const StateSpace& cl, CostKind kind) {
  switch (kind) {
    case CostKind::HinfWrench:
      return linss::hinf_norm(linss::minimal_stable_projection(cl, "W_ext", "omega_dot"));
    case CostKind::H2Theta:
      return linss::h2_norm(linss::minimal_stable_projection(cl, "W_ext", "theta"));
    case CostKind::HinfInputSens:
      return linss::hinf_norm(linss::minimal_stable_projection(cl, "d_t", "e_t"));
    case CostKind::Mu:
      return robust::mu_real_repeated(
                 linss::minimal_stable_projection(cl, "w_omega", "z_omega"))
          .mu_lower;
  }
  return kInf;
}

EdgeCost edge_cost(const std::vector<double>& per_system, const CostSpec& spec) {
  if (spec.hard_cap && !(*spec.hard_cap > 0.0)) {
    fail(ErrorCode::InvalidArgument, "hard cap must be positive");
  }
  EdgeCost c;
  c.per_system = per_system;
  for (double v : per_system) {
    if (spec.hard_cap && v > *spec.hard_cap) c.capped = true;
    c.total += v;
  }
  if (c.capped) c.total = kInf;
  return c;
}

EdgeCost edge_cost(const EdgeModelArray& array, const CostSpec& spec) {
  std::vector<double> values;
  values.reserve(array.closed_loop.size());
  for (const auto& sys : array.closed_loop) values.push_back(system_metric(sys, spec.kind));
  return edge_cost(values, spec);
}

PathResult shortest_path(const Eigen::MatrixXd& weights, int src, int dst,
                         SearchMode mode) {
  const int n = static_cast<int>(weights.rows());
  if (weights.cols() != n) fail(ErrorCode::WidthMismatch, "weight matrix must be square");
  if (src < 0 || src >= n || dst < 0 || dst >= n) {
    fail(ErrorCode::InvalidArgument, "source or destination outside graph");
  }
  auto present = [&](int i, int j) {
    const double w = weights(i, j);
    return i != j && std::isfinite(w);
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (present(i, j) && weights(i, j) < 0.0) {
        fail(ErrorCode::InvalidArgument, "negative edge weight");
      }
    }
  }
  if (src == dst) return {};

  struct Label {
    double cost = kInf;
    int hops = 0;
    std::vector<int> path;
    bool better_than(const Label& o) const {
      if (cost != o.cost) return cost < o.cost;
      if (hops != o.hops) return hops < o.hops;
      return path < o.path;
    }
  };
  std::vector<Label> best(n);
  std::vector<bool> done(n, false);
  best[src] = {0.0, 0, {src}};
  for (;;) {
    int u = -1;
    for (int i = 0; i < n; ++i) {
      if (done[i] || !std::isfinite(best[i].cost)) continue;
      if (u < 0 || best[i].better_than(best[u])) u = i;
    }
    if (u < 0) break;
    done[u] = true;
    if (u == dst) break;
    for (int v = 0; v < n; ++v) {
      if (done[v] || !present(u, v)) continue;
      Label cand;
      cand.cost = best[u].cost + (mode == SearchMode::Dijkstra ? weights(u, v) : 1.0);
      cand.hops = best[u].hops + 1;
      cand.path = best[u].path;
      cand.path.push_back(v);
      if (cand.better_than(best[v])) best[v] = std::move(cand);
    }
  }
  if (!done[dst]) {
    fail(ErrorCode::Unreachable,
         "node " + std::to_string(dst) + " unreachable from " + std::to_string(src));
  }
  PathResult r;
  r.nodes = best[dst].path;
  r.hops = best[dst].hops;
  for (std::size_t k = 1; k < r.nodes.size(); ++k) r.weight += weights(r.nodes[k - 1], r.nodes[k]);
  return r;
}

Planner::Planner(const scenario::Scenario& sc, int z, int threads)
    : sc_(sc), z_(z), threads_(threads) {
  if (z < 2) fail(ErrorCode::InvalidArgument, "need at least two grid points");
  if (threads_ <= 0) threads_ = std::max(1u, std::thread::hardware_concurrency());
}

const NodeGraph& Planner::graph(GraphKind kind, int n) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = graphs_.find({kind, n});
  if (it == graphs_.end()) {
    auto [p, a] = build_node_graphs(sc_.config(), n);
    graphs_[{GraphKind::Pickup, n}] = std::move(p);
    graphs_[{GraphKind::Assemble, n}] = std::move(a);
    it = graphs_.find({kind, n});
  }
  return it->second;
}

std::shared_ptr<const EdgeModelArray> Planner::models(const NodeGraph& g, const Edge& e) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = models_.find(e); it != models_.end()) return it->second;
    if (failed_.count(e)) return nullptr;
  }
  std::shared_ptr<const EdgeModelArray> arr;
  std::string why;
  try {
    arr = std::make_shared<const EdgeModelArray>(grid_edge_models(sc_, g, e, z_));
  } catch (const Error& err) {
    why = err.what();
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (arr) {
    models_[e] = arr;
  } else {
    failed_[e] = why;
    log_.push_back("dropped " + describe(g, e) + ": " + why);
  }
  return arr;
}

std::optional<std::vector<double>> Planner::metric(const NodeGraph& g, const Edge& e,
                                                   CostKind kind) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = metrics_.find({e, kind}); it != metrics_.end()) return it->second;
  }
  std::optional<std::vector<double>> values;
  if (auto arr = models(g, e)) {
    try {
      std::vector<double> v;
      for (const auto& sys : arr->closed_loop) v.push_back(system_metric(sys, kind));
      values = std::move(v);
    } catch (const Error& err) {
      std::lock_guard<std::mutex> lock(mu_);
      log_.push_back("dropped " + describe(g, e) + " for " + to_string(kind) + ": " +
                     err.what());
    }
  }
  std::lock_guard<std::mutex> lock(mu_);
  metrics_[{e, kind}] = values;
  return values;
}

void Planner::precompute(const NodeGraph& g, CostKind kind) {
  std::vector<Edge> edges;
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) {
      if (g.adjacency(i, j) != 0.0) edges.push_back({g.kind, g.n, i, j});
    }
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next++) < edges.size();) metric(g, edges[k], kind);
  };
  const int count = std::min<int>(threads_, static_cast<int>(edges.size()));
  if (count <= 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < count; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

Eigen::MatrixXd Planner::weights(const NodeGraph& g, const CostSpec& spec) {
  precompute(g, spec.kind);
  Eigen::MatrixXd W = Eigen::MatrixXd::Constant(g.size(), g.size(), kInf);
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) {
      if (g.adjacency(i, j) == 0.0) continue;
      const auto v = metric(g, {g.kind, g.n, i, j}, spec.kind);
      if (v) W(i, j) = edge_cost(*v, spec).total;
    }
  }
  return W;
}

PathResult Planner::plan_path(const NodeGraph& g, int src, int dst, const CostSpec& spec,
                              SearchMode mode) {
  return shortest_path(weights(g, spec), src, dst, mode);
}

PlanStep Planner::make_step(const NodeGraph& g, const std::vector<int>& nodes,
                            const CostSpec& spec) {
  PlanStep step;
  step.kind = g.kind;
  step.n = g.n;
  double dist = 0.0;
  int count = 0;
  for (int v : nodes) step.path.push_back(g.nodes[v]);
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const Edge e{g.kind, g.n, nodes[k - 1], nodes[k]};
    const auto v = metric(g, e, spec.kind);
    if (!v) fail(ErrorCode::Unreachable, "path uses a dropped edge " + describe(g, e));
    step.edges.push_back(e);
    step.edge_costs.push_back(edge_cost(*v, spec).total);
    step.metric.insert(step.metric.end(), v->begin(), v->end());
    step.metric_edge.insert(step.metric_edge.end(), v->size(), static_cast<int>(k - 1));
    const auto arr = models(g, e);
    dist += arr->mean_hub_distance() * arr->size();
    count += arr->size();
  }
  step.mean_hub_distance = count ? dist / count : 0.0;
  return step;
}

FullAssemblyResult Planner::plan_full_assembly(const CostSpec& spec) {
  const int N = sc_.config().tiles_total;
  FullAssemblyResult res;
  res.spec = spec;
  for (int n = 1; n <= N; ++n) {
    graph(GraphKind::Pickup, n);
    graph(GraphKind::Assemble, n);
    res.graphs_built += 2;
  }
  // Layered graph: pickup and assemble graphs for n = 1..N-1 chained by
  // their action edges, ending at a sink after the last assembly.
  std::vector<const NodeGraph*> layers;
  for (int n = 1; n < N; ++n) {
    layers.push_back(&graph(GraphKind::Pickup, n));
    layers.push_back(&graph(GraphKind::Assemble, n));
  }
  std::vector<int> offset;
  int total = 0;
  for (const auto* g : layers) {
    offset.push_back(total);
    total += g->size();
  }
  const int sink = total++;
  Eigen::MatrixXd W = Eigen::MatrixXd::Constant(total, total, kInf);
  for (std::size_t L = 0; L < layers.size(); ++L) {
    const NodeGraph& g = *layers[L];
    const Eigen::MatrixXd w = weights(g, spec);
    const int act = g.action_index();
    for (int i = 0; i < g.size(); ++i) {
      for (int j = 0; j < g.size(); ++j) {
        if (!std::isfinite(w(i, j))) continue;
        if (j != act) {
          W(offset[L] + i, offset[L] + j) = w(i, j);
        } else {
          const int next = L + 1 < layers.size() ? offset[L + 1] + i : sink;
          W(offset[L] + i, next) = w(i, j);
        }
      }
    }
  }

  auto build_plan = [&](SearchMode mode) {
    Plan plan;
    if (layers.empty()) return plan;
    const PathResult path = shortest_path(W, offset[0], sink, mode);
    std::size_t k = 0;
    for (std::size_t L = 0; L < layers.size(); ++L) {
      const NodeGraph& g = *layers[L];
      std::vector<int> local;
      while (k < path.nodes.size() && path.nodes[k] >= offset[L] &&
             path.nodes[k] < offset[L] + g.size()) {
        local.push_back(path.nodes[k] - offset[L]);
        ++k;
      }
      local.push_back(g.action_index());
      auto step = make_step(g, local, spec);
      for (double c : step.edge_costs) plan.cumulative += c;
      plan.hops += static_cast<int>(step.edges.size());
      plan.metric.insert(plan.metric.end(), step.metric.begin(), step.metric.end());
      plan.steps.push_back(std::move(step));
    }
    double dist = 0.0;
    int count = 0;
    for (const auto& s : plan.steps) {
      dist += s.mean_hub_distance * s.metric.size();
      count += static_cast<int>(s.metric.size());
    }
    plan.mean_hub_distance = count ? dist / count : 0.0;
    return plan;
  };
  res.weighted = build_plan(SearchMode::Dijkstra);
  res.unweighted = build_plan(SearchMode::BfsUnit);
  res.log = log_;
  return res;
}

int total_edge_count(const scenario::ScenarioConfig& cfg) {
  int count = 0;
  for (int n = 1; n <= cfg.tiles_total; ++n) {
    const auto [p, a] = build_node_graphs(cfg, n);
    count += p.num_edges() + a.num_edges();
  }
  return count;
}

}  // namespace flexasm::pathopt
