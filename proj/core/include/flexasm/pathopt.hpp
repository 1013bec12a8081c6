#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "flexasm/linss.hpp"
#include "flexasm/scenario.hpp"

namespace flexasm::pathopt {

using scenario::AssemblyState;
using scenario::RobotConfiguration;

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class GraphKind { Pickup, Assemble };
std::string to_string(GraphKind k);

/// (tile, arm) with both 1-based; the action node has tile = arm = 0.
struct Node {
  int tile = 0;
  int arm = 0;
  bool is_action() const { return tile == 0; }
  auto operator<=>(const Node&) const = default;
};

struct NodeGraph {
  GraphKind kind = GraphKind::Pickup;
  int n = 0;                  // tiles in the structure
  std::vector<Node> nodes;    // (1,1), (1,2), ..., (n,2), action
  Eigen::MatrixXd adjacency;  // 1 where an edge exists

  int size() const { return static_cast<int>(nodes.size()); }
  int action_index() const { return 2 * n; }
  int index_of(const Node& node) const;
  std::string label(int index) const;  // "1,2", "0" or "*"
  int num_edges() const;
};

/// Pickup and assemble graphs for the structure with n tiles.  near_stack[t]
/// marks tiles (0-based) that can reach the stack.
std::pair<NodeGraph, NodeGraph> build_node_graphs(const modal::TileLayout& layout,
                                                  int n,
                                                  const std::vector<bool>& near_stack);

/// As above with stack reach taken from the scenario.
std::pair<NodeGraph, NodeGraph> build_node_graphs(const scenario::ScenarioConfig& cfg,
                                                  int n);

struct Edge {
  GraphKind kind = GraphKind::Pickup;
  int n = 0;
  int from = 0;  // node indices in the graph
  int to = 0;
  auto operator<=>(const Edge&) const = default;
};

std::string describe(const NodeGraph& g, const Edge& e);

/// One gridded system along an edge leg.
struct GridPoint {
  AssemblyState state;
  RobotConfiguration config;
  double hub_distance = 0.0;  // |robot hub CoM - G|
};

struct EdgeModelArray {
  Edge edge;
  std::vector<GridPoint> leg1, leg2;
  std::vector<linss::StateSpace> open_loop;    // H, 2z entries
  std::vector<linss::StateSpace> closed_loop;  // C, 2z entries

  int size() const { return static_cast<int>(closed_loop.size()); }
  double mean_hub_distance() const;
};

/// Joint angles (10 entries: gripping arm then reaching arm) of the action
/// pose of an edge.  Throws IkNotConverged.
Eigen::VectorXd action_pose(const scenario::Scenario& sc, const NodeGraph& g,
                            const Edge& e);

EdgeModelArray grid_edge_models(const scenario::Scenario& sc, const NodeGraph& g,
                                const Edge& e, int z);

enum class CostKind { HinfWrench, H2Theta, HinfInputSens, Mu };
std::string to_string(CostKind k);
CostKind parse_cost_kind(const std::string& text);

struct CostSpec {
  CostKind kind = CostKind::HinfWrench;
  std::optional<double> hard_cap;  // absolute value of the per-system metric
};

/// Per-system metric on the cost channel (uncertainty nominal except for Mu).
double system_metric(const linss::StateSpace& closed_loop, CostKind kind);

struct EdgeCost {
  double total = 0.0;  // kInf when capped
  std::vector<double> per_system;
  bool capped = false;
};

EdgeCost edge_cost(const EdgeModelArray& array, const CostSpec& spec);
EdgeCost edge_cost(const std::vector<double>& per_system, const CostSpec& spec);

enum class SearchMode { Dijkstra, BfsUnit };

struct PathResult {
  std::vector<int> nodes;  // src ... dst; empty when src == dst
  double weight = 0.0;     // sum of edge weights along the path
  int hops = 0;
};

/// weights(i, j) is the edge weight, +inf (or NaN) when absent.  Ties are
/// broken by fewer hops, then lexicographic node order.  Throws Unreachable.
PathResult shortest_path(const Eigen::MatrixXd& weights, int src, int dst,
                         SearchMode mode);

/// Per-action bookkeeping of a full assembly plan.
struct PlanStep {
  GraphKind kind;
  int n = 0;
  std::vector<Node> path;           // node sequence including the action node
  std::vector<Edge> edges;
  std::vector<double> edge_costs;
  std::vector<double> metric;       // per grid point, 2z per edge
  std::vector<int> metric_edge;     // running edge id per metric entry
  double mean_hub_distance = 0.0;
};

struct Plan {
  std::vector<PlanStep> steps;
  double cumulative = 0.0;  // under the cost spec
  int hops = 0;
  double mean_hub_distance = 0.0;
  std::vector<double> metric;  // concatenated series
};

struct FullAssemblyResult {
  CostSpec spec;
  int graphs_built = 0;  // 2N
  Plan weighted;
  Plan unweighted;
  std::vector<std::string> log;  // edges dropped (IK, instability)
};

/// Evaluates edge models and costs on demand, caching gridded systems per
/// edge so several cost specs share one gridding pass.
class Planner {
 public:
  Planner(const scenario::Scenario& sc, int z, int threads = 0);

  const scenario::Scenario& scenario() const { return sc_; }
  int grid_points() const { return z_; }

  const NodeGraph& graph(GraphKind kind, int n);

  /// Per-system metric values of an edge; nullopt when the edge cannot be
  /// gridded (IK failure, unrealizable state, unstable observable mode).
  std::optional<std::vector<double>> metric(const NodeGraph& g, const Edge& e,
                                            CostKind kind);
  std::shared_ptr<const EdgeModelArray> models(const NodeGraph& g, const Edge& e);

  /// Weight matrix of a graph under a cost spec; absent or failed edges +inf.
  Eigen::MatrixXd weights(const NodeGraph& g, const CostSpec& spec);

  /// Path between two nodes of one graph.
  PathResult plan_path(const NodeGraph& g, int src, int dst, const CostSpec& spec,
                       SearchMode mode);

  /// Algorithm 1 over all pickup/assemble graphs starting at tile 1, arm 1.
  FullAssemblyResult plan_full_assembly(const CostSpec& spec);

  const std::vector<std::string>& log() const { return log_; }

 private:
  void precompute(const NodeGraph& g, CostKind kind);
  PlanStep make_step(const NodeGraph& g, const std::vector<int>& nodes, const CostSpec& spec);

  const scenario::Scenario& sc_;
  int z_;
  int threads_;
  std::mutex mu_;
  std::map<std::pair<GraphKind, int>, NodeGraph> graphs_;
  std::map<Edge, std::shared_ptr<const EdgeModelArray>> models_;
  std::map<Edge, std::string> failed_;
  std::map<std::pair<Edge, CostKind>, std::optional<std::vector<double>>> metrics_;
  std::vector<std::string> log_;
};

/// Total number of directed edges over the 2N graphs of a scenario.
int total_edge_count(const scenario::ScenarioConfig& cfg);

}  // namespace flexasm::pathopt
