#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "flexasm/linss.hpp"
#include "flexasm/modal.hpp"
#include "flexasm/multibody.hpp"
#include "flexasm/robot.hpp"

namespace flexasm::scenario {

using multibody::Mat3;
using multibody::Mat6;
using multibody::ModalBodyData;
using multibody::RigidBodyData;
using multibody::Vec3;
using robot::JointVector;

struct StructureFile {
  int n = 0;
  int j = 0;
  ModalBodyData data;
};

struct ScenarioConfig {
  std::string name = "scenario";
  int tiles_total = 4;  // N
  int grid_points = 7;  // z

  RigidBodyData hub;  // ports P1, P2, P3
  ModalBodyData solar_array;
  Mat3 array_dcm = Mat3::Identity();  // frame a expressed in b
  int uncertain_mode = 0;             // 0-based
  double uncertainty_r = 0.2;

  RigidBodyData tile;  // inertia at its center
  Vec3 stack_offset = Vec3(0.5, 0.0, 0.0);  // P3 -> C0
  Mat3 stack_dcm = Mat3::Identity();

  modal::TileLayout layout;
  modal::LatticeParams lattice;
  int structure_modes = 3;
  double structure_damping = 0.005;
  bool use_lattice = true;
  std::vector<StructureFile> structure_files;

  robot::RobotGeometry robot = robot::RobotGeometry::table2();

  double controller_damping = 1.0;
  double controller_freq_hz = 0.01;

  double stack_reach = 1.5;  // m, tile center to C0

  std::vector<std::string> warnings;

  /// Table 1-2 values with the default layout for N tiles.
  static ScenarioConfig defaults(int tiles_total = 4);
};

/// Reads a scenario file; relative body-file paths resolve against the
/// scenario file's directory.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& yaml_text,
                              const std::string& base_dir = ".");

/// Throws on invalid configuration; returns warnings.
std::vector<std::string> validate(const ScenarioConfig& cfg);

struct AssemblyState {
  int n = 1;      // tiles assembled
  int j = 1;      // docking tile (1-based)
  int arm = 1;    // gripping arm, 1 or 2
  int delta = 0;  // carried-tile flag
  bool operator==(const AssemblyState&) const = default;
};

void check_state(const ScenarioConfig& cfg, const AssemblyState& s);

/// Joint angles of the three arms plus the orientation of the gripping
/// arm's l0 frame relative to the structure.
struct RobotConfiguration {
  std::array<JointVector, 3> q{};
  Mat3 grip_base = Mat3::Identity();
};

RigidBodyData stack_properties(int N, int n, int delta, const RigidBodyData& tile);

/// Structure-frame point of tile center j relative to the hub CoM.
Vec3 tile_position(const ScenarioConfig& cfg, int tile);

/// Stack center C0 relative to the hub CoM.
Vec3 stack_position(const ScenarioConfig& cfg);

/// Caches structure modal data per (n, j).
class Scenario {
 public:
  explicit Scenario(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }
  ModalBodyData structure(int n, int j) const;

  /// Placement of every robot body for the given state.
  robot::RobotFrames frames(const AssemblyState& s,
                            const RobotConfiguration& rc) const;

  /// Open-loop plant.  Inputs T_G (3), W_ext (6), w_omega (2).  Outputs
  /// omega_dot (3), acc_G (6), z_omega (2).
  linss::StateSpace build_open_loop(const AssemblyState& s,
                                    const RobotConfiguration& rc) const;

  /// Rigid mass matrix of all bodies at G, from body placements only.
  Mat6 mass_matrix(const AssemblyState& s, const RobotConfiguration& rc) const;

  /// Composite inertia about G (hub frame).
  Mat3 total_inertia(const AssemblyState& s, const RobotConfiguration& rc) const;

  /// Inertia about the composite center of mass.
  Mat3 centroidal_inertia(const AssemblyState& s,
                          const RobotConfiguration& rc) const;

  /// Attitude gains sized on the largest composite inertia of the family at
  /// the home pose.  Computed once.
  const Eigen::MatrixXd& controller() const;
  AssemblyState sizing_state() const;

  /// Closed loop at one state with the scenario controller.
  linss::StateSpace closed_loop(const AssemblyState& s,
                                const RobotConfiguration& rc) const;

 private:
  ScenarioConfig cfg_;
  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<const std::pair<modal::LatticeModel, modal::Modes>>> lattices_;
  mutable std::optional<Eigen::MatrixXd> gains_;
  mutable AssemblyState sizing_{};
};

/// K_att = [k_att c_att] (3 x 6) with k = -w^2 J, c = -2 xi w J, w in rad/s.
Eigen::MatrixXd attitude_gains(const Mat3& J, double xi, double freq_hz);

/// Closes the attitude loop on a plant exposing T_G and omega_dot.  Inputs
/// d_t, then the remaining plant inputs; outputs omega_dot, theta, omega,
/// e_t, then the remaining plant outputs.
linss::StateSpace close_loop(const linss::StateSpace& plant,
                             const Eigen::MatrixXd& K);

struct ModelVariant {
  AssemblyState state;
  bool realizable = true;  // false when the stack count would be negative
};

std::vector<ModelVariant> enumerate_model_family(int N);

}  // namespace flexasm::scenario
