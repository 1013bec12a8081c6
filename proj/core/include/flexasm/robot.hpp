#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "flexasm/linss.hpp"
#include "flexasm/multibody.hpp"

namespace flexasm::robot {

using multibody::Mat3;
using multibody::RigidBodyData;
using multibody::Vec3;

using JointVector = std::array<double, 5>;

/// Throws JointOutOfRange when some |alpha| > 2 pi.
void check_joints(const JointVector& q);

/// Link i spans J_i -> J_{i+1}.  Link inertial data uses ports "J_base" and
/// "J_tip" (vectors from the link CoM).  axes[k] is the axis of joint
/// J_{k+1}, expressed in the parent link frame.
struct ArmGeometry {
  std::array<Vec3, 6> offsets;
  std::array<Vec3, 5> axes;
  std::array<RigidBodyData, 6> links;

  /// Table 2 link data, offsets at twice the CoM offsets, axes z, y, y, y, z.
  static ArmGeometry table2();
};

void validate(const ArmGeometry& geom);

/// Three identical arms around the robot hub C.  Hub ports "J6_1".."J6_3";
/// hub_to_l5[k] is the orientation of arm k's frame l5 relative to c.
struct RobotGeometry {
  ArmGeometry arm;
  RigidBodyData hub;
  std::array<Mat3, 3> hub_to_l5;

  static RobotGeometry table2();
};

struct Pose {
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();
};

/// Serial chain of fixed transforms and revolute joints.
class KinematicChain {
 public:
  void add_fixed(const Mat3& R, const Vec3& p);
  void add_revolute(const Vec3& axis, int joint, double sign = 1.0);

  int num_joints() const { return num_joints_; }

  /// Tip pose given the base pose.  When frames is non-null it receives the
  /// frame after every element.
  Pose forward(const Eigen::VectorXd& q, const Pose& base = {},
               std::vector<Pose>* frames = nullptr) const;

  /// World-frame joint axes and positions at q, for the geometric Jacobian.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& q, const Pose& base = {}) const;

 private:
  struct Element {
    bool revolute = false;
    Mat3 R = Mat3::Identity();
    Vec3 p = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();
    int joint = 0;
    double sign = 1.0;
  };
  std::vector<Element> elements_;
  int num_joints_ = 0;
};

/// J0 -> J6 chain of one arm (reversed: J6 -> J0 with negated joints).
KinematicChain arm_chain(const ArmGeometry& geom, bool reversed = false);

/// Chain from the J0 frame of gripping arm `from` (0-based) through its J6,
/// the hub and arm `to` down to that arm's J0.  Joints: from's five, then
/// to's five.
KinematicChain robot_chain(const RobotGeometry& robot, int from, int to);

Pose forward_kinematics(const ArmGeometry& geom, const JointVector& q);

/// 5-dof damped least squares on J6 position and tool axis (l5 z axis).
JointVector inverse_kinematics(const ArmGeometry& geom, const Vec3& target,
                               const Vec3& approach_axis,
                               const JointVector& q_seed);

enum class IkTask { PositionAxis, FullPose };

struct IkOptions {
  IkTask task = IkTask::FullPose;
  Vec3 tool_axis = Vec3::UnitZ();  // in the tip frame, for PositionAxis
  double position_tol = 1e-7;
  double angle_tol = 1e-7;
  int max_iterations = 300;
  int restarts = 40;
};

/// Generic chain IK.  Returns joint angles wrapped into [-pi, pi].
Eigen::VectorXd solve_ik(const KinematicChain& chain, const Pose& base,
                         const Pose& target, const Eigen::VectorXd& q_seed,
                         const IkOptions& opts = {});

/// Two-port static model of the arm: inputs W_J6 (frame l5), acc_J0 (frame
/// l0); outputs acc_J6, W_J0.  With inverted both ports swap: inputs
/// acc_J6, W_J0; outputs W_J6, acc_J0.
linss::StateSpace arm_two_port(const ArmGeometry& geom, const JointVector& q,
                               bool inverted = false);

/// Orientation of l5 relative to l0 at q.
Mat3 arm_tip_rotation(const ArmGeometry& geom, const JointVector& q);

/// s(t) = 10 t^3 - 15 t^4 + 6 t^5.
double quintic(double t);
std::vector<JointVector> quintic_waypoints(const JointVector& q0,
                                           const JointVector& q1, int z);

/// Body placement of the whole robot for a given gripping arm and base pose
/// of that arm's l0 frame.
struct RobotFrames {
  std::array<std::array<Pose, 6>, 3> links;  // frame l_i at J_i
  std::array<Vec3, 3> j0;
  std::array<Vec3, 3> j6;
  Pose hub;  // origin at the hub CoM D
};

RobotFrames robot_frames(const RobotGeometry& robot, int grip_arm,
                         const Pose& base, const std::array<JointVector, 3>& q);

}  // namespace flexasm::robot
