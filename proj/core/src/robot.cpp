#include "flexasm/robot.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "flexasm/error.hpp"

namespace flexasm::robot {

using linss::Block;
using linss::ExternalInput;
using linss::ExternalOutput;
using linss::StateSpace;
using linss::Wire;
using multibody::Dcm;
using multibody::Mat6;

namespace {

constexpr double kPi = std::numbers::pi;

Mat3 axis_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

// Rotation vector taking R to Rt (both world orientations).
Vec3 rotation_error(const Mat3& R, const Mat3& Rt) {
  const Eigen::AngleAxisd aa(Rt * R.transpose());
  return aa.angle() * aa.axis();
}

}  // namespace

void check_joints(const JointVector& q) {
  for (double a : q) {
    if (!std::isfinite(a) || std::abs(a) > 2.0 * kPi) {
      fail(ErrorCode::JointOutOfRange,
           "joint angle " + std::to_string(a) + " outside [-2 pi, 2 pi]");
    }
  }
}

ArmGeometry ArmGeometry::table2() {
  static constexpr double mass[6] = {5, 5, 10, 5, 10, 5};
  static constexpr double cx[6] = {0, 0, -0.1062, 0, -0.1031, 0};
  static constexpr double cz[6] = {0.0625, 0.05, 0, 0.0810, 0, 0.0810};
  static constexpr double jd[6] = {0.2, 0.2, 0.4, 0.2, 0.4, 0.2};
  ArmGeometry g;
  for (int i = 0; i < 6; ++i) {
    const Vec3 com(cx[i], 0.0, cz[i]);
    g.offsets[i] = 2.0 * com;
    auto& link = g.links[i];
    link.name = "L" + std::to_string(i);
    link.mass = mass[i];
    link.inertia_G = jd[i] * Mat3::Identity();
    link.ports = {{"J_base", -com}, {"J_tip", g.offsets[i] - com}};
  }
  g.axes = {Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitY(), Vec3::UnitY(),
            Vec3::UnitZ()};
  return g;
}

void validate(const ArmGeometry& geom) {
  for (const auto& a : geom.axes) {
    if (!a.allFinite() || std::abs(a.norm() - 1.0) > 1e-9) {
      fail(ErrorCode::InvalidArgument, "arm joint axes must be unit vectors");
    }
  }
  for (const auto& o : geom.offsets) {
    if (!o.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite arm offset");
  }
  for (const auto& l : geom.links) {
    if (l.mass < 0.0) fail(ErrorCode::InvalidArgument, l.name + ": negative mass");
  }
}

RobotGeometry RobotGeometry::table2() {
  RobotGeometry r;
  r.arm = ArmGeometry::table2();
  r.hub.name = "robot_hub";
  r.hub.mass = 10.0;
  r.hub.inertia_G = 0.6 * Mat3::Identity();
  r.hub.ports = {{"J6_1", Vec3(0.1, 0, 0)},
                 {"J6_2", Vec3(-0.05, 0, -0.0866)},
                 {"J6_3", Vec3(-0.05, 0, 0.0866)}};
  const double s = std::sqrt(3.0) / 2.0;  // tabulated as 0.866
  r.hub_to_l5[0] = Mat3::Identity();
  r.hub_to_l5[1] << -0.5, 0, -s, 0, -1, 0, -s, 0, 0.5;
  r.hub_to_l5[2] << -0.5, 0, s, 0, -1, 0, s, 0, 0.5;
  return r;
}

void KinematicChain::add_fixed(const Mat3& R, const Vec3& p) {
  Element e;
  e.R = R;
  e.p = p;
  elements_.push_back(e);
}

void KinematicChain::add_revolute(const Vec3& axis, int joint, double sign) {
  Element e;
  e.revolute = true;
  e.axis = axis.normalized();
  e.joint = joint;
  e.sign = sign;
  elements_.push_back(e);
  num_joints_ = std::max(num_joints_, joint + 1);
}

Pose KinematicChain::forward(const Eigen::VectorXd& q, const Pose& base,
                             std::vector<Pose>* frames) const {
  if (q.size() < num_joints_) {
    fail(ErrorCode::InvalidArgument, "joint vector too short for chain");
  }
  Pose f = base;
  if (frames) frames->clear();
  for (const auto& e : elements_) {
    if (e.revolute) {
      f.R = f.R * axis_rotation(e.axis, e.sign * q(e.joint));
    } else {
      f.p += f.R * e.p;
      f.R = f.R * e.R;
    }
    if (frames) frames->push_back(f);
  }
  return f;
}

Eigen::MatrixXd KinematicChain::jacobian(const Eigen::VectorXd& q,
                                         const Pose& base) const {
  std::vector<Pose> frames;
  const Pose tip = forward(q, base, &frames);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6, num_joints_);
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& e = elements_[k];
    if (!e.revolute) continue;
    const Vec3 a = frames[k].R * (e.sign * e.axis);
    J.block<3, 1>(0, e.joint) += a.cross(tip.p - frames[k].p);
    J.block<3, 1>(3, e.joint) += a;
  }
  return J;
}

KinematicChain arm_chain(const ArmGeometry& geom, bool reversed) {
  KinematicChain c;
  if (!reversed) {
    for (int i = 0; i < 6; ++i) {
      c.add_fixed(Mat3::Identity(), geom.offsets[i]);
      if (i < 5) c.add_revolute(geom.axes[i], i);
    }
  } else {
    for (int i = 5; i >= 0; --i) {
      c.add_fixed(Mat3::Identity(), -geom.offsets[i]);
      if (i > 0) c.add_revolute(geom.axes[i - 1], i - 1, -1.0);
    }
  }
  return c;
}

KinematicChain robot_chain(const RobotGeometry& robot, int from, int to) {
  if (from < 0 || from > 2 || to < 0 || to > 2 || from == to) {
    fail(ErrorCode::InvalidArgument, "robot_chain needs two distinct arms");
  }
  const auto& g = robot.arm;
  KinematicChain c;
  for (int i = 0; i < 6; ++i) {
    c.add_fixed(Mat3::Identity(), g.offsets[i]);
    if (i < 5) c.add_revolute(g.axes[i], i);
  }
  const Mat3 Rf = robot.hub_to_l5[from];
  const Vec3 d_from = robot.hub.port("J6_" + std::to_string(from + 1));
  const Vec3 d_to = robot.hub.port("J6_" + std::to_string(to + 1));
  c.add_fixed(Rf.transpose(), -Rf.transpose() * d_from);  // J6_from -> D, frame c
  c.add_fixed(robot.hub_to_l5[to], d_to);                 // D -> J6_to, frame l5
  for (int i = 5; i >= 0; --i) {
    c.add_fixed(Mat3::Identity(), -g.offsets[i]);
    if (i > 0) c.add_revolute(g.axes[i - 1], 5 + i - 1, -1.0);
  }
  return c;
}

namespace {

Eigen::VectorXd to_vec(const JointVector& q) {
  return Eigen::Map<const Eigen::VectorXd>(q.data(), 5);
}

}  // namespace

Pose forward_kinematics(const ArmGeometry& geom, const JointVector& q) {
  check_joints(q);
  return arm_chain(geom).forward(to_vec(q));
}

Mat3 arm_tip_rotation(const ArmGeometry& geom, const JointVector& q) {
  return forward_kinematics(geom, q).R;
}

Eigen::VectorXd solve_ik(const KinematicChain& chain, const Pose& base,
                         const Pose& target, const Eigen::VectorXd& q_seed,
                         const IkOptions& opts) {
  const int nq = chain.num_joints();
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  const Vec3 axis_t = target.R * opts.tool_axis;

  auto residual = [&](const Pose& tip) {
    Eigen::Matrix<double, 6, 1> e;
    e.head<3>() = target.p - tip.p;
    if (opts.task == IkTask::FullPose) {
      e.tail<3>() = rotation_error(tip.R, target.R);
    } else {
      e.tail<3>() = (tip.R * opts.tool_axis).cross(axis_t);
    }
    return e;
  };
  auto converged = [&](const Eigen::Matrix<double, 6, 1>& e) {
    return e.head<3>().norm() < opts.position_tol &&
           e.tail<3>().norm() < opts.angle_tol;
  };

  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    Eigen::VectorXd q(nq);
    if (attempt == 0) {
      q = q_seed;
    } else if (attempt == 1) {
      q.setZero();
    } else {
      for (int j = 0; j < nq; ++j) q(j) = uni(rng);
    }
    double lambda = 1e-2;
    Pose tip = chain.forward(q, base);
    auto e = residual(tip);
    for (int it = 0; it < opts.max_iterations; ++it) {
      if (converged(e)) {
        for (int j = 0; j < nq; ++j) q(j) = wrap(q(j));
        return q;
      }
      Eigen::MatrixXd J = chain.jacobian(q, base);
      if (opts.task == IkTask::PositionAxis) {
        const Vec3 a = tip.R * opts.tool_axis;
        const Mat3 P = Mat3::Identity() - a * a.transpose();
        J.bottomRows<3>() = P * J.bottomRows<3>();
      }
      const Eigen::MatrixXd JJt =
          J * J.transpose() + lambda * lambda * Eigen::MatrixXd::Identity(6, 6);
      Eigen::VectorXd dq = J.transpose() * JJt.ldlt().solve(e);
      const double step = dq.cwiseAbs().maxCoeff();
      if (step > 0.5) dq *= 0.5 / step;
      const Eigen::VectorXd qn = q + dq;
      const Pose tn = chain.forward(qn, base);
      const auto en = residual(tn);
      if (en.norm() < e.norm()) {
        q = qn;
        tip = tn;
        e = en;
        lambda = std::max(lambda * 0.5, 1e-6);
      } else {
        lambda *= 4.0;
        if (lambda > 1e3) break;
      }
    }
    if (converged(e)) {
      for (int j = 0; j < nq; ++j) q(j) = wrap(q(j));
      return q;
    }
  }
  fail(ErrorCode::IkNotConverged, "no joint solution reaches the target");
}

JointVector inverse_kinematics(const ArmGeometry& geom, const Vec3& target,
                               const Vec3& approach_axis,
                               const JointVector& q_seed) {
  check_joints(q_seed);
  if (!target.allFinite() || !approach_axis.allFinite() ||
      approach_axis.norm() == 0.0) {
    fail(ErrorCode::InvalidArgument, "target must be finite");
  }
  Pose t;
  t.p = target;
  // Any orientation whose z axis is the approach axis.
  t.R = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), approach_axis.normalized())
            .toRotationMatrix();
  IkOptions opts;
  opts.task = IkTask::PositionAxis;
  const Eigen::VectorXd q = solve_ik(arm_chain(geom), {}, t, to_vec(q_seed), opts);
  JointVector out;
  for (int j = 0; j < 5; ++j) out[j] = q(j);
  return out;
}

StateSpace arm_two_port(const ArmGeometry& geom, const JointVector& q,
                        bool inverted) {
  check_joints(q);
  std::vector<Block> blocks;
  std::vector<Wire> wires;
  Mat3 R = Mat3::Identity();  // orientation of l_i in l0
  for (int i = 0; i < 6; ++i) {
    if (i > 0) R = R * axis_rotation(geom.axes[i - 1], q[i - 1]);
    const auto& link = geom.links[i];
    const Vec3 com = -link.port("J_base");
    const Mat6 D = multibody::rigid_mass_matrix(link.mass, link.inertia_G, com);
    StateSpace s = multibody::rigid_two_port(D, geom.offsets[i]);
    const Dcm dcm(R);
    for (const char* ch : {"W_C", "acc_P", "acc_C", "W_P"}) {
      s = multibody::apply_frame(s, ch, dcm);
    }
    const std::string name = "L" + std::to_string(i);
    blocks.push_back({name, std::move(s)});
    if (i > 0) {
      const std::string prev = "L" + std::to_string(i - 1);
      wires.push_back({{prev, "acc_C"}, {name, "acc_P"}});
      wires.push_back({{name, "W_P"}, {prev, "W_C"}});
    }
  }
  const std::vector<ExternalInput> ins{{{"W_J6", 6}, {{"L5", "W_C"}}},
                                       {{"acc_J0", 6}, {{"L0", "acc_P"}}}};
  const std::vector<ExternalOutput> outs{{{"acc_J6", 6}, {"L5", "acc_C"}},
                                         {{"W_J0", 6}, {"L0", "W_P"}}};
  StateSpace z = linss::interconnect(blocks, wires, ins, outs);
  const Dcm to_l5(R.transpose());
  z = multibody::apply_frame(z, "W_J6", to_l5);
  z = multibody::apply_frame(z, "acc_J6", to_l5);
  if (!inverted) return z;
  const std::vector<std::string> in{"W_J6", "acc_J0"};
  const std::vector<std::string> out{"acc_J6", "W_J0"};
  const StateSpace inv = linss::invert_channels(z, in, out);
  const std::vector<std::string> order_in{"acc_J6", "W_J0"};
  const std::vector<std::string> order_out{"W_J6", "acc_J0"};
  return inv.select(order_in, order_out);
}

double quintic(double t) {
  return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

std::vector<JointVector> quintic_waypoints(const JointVector& q0,
                                           const JointVector& q1, int z) {
  if (z < 2) fail(ErrorCode::InvalidArgument, "need at least two waypoints");
  std::vector<JointVector> out;
  for (int k = 0; k < z; ++k) {
    const double s = quintic(static_cast<double>(k) / (z - 1));
    JointVector q;
    for (int j = 0; j < 5; ++j) q[j] = q0[j] + s * (q1[j] - q0[j]);
    if (k == z - 1) q = q1;
    out.push_back(q);
  }
  return out;
}

RobotFrames robot_frames(const RobotGeometry& robot, int grip_arm,
                         const Pose& base, const std::array<JointVector, 3>& q) {
  if (grip_arm < 0 || grip_arm > 2) fail(ErrorCode::InvalidArgument, "bad arm index");
  const auto& g = robot.arm;
  RobotFrames out;
  auto arm_forward = [&](int k, Pose f) {
    for (int i = 0; i < 6; ++i) {
      if (i > 0) f.R = f.R * axis_rotation(g.axes[i - 1], q[k][i - 1]);
      out.links[k][i] = f;
      f.p += f.R * g.offsets[i];
    }
    return f;  // position J6, orientation l5
  };
  out.j0[grip_arm] = base.p;
  const Pose tip = arm_forward(grip_arm, base);
  out.j6[grip_arm] = tip.p;
  const Mat3 Rc = tip.R * robot.hub_to_l5[grip_arm].transpose();
  out.hub.R = Rc;
  out.hub.p = tip.p - Rc * robot.hub.port("J6_" + std::to_string(grip_arm + 1));
  for (int k = 0; k < 3; ++k) {
    if (k == grip_arm) continue;
    const Vec3 j6 = out.hub.p + Rc * robot.hub.port("J6_" + std::to_string(k + 1));
    const Mat3 R5 = Rc * robot.hub_to_l5[k];
    // Orientation of l0 from l5: undo joint rotations.
    Mat3 R0 = R5;
    for (int i = 4; i >= 0; --i) R0 = R0 * axis_rotation(g.axes[i], q[k][i]).transpose();
    Vec3 span = Vec3::Zero();
    {
      Mat3 Ri = Mat3::Identity();
      for (int i = 0; i < 6; ++i) {
        if (i > 0) Ri = Ri * axis_rotation(g.axes[i - 1], q[k][i - 1]);
        span += Ri * g.offsets[i];
      }
    }
    Pose b{j6 - R0 * span, R0};
    out.j0[k] = b.p;
    out.j6[k] = arm_forward(k, b).p;
  }
  return out;
}

}  // namespace flexasm::robot
