#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flexasm/linss.hpp"

namespace flexasm::multibody {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 skew(const Vec3& v);

struct KinematicTransport {
  Vec3 PB;
  Mat6 tau;
};

/// tau_PB = [[I, skew(PB)], [0, I]]; maps the acceleration twist at B to P.
KinematicTransport tau_kinematic(const Vec3& PB);
Mat6 tau(const Vec3& PB);

/// 6x6 rigid mass matrix at P of a body with mass m, inertia J_G at its
/// center of mass G, and PG the vector from P to G.
Mat6 rigid_mass_matrix(double mass, const Mat3& inertia_G, const Vec3& PG);

/// Mass matrix at Q given the mass matrix at P and the vector PQ.
Mat6 transport_mass(const Mat6& D_P, const Vec3& PQ);

/// Re-expresses a mass matrix through the rotation R ([v]_out = R [v]_in).
Mat6 rotate_mass(const Mat6& D, const Mat3& R);

/// Splits a rigid mass matrix into mass, center-of-mass offset and inertia
/// about the center of mass.
struct MassProperties {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia_com = Mat3::Zero();
};
MassProperties mass_properties(const Mat6& D_P);

struct ModalBodyData {
  std::string name;
  double mass = 0.0;
  Mat3 inertia_P = Mat3::Zero();
  Mat6 static_model = Mat6::Zero();  // D_P
  Eigen::VectorXd freqs;             // rad/s
  Eigen::VectorXd damping;
  Eigen::MatrixXd L_P;    // n x 6
  Eigen::MatrixXd Phi_C;  // 6 x n
  Vec3 PC = Vec3::Zero();

  int num_modes() const { return static_cast<int>(freqs.size()); }
  Mat6 residual_mass() const { return static_model - L_P.transpose() * L_P; }
};

/// Hard checks throw InvalidModalData.  Soft findings (residual mass not
/// positive definite) are returned as warnings.
std::vector<std::string> validate(const ModalBodyData& data);

struct RigidBodyData {
  std::string name;
  double mass = 0.0;
  Mat3 inertia_G = Mat3::Zero();
  std::vector<std::pair<std::string, Vec3>> ports;  // GP_k

  Vec3 port(const std::string& name) const;
  Mat6 mass_matrix_G() const;
};

void validate(const RigidBodyData& body);

/// Static model of a rigid body with every listed port plus G.  Inputs are
/// W_<port>... W_G (wrenches applied on the body), outputs acc_<port>...
/// acc_G.
linss::StateSpace rigid_nport(const RigidBodyData& body,
                              const std::vector<std::string>& ports);

/// As rigid_nport with the first port inverted: input acc_<inverted>,
/// output W_<inverted> is the wrench the body applies on its parent.
linss::StateSpace rigid_nport_inverted(const RigidBodyData& body,
                                       const std::string& inverted,
                                       const std::vector<std::string>& others);

/// Two-port model with inputs W_C (wrench applied by the child at C) and
/// acc_P, and outputs acc_C and W_P (wrench applied on the parent at P).
linss::StateSpace titop_two_port(const ModalBodyData& data);

/// titop_two_port for a rigid body given by mass matrix at P; D_P may be
/// singular (massless links).
linss::StateSpace rigid_two_port(const Mat6& D_P, const Vec3& PC);

/// titop_two_port with mode `mode_index` frequency ω0(1 + r δ) pulled out
/// into a width-2 channel pair w_omega / z_omega.
linss::StateSpace mode_freq_lfr(const ModalBodyData& data, int mode_index,
                                double r);

class Dcm {
 public:
  Dcm() : R_(Mat3::Identity()) {}
  explicit Dcm(const Mat3& R);

  const Mat3& matrix() const { return R_; }
  Dcm transpose() const { return Dcm(R_.transpose()); }
  Dcm operator*(const Dcm& other) const { return Dcm(R_ * other.R_); }
  Vec3 operator*(const Vec3& v) const { return R_ * v; }

 private:
  Mat3 R_;
};

/// tan(alpha / 4); throws AlphaOutOfRange when |alpha| > 2 pi.
double tan_quarter(double alpha);

Dcm dcm_axis_x(double alpha);
Dcm dcm_axis_y(double alpha);
Dcm dcm_axis_z(double alpha);
Dcm dcm_axis(const Vec3& axis, double alpha);

/// Re-expresses a width-6 channel through R: outputs become R6 y and inputs
/// are read as R6^T u, R6 = diag(R, R).
linss::StateSpace apply_frame(const linss::StateSpace& sys,
                              const std::string& channel, const Dcm& dcm);

}  // namespace flexasm::multibody
