#include "flexasm/multibody.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "flexasm/error.hpp"

namespace flexasm::multibody {

using linss::Channel;
using linss::StateSpace;

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return S;
}

Mat6 tau(const Vec3& PB) {
  Mat6 t = Mat6::Identity();
  t.topRightCorner<3, 3>() = skew(PB);
  return t;
}

KinematicTransport tau_kinematic(const Vec3& PB) {
  if (!PB.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite offset");
  return {PB, tau(PB)};
}

Mat6 rigid_mass_matrix(double mass, const Mat3& inertia_G, const Vec3& PG) {
  Mat6 D_G = Mat6::Zero();
  D_G.topLeftCorner<3, 3>() = mass * Mat3::Identity();
  D_G.bottomRightCorner<3, 3>() = inertia_G;
  return transport_mass(D_G, -PG);
}

Mat6 transport_mass(const Mat6& D_P, const Vec3& PQ) {
  const Mat6 t_pq = tau(PQ);  // acc_P = tau_PQ acc_Q
  return t_pq.transpose() * D_P * t_pq;
}

Mat6 rotate_mass(const Mat6& D, const Mat3& R) {
  Mat6 R6 = Mat6::Zero();
  R6.topLeftCorner<3, 3>() = R;
  R6.bottomRightCorner<3, 3>() = R;
  return R6 * D * R6.transpose();
}

MassProperties mass_properties(const Mat6& D_P) {
  MassProperties mp;
  mp.mass = D_P.topLeftCorner<3, 3>().trace() / 3.0;
  if (mp.mass <= 0.0) return mp;
  // Lower-left block is m skew(PG).
  const Mat3 S = D_P.bottomLeftCorner<3, 3>() / mp.mass;
  mp.com = Vec3(S(2, 1), S(0, 2), S(1, 0));
  const Mat3 Sc = skew(mp.com);
  mp.inertia_com =
      D_P.bottomRightCorner<3, 3>() - mp.mass * Sc.transpose() * Sc;
  return mp;
}

namespace {

bool is_spd(const Eigen::MatrixXd& M) {
  if ((M - M.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  return llt.info() == Eigen::Success;
}

Mat6 rot6(const Mat3& R) {
  Mat6 R6 = Mat6::Zero();
  R6.topLeftCorner<3, 3>() = R;
  R6.bottomRightCorner<3, 3>() = R;
  return R6;
}

}  // namespace

std::vector<std::string> validate(const ModalBodyData& data) {
  const int n = data.num_modes();
  const std::string who = data.name.empty() ? "modal body" : data.name;
  if (data.damping.size() != n || data.L_P.rows() != n ||
      data.L_P.cols() != 6 || data.Phi_C.rows() != 6 ||
      data.Phi_C.cols() != n) {
    fail(ErrorCode::InvalidModalData, who + ": inconsistent modal dimensions");
  }
  for (int j = 0; j < n; ++j) {
    if (!(data.freqs(j) > 0.0)) {
      fail(ErrorCode::InvalidModalData, who + ": mode frequency must be > 0");
    }
    if (!(data.damping(j) > 0.0 && data.damping(j) < 1.0)) {
      fail(ErrorCode::InvalidModalData, who + ": damping must lie in (0, 1)");
    }
  }
  if (!(data.mass > 0.0)) fail(ErrorCode::InvalidModalData, who + ": mass must be > 0");
  if (!is_spd(data.static_model)) {
    fail(ErrorCode::InvalidModalData,
         who + ": static model D_P is not symmetric positive definite");
  }
  std::vector<std::string> warnings;
  if (!is_spd(data.residual_mass())) {
    warnings.push_back(who +
                       ": residual mass D_P - L_P^T L_P is not positive definite");
  }
  return warnings;
}

Vec3 RigidBodyData::port(const std::string& port_name) const {
  if (port_name == "G") return Vec3::Zero();
  for (const auto& [n, v] : ports) {
    if (n == port_name) return v;
  }
  fail(ErrorCode::UnknownPort, name + " has no port '" + port_name + "'");
}

Mat6 RigidBodyData::mass_matrix_G() const {
  Mat6 D = Mat6::Zero();
  D.topLeftCorner<3, 3>() = mass * Mat3::Identity();
  D.bottomRightCorner<3, 3>() = inertia_G;
  return D;
}

void validate(const RigidBodyData& body) {
  if (!(body.mass > 0.0)) {
    fail(ErrorCode::SingularInertia, body.name + ": mass must be > 0");
  }
  if (!is_spd(body.inertia_G)) {
    fail(ErrorCode::SingularInertia,
         body.name + ": inertia is not symmetric positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(body.inertia_G);
  const Vec3 p = es.eigenvalues();
  const double tol = 1e-9 * p.sum();
  if (p(0) + p(1) < p(2) - tol) {
    fail(ErrorCode::SingularInertia,
         body.name + ": principal moments violate the triangle inequality");
  }
}

StateSpace rigid_nport(const RigidBodyData& body,
                       const std::vector<std::string>& ports) {
  validate(body);
  const int k = static_cast<int>(ports.size()) + 1;
  Eigen::MatrixXd T(6 * k, 6);
  std::vector<Channel> ins, outs;
  for (int i = 0; i + 1 < k; ++i) {
    const Vec3 GP = body.port(ports[i]);
    T.middleRows<6>(6 * i) = tau(-GP);  // tau_{P G}, PG = -GP
    ins.push_back({"W_" + ports[i], 6});
    outs.push_back({"acc_" + ports[i], 6});
  }
  T.bottomRows<6>() = Mat6::Identity();
  ins.push_back({"W_G", 6});
  outs.push_back({"acc_G", 6});
  const Mat6 Dinv = body.mass_matrix_G().inverse();
  return StateSpace::gain(T * Dinv * T.transpose(), std::move(ins),
                          std::move(outs));
}

StateSpace rigid_nport_inverted(const RigidBodyData& body,
                                const std::string& inverted,
                                const std::vector<std::string>& others) {
  validate(body);
  const int k = static_cast<int>(others.size());
  const Mat6 D_G = body.mass_matrix_G();
  const Mat6 t_gp1 = tau(body.port(inverted));  // tau_{G P1}, GP1
  // Inputs: acc_P1, W_Pk (k others), W_G.  Outputs: W_P1, acc_Pk, acc_G.
  const int m = 6 * (k + 2);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, m);
  D.block<6, 6>(0, 0) = -t_gp1.transpose() * D_G * t_gp1;
  std::vector<Channel> ins{{"acc_" + inverted, 6}};
  std::vector<Channel> outs{{"W_" + inverted, 6}};
  for (int i = 0; i < k; ++i) {
    const Mat6 t_pkg = tau(-body.port(others[i]));
    D.block<6, 6>(0, 6 * (i + 1)) = t_gp1.transpose() * t_pkg.transpose();
    D.block<6, 6>(6 * (i + 1), 0) = t_pkg * t_gp1;
    ins.push_back({"W_" + others[i], 6});
    outs.push_back({"acc_" + others[i], 6});
  }
  D.block<6, 6>(0, 6 * (k + 1)) = t_gp1.transpose();
  D.block<6, 6>(6 * (k + 1), 0) = t_gp1;
  ins.push_back({"W_G", 6});
  outs.push_back({"acc_G", 6});
  return StateSpace::gain(std::move(D), std::move(ins), std::move(outs));
}

namespace {

// Builds Eq. (5) realization.  When lfr_mode >= 0 the stiffness and damping
// of that mode are pulled out into a w_omega/z_omega pair.
StateSpace titop_impl(const ModalBodyData& data, int lfr_mode, double r) {
  const int n = data.num_modes();
  const Mat6 t_cp = tau(-data.PC);
  const Eigen::MatrixXd& L = data.L_P;
  const Eigen::MatrixXd& Phi = data.Phi_C;
  const Eigen::VectorXd w2 = data.freqs.array().square();
  const Eigen::VectorXd c = 2.0 * data.damping.array() * data.freqs.array();
  const int nw = lfr_mode >= 0 ? 2 : 0;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2 * n, 12 + nw);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(12 + nw, 2 * n);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(12 + nw, 12 + nw);
  if (n > 0) {
    A.topRightCorner(n, n).setIdentity();
    A.bottomLeftCorner(n, n) = -w2.asDiagonal().toDenseMatrix();
    A.bottomRightCorner(n, n) = -c.asDiagonal().toDenseMatrix();
    B.block(n, 0, n, 6) = Phi.transpose();
    B.block(n, 6, n, 6) = -L;
    C.block(0, 0, 6, n) = -Phi * w2.asDiagonal();
    C.block(0, n, 6, n) = -Phi * c.asDiagonal();
    C.block(6, 0, 6, n) = L.transpose() * w2.asDiagonal();
    C.block(6, n, 6, n) = L.transpose() * c.asDiagonal();
  }
  const Eigen::MatrixXd cross = t_cp - Phi * L;
  D.block(0, 0, 6, 6) = Phi * Phi.transpose();
  D.block(0, 6, 6, 6) = cross;
  D.block(6, 0, 6, 6) = cross.transpose();
  D.block(6, 6, 6, 6) = -data.static_model + L.transpose() * L;

  std::vector<Channel> ins{{"W_C", 6}, {"acc_P", 6}};
  std::vector<Channel> outs{{"acc_C", 6}, {"W_P", 6}};
  if (lfr_mode >= 0) {
    // Generalized modal force g = w0^2 eta + 2 xi w0 eta_dot + w0 w1 + w2
    // with z1 = w0 r eta, z2 = w0 r (w0 eta + w1 + 2 xi eta_dot).
    const int i = lfr_mode;
    const double w0 = data.freqs(i);
    const double xi = data.damping(i);
    const Eigen::Vector2d gw(w0, 1.0);  // d g / d w
    B.block(n + i, 12, 1, 2) = -gw.transpose();
    D.block(0, 12, 6, 2) = -Phi.col(i) * gw.transpose();
    D.block(6, 12, 6, 2) = L.row(i).transpose() * gw.transpose();
    C(12, i) = w0 * r;
    C(13, i) = w0 * r * w0;
    C(13, n + i) = w0 * r * 2.0 * xi;
    D(13, 12) = w0 * r;
    ins.push_back({"w_omega", 2});
    outs.push_back({"z_omega", 2});
  }
  return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D),
                    std::move(ins), std::move(outs));
}

}  // namespace

StateSpace titop_two_port(const ModalBodyData& data) {
  validate(data);
  return titop_impl(data, -1, 0.0);
}

StateSpace rigid_two_port(const Mat6& D_P, const Vec3& PC) {
  ModalBodyData d;
  d.static_model = D_P;
  d.PC = PC;
  d.freqs.resize(0);
  d.damping.resize(0);
  d.L_P.resize(0, 6);
  d.Phi_C.resize(6, 0);
  return titop_impl(d, -1, 0.0);
}

StateSpace mode_freq_lfr(const ModalBodyData& data, int mode_index, double r) {
  validate(data);
  if (mode_index < 0 || mode_index >= data.num_modes()) {
    fail(ErrorCode::InvalidMode, "mode index " + std::to_string(mode_index) +
                                     " outside [0, " +
                                     std::to_string(data.num_modes()) + ")");
  }
  if (!(r > 0.0 && r < 1.0)) {
    fail(ErrorCode::InvalidArgument, "relative bound r must lie in (0, 1)");
  }
  return titop_impl(data, mode_index, r);
}

Dcm::Dcm(const Mat3& R) : R_(R) {
  if (!R.allFinite() ||
      (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10 ||
      std::abs(R.determinant() - 1.0) > 1e-10) {
    fail(ErrorCode::InvalidDcm, "matrix is not a proper rotation");
  }
}

double tan_quarter(double alpha) {
  if (!std::isfinite(alpha) || std::abs(alpha) > 2.0 * std::numbers::pi) {
    fail(ErrorCode::AlphaOutOfRange,
         "|alpha| = " + std::to_string(std::abs(alpha)) + " exceeds 2 pi");
  }
  return std::tan(alpha / 4.0);
}

Dcm dcm_axis(const Vec3& axis, double alpha) {
  tan_quarter(alpha);
  const double nrm = axis.norm();
  if (!(nrm > 0.0)) fail(ErrorCode::InvalidArgument, "zero rotation axis");
  return Dcm(Eigen::AngleAxisd(alpha, axis / nrm).toRotationMatrix());
}

Dcm dcm_axis_x(double alpha) { return dcm_axis(Vec3::UnitX(), alpha); }
Dcm dcm_axis_y(double alpha) { return dcm_axis(Vec3::UnitY(), alpha); }
Dcm dcm_axis_z(double alpha) { return dcm_axis(Vec3::UnitZ(), alpha); }

StateSpace apply_frame(const StateSpace& sys, const std::string& channel,
                       const Dcm& dcm) {
  const bool in = sys.has_input(channel);
  const bool out = sys.has_output(channel);
  if (!in && !out) {
    fail(ErrorCode::UnknownChannel, "no channel named '" + channel + "'");
  }
  const Mat6 R6 = rot6(dcm.matrix());
  Eigen::MatrixXd B = sys.B(), C = sys.C(), D = sys.D();
  if (in) {
    if (sys.input_width(channel) != 6) {
      fail(ErrorCode::WidthMismatch, channel + " is not width 6");
    }
    const int o = sys.input_offset(channel);
    B.middleCols(o, 6) = B.middleCols(o, 6) * R6.transpose();
    D.middleCols(o, 6) = D.middleCols(o, 6) * R6.transpose();
  }
  if (out) {
    if (sys.output_width(channel) != 6) {
      fail(ErrorCode::WidthMismatch, channel + " is not width 6");
    }
    const int o = sys.output_offset(channel);
    C.middleRows(o, 6) = R6 * C.middleRows(o, 6);
    D.middleRows(o, 6) = R6 * D.middleRows(o, 6);
  }
  return StateSpace(sys.A(), std::move(B), std::move(C), std::move(D),
                    sys.inputs(), sys.outputs());
}

}  // namespace flexasm::multibody
