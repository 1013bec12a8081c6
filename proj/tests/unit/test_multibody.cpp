#include <doctest.h>

#include <cmath>
#include <numbers>

#include <flexasm/error.hpp>
#include <flexasm/modal.hpp>
#include <flexasm/multibody.hpp>

#include "oracles.hpp"

using namespace flexasm;
using namespace flexasm::multibody;
using linss::Block;
using linss::ExternalInput;
using linss::ExternalOutput;
using linss::StateSpace;
using linss::Wire;
using Eigen::MatrixXd;

namespace {

const std::string kData = FLEXASM_TEST_DATA_DIR;

RigidBodyData random_body(oracle::Rng& rng, const std::vector<std::string>& ports) {
  RigidBodyData b;
  b.name = "body";
  b.mass = rng.uniform(1.0, 50.0);
  b.inertia_G = rng.spd3(0.5, 20.0);
  for (const auto& p : ports) b.ports.emplace_back(p, rng.vec3());
  return b;
}

Mat3 parallel_axis(double m, const Vec3& r) {
  return m * (r.squaredNorm() * Mat3::Identity() - r * r.transpose());
}

MatrixXd block_of(const StateSpace& s, const std::string& out, const std::string& in) {
  return s.D().block(s.output_offset(out), s.input_offset(in), s.output_width(out),
                     s.input_width(in));
}

}  // namespace

TEST_SUITE("multibody") {

TEST_CASE("kinematic transport") {
  CHECK(tau(Vec3::Zero()).isIdentity(0.0));
  Mat3 S;
  S << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK(tau(Vec3(1, 0, 0)).topRightCorner<3, 3>() == S);
  oracle::Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vec3 P = rng.vec3(), Q = rng.vec3(), B = rng.vec3();
    CHECK((tau(B - P) * tau(P - Q) - tau(B - Q)).norm() < 1e-12);
    CHECK(tau_kinematic(P).tau.determinant() == doctest::Approx(1.0));
    CHECK((tau(P) * tau(-P)).isIdentity(1e-14));
    CHECK((skew(P).transpose() + skew(P)).norm() == 0.0);
  }
}

TEST_CASE("transported wrench balances moments") {
  oracle::Rng rng(2);
  const Vec3 PB = rng.vec3();
  Eigen::Matrix<double, 6, 1> W_P;
  W_P << rng.vec3(), rng.vec3();
  const Eigen::Matrix<double, 6, 1> W_B = tau(PB).transpose() * W_P;
  CHECK((W_B.head<3>() - W_P.head<3>()).norm() < 1e-14);
  CHECK((W_B.tail<3>() - (W_P.tail<3>() - PB.cross(W_P.head<3>()))).norm() < 1e-13);
}

TEST_CASE("rigid_nport on the Table 2 tile and a diagonal body") {
  RigidBodyData tile{"tile", 6.0423, Vec3(0.5041, 0.5041, 1.0071).asDiagonal(), {}};
  const auto t = rigid_nport(tile, {});
  CHECK(t.D()(0, 0) == doctest::Approx(0.16550).epsilon(1e-4));
  CHECK(t.D()(0, 0) == doctest::Approx(1.0 / 6.0423).epsilon(1e-14));

  RigidBodyData b{"b", 3.0, Vec3(1.0, 1.5, 2.0).asDiagonal(), {}};
  CHECK(rigid_nport(b, {}).D()(5, 5) == doctest::Approx(0.5));
}

TEST_CASE("rigid_nport two-port formula and symmetry") {
  oracle::Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const auto body = random_body(rng, {"P1", "P2"});
    const auto s = rigid_nport(body, {"P1", "P2"});
    const Mat6 Dinv = body.mass_matrix_G().inverse();
    const MatrixXd expect = tau(-body.port("P2")) * Dinv * tau(-body.port("P1")).transpose();
    CHECK((block_of(s, "acc_P2", "W_P1") - expect).norm() < 1e-12 * expect.norm());
    CHECK((s.D() - s.D().transpose()).norm() < 1e-12 * s.D().norm());
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(s.D()).eigenvalues().minCoeff() > -1e-12);
  }
}

TEST_CASE("rigid_nport errors") {
  RigidBodyData b{"b", 1.0, Mat3::Identity(), {{"P", Vec3::UnitX()}}};
  CHECK_THROWS_AS(rigid_nport(b, {"Q"}), Error);
  RigidBodyData bad{"bad", 1.0, Vec3(1.0, 1.0, 3.0).asDiagonal(), {}};
  CHECK_THROWS_AS(rigid_nport(bad, {}), Error);
}

TEST_CASE("rigid_nport_inverted") {
  oracle::Rng rng(4);
  RigidBodyData at_g{"g", 4.0, rng.spd3(1.0, 5.0), {{"G0", Vec3::Zero()}}};
  const auto s = rigid_nport_inverted(at_g, "G0", {});
  CHECK((block_of(s, "W_G0", "acc_G0") + at_g.mass_matrix_G()).norm() < 1e-14);

  for (int k = 0; k < 10; ++k) {
    const auto body = random_body(rng, {"P1", "P2"});
    const auto inv = rigid_nport_inverted(body, "P1", {"P2"});
    const auto ref = linss::invert_channels(rigid_nport(body, {"P1", "P2"}),
                                            std::vector<std::string>{"W_P1"},
                                            std::vector<std::string>{"acc_P1"});
    // The inverted port reports the wrench on the parent, the opposite of the
    // wrench applied on the body.
    MatrixXd flip = MatrixXd::Identity(18, 18);
    flip.topLeftCorner(6, 6) *= -1.0;
    const std::vector<std::string> ins{"acc_P1", "W_P2", "W_G"}, outs{"W_P1", "acc_P2", "acc_G"};
    const MatrixXd a = inv.select(ins, outs).D();
    const MatrixXd b = flip * ref.select(ins, outs).D();
    CHECK((a - b).norm() < 1e-9 * b.norm());

    Eigen::Matrix<double, 6, 1> W;
    W << rng.vec3(), rng.vec3();
    const Eigen::Matrix<double, 6, 1> acc_p2 = block_of(inv, "acc_P2", "W_P2") * W;
    CHECK(acc_p2.norm() == 0.0);
    const Eigen::Matrix<double, 6, 1> w_p1 = block_of(inv, "W_P1", "W_P2") * W;
    const Vec3 P1P2 = body.port("P2") - body.port("P1");
    CHECK((w_p1 - tau(-P1P2).transpose() * W).norm() < 1e-12 * W.norm());
  }
}

TEST_CASE("rigidly joined bodies equal the composite body") {
  oracle::Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    auto b1 = random_body(rng, {"J"});
    auto b2 = random_body(rng, {"J"});
    const Vec3 G1 = Vec3::Zero();
    const Vec3 G2 = b1.port("J") - b2.port("J");
    const double m = b1.mass + b2.mass;
    const Vec3 Gc = (b1.mass * G1 + b2.mass * G2) / m;
    const Mat3 Jc = b1.inertia_G + parallel_axis(b1.mass, G1 - Gc) + b2.inertia_G +
                    parallel_axis(b2.mass, G2 - Gc);
    RigidBodyData comp{"comp", m, Jc, {{"G1", G1 - Gc}, {"G2", G2 - Gc}}};

    const std::vector<Block> blocks{{"b1", rigid_nport(b1, {"J"})},
                                    {"b2", rigid_nport_inverted(b2, "J", {})}};
    const std::vector<Wire> wires{{{"b1", "acc_J"}, {"b2", "acc_J"}},
                                  {{"b2", "W_J"}, {"b1", "W_J"}}};
    const std::vector<ExternalInput> ins{{{"W_G1", 6}, {{"b1", "W_G"}}},
                                         {{"W_G2", 6}, {{"b2", "W_G"}}}};
    const std::vector<ExternalOutput> outs{{{"acc_G1", 6}, {"b1", "acc_G"}},
                                           {{"acc_G2", 6}, {"b2", "acc_G"}}};
    const auto joined = linss::interconnect(blocks, wires, ins, outs);
    const auto ref = rigid_nport(comp, {"G1", "G2"});
    const std::vector<std::string> i{"W_G1", "W_G2"}, o{"acc_G1", "acc_G2"};
    const MatrixXd a = joined.select(i, o).D(), b = ref.select(i, o).D();
    CHECK((a - b).norm() < 1e-8 * b.norm());

    const auto mp = mass_properties(rigid_mass_matrix(b1.mass, b1.inertia_G, G1) +
                                    rigid_mass_matrix(b2.mass, b2.inertia_G, G2));
    CHECK(mp.mass == doctest::Approx(m).epsilon(1e-14));
    CHECK((mp.com - Gc).norm() < 1e-12);
    CHECK((mp.inertia_com - Jc).norm() < 1e-10 * Jc.norm());
  }
}

TEST_CASE("rigid mass matrix transport and rotation") {
  oracle::Rng rng(6);
  const double m = 3.0;
  const Mat3 J = rng.spd3(1.0, 4.0);
  const Vec3 PG = rng.vec3(), PQ = rng.vec3();
  const Mat6 D_P = rigid_mass_matrix(m, J, PG);
  const Mat6 D_Q = transport_mass(D_P, PQ);
  CHECK((D_Q - rigid_mass_matrix(m, J, PG - PQ)).norm() < 1e-11);
  const Mat3 R = rng.rotation();
  const Mat6 D_R = rotate_mass(D_P, R);
  CHECK((D_R - rigid_mass_matrix(m, R * J * R.transpose(), R * PG)).norm() < 1e-11);
}

TEST_CASE("titop without modes is the static two-port") {
  oracle::Rng rng(7);
  ModalBodyData d;
  d.mass = 5.0;
  d.PC = rng.vec3();
  d.static_model = rigid_mass_matrix(5.0, rng.spd3(1.0, 3.0), rng.vec3(0.3));
  d.inertia_P = d.static_model.bottomRightCorner<3, 3>();
  d.freqs.resize(0);
  d.damping.resize(0);
  d.L_P.resize(0, 6);
  d.Phi_C.resize(6, 0);
  const auto s = titop_two_port(d);
  CHECK(s.num_states() == 0);
  CHECK((block_of(s, "W_P", "acc_P") + d.static_model).norm() < 1e-14);
  CHECK((block_of(s, "W_P", "W_C") - tau(-d.PC).transpose()).norm() < 1e-14);
  CHECK((block_of(s, "acc_C", "acc_P") - tau(-d.PC)).norm() < 1e-14);
  CHECK(block_of(s, "acc_C", "W_C").norm() == 0.0);
}

TEST_CASE("titop on the Table 1 solar array") {
  const auto loaded = modal::load_body_file(kData + "/bodies/solar_array.yaml");
  const auto& d = loaded.data;
  CHECK(d.mass == doctest::Approx(88.93));
  CHECK(d.num_modes() == 2);
  const auto s = titop_two_port(d);

  // Feedthrough carries the residual mass; the DC gain the full static model.
  CHECK((block_of(s, "W_P", "acc_P") + d.residual_mass()).norm() < 1e-10);
  const Eigen::MatrixXcd G0 = linss::evaluate(s, 0.0);
  const MatrixXd dc = G0.real().block(s.output_offset("W_P"), s.input_offset("acc_P"), 6, 6);
  CHECK((dc + d.static_model).norm() < 1e-9 * d.static_model.norm());

  // D pattern: diagonal blocks symmetric, off-diagonal blocks transposed.
  const MatrixXd D = s.D();
  CHECK((D.topLeftCorner(6, 6) - D.topLeftCorner(6, 6).transpose()).norm() < 1e-12);
  CHECK((D.bottomRightCorner(6, 6) - D.bottomRightCorner(6, 6).transpose()).norm() < 1e-12);
  CHECK((D.topRightCorner(6, 6) - D.bottomLeftCorner(6, 6).transpose()).norm() < 1e-12);

  // Clamped poles.
  const Eigen::VectorXcd ev = s.A().eigenvalues();
  for (int j = 0; j < d.num_modes(); ++j) {
    const std::complex<double> pole(-d.damping(j) * d.freqs(j),
                                    d.freqs(j) * std::sqrt(1 - d.damping(j) * d.damping(j)));
    double best = 1e300;
    for (int k = 0; k < ev.size(); ++k) best = std::min(best, std::abs(ev(k) - pole));
    CHECK(best < 1e-9 * d.freqs(j));
  }
  CHECK(d.freqs(0) / (2 * std::numbers::pi) == doctest::Approx(1.2850).epsilon(1e-12));
  CHECK(d.freqs(1) / (2 * std::numbers::pi) == doctest::Approx(6.5896).epsilon(1e-12));
}

TEST_CASE("titop clamped response at C is the modal sum") {
  const auto d = modal::load_body_file(kData + "/bodies/f1.yaml").data;
  const auto s = titop_two_port(d);
  for (double w : {1e-3, 0.7, 5.0, 40.0}) {
    const std::complex<double> jw(0.0, w);
    const Eigen::MatrixXcd G = linss::evaluate(s, jw).block(0, 0, 6, 6);
    Eigen::VectorXcd h(d.freqs.size());
    for (int i = 0; i < h.size(); ++i) {
      const double wi = d.freqs(i);
      h(i) = jw * jw / (jw * jw + 2.0 * d.damping(i) * wi * jw + wi * wi);
    }
    const Eigen::MatrixXcd expect = d.Phi_C.cast<std::complex<double>>() * h.asDiagonal() *
                                    d.Phi_C.transpose().cast<std::complex<double>>();
    CHECK((G - expect).norm() < 1e-9 * expect.norm() + 1e-14);
    if (w < 0.01) {
      // acc = s^2 x, so the static compliance is -acc / w^2.
      const MatrixXd compliance = -G.real() / (w * w);
      const MatrixXd stat =
          d.Phi_C * d.freqs.array().square().inverse().matrix().asDiagonal() * d.Phi_C.transpose();
      CHECK((compliance - stat).norm() < 1e-4 * stat.norm());
    }
  }
}

TEST_CASE("dcm axis rotations") {
  const auto I = dcm_axis_z(0.0);
  CHECK(I.matrix().isIdentity(0.0));
  CHECK(tan_quarter(0.0) == 0.0);
  Mat3 Rz;
  Rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((dcm_axis_z(std::numbers::pi / 2).matrix() - Rz).norm() < 1e-15);
  CHECK(tan_quarter(std::numbers::pi / 2) == doctest::Approx(0.41421356).epsilon(1e-8));
  CHECK((dcm_axis_x(std::numbers::pi / 3) * dcm_axis_x(-std::numbers::pi / 3)).matrix().isIdentity(1e-15));
  CHECK_THROWS_AS(dcm_axis_y(7.0), Error);
  Mat3 notrot = Mat3::Identity();
  notrot(0, 0) = -1.0;
  CHECK_THROWS_AS(Dcm{notrot}, Error);
}

TEST_CASE("apply_frame") {
  const auto pass = StateSpace::gain(MatrixXd::Identity(6, 6), {{"u", 6}}, {{"W", 6}});
  CHECK((apply_frame(pass, "W", Dcm()).D() - pass.D()).norm() == 0.0);
  const auto rot = apply_frame(pass, "W", dcm_axis_z(std::numbers::pi / 2));
  Eigen::Matrix<double, 6, 1> f = Eigen::Matrix<double, 6, 1>::Zero();
  f(0) = 1.0;
  const Eigen::Matrix<double, 6, 1> out = rot.D() * f;
  CHECK(std::abs(out(1) - 1.0) < 1e-15);
  CHECK(std::abs(out(0)) < 1e-15);

  oracle::Rng rng(8);
  const auto sys = oracle::random_stable(rng, 4, 6, 6, true).rename_input("u", "W").rename_output("y", "A");
  const Dcm R(rng.rotation());
  auto rt = apply_frame(apply_frame(sys, "W", R), "W", R.transpose());
  rt = apply_frame(apply_frame(rt, "A", R), "A", R.transpose());
  CHECK((rt.B() - sys.B()).norm() < 1e-12);
  CHECK((rt.C() - sys.C()).norm() < 1e-12);
  CHECK((rt.D() - sys.D()).norm() < 1e-12);

  const auto narrow = StateSpace::gain(MatrixXd::Identity(3, 3), {{"u", 3}}, {{"y", 3}});
  CHECK_THROWS_AS(apply_frame(narrow, "y", R), Error);
}

TEST_CASE("mode_freq_lfr reproduces the shifted frequency") {
  const auto d = modal::load_body_file(kData + "/bodies/solar_array.yaml").data;
  const auto lfr = mode_freq_lfr(d, 0, 0.2);
  const double f0 = 1.2850;
  for (double delta : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    const auto closed = linss::lft_upper(lfr, delta, "w_omega", "z_omega");
    const Eigen::VectorXcd ev = closed.A().eigenvalues();
    const double target = 2 * std::numbers::pi * f0 * (1 + 0.2 * delta);
    double best = 1e300;
    for (int k = 0; k < ev.size(); ++k) best = std::min(best, std::abs(std::abs(ev(k)) - target) / target);
    CHECK(best < 1e-9);
  }
  const auto nominal = linss::lft_upper(lfr, 0.0, "w_omega", "z_omega");
  const auto plain = titop_two_port(d);
  CHECK((nominal.A() - plain.A()).norm() < 1e-12);
  CHECK((nominal.D() - plain.D()).norm() < 1e-12);
  CHECK_THROWS_AS(mode_freq_lfr(d, 5, 0.2), Error);
}

}  // TEST_SUITE
