#include <doctest.h>

#include <cmath>
#include <numbers>

#include <flexasm/error.hpp>
#include <flexasm/modal.hpp>

#include "oracles.hpp"

using namespace flexasm;
using namespace flexasm::modal;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;

namespace {

const std::string kData = FLEXASM_TEST_DATA_DIR;

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

TileLayout row_layout(int n) {
  TileLayout l;
  for (int i = 0; i < n; ++i) l.cells.push_back({i, 0});
  return l;
}

MatrixXd rigid_transport(const LatticeModel& m, const Vec3& P) {
  MatrixXd T(m.M.rows(), 6);
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    T.middleRows<6>(6 * i) = multibody::tau(P - m.nodes[i]);
  return T;
}

}  // namespace

TEST_SUITE("modal") {

TEST_CASE("body fixtures") {
  const auto sa = load_body_file(kData + "/bodies/solar_array.yaml");
  CHECK(sa.data.mass == doctest::Approx(88.93));
  CHECK(sa.data.num_modes() == 2);
  CHECK(sa.data.L_P.cols() == 6);
  CHECK_FALSE(sa.warnings.empty());

  const auto f26 = load_body_file(kData + "/bodies/f26.yaml").data;
  REQUIRE(f26.num_modes() == 3);
  const double hz[3] = {0.9120, 2.1, 2.99};
  for (int j = 0; j < 3; ++j)
    CHECK(f26.freqs(j) / (2 * std::numbers::pi) == doctest::Approx(hz[j]).epsilon(1e-12));

  const auto f1 = load_body_file(kData + "/bodies/f1.yaml").data;
  CHECK(f1.mass == doctest::Approx(6.0423));
}

TEST_CASE("body file schema errors") {
  const std::string base =
      "mass_kg: 2.0\ninertia_kgm2: [1, 0, 0, 1, 0, 1]\nfreqs_hz: [1.0]\nL_P: [[0, 0, 0, 0, 0, 0.1]]\n";
  CHECK_NOTHROW(parse_body(base + "damping: 0.01\n"));
  CHECK(code_of([&] { parse_body(base + "damping: 0.0\n"); }) == ErrorCode::SchemaError);
  CHECK(code_of([&] { parse_body(base + "damping: 0.01\nmass_g: 3\n"); }) == ErrorCode::UnitError);
  CHECK(code_of([&] { parse_body("mass_kg: [1, 2\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { load_body_file("/nonexistent/body.yaml"); }) == ErrorCode::ParseError);
}

TEST_CASE("single tile lattice") {
  LatticeParams p;
  const auto m = build_lattice(row_layout(1), p);
  REQUIRE(m.M.rows() == 6);
  MatrixXd expect = MatrixXd::Zero(6, 6);
  expect.diagonal() << 6.0423, 6.0423, 6.0423, 0.5041, 0.5041, 1.0071;
  CHECK((m.M - expect).norm() == 0.0);
  const auto d = modal_reduce(m, Vec3::Zero(), 0, 0, 0.005);
  CHECK(d.mass == doctest::Approx(6.0423).epsilon(1e-14));
  CHECK(d.num_modes() == 0);
}

TEST_CASE("lattice structure") {
  LatticeParams p;
  const auto m2 = build_lattice(row_layout(2), p);
  CHECK(m2.M.rows() == 12);
  Eigen::FullPivLU<MatrixXd> lu(m2.K);
  CHECK(lu.rank() == 12);
  CHECK((m2.K - m2.K.transpose()).norm() < 1e-9 * m2.K.norm());

  TileLayout isolated;
  isolated.cells = {{0, 0}, {0, 2}};
  CHECK(code_of([&] { build_lattice(isolated, p); }) == ErrorCode::DisconnectedLayout);
  TileLayout repeated;
  repeated.cells = {{0, 0}, {0, 0}};
  CHECK(code_of([&] { build_lattice(repeated, p); }) == ErrorCode::LayoutError);

  for (int n : {1, 3, 7, 12}) {
    const auto m = build_lattice(default_layout(n), p);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += m.M(6 * i, 6 * i);
    CHECK(total == doctest::Approx(p.tile_mass * n).epsilon(1e-14));
  }
}

TEST_CASE("default layout is valid and adjacent") {
  for (int n = 1; n <= 28; ++n) CHECK_NOTHROW(validate(default_layout(n)));
  CHECK(clamp_adjacent(default_layout(1).cells[0]));
}

TEST_CASE("clamped_free_modes analytic chains") {
  const double m = 2.0, k = 50.0;
  LatticeModel chain;
  chain.M = m * MatrixXd::Identity(2, 2);
  chain.K.resize(2, 2);
  chain.K << 2 * k, -k, -k, k;
  const auto modes = clamped_free_modes(chain, 2);
  const double w1 = std::sqrt(k / m * (3 - std::sqrt(5.0)) / 2);
  const double w2 = std::sqrt(k / m * (3 + std::sqrt(5.0)) / 2);
  CHECK(modes.freqs(0) == doctest::Approx(w1).epsilon(1e-12));
  CHECK(modes.freqs(1) == doctest::Approx(w2).epsilon(1e-12));

  LatticeModel single;
  single.M = MatrixXd::Constant(1, 1, m);
  single.K = MatrixXd::Constant(1, 1, k);
  CHECK(clamped_free_modes(single, 1).freqs(0) == doctest::Approx(std::sqrt(k / m)));
  CHECK(code_of([&] { clamped_free_modes(single, 2); }) == ErrorCode::EigenFailure);
}

TEST_CASE("lattice modes are ascending and mass normalized") {
  LatticeParams p;
  const auto m = build_lattice(default_layout(6), p);
  const auto modes = clamped_free_modes(m, 10);
  for (int j = 0; j < 10; ++j) CHECK(modes.freqs(j) > 0.0);
  for (int j = 1; j < 10; ++j) CHECK(modes.freqs(j) >= modes.freqs(j - 1));
  const MatrixXd G = modes.shapes.transpose() * m.M * modes.shapes;
  CHECK((G - MatrixXd::Identity(10, 10)).norm() < 1e-9);
  const MatrixXd KK = modes.shapes.transpose() * m.K * modes.shapes;
  const MatrixXd W2 = modes.freqs.array().square().matrix().asDiagonal();
  CHECK((KK - W2).norm() < 1e-8 * W2.norm());
}

TEST_CASE("default stiffness puts the 26-tile first mode near 0.912 Hz") {
  LatticeParams p;
  const auto m = build_lattice(default_layout(26), p);
  const double f = clamped_free_modes(m, 1).freqs(0) / (2 * std::numbers::pi);
  CHECK(f == doctest::Approx(0.912).epsilon(0.01));
}

TEST_CASE("modal_reduce participation completeness") {
  LatticeParams p;
  const auto m = build_lattice(default_layout(4), p);
  const int ndof = static_cast<int>(m.M.rows());
  for (int keep : {3, 10, ndof}) {
    const auto d = modal_reduce(m, Vec3::Zero(), 2, keep, 0.005);
    const MatrixXd LtL = d.L_P.transpose() * d.L_P;
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<MatrixXd>(d.static_model - LtL).eigenvalues().minCoeff();
    if (keep == ndof) {
      CHECK((LtL - d.static_model).norm() < 1e-8 * d.static_model.norm());
    } else {
      CHECK(min_eig > -1e-10 * d.static_model.norm());
    }
  }
}

TEST_CASE("modal_reduce TITOP equals the direct lattice response with every mode kept") {
  LatticeParams p;
  const auto m = build_lattice(default_layout(3), p);
  const int ndof = static_cast<int>(m.M.rows());
  const Vec3 P = Vec3::Zero();
  const int c_tile = 2;
  const double xi = 0.02;
  const auto modes = clamped_free_modes(m, ndof);
  const auto d = modal_reduce(m, modes, P, c_tile, xi);
  const auto titop = multibody::titop_two_port(d);

  const MatrixXd T = rigid_transport(m, P);
  MatrixXd E = MatrixXd::Zero(ndof, 6);
  E.middleRows<6>(6 * c_tile).setIdentity();
  const MatrixXd Cd = m.M * modes.shapes * (2 * xi * modes.freqs).asDiagonal() *
                      modes.shapes.transpose() * m.M;
  for (double w : {0.3, 4.0, 11.0, 60.0}) {
    const std::complex<double> s(0.0, w);
    const MatrixXcd Z = (s * s) * m.M.cast<std::complex<double>>() +
                        s * Cd.cast<std::complex<double>>() + m.K.cast<std::complex<double>>();
    // Relative motion y: Z y = -M T a + E W.
    MatrixXcd rhs(ndof, 12);
    rhs << E.cast<std::complex<double>>(), (-m.M * T).cast<std::complex<double>>();
    const MatrixXcd Y = Z.partialPivLu().solve(rhs);
    MatrixXcd acc_C = (s * s) * E.transpose().cast<std::complex<double>>() * Y;
    acc_C.rightCols(6) += (E.transpose() * T).cast<std::complex<double>>();
    MatrixXcd W_P = -(s * s) * (T.transpose() * m.M).cast<std::complex<double>>() * Y;
    W_P.leftCols(6) += (E.transpose() * T).transpose().cast<std::complex<double>>();
    W_P.rightCols(6) -= (T.transpose() * m.M * T).cast<std::complex<double>>();
    MatrixXcd direct(12, 12);
    direct << acc_C, W_P;
    const MatrixXcd G = linss::evaluate(titop, s);
    CHECK((G - direct).norm() < 1e-8 * direct.norm());
  }
}

TEST_CASE("stiff lattice behaves as the rigid composite at low frequency") {
  LatticeParams p;
  p.side_stiffness *= 1e6;
  const auto layout = default_layout(4);
  const auto m = build_lattice(layout, p);
  const auto d = modal_reduce(m, Vec3::Zero(), 3, 6, 0.005);
  multibody::Mat6 D = multibody::Mat6::Zero();
  for (int i = 0; i < layout.size(); ++i) {
    D += multibody::rigid_mass_matrix(p.tile_mass, p.tile_inertia, tile_center(layout.cells[i]));
  }
  const auto flex = multibody::titop_two_port(d);
  const auto rigid = multibody::rigid_two_port(D, tile_center(layout.cells[3]));
  for (double w : {0.0, 0.01, 1.0}) {
    const MatrixXcd a = linss::evaluate(flex, {0.0, w}), b = linss::evaluate(rigid, {0.0, w});
    CHECK((a - b).norm() < 1e-4 * b.norm());
  }
  CHECK(code_of([&] { modal_reduce(m, Vec3::Zero(), 9, 3, 0.005); }) == ErrorCode::UnknownPoint);
}

}  // TEST_SUITE
