#include <doctest.h>

#include <cmath>
#include <numbers>

#include <flexasm/error.hpp>
#include <flexasm/linss.hpp>

#include "oracles.hpp"

using namespace flexasm;
using namespace flexasm::linss;
using Eigen::MatrixXd;

namespace {

StateSpace first_order(double a, const std::string& in = "u", const std::string& out = "y") {
  return StateSpace(MatrixXd::Constant(1, 1, -a), MatrixXd::Constant(1, 1, 1.0),
                    MatrixXd::Constant(1, 1, a), MatrixXd::Zero(1, 1), {{in, 1}}, {{out, 1}});
}

StateSpace integrator(const std::string& in = "u", const std::string& out = "y") {
  return StateSpace(MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                    MatrixXd::Zero(1, 1), {{in, 1}}, {{out, 1}});
}

StateSpace scalar_gain(double k, const std::string& in = "u", const std::string& out = "y") {
  return StateSpace::gain(MatrixXd::Constant(1, 1, k), {{in, 1}}, {{out, 1}});
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

double max_response_gap(const StateSpace& a, const StateSpace& b) {
  double gap = 0.0;
  for (double w : {0.0, 0.013, 0.31, 1.0, 2.7, 19.0, 400.0}) {
    gap = std::max(gap, (oracle::transfer(a, w) - oracle::transfer(b, w)).norm());
  }
  return gap;
}

}  // namespace

TEST_SUITE("linss") {

TEST_CASE("series gains multiply") {
  const std::vector<Block> blocks{{"a", scalar_gain(2.0)}, {"b", scalar_gain(3.0)}};
  const std::vector<Wire> wires{{{"a", "y"}, {"b", "u"}}};
  const std::vector<ExternalInput> ins{{{"r", 1}, {{"a", "u"}}}};
  const std::vector<ExternalOutput> outs{{{"out", 1}, {"b", "y"}}};
  const auto sys = interconnect(blocks, wires, ins, outs);
  CHECK(sys.num_states() == 0);
  CHECK(sys.D()(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("unity negative feedback around an integrator is 1/(s+1)") {
  const std::vector<Block> blocks{{"int", integrator()}};
  const std::vector<Wire> wires{{{"int", "y"}, {"int", "u"}, -1.0}};
  const std::vector<ExternalInput> ins{{{"r", 1}, {{"int", "u"}}}};
  const std::vector<ExternalOutput> outs{{{"y", 1}, {"int", "y"}}};
  const auto sys = interconnect(blocks, wires, ins, outs);
  for (double w : {0.0, 0.5, 1.0, 7.0}) {
    const auto g = evaluate(sys, {0.0, w})(0, 0);
    const auto ref = 1.0 / std::complex<double>(1.0, w);
    CHECK(std::abs(g - ref) < 1e-14);
  }
}

TEST_CASE("wire width mismatch is rejected") {
  const auto wide = StateSpace::gain(MatrixXd::Identity(3, 3), {{"u", 3}}, {{"y", 3}});
  const auto wider = StateSpace::gain(MatrixXd::Identity(6, 6), {{"u", 6}}, {{"y", 6}});
  const std::vector<Block> blocks{{"a", wide}, {"b", wider}};
  const std::vector<Wire> wires{{{"a", "y"}, {"b", "u"}}};
  CHECK(code_of([&] { interconnect(blocks, wires, {}, {}); }) == ErrorCode::WidthMismatch);
}

TEST_CASE("algebraic loop with unit gain is ill posed") {
  const std::vector<Block> blocks{{"k", scalar_gain(1.0)}};
  const std::vector<Wire> wires{{{"k", "y"}, {"k", "u"}}};
  const std::vector<ExternalInput> ins{{{"r", 1}, {{"k", "u"}}}};
  CHECK(code_of([&] { interconnect(blocks, wires, ins, {}); }) == ErrorCode::IllPosedLoop);
}

TEST_CASE("series interconnection is associative") {
  oracle::Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto g1 = oracle::random_stable(rng, 3, 2, 2, true);
    auto g2 = oracle::random_stable(rng, 2, 2, 2, true);
    auto g3 = oracle::random_stable(rng, 4, 2, 2, true);
    auto chain2 = [](const StateSpace& a, const StateSpace& b) {
      const std::vector<Block> blocks{{"a", a}, {"b", b}};
      const std::vector<Wire> wires{{{"a", "y"}, {"b", "u"}}};
      const std::vector<ExternalInput> ins{{{"u", 2}, {{"a", "u"}}}};
      const std::vector<ExternalOutput> outs{{{"y", 2}, {"b", "y"}}};
      return interconnect(blocks, wires, ins, outs);
    };
    const auto left = chain2(chain2(g1, g2), g3);
    const auto right = chain2(g1, chain2(g2, g3));
    CHECK(max_response_gap(left, right) < 1e-9);
  }
}

TEST_CASE("invert_channels on a static gain") {
  const auto inv = invert_channels(scalar_gain(2.0), std::vector<std::string>{"u"},
                                   std::vector<std::string>{"y"});
  CHECK(inv.inputs()[0].name == "y");
  CHECK(inv.outputs()[0].name == "u");
  CHECK(inv.D()(0, 0) == doctest::Approx(0.5));
  CHECK(code_of([] {
          invert_channels(scalar_gain(0.0), std::vector<std::string>{"u"},
                          std::vector<std::string>{"y"});
        }) == ErrorCode::SingularDBlock);
}

TEST_CASE("double inversion restores the system") {
  oracle::Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto base = oracle::random_stable(rng, 4, 3, 3, true);
    MatrixXd D = base.D();
    D += 3.0 * MatrixXd::Identity(3, 3);
    StateSpace sys(base.A(), base.B(), base.C(), D, {{"a", 1}, {"b", 2}}, {{"c", 2}, {"d", 1}});
    const std::vector<std::string> in{"b"}, out{"c"};
    const auto once = invert_channels(sys, in, out);
    const auto twice = invert_channels(once, out, in);
    CHECK(twice.inputs()[0].name == "b");
    const std::vector<std::string> ins{"a", "b"}, outs{"c", "d"};
    CHECK(max_response_gap(twice.select(ins, outs), sys) < 1e-8);
  }
}

TEST_CASE("inverted response solves the original relation") {
  oracle::Rng rng(17);
  auto base = oracle::random_stable(rng, 5, 2, 2, true);
  MatrixXd D = base.D() + 4.0 * MatrixXd::Identity(2, 2);
  StateSpace sys(base.A(), base.B(), base.C(), D, {{"u", 2}}, {{"y", 2}});
  const auto inv = invert_channels(sys, std::vector<std::string>{"u"},
                                   std::vector<std::string>{"y"});
  for (double w : {0.1, 1.0, 10.0}) {
    const auto G = oracle::transfer(sys, w);
    const auto H = oracle::transfer(inv, w);
    CHECK((G * H - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-9);
  }
}

TEST_CASE("lft_lower: K = 0 leaves the plant and PD closes a double integrator") {
  // x1' = x2, x2' = u + w; y = [x1; x2]; z = x1
  MatrixXd A(2, 2), B(2, 2), C(3, 2), D = MatrixXd::Zero(3, 2);
  A << 0, 1, 0, 0;
  B << 0, 0, 1, 1;
  C << 1, 0, 1, 0, 0, 1;
  StateSpace plant(A, B, C, D, {{"w", 1}, {"u", 1}}, {{"z", 1}, {"y", 2}});
  const auto open = lft_lower(plant, StateSpace::gain(MatrixXd::Zero(1, 2), {{"y", 2}}, {{"u", 1}}),
                              "u", "y");
  CHECK((open.A() - A).norm() == 0.0);

  const double k = 4.0, c = 3.0;
  MatrixXd K(1, 2);
  K << -k, -c;
  const auto closed = lft_lower(plant, StateSpace::gain(K, {{"y", 2}}, {{"u", 1}}), "u", "y");
  Eigen::VectorXcd ev = closed.A().eigenvalues();
  // s^2 + 3 s + 4
  const std::complex<double> r1(-1.5, std::sqrt(7.0) / 2.0);
  const double d = std::min(std::abs(ev(0) - r1), std::abs(ev(1) - r1));
  CHECK(d < 1e-12);
  CHECK(std::abs(ev(0) * ev(1) - 4.0) < 1e-12);
}

TEST_CASE("lft_upper: nominal, frequency shift and ill-posed closure") {
  // Oscillator with stiffness w0^2 (1 + r delta) pulled into a scalar channel pair.
  const double w0 = 1.0, r = 0.2;
  MatrixXd A(2, 2), B(2, 2), C(2, 2), D = MatrixXd::Zero(2, 2);
  A << 0, 1, -w0 * w0, 0;
  B << 0, 0, -w0 * w0 * r, 1;
  C << 1, 0, 0, 1;
  StateSpace sys(A, B, C, D, {{"w", 1}, {"u", 1}}, {{"z", 1}, {"y", 1}});
  CHECK((lft_upper(sys, 0.0, "w", "z").A() - A).norm() == 0.0);
  const auto closed = lft_upper(sys, 1.0, "w", "z");
  const Eigen::VectorXcd ev = closed.A().eigenvalues();
  CHECK(std::abs(std::abs(ev(0)) - std::sqrt(1.2)) < 1e-12);
  CHECK(closed.inputs().size() == 1);
  CHECK(closed.outputs().size() == 1);

  const auto bad = StateSpace::gain(MatrixXd::Identity(1, 1), {{"w", 1}}, {{"z", 1}});
  CHECK(code_of([&] { lft_upper(bad, 1.0, "w", "z"); }) == ErrorCode::IllPosedLoop);
}

TEST_CASE("freq_response of simple systems") {
  const auto grid = FrequencyGrid(std::vector<double>{0.5, 1.0, 2.0});
  const auto r = freq_response(first_order(1.0), grid);
  CHECK(std::abs(r.values[1](0, 0)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  const auto ri = freq_response(integrator(), grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(std::abs(ri.values[k](0, 0)) == doctest::Approx(1.0 / grid.points()[k]));
  }
  MatrixXd A(2, 2), B(2, 1), C(1, 2);
  A << 0, 1, -1, 0;
  B << 0, 1;
  C << 1, 0;
  const StateSpace osc(A, B, C, MatrixXd::Zero(1, 1), {{"u", 1}}, {{"y", 1}});
  const auto rz = freq_response(osc, grid);
  CHECK(rz.skipped == std::vector<double>{1.0});
  CHECK(rz.values.size() == 2);
}

TEST_CASE("is_stable") {
  CHECK(is_stable(first_order(1.0)).stable);
  CHECK_FALSE(is_stable(integrator()).stable);
  CHECK_FALSE(is_stable(first_order(-1.0)).stable);
  CHECK(is_stable(scalar_gain(1.0)).stable);
}

TEST_CASE("minimal_stable_projection drops hidden marginal modes") {
  MatrixXd A(2, 2), B(2, 1), C(1, 2);
  A << -1, 0, 0, 0;
  B << 1, 0;
  C << 1, 1;
  StateSpace sys(A, B, C, MatrixXd::Zero(1, 1), {{"u", 1}}, {{"y", 1}});
  const auto red = minimal_stable_projection(sys, "u", "y");
  CHECK(red.num_states() == 1);
  CHECK(red.A()(0, 0) == doctest::Approx(-1.0));

  MatrixXd A2(2, 2), B2(2, 1), C2(1, 2);
  A2 << 0, 1, 0, 0;
  B2 << 0, 1;
  C2 << 1, 0;
  StateSpace dbl(A2, B2, C2, MatrixXd::Zero(1, 1), {{"u", 1}}, {{"y", 1}});
  CHECK(code_of([&] { minimal_stable_projection(dbl, "u", "y"); }) ==
        ErrorCode::MarginalModeObservable);
}

TEST_CASE("hinf_norm closed forms and errors") {
  CHECK(hinf_norm(first_order(1.0)) == doctest::Approx(1.0).epsilon(1e-9));
  const double xi = 0.005;
  MatrixXd A(2, 2), B(2, 1), C(1, 2);
  A << 0, 1, -1, -2 * xi;
  B << 0, 1;
  C << 1, 0;
  StateSpace res(A, B, C, MatrixXd::Zero(1, 1), {{"u", 1}}, {{"y", 1}});
  const double exact = 1.0 / (2 * xi * std::sqrt(1 - xi * xi));
  CHECK(hinf_norm(res) == doctest::Approx(exact).epsilon(1e-9));
  CHECK(code_of([] { hinf_norm(first_order(-1.0)); }) == ErrorCode::UnstableSystem);
}

TEST_CASE("hinf_norm matches the dense-grid oracle on random systems") {
  oracle::Rng rng(101);
  for (int trial = 0; trial < 15; ++trial) {
    const auto sys = oracle::random_stable(rng, rng.integer(1, 12), rng.integer(1, 3),
                                           rng.integer(1, 3), trial % 2 == 0);
    CHECK(oracle::rel_err(hinf_norm(sys), oracle::hinf_grid(sys)) < 1e-4);
  }
}

TEST_CASE("h2_norm closed forms, homogeneity and errors") {
  CHECK(h2_norm(first_order(1.0)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  oracle::Rng rng(7);
  const auto sys = oracle::random_stable(rng, 6, 2, 2);
  const double base = h2_norm(sys);
  const StateSpace scaled(sys.A(), sys.B(), 3.0 * sys.C(), sys.D(), sys.inputs(), sys.outputs());
  CHECK(h2_norm(scaled) == doctest::Approx(3.0 * base).epsilon(1e-10));
  CHECK(code_of([] { h2_norm(scalar_gain(1.0)); }) == ErrorCode::NonzeroFeedthrough);
}

TEST_CASE("h2_norm is invariant under similarity and matches quadrature") {
  oracle::Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = oracle::random_stable(rng, rng.integer(1, 10), 2, 2);
    MatrixXd T = MatrixXd::Identity(sys.num_states(), sys.num_states()) +
                 0.2 * rng.matrix(sys.num_states(), sys.num_states());
    const double h = h2_norm(sys);
    CHECK(oracle::rel_err(h2_norm(sys.transform(T)), h) < 1e-9);
    CHECK(oracle::rel_err(h, oracle::h2_quadrature(sys)) < 1e-3);
  }
}

TEST_CASE("lyapunov residual is small") {
  oracle::Rng rng(3);
  const auto sys = oracle::random_stable(rng, 8, 2, 2);
  const MatrixXd Q = sys.B() * sys.B().transpose();
  const MatrixXd X = lyapunov(sys.A(), Q);
  CHECK((sys.A() * X + X * sys.A().transpose() + Q).norm() < 1e-9 * std::max(1.0, X.norm()));
}

}  // TEST_SUITE
