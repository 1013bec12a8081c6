#include <algorithm>
#include <cmath>
#include <vector>

#include "flexasm/error.hpp"
#include "flexasm/linss.hpp"

namespace flexasm::linss {

namespace {

constexpr double kRelTol = 1e-10;

double sigma_at(const StateSpace& sys, double w) {
  return sigma_max(evaluate(sys, {0.0, w}));
}

// Frequencies where the Hamiltonian of sys at level gamma has purely
// imaginary eigenvalues, i.e. where some singular value crosses gamma.
std::vector<double> crossings(const StateSpace& sys, double gamma) {
  const int n = sys.num_states();
  const auto& A = sys.A();
  const auto& B = sys.B();
  const auto& C = sys.C();
  const auto& D = sys.D();
  const double g2 = gamma * gamma;
  const Eigen::MatrixXd R =
      g2 * Eigen::MatrixXd::Identity(D.cols(), D.cols()) - D.transpose() * D;
  const Eigen::MatrixXd S =
      g2 * Eigen::MatrixXd::Identity(D.rows(), D.rows()) - D * D.transpose();
  Eigen::LDLT<Eigen::MatrixXd> Rf(R), Sf(S);
  const Eigen::MatrixXd Ah = A + B * Rf.solve(D.transpose() * C);
  Eigen::MatrixXd H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = Ah;
  H.topRightCorner(n, n) = B * Rf.solve(B.transpose());
  H.bottomLeftCorner(n, n) = -g2 * C.transpose() * Sf.solve(C);
  H.bottomRightCorner(n, n) = -Ah.transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(H, false);
  if (es.info() != Eigen::Success) {
    fail(ErrorCode::EigenFailure, "Hamiltonian eigenvalues failed");
  }
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  std::vector<double> w;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto lam = es.eigenvalues()(i);
    if (lam.imag() >= 0.0 &&
        std::abs(lam.real()) < 1e-7 * std::max(scale, std::abs(lam))) {
      w.push_back(lam.imag());
    }
  }
  std::sort(w.begin(), w.end());
  return w;
}

}  // namespace

double hinf_norm(const StateSpace& sys) {
  const auto st = is_stable(sys);
  if (!st.stable) {
    fail(ErrorCode::UnstableSystem,
         "spectral abscissa " + std::to_string(st.abscissa));
  }
  double lo = sigma_max(sys.D().cast<std::complex<double>>());
  if (sys.num_states() == 0) return lo;

  // Starting grid: DC, the pole frequencies and a log sweep around them.
  const Eigen::VectorXcd poles = sys.A().eigenvalues();
  std::vector<double> grid{0.0};
  double wmin = INFINITY, wmax = 0.0;
  for (Eigen::Index i = 0; i < poles.size(); ++i) {
    const double mag = std::abs(poles(i));
    grid.push_back(std::abs(poles(i).imag()));
    grid.push_back(mag);
    if (mag > 0) {
      wmin = std::min(wmin, mag);
      wmax = std::max(wmax, mag);
    }
  }
  if (wmax > 0) {
    for (double w : FrequencyGrid::logspace(wmin / 10, wmax * 10, 200).points()) {
      grid.push_back(w);
    }
  }
  for (double w : grid) lo = std::max(lo, sigma_at(sys, w));
  if (lo == 0.0) return 0.0;

  // Level-set iteration: raise lo to the best midpoint between crossings of
  // a level just above it until no crossing remains.
  for (int iter = 0; iter < 100; ++iter) {
    const double gamma = lo * (1 + 2 * kRelTol);
    const auto w = crossings(sys, gamma);
    if (w.empty()) break;
    double best = lo;
    for (std::size_t i = 0; i < w.size(); ++i) {
      best = std::max(best, sigma_at(sys, w[i]));
      if (i + 1 < w.size()) best = std::max(best, sigma_at(sys, 0.5 * (w[i] + w[i + 1])));
    }
    if (best <= lo) break;
    lo = best;
  }
  return lo;
}

double h2_norm(const StateSpace& sys) {
  const auto st = is_stable(sys);
  if (!st.stable) {
    fail(ErrorCode::UnstableSystem,
         "spectral abscissa " + std::to_string(st.abscissa));
  }
  const double scale = std::max(1.0, sys.B().norm() * sys.C().norm());
  if (sys.D().size() && sys.D().cwiseAbs().maxCoeff() > 1e-12 * scale) {
    fail(ErrorCode::NonzeroFeedthrough, "H2 norm needs D = 0");
  }
  if (sys.num_states() == 0) return 0.0;
  const Eigen::MatrixXd P =
      lyapunov(sys.A(), sys.B() * sys.B().transpose());
  const double tr = (sys.C() * P * sys.C().transpose()).trace();
  return std::sqrt(std::max(tr, 0.0));
}

}  // namespace flexasm::linss
