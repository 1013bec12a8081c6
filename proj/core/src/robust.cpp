#include "flexasm/robust.hpp"

#include <algorithm>
#include <cmath>

#include "flexasm/error.hpp"

namespace flexasm::robust {

using linss::StateSpace;

namespace {

struct Partition {
  Eigen::MatrixXd A, Bw, Cz, Dzw;
};

Partition partition(const StateSpace& sys, const std::string& w, const std::string& z) {
  if (!sys.has_input(w)) fail(ErrorCode::UnknownChannel, "no input '" + w + "'");
  if (!sys.has_output(z)) fail(ErrorCode::UnknownChannel, "no output '" + z + "'");
  const int iw = sys.input_offset(w), nw = sys.input_width(w);
  const int oz = sys.output_offset(z), nz = sys.output_width(z);
  if (nw != nz) fail(ErrorCode::WidthMismatch, "w and z widths differ");
  return {sys.A(), sys.B().middleCols(iw, nw), sys.C().middleRows(oz, nz),
          sys.D().block(oz, iw, nz, nw)};
}

Eigen::MatrixXd closed_A(const Partition& p, double delta) {
  const int k = static_cast<int>(p.Dzw.rows());
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(k, k) - delta * p.Dzw;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) fail(ErrorCode::IllPosedLoop, "I - delta D_zw singular");
  return p.A + delta * p.Bw * lu.solve(p.Cz);
}

bool stable(const Partition& p, double delta) {
  Eigen::MatrixXd A;
  try {
    A = closed_A(p, delta);
  } catch (const Error&) {
    return false;
  }
  if (A.rows() == 0) return true;
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues();
  return ev.real().maxCoeff() < -1e-10;
}

Eigen::MatrixXcd transfer(const Partition& p, double omega) {
  const int n = static_cast<int>(p.A.rows());
  const std::complex<double> s(0.0, omega);
  if (n == 0) return p.Dzw.cast<std::complex<double>>();
  const Eigen::MatrixXcd sI_A =
      s * Eigen::MatrixXcd::Identity(n, n) - p.A.cast<std::complex<double>>();
  return p.Cz.cast<std::complex<double>>() *
             sI_A.partialPivLu().solve(p.Bw.cast<std::complex<double>>()) +
         p.Dzw.cast<std::complex<double>>();
}

double rho(const Eigen::MatrixXcd& M) {
  return M.size() == 0 ? 0.0 : Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(M, false)
                                   .eigenvalues()
                                   .cwiseAbs()
                                   .maxCoeff();
}

std::vector<double> mu_grid(const Partition& p, int count) {
  std::vector<double> out{0.0};
  if (p.A.rows() == 0) return out;
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(p.A, false).eigenvalues();
  double lo = INFINITY, hi = 0.0;
  for (int i = 0; i < ev.size(); ++i) {
    const double m = std::abs(ev[i]);
    if (m > 1e-12) {
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    if (std::abs(ev[i].imag()) > 0.0) out.push_back(std::abs(ev[i].imag()));
  }
  if (hi == 0.0) return out;
  const auto g = linss::FrequencyGrid::logspace(lo / 10.0, hi * 10.0, count).points();
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

}  // namespace

Eigen::MatrixXd closed_state_matrix(const StateSpace& sys, double delta,
                                    const std::string& w, const std::string& z) {
  return closed_A(partition(sys, w, z), delta);
}

bool stable_at(const StateSpace& sys, double delta, const std::string& w,
               const std::string& z) {
  return stable(partition(sys, w, z), delta);
}

std::vector<double> spectral_radius(const StateSpace& sys,
                                    const std::vector<double>& omega,
                                    const std::string& w, const std::string& z) {
  const auto p = partition(sys, w, z);
  std::vector<double> out;
  out.reserve(omega.size());
  for (double om : omega) out.push_back(rho(transfer(p, om)));
  return out;
}

MuResult mu_real_repeated(const StateSpace& sys, double delta_max, const MuOptions& opts) {
  if (!(delta_max > 0.0)) fail(ErrorCode::InvalidArgument, "delta_max must be positive");
  const auto p = partition(sys, opts.w_channel, opts.z_channel);
  if (!stable(p, 0.0)) fail(ErrorCode::NominalUnstable, "nominal closure is not stable");

  MuResult r;
  // Frequency sweep: upper bound and candidate real destabilizers 1/lambda.
  std::vector<double> candidates;
  for (double om : mu_grid(p, opts.frequency_points)) {
    const Eigen::MatrixXcd M = transfer(p, om);
    if (M.size() == 0) continue;
    const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(M, false).eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
      const double m = std::abs(ev[i]);
      if (m > r.mu_upper) {
        r.mu_upper = m;
        r.omega_peak = om;
      }
      if (m > 1e-14 && std::abs(ev[i].imag()) <= 1e-3 * m) {
        const double d = 1.0 / ev[i].real();
        if (std::abs(d) <= delta_max) candidates.push_back(d);
      }
    }
  }

  auto search = [&](double sign) -> std::optional<double> {
    std::vector<double> probes;
    const double lo = std::min(1e-3, delta_max);
    for (int i = 0; i < opts.scan_points; ++i) {
      const double t = opts.scan_points == 1 ? 1.0 : double(i) / (opts.scan_points - 1);
      probes.push_back(lo * std::pow(delta_max / lo, t));
    }
    for (double c : candidates) {
      if (c * sign > 0.0) {
        probes.push_back(std::abs(c) * (1.0 + 1e-7));
        probes.push_back(std::abs(c) * (1.0 + 1e-4));
      }
    }
    std::sort(probes.begin(), probes.end());
    double a = 0.0;  // stable
    for (double b : probes) {
      if (b > delta_max) b = delta_max;
      if (stable(p, sign * b)) {
        a = b;
        continue;
      }
      while (b - a > opts.tolerance * std::max(b, 1e-300)) {
        const double m = 0.5 * (a + b);
        (stable(p, sign * m) ? a : b) = m;
      }
      return sign * b;
    }
    return std::nullopt;
  };
  const auto pos = search(+1.0);
  const auto neg = search(-1.0);
  if (pos && (!neg || std::abs(*pos) <= std::abs(*neg))) {
    r.delta_crit = pos;
  } else {
    r.delta_crit = neg;
  }
  if (r.delta_crit) {
    r.mu_lower = 1.0 / std::abs(*r.delta_crit);
    // Evaluate at the crossing frequency so the bounds stay ordered.
    const Eigen::MatrixXd Ac = closed_A(p, *r.delta_crit);
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(Ac, false).eigenvalues();
    int imax = 0;
    ev.real().maxCoeff(&imax);
    const double wc = std::abs(ev[imax].imag());
    const double rc = rho(transfer(p, wc));
    if (rc > r.mu_upper) {
      r.mu_upper = rc;
      r.omega_peak = wc;
    }
    r.mu_upper = std::max(r.mu_upper, r.mu_lower);
  }
  return r;
}

}  // namespace flexasm::robust
