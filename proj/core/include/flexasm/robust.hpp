#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flexasm/linss.hpp"

namespace flexasm::robust {

struct MuResult {
  double mu_lower = 0.0;
  double mu_upper = 0.0;
  std::optional<double> delta_crit;  // signed
  double omega_peak = 0.0;           // frequency of the mu_upper maximum
};

struct MuOptions {
  std::string w_channel = "w_omega";
  std::string z_channel = "z_omega";
  int scan_points = 60;        // per sign, log spaced in [1e-3, delta_max]
  int frequency_points = 400;
  double tolerance = 1e-10;    // relative, on |delta_crit|
};

/// State matrix of the upper LFT with w = delta z.  Throws IllPosedLoop when
/// I - delta D_zw is singular.
Eigen::MatrixXd closed_state_matrix(const linss::StateSpace& sys, double delta,
                                    const std::string& w, const std::string& z);

/// Stability of the upper LFT at a given delta; ill-posed closures count as
/// unstable.
bool stable_at(const linss::StateSpace& sys, double delta, const std::string& w,
               const std::string& z);

/// Repeated real scalar block delta I.  mu_lower = 1 / |delta_crit| from the
/// smallest destabilizing delta in [-delta_max, delta_max]; mu_upper is the
/// largest spectral radius of the w -> z transfer over frequency.
MuResult mu_real_repeated(const linss::StateSpace& sys, double delta_max = 1e3,
                          const MuOptions& opts = {});

/// Spectral radius of the w -> z transfer on a frequency grid (rad/s).
std::vector<double> spectral_radius(const linss::StateSpace& sys,
                                    const std::vector<double>& omega,
                                    const std::string& w = "w_omega",
                                    const std::string& z = "z_omega");

}  // namespace flexasm::robust
