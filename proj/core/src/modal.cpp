#include "flexasm/modal.hpp"

#include <cmath>
#include <numbers>
#include <queue>
#include <set>

#include "flexasm/error.hpp"
#include "yaml_util.hpp"

namespace flexasm::modal {

using multibody::Mat6;
using multibody::skew;
using multibody::tau;

namespace {

LoadedBody parse_node(const YAML::Node& root, const std::string& ctx) {
  yaml::check_keys(root,
                   {"name", "description", "mass_kg", "inertia_kgm2",
                    "inertia_point", "com_offset_m", "freqs_hz", "freqs_rad_s",
                    "damping", "L_P", "Phi_C", "pc_m"},
                   ctx);
  LoadedBody out;
  auto& d = out.data;
  d.name = yaml::has(root, "name") ? yaml::get_string(root, "name", ctx) : ctx;
  d.mass = yaml::get_double(root, "mass_kg", ctx);
  if (!(d.mass > 0.0)) fail(ErrorCode::SchemaError, ctx + ": mass_kg must be > 0");
  const Mat3 J = yaml::get_sym3(root, "inertia_kgm2", ctx);
  const std::string where = yaml::has(root, "inertia_point")
                                ? yaml::get_string(root, "inertia_point", ctx)
                                : "port";
  const Vec3 c = yaml::has(root, "com_offset_m")
                     ? yaml::get_vec3(root, "com_offset_m", ctx)
                     : Vec3::Zero();
  Mat3 J_G;
  if (where == "com") {
    J_G = J;
  } else if (where == "port") {
    const Mat3 S = skew(c);
    J_G = J - d.mass * S.transpose() * S;
  } else {
    fail(ErrorCode::SchemaError, ctx + ": inertia_point must be 'port' or 'com'");
  }
  d.static_model = multibody::rigid_mass_matrix(d.mass, J_G, c);
  d.inertia_P = d.static_model.bottomRightCorner<3, 3>();

  std::vector<double> f;
  double scale = 1.0;
  if (yaml::has(root, "freqs_hz")) {
    f = yaml::get_list(root, "freqs_hz", ctx);
    scale = 2.0 * std::numbers::pi;
  } else if (yaml::has(root, "freqs_rad_s")) {
    f = yaml::get_list(root, "freqs_rad_s", ctx);
  }
  const int n = static_cast<int>(f.size());
  d.freqs.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!(f[i] > 0.0)) fail(ErrorCode::SchemaError, ctx + ": frequencies must be > 0");
    d.freqs(i) = f[i] * scale;
  }

  d.damping.resize(n);
  if (n > 0) {
    std::vector<double> xi;
    if (root["damping"] && root["damping"].IsScalar()) {
      xi.assign(n, yaml::get_double(root, "damping", ctx));
    } else {
      xi = yaml::get_list(root, "damping", ctx);
    }
    if (static_cast<int>(xi.size()) != n) {
      fail(ErrorCode::SchemaError, ctx + ": damping needs one entry per mode");
    }
    for (int i = 0; i < n; ++i) {
      if (!(xi[i] > 0.0 && xi[i] < 1.0)) {
        fail(ErrorCode::SchemaError, ctx + ": damping must lie in (0, 1)");
      }
      d.damping(i) = xi[i];
    }
  }

  Eigen::MatrixXd L = yaml::has(root, "L_P")
                          ? yaml::get_matrix(root, "L_P", ctx, 6)
                          : Eigen::MatrixXd(0, 6);
  if (L.rows() < n) {
    fail(ErrorCode::SchemaError, ctx + ": L_P needs one row per mode");
  }
  if (L.rows() > n) {
    out.warnings.push_back(ctx + ": L_P has " + std::to_string(L.rows()) +
                           " rows for " + std::to_string(n) +
                           " modes; keeping the first " + std::to_string(n));
  }
  d.L_P = L.topRows(n);

  if (yaml::has(root, "Phi_C")) {
    Eigen::MatrixXd Phi = yaml::get_matrix(root, "Phi_C", ctx);
    if (Phi.rows() != 6 || Phi.cols() < n) {
      fail(ErrorCode::SchemaError, ctx + ": Phi_C must be 6 rows by one column per mode");
    }
    if (Phi.cols() > n) {
      out.warnings.push_back(ctx + ": Phi_C truncated to " + std::to_string(n) + " columns");
    }
    d.Phi_C = Phi.leftCols(n);
  } else {
    d.Phi_C = Eigen::MatrixXd::Zero(6, n);
  }
  d.PC = yaml::has(root, "pc_m") ? yaml::get_vec3(root, "pc_m", ctx) : Vec3::Zero();

  try {
    for (auto& w : multibody::validate(d)) out.warnings.push_back(std::move(w));
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, e.what());
  }
  return out;
}

}  // namespace

LoadedBody load_body_file(const std::string& path) {
  return parse_node(yaml::load_file(path), path);
}

LoadedBody parse_body(const std::string& yaml_text, const std::string& origin) {
  return parse_node(yaml::load_string(yaml_text, origin), origin);
}

bool side_adjacent(const Cell& a, const Cell& b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1;
}

bool adjacent(const Cell& a, const Cell& b) {
  return !(a == b) && std::abs(a.row - b.row) <= 1 && std::abs(a.col - b.col) <= 1;
}

TileLayout TileLayout::prefix(int n) const {
  if (n < 0 || n > size()) {
    fail(ErrorCode::LayoutError, "layout has " + std::to_string(size()) +
                                     " tiles, asked for " + std::to_string(n));
  }
  return TileLayout{{cells.begin(), cells.begin() + n}};
}

int TileLayout::index_of(const Cell& c) const {
  for (int i = 0; i < size(); ++i) {
    if (cells[i] == c) return i;
  }
  return -1;
}

void validate(const TileLayout& layout) {
  std::set<Cell> seen;
  for (int k = 0; k < layout.size(); ++k) {
    const Cell& c = layout.cells[k];
    if (!seen.insert(c).second) {
      fail(ErrorCode::LayoutError, "cell (" + std::to_string(c.row) + ", " +
                                       std::to_string(c.col) + ") repeated");
    }
    if (k == 0) continue;
    bool ok = false;
    for (int i = 0; i < k && !ok; ++i) ok = adjacent(c, layout.cells[i]);
    if (!ok) {
      fail(ErrorCode::LayoutError, "tile " + std::to_string(k + 1) +
                                       " is not adjacent to an earlier tile");
    }
  }
}

TileLayout default_layout(int count) {
  static constexpr int kCols[4] = {0, -1, 1, -2};
  TileLayout layout;
  for (int k = 0; k < count; ++k) layout.cells.push_back({k / 4, kCols[k % 4]});
  return layout;
}

Vec3 tile_center(const Cell& c, double pitch) {
  return Vec3((0.5 + c.col) * pitch, (0.5 + c.row) * pitch, 0.0);
}

bool clamp_adjacent(const Cell& c) {
  return (c.row == 0 || c.row == -1) && (c.col == 0 || c.col == -1);
}

namespace {

// Spring between node i (and j, or ground when j < 0) acting on the relative
// displacement twist at point mid.
void add_spring(Eigen::MatrixXd& K, const std::vector<Vec3>& nodes, int i, int j,
                const Vec3& mid, const Vec6& k) {
  const Mat6 Ke = k.asDiagonal();
  const Mat6 Bi = tau(nodes[i] - mid);  // x_mid = tau_{mid,i} x_i
  K.block<6, 6>(6 * i, 6 * i) += Bi.transpose() * Ke * Bi;
  if (j < 0) return;
  const Mat6 Bj = tau(nodes[j] - mid);
  K.block<6, 6>(6 * j, 6 * j) += Bj.transpose() * Ke * Bj;
  K.block<6, 6>(6 * i, 6 * j) -= Bi.transpose() * Ke * Bj;
  K.block<6, 6>(6 * j, 6 * i) -= Bj.transpose() * Ke * Bi;
}

}  // namespace

LatticeModel build_lattice(const TileLayout& layout, const LatticeParams& p) {
  const int n = layout.size();
  if (n == 0) fail(ErrorCode::LayoutError, "empty layout");

  // Connectivity: every tile must reach a clamp cell through neighbours.
  std::vector<bool> reached(n, false);
  std::queue<int> q;
  for (int i = 0; i < n; ++i) {
    if (clamp_adjacent(layout.cells[i])) {
      reached[i] = true;
      q.push(i);
    }
  }
  while (!q.empty()) {
    const int i = q.front();
    q.pop();
    for (int j = 0; j < n; ++j) {
      if (!reached[j] && adjacent(layout.cells[i], layout.cells[j])) {
        reached[j] = true;
        q.push(j);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!reached[i]) {
      fail(ErrorCode::DisconnectedLayout,
           "tile " + std::to_string(i + 1) + " is not connected to the clamp");
    }
  }
  validate(layout);

  LatticeModel m;
  m.M = Eigen::MatrixXd::Zero(6 * n, 6 * n);
  m.K = Eigen::MatrixXd::Zero(6 * n, 6 * n);
  for (int i = 0; i < n; ++i) {
    m.nodes.push_back(tile_center(layout.cells[i], p.pitch));
    m.tile_map.push_back(i);
    m.M.block<3, 3>(6 * i, 6 * i) = p.tile_mass * Mat3::Identity();
    m.M.block<3, 3>(6 * i + 3, 6 * i + 3) = p.tile_inertia;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Cell& a = layout.cells[i];
      const Cell& b = layout.cells[j];
      if (!adjacent(a, b)) continue;
      const double f = side_adjacent(a, b) ? 1.0 : p.diagonal_factor;
      add_spring(m.K, m.nodes, i, j, 0.5 * (m.nodes[i] + m.nodes[j]),
                 f * p.side_stiffness);
    }
    if (clamp_adjacent(layout.cells[i])) {
      add_spring(m.K, m.nodes, i, -1, 0.5 * m.nodes[i],
                 p.clamp_factor * p.side_stiffness);
    }
  }
  return m;
}

namespace {

std::vector<int> free_dofs(const LatticeModel& model) {
  const int ndof = static_cast<int>(model.M.rows());
  std::vector<bool> clamped(ndof, false);
  for (int d : model.clamped_dofs) {
    if (d < 0 || d >= ndof) fail(ErrorCode::InvalidArgument, "clamped dof out of range");
    clamped[d] = true;
  }
  std::vector<int> out;
  for (int d = 0; d < ndof; ++d) {
    if (!clamped[d]) out.push_back(d);
  }
  return out;
}

}  // namespace

Modes clamped_free_modes(const LatticeModel& model, int n_modes) {
  const auto fr = free_dofs(model);
  const int nf = static_cast<int>(fr.size());
  if (n_modes < 0 || n_modes > nf) {
    fail(ErrorCode::EigenFailure, "requested " + std::to_string(n_modes) +
                                      " modes from " + std::to_string(nf) +
                                      " free dofs");
  }
  Modes out;
  out.freqs.resize(n_modes);
  out.shapes = Eigen::MatrixXd::Zero(model.M.rows(), n_modes);
  if (n_modes == 0) return out;
  const Eigen::MatrixXd Kf = model.K(fr, fr);
  const Eigen::MatrixXd Mf = model.M(fr, fr);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kf, Mf);
  if (es.info() != Eigen::Success) {
    fail(ErrorCode::EigenFailure, "generalized eigenproblem failed");
  }
  for (int j = 0; j < n_modes; ++j) {
    const double lam = es.eigenvalues()(j);
    if (!(lam > 0.0)) {
      fail(ErrorCode::EigenFailure, "non-positive eigenvalue; structure not clamped");
    }
    out.freqs(j) = std::sqrt(lam);
    Eigen::VectorXd v = es.eigenvectors().col(j);
    // Deterministic sign: largest-magnitude component positive.
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0) v = -v;
    for (int r = 0; r < nf; ++r) out.shapes(fr[r], j) = v(r);
  }
  return out;
}

ModalBodyData modal_reduce(const LatticeModel& model, const Vec3& P, int c_tile,
                           int n_modes, double xi_default) {
  return modal_reduce(model, clamped_free_modes(model, n_modes), P, c_tile,
                      xi_default);
}

ModalBodyData modal_reduce(const LatticeModel& model, const Modes& modes,
                           const Vec3& P, int c_tile, double xi_default) {
  if (c_tile < 0 || c_tile >= static_cast<int>(model.tile_map.size())) {
    fail(ErrorCode::UnknownPoint, "tile " + std::to_string(c_tile + 1) +
                                      " is not part of the structure");
  }
  const int nn = static_cast<int>(model.nodes.size());
  Eigen::MatrixXd T(6 * nn, 6);
  for (int i = 0; i < nn; ++i) T.middleRows<6>(6 * i) = tau(P - model.nodes[i]);

  ModalBodyData d;
  d.name = "structure";
  d.static_model = T.transpose() * model.M * T;
  d.static_model = 0.5 * (d.static_model + d.static_model.transpose()).eval();
  d.mass = d.static_model(0, 0);
  d.inertia_P = d.static_model.bottomRightCorner<3, 3>();
  d.freqs = modes.freqs;
  d.damping = Eigen::VectorXd::Constant(modes.freqs.size(), xi_default);
  d.L_P = modes.shapes.transpose() * model.M * T;
  const int node = model.tile_map[c_tile];
  d.Phi_C = modes.shapes.middleRows(6 * node, 6);
  d.PC = model.nodes[node] - P;
  return d;
}

}  // namespace flexasm::modal
