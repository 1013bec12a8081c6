#pragma once

#include <compare>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flexasm/multibody.hpp"

namespace flexasm::modal {

using multibody::Mat3;
using multibody::ModalBodyData;
using multibody::Vec3;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct LoadedBody {
  ModalBodyData data;
  std::vector<std::string> warnings;
};

/// Reads a YAML body file (see data/bodies).  Physical quantities carry a
/// unit suffix in the key name.
LoadedBody load_body_file(const std::string& path);
LoadedBody parse_body(const std::string& yaml_text,
                      const std::string& origin = "<string>");

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

bool side_adjacent(const Cell& a, const Cell& b);
bool adjacent(const Cell& a, const Cell& b);  // side or diagonal

/// Occupied cells in assembly order.  Cell (0, 0) is the first tile; the
/// clamping point P2 sits at its (-x, -y) corner.
struct TileLayout {
  std::vector<Cell> cells;

  int size() const { return static_cast<int>(cells.size()); }
  TileLayout prefix(int n) const;
  int index_of(const Cell& c) const;  // -1 when absent
};

/// Throws LayoutError for repeated cells or cells not adjacent to an earlier
/// one.
void validate(const TileLayout& layout);

/// Rows of four columns filled in the order 0, -1, 1, -2 and growing in +y.
TileLayout default_layout(int count);

/// Tile center relative to P2 in the structure frame (1 m pitch).
Vec3 tile_center(const Cell& c, double pitch = 1.0);

/// Cells touching the P2 corner.
bool clamp_adjacent(const Cell& c);

struct LatticeParams {
  double tile_mass = 6.0423;
  Mat3 tile_inertia = Vec3(0.5041, 0.5041, 1.0071).asDiagonal();
  Vec6 side_stiffness = (Vec6() << 2.1232e5, 2.1232e5, 2.1232e5, 2.1232e4, 2.1232e4, 2.1232e4).finished();
  double diagonal_factor = 0.25;
  double clamp_factor = 10.0;
  double pitch = 1.0;
};

struct LatticeModel {
  std::vector<Vec3> nodes;  // relative to P2
  Eigen::MatrixXd M;
  Eigen::MatrixXd K;
  std::vector<int> clamped_dofs;
  std::vector<int> tile_map;  // tile index -> node index
};

LatticeModel build_lattice(const TileLayout& layout, const LatticeParams& p);

struct Modes {
  Eigen::VectorXd freqs;   // rad/s, ascending
  Eigen::MatrixXd shapes;  // full dof x n_modes, zero rows at clamped dofs
};

Modes clamped_free_modes(const LatticeModel& model, int n_modes);

/// Reduces the lattice to a two-port body clamped at P with output at the
/// node of tile `c_tile`.
ModalBodyData modal_reduce(const LatticeModel& model, const Vec3& P,
                           int c_tile, int n_modes, double xi_default);

/// Same as modal_reduce reusing precomputed modes.
ModalBodyData modal_reduce(const LatticeModel& model, const Modes& modes,
                           const Vec3& P, int c_tile, double xi_default);

}  // namespace flexasm::modal
