#include "flexasm/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <numbers>

#include "flexasm/error.hpp"
#include "yaml_util.hpp"

namespace flexasm::scenario {

using linss::Block;
using linss::ChannelRef;
using linss::ExternalInput;
using linss::ExternalOutput;
using linss::StateSpace;
using linss::Wire;
using multibody::Dcm;
using multibody::apply_frame;
using multibody::rigid_mass_matrix;
using multibody::rotate_mass;
using multibody::transport_mass;

namespace {

ModalBodyData table1_solar_array() {
  ModalBodyData d;
  d.name = "solar_array";
  d.mass = 88.93;
  Mat3 J;
  J << 33.0918, 0, 0, 0, 7.3819, -0.0002, 0, -0.0002, 40.4578;
  d.static_model = rigid_mass_matrix(d.mass, J, Vec3(0, 1.0934, 0.0014));
  d.inertia_P = d.static_model.bottomRightCorner<3, 3>();
  d.freqs = Eigen::Vector2d(1.2850, 6.5896) * 2.0 * std::numbers::pi;
  d.damping = Eigen::Vector2d(0.01, 0.01);
  d.L_P.resize(2, 6);
  d.L_P << -0.0007, -0.0078, 7.8872, 11.7690, 0.0005, 0.0010,
           -7.9401, 0, 0.0007, -0.0008, 0.1089, 12.1014;
  d.Phi_C = Eigen::MatrixXd::Zero(6, 2);
  return d;
}

std::string dirname_of(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  return parent.empty() ? "." : parent.string();
}

std::string resolve(const std::string& base_dir, const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() ? file : (std::filesystem::path(base_dir) / p).string();
}

Mat3 parse_dcm(const YAML::Node& node, const char* key, const std::string& ctx) {
  if (node[key].IsScalar() && node[key].as<std::string>() == "identity") {
    return Mat3::Identity();
  }
  const Mat3 R = yaml::get_mat3(node, key, ctx);
  try {
    return Dcm(R).matrix();
  } catch (const Error&) {
    // Tabulated DCMs carry 3-4 significant digits; re-orthonormalize.
    Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3 Q = svd.matrixU() * svd.matrixV().transpose();
    if ((Q - R).cwiseAbs().maxCoeff() > 1e-3 || Q.determinant() < 0) {
      fail(ErrorCode::SchemaError, ctx + "." + key + " is not a rotation matrix");
    }
    return Q;
  }
}

RigidBodyData parse_rigid(const YAML::Node& node, const std::string& ctx,
                          const std::string& name) {
  yaml::check_keys(node, {"mass_kg", "inertia_kgm2", "ports_m"}, ctx);
  RigidBodyData b;
  b.name = name;
  b.mass = yaml::get_double(node, "mass_kg", ctx);
  b.inertia_G = yaml::get_sym3(node, "inertia_kgm2", ctx);
  if (yaml::has(node, "ports_m")) {
    const auto ports = node["ports_m"];
    if (!ports.IsMap()) fail(ErrorCode::SchemaError, ctx + ".ports_m must be a mapping");
    for (const auto& kv : ports) {
      const auto pname = kv.first.as<std::string>();
      b.ports.push_back({pname, yaml::get_vec3(ports, pname.c_str(), ctx + ".ports_m")});
    }
  }
  return b;
}

void parse_robot(const YAML::Node& node, const std::string& ctx,
                 robot::RobotGeometry& r) {
  yaml::check_keys(node, {"arm", "hub"}, ctx);
  if (yaml::has(node, "arm")) {
    const auto a = node["arm"];
    const std::string c = ctx + ".arm";
    yaml::check_keys(a, {"offsets_m", "axes", "link_mass_kg", "link_com_m",
                         "link_inertia_kgm2"}, c);
    auto& g = r.arm;
    if (yaml::has(a, "offsets_m")) {
      const auto M = yaml::get_matrix(a, "offsets_m", c, 3);
      if (M.rows() != 6) fail(ErrorCode::SchemaError, c + ".offsets_m needs 6 rows");
      for (int i = 0; i < 6; ++i) g.offsets[i] = M.row(i).transpose();
    }
    if (yaml::has(a, "axes")) {
      const auto M = yaml::get_matrix(a, "axes", c, 3);
      if (M.rows() != 5) fail(ErrorCode::SchemaError, c + ".axes needs 5 rows");
      for (int i = 0; i < 5; ++i) g.axes[i] = M.row(i).transpose().normalized();
    }
    if (yaml::has(a, "link_mass_kg")) {
      const auto m = yaml::get_list(a, "link_mass_kg", c);
      if (m.size() != 6) fail(ErrorCode::SchemaError, c + ".link_mass_kg needs 6 entries");
      for (int i = 0; i < 6; ++i) g.links[i].mass = m[i];
    }
    if (yaml::has(a, "link_com_m")) {
      const auto M = yaml::get_matrix(a, "link_com_m", c, 3);
      if (M.rows() != 6) fail(ErrorCode::SchemaError, c + ".link_com_m needs 6 rows");
      for (int i = 0; i < 6; ++i) {
        const Vec3 com = M.row(i).transpose();
        g.links[i].ports = {{"J_base", -com}, {"J_tip", g.offsets[i] - com}};
      }
    } else {
      for (int i = 0; i < 6; ++i) {
        const Vec3 com = -g.links[i].port("J_base");
        g.links[i].ports = {{"J_base", -com}, {"J_tip", g.offsets[i] - com}};
      }
    }
    if (yaml::has(a, "link_inertia_kgm2")) {
      const auto M = yaml::get_matrix(a, "link_inertia_kgm2", c, 6);
      if (M.rows() != 6) fail(ErrorCode::SchemaError, c + ".link_inertia_kgm2 needs 6 rows");
      for (int i = 0; i < 6; ++i) {
        Mat3 J;
        J << M(i, 0), M(i, 1), M(i, 2), M(i, 1), M(i, 3), M(i, 4), M(i, 2), M(i, 4), M(i, 5);
        g.links[i].inertia_G = J;
      }
    }
    robot::validate(g);
  }
  if (yaml::has(node, "hub")) {
    const auto h = node["hub"];
    const std::string c = ctx + ".hub";
    yaml::check_keys(h, {"mass_kg", "inertia_kgm2", "ports_m", "arm_dcms"}, c);
    if (yaml::has(h, "mass_kg")) r.hub.mass = yaml::get_double(h, "mass_kg", c);
    if (yaml::has(h, "inertia_kgm2")) r.hub.inertia_G = yaml::get_sym3(h, "inertia_kgm2", c);
    if (yaml::has(h, "ports_m")) {
      for (int k = 1; k <= 3; ++k) {
        const std::string pn = "J6_" + std::to_string(k);
        r.hub.ports[k - 1] = {pn, yaml::get_vec3(h["ports_m"], pn.c_str(), c + ".ports_m")};
      }
    }
    if (yaml::has(h, "arm_dcms")) {
      const auto list = h["arm_dcms"];
      if (!list.IsSequence() || list.size() != 3) {
        fail(ErrorCode::SchemaError, c + ".arm_dcms needs 3 matrices");
      }
      for (int k = 0; k < 3; ++k) {
        YAML::Node wrap;
        wrap["m"] = list[k];
        r.hub_to_l5[k] = parse_dcm(wrap, "m", c + ".arm_dcms");
      }
    }
  }
}

}  // namespace

ScenarioConfig ScenarioConfig::defaults(int tiles_total) {
  ScenarioConfig c;
  c.tiles_total = tiles_total;
  c.hub.name = "hub";
  c.hub.mass = 166.0;
  c.hub.inertia_G << 21.6256, 3.84, 0, 3.84, 15.6256, 0, 0, 0, 30.6738;
  c.hub.ports = {{"P1", Vec3(0, -0.5, 0)},
                 {"P2", Vec3(-0.5, 0.5, 0.7125)},
                 {"P3", Vec3(0.5, 0, 0.7125)}};
  c.solar_array = table1_solar_array();
  c.array_dcm = Vec3(-1, -1, 1).asDiagonal();
  c.tile.name = "tile";
  c.tile.mass = 6.0423;
  c.tile.inertia_G = Vec3(0.5041, 0.5041, 1.0071).asDiagonal();
  c.layout = modal::default_layout(tiles_total);
  return c;
}

ScenarioConfig parse_scenario(const std::string& yaml_text,
                              const std::string& base_dir) {
  const std::string ctx = "scenario";
  const YAML::Node root = yaml::load_string(yaml_text, ctx);
  yaml::check_keys(root,
                   {"name", "description", "tiles_total", "grid_points", "hub",
                    "solar_array", "tile", "stack", "structure", "robot",
                    "controller", "pathopt"},
                   ctx);
  const int N = yaml::get_int(root, "tiles_total", ctx);
  if (N < 1) fail(ErrorCode::SchemaError, "tiles_total must be >= 1");
  ScenarioConfig c = ScenarioConfig::defaults(N);
  if (yaml::has(root, "name")) c.name = yaml::get_string(root, "name", ctx);
  if (yaml::has(root, "grid_points")) c.grid_points = yaml::get_int(root, "grid_points", ctx);

  if (yaml::has(root, "hub")) {
    c.hub = parse_rigid(root["hub"], ctx + ".hub", "hub");
    for (const char* p : {"P1", "P2", "P3"}) c.hub.port(p);
  }

  if (yaml::has(root, "solar_array")) {
    const auto a = root["solar_array"];
    const std::string ac = ctx + ".solar_array";
    yaml::check_keys(a, {"body_file", "dcm", "uncertain_mode", "uncertainty_r"}, ac);
    if (yaml::has(a, "body_file")) {
      auto loaded = modal::load_body_file(
          resolve(base_dir, yaml::get_string(a, "body_file", ac)));
      c.solar_array = loaded.data;
      for (auto& w : loaded.warnings) c.warnings.push_back(w);
    }
    if (yaml::has(a, "dcm")) c.array_dcm = parse_dcm(a, "dcm", ac);
    if (yaml::has(a, "uncertain_mode")) {
      c.uncertain_mode = yaml::get_int(a, "uncertain_mode", ac) - 1;
    }
    if (yaml::has(a, "uncertainty_r")) {
      c.uncertainty_r = yaml::get_double(a, "uncertainty_r", ac);
    }
  }

  if (yaml::has(root, "tile")) c.tile = parse_rigid(root["tile"], ctx + ".tile", "tile");

  if (yaml::has(root, "stack")) {
    const auto s = root["stack"];
    const std::string sc = ctx + ".stack";
    yaml::check_keys(s, {"offset_m", "dcm"}, sc);
    if (yaml::has(s, "offset_m")) c.stack_offset = yaml::get_vec3(s, "offset_m", sc);
    if (yaml::has(s, "dcm")) c.stack_dcm = parse_dcm(s, "dcm", sc);
  }

  if (yaml::has(root, "structure")) {
    const auto s = root["structure"];
    const std::string sc = ctx + ".structure";
    yaml::check_keys(s, {"layout", "modes", "damping", "stiffness", "pitch_m",
                         "lattice", "files"}, sc);
    if (yaml::has(s, "layout")) {
      const auto l = s["layout"];
      if (l.IsScalar() && l.as<std::string>() == "default") {
        c.layout = modal::default_layout(N);
      } else {
        const auto M = yaml::get_matrix(s, "layout", sc, 2);
        c.layout.cells.clear();
        for (int i = 0; i < M.rows(); ++i) {
          c.layout.cells.push_back({static_cast<int>(M(i, 0)), static_cast<int>(M(i, 1))});
        }
      }
    }
    if (yaml::has(s, "modes")) c.structure_modes = yaml::get_int(s, "modes", sc);
    if (yaml::has(s, "damping")) c.structure_damping = yaml::get_double(s, "damping", sc);
    if (yaml::has(s, "pitch_m")) c.lattice.pitch = yaml::get_double(s, "pitch_m", sc);
    if (yaml::has(s, "lattice")) c.use_lattice = s["lattice"].as<bool>();
    if (yaml::has(s, "stiffness")) {
      const auto k = s["stiffness"];
      const std::string kc = sc + ".stiffness";
      yaml::check_keys(k, {"translational_n_m", "rotational_nm_rad",
                           "diagonal_factor", "clamp_factor"}, kc);
      if (yaml::has(k, "translational_n_m")) {
        c.lattice.side_stiffness.head<3>() = yaml::get_vec3(k, "translational_n_m", kc);
      }
      if (yaml::has(k, "rotational_nm_rad")) {
        c.lattice.side_stiffness.tail<3>() = yaml::get_vec3(k, "rotational_nm_rad", kc);
      }
      if (yaml::has(k, "diagonal_factor")) {
        c.lattice.diagonal_factor = yaml::get_double(k, "diagonal_factor", kc);
      }
      if (yaml::has(k, "clamp_factor")) {
        c.lattice.clamp_factor = yaml::get_double(k, "clamp_factor", kc);
      }
    }
    if (yaml::has(s, "files")) {
      for (const auto& f : s["files"]) {
        const std::string fc = sc + ".files";
        yaml::check_keys(f, {"n", "j", "body_file"}, fc);
        StructureFile sf;
        sf.n = yaml::get_int(f, "n", fc);
        sf.j = yaml::get_int(f, "j", fc);
        auto loaded = modal::load_body_file(
            resolve(base_dir, yaml::get_string(f, "body_file", fc)));
        sf.data = loaded.data;
        for (auto& w : loaded.warnings) c.warnings.push_back(w);
        c.structure_files.push_back(std::move(sf));
      }
    }
  }
  c.lattice.tile_mass = c.tile.mass;
  c.lattice.tile_inertia = c.tile.inertia_G;

  if (yaml::has(root, "robot")) parse_robot(root["robot"], ctx + ".robot", c.robot);

  if (yaml::has(root, "controller")) {
    const auto k = root["controller"];
    const std::string kc = ctx + ".controller";
    yaml::check_keys(k, {"damping", "freq_hz"}, kc);
    if (yaml::has(k, "damping")) c.controller_damping = yaml::get_double(k, "damping", kc);
    if (yaml::has(k, "freq_hz")) c.controller_freq_hz = yaml::get_double(k, "freq_hz", kc);
  }
  if (yaml::has(root, "pathopt")) {
    const auto p = root["pathopt"];
    yaml::check_keys(p, {"stack_reach_m"}, ctx + ".pathopt");
    if (yaml::has(p, "stack_reach_m")) {
      c.stack_reach = yaml::get_double(p, "stack_reach_m", ctx + ".pathopt");
    }
  }
  for (auto& w : validate(c)) c.warnings.push_back(w);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open scenario '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), dirname_of(path));
}

std::vector<std::string> validate(const ScenarioConfig& cfg) {
  if (cfg.tiles_total < 1) fail(ErrorCode::SchemaError, "tiles_total must be >= 1");
  if (cfg.grid_points < 2) fail(ErrorCode::SchemaError, "grid_points must be >= 2");
  multibody::validate(cfg.hub);
  for (const char* p : {"P1", "P2", "P3"}) cfg.hub.port(p);
  multibody::validate(cfg.tile);
  auto warnings = multibody::validate(cfg.solar_array);
  if (cfg.uncertain_mode < 0 || cfg.uncertain_mode >= cfg.solar_array.num_modes()) {
    fail(ErrorCode::InvalidMode, "uncertain mode outside the solar array mode set");
  }
  if (!(cfg.uncertainty_r > 0.0 && cfg.uncertainty_r < 1.0)) {
    fail(ErrorCode::SchemaError, "uncertainty_r must lie in (0, 1)");
  }
  if (cfg.layout.size() < cfg.tiles_total) {
    fail(ErrorCode::LayoutError, "layout lists fewer cells than tiles_total");
  }
  modal::validate(cfg.layout);
  if (cfg.use_lattice) modal::build_lattice(cfg.layout.prefix(cfg.tiles_total), cfg.lattice);
  if (!(cfg.structure_damping > 0.0 && cfg.structure_damping < 1.0)) {
    fail(ErrorCode::SchemaError, "structure damping must lie in (0, 1)");
  }
  if (cfg.structure_modes < 0) fail(ErrorCode::SchemaError, "structure modes must be >= 0");
  robot::validate(cfg.robot.arm);
  multibody::validate(cfg.robot.hub);
  if (!(cfg.controller_freq_hz >= 0.0) || !(cfg.controller_damping > 0.0)) {
    fail(ErrorCode::SchemaError, "controller needs freq_hz >= 0 and damping > 0");
  }
  for (const auto& f : cfg.structure_files) {
    if (f.n < 1 || f.n > cfg.tiles_total || f.j < 1 || f.j > f.n) {
      fail(ErrorCode::SchemaError, "structure file entry has invalid (n, j)");
    }
  }
  return warnings;
}

void check_state(const ScenarioConfig& cfg, const AssemblyState& s) {
  if (s.n < 1 || s.n > cfg.tiles_total || s.j < 1 || s.j > s.n ||
      (s.arm != 1 && s.arm != 2) || (s.delta != 0 && s.delta != 1)) {
    fail(ErrorCode::StateInvalid,
         "state (n=" + std::to_string(s.n) + ", j=" + std::to_string(s.j) +
             ", arm=" + std::to_string(s.arm) + ", delta=" + std::to_string(s.delta) + ")");
  }
  if (cfg.tiles_total - s.n - s.delta < 0) {
    fail(ErrorCode::NegativeCount, "no tile left to carry");
  }
}

RigidBodyData stack_properties(int N, int n, int delta, const RigidBodyData& tile) {
  const int count = N - n - delta;
  if (count < 0) {
    fail(ErrorCode::NegativeCount, "stack count N - n - delta = " + std::to_string(count));
  }
  RigidBodyData s = tile;
  s.name = "stack";
  s.mass = tile.mass * count;
  s.inertia_G = tile.inertia_G * count;
  return s;
}

Vec3 tile_position(const ScenarioConfig& cfg, int tile) {
  if (tile < 1 || tile > cfg.layout.size()) {
    fail(ErrorCode::UnknownPoint, "tile " + std::to_string(tile) + " not in layout");
  }
  return cfg.hub.port("P2") + modal::tile_center(cfg.layout.cells[tile - 1], cfg.lattice.pitch);
}

Vec3 stack_position(const ScenarioConfig& cfg) {
  return cfg.hub.port("P3") + cfg.stack_dcm * cfg.stack_offset;
}

Scenario::Scenario(ScenarioConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

ModalBodyData Scenario::structure(int n, int j) const {
  for (const auto& f : cfg_.structure_files) {
    if (f.n == n && f.j == j) return f.data;
  }
  if (!cfg_.use_lattice) {
    fail(ErrorCode::MissingStructureData,
         "no structure data for n=" + std::to_string(n) + ", j=" + std::to_string(j));
  }
  std::shared_ptr<const std::pair<modal::LatticeModel, modal::Modes>> lat;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = lattices_.find(n);
    if (it == lattices_.end()) {
      auto model = modal::build_lattice(cfg_.layout.prefix(n), cfg_.lattice);
      const int nm = std::min(cfg_.structure_modes, static_cast<int>(model.M.rows()));
      auto modes = modal::clamped_free_modes(model, nm);
      it = lattices_.emplace(n, std::make_shared<const std::pair<modal::LatticeModel, modal::Modes>>(
                                    std::move(model), std::move(modes))).first;
    }
    lat = it->second;
  }
  auto d = modal::modal_reduce(lat->first, lat->second, Vec3::Zero(), j - 1,
                               cfg_.structure_damping);
  d.name = "F" + std::to_string(n);
  return d;
}

robot::RobotFrames Scenario::frames(const AssemblyState& s,
                                    const RobotConfiguration& rc) const {
  robot::Pose base;
  base.p = tile_position(cfg_, s.j);
  base.R = rc.grip_base;
  return robot::robot_frames(cfg_.robot, s.arm - 1, base, rc.q);
}

namespace {

RigidBodyData rotated_body(const RigidBodyData& b, const Mat3& R) {
  RigidBodyData out = b;
  out.inertia_G = R * b.inertia_G * R.transpose();
  for (auto& [name, v] : out.ports) v = R * v;
  return out;
}

}  // namespace

StateSpace Scenario::build_open_loop(const AssemblyState& s,
                                     const RobotConfiguration& rc) const {
  check_state(cfg_, s);
  for (const auto& q : rc.q) robot::check_joints(q);
  const auto fr = frames(s, rc);
  const int g = s.arm - 1;

  std::vector<Block> blocks;
  std::vector<Wire> wires;

  blocks.push_back({"hub", multibody::rigid_nport(cfg_.hub, {"P1", "P2", "P3"})});

  {
    const Dcm R(cfg_.array_dcm);
    StateSpace a = multibody::mode_freq_lfr(cfg_.solar_array, cfg_.uncertain_mode,
                                            cfg_.uncertainty_r);
    for (const char* ch : {"acc_P", "W_P", "acc_C", "W_C"}) a = apply_frame(a, ch, R);
    blocks.push_back({"array", std::move(a)});
    wires.push_back({{"hub", "acc_P1"}, {"array", "acc_P"}});
    wires.push_back({{"array", "W_P"}, {"hub", "W_P1"}});
  }

  const auto stack = stack_properties(cfg_.tiles_total, s.n, s.delta, cfg_.tile);
  if (stack.mass > 0.0) {
    RigidBodyData sb = rotated_body(stack, cfg_.stack_dcm);
    sb.ports = {{"P3", cfg_.hub.port("P3") - stack_position(cfg_)}};
    blocks.push_back({"stack", multibody::rigid_nport_inverted(sb, "P3", {})});
    wires.push_back({{"hub", "acc_P3"}, {"stack", "acc_P3"}});
    wires.push_back({{"stack", "W_P3"}, {"hub", "W_P3"}});
  }

  blocks.push_back({"struct", multibody::titop_two_port(structure(s.n, s.j))});
  wires.push_back({{"hub", "acc_P2"}, {"struct", "acc_P"}});
  wires.push_back({{"struct", "W_P"}, {"hub", "W_P2"}});

  auto arm_block = [&](int k, bool inverted) {
    StateSpace z = robot::arm_two_port(cfg_.robot.arm, rc.q[k], inverted);
    const Dcm R0(fr.links[k][0].R);
    const Mat3 R5m = fr.links[k][5].R;
    const Dcm R5(R5m);
    z = apply_frame(apply_frame(z, "acc_J0", R0), "W_J0", R0);
    z = apply_frame(apply_frame(z, "acc_J6", R5), "W_J6", R5);
    return z;
  };
  const std::string gname = "arm" + std::to_string(g + 1);
  blocks.push_back({gname, arm_block(g, false)});
  wires.push_back({{"struct", "acc_C"}, {gname, "acc_J0"}});
  wires.push_back({{gname, "W_J0"}, {"struct", "W_C"}});

  RigidBodyData hub_c = rotated_body(cfg_.robot.hub, fr.hub.R);
  std::vector<std::string> others;
  for (int k = 0; k < 3; ++k) {
    if (k != g) others.push_back("J6_" + std::to_string(k + 1));
  }
  const std::string gport = "J6_" + std::to_string(g + 1);
  blocks.push_back({"rhub", multibody::rigid_nport_inverted(hub_c, gport, others)});
  wires.push_back({{gname, "acc_J6"}, {"rhub", "acc_" + gport}});
  wires.push_back({{"rhub", "W_" + gport}, {gname, "W_J6"}});

  for (int k = 0; k < 3; ++k) {
    if (k == g) continue;
    const std::string name = "arm" + std::to_string(k + 1);
    const std::string port = "J6_" + std::to_string(k + 1);
    blocks.push_back({name, arm_block(k, true)});
    wires.push_back({{"rhub", "acc_" + port}, {name, "acc_J6"}});
    wires.push_back({{name, "W_J6"}, {"rhub", "W_" + port}, -1.0});
  }

  if (s.delta == 1) {
    RigidBodyData t = rotated_body(cfg_.tile, fr.links[2][0].R);
    t.ports = {{"J0", Vec3::Zero()}};
    blocks.push_back({"tile", multibody::rigid_nport_inverted(t, "J0", {})});
    wires.push_back({{"arm3", "acc_J0"}, {"tile", "acc_J0"}});
    wires.push_back({{"tile", "W_J0"}, {"arm3", "W_J0"}, -1.0});
  }

  const std::vector<ExternalInput> ins{
      {{"T_G", 3}, {ChannelRef{"hub", "W_G", 3, 3}}},
      {{"W_ext", 6}, {ChannelRef{"struct", "W_C"}}},
      {{"w_omega", 2}, {ChannelRef{"array", "w_omega"}}}};
  const std::vector<ExternalOutput> outs{
      {{"omega_dot", 3}, ChannelRef{"hub", "acc_G", 3, 3}},
      {{"acc_G", 6}, ChannelRef{"hub", "acc_G"}},
      {{"z_omega", 2}, ChannelRef{"array", "z_omega"}}};
  return linss::interconnect(blocks, wires, ins, outs);
}

Mat6 Scenario::mass_matrix(const AssemblyState& s, const RobotConfiguration& rc) const {
  check_state(cfg_, s);
  const auto fr = frames(s, rc);
  // Each term: body mass matrix at its own reference point, rotated into the
  // hub frame and moved to G.
  auto at_G = [](const Mat6& D_ref, const Mat3& R, const Vec3& ref_position) {
    return transport_mass(rotate_mass(D_ref, R), -ref_position);
  };
  Mat6 M = cfg_.hub.mass_matrix_G();
  M += at_G(cfg_.solar_array.static_model, cfg_.array_dcm, cfg_.hub.port("P1"));
  const auto stack = stack_properties(cfg_.tiles_total, s.n, s.delta, cfg_.tile);
  M += at_G(stack.mass_matrix_G(), cfg_.stack_dcm, stack_position(cfg_));

  bool from_file = false;
  for (const auto& f : cfg_.structure_files) {
    if (f.n == s.n && f.j == s.j) {
      M += at_G(f.data.static_model, Mat3::Identity(), cfg_.hub.port("P2"));
      from_file = true;
      break;
    }
  }
  if (!from_file) {
    if (!cfg_.use_lattice) fail(ErrorCode::MissingStructureData, "no structure data");
    for (int t = 1; t <= s.n; ++t) {
      M += at_G(cfg_.tile.mass_matrix_G(), Mat3::Identity(), tile_position(cfg_, t));
    }
  }

  const auto& arm = cfg_.robot.arm;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 6; ++i) {
      const auto& link = arm.links[i];
      const auto& f = fr.links[k][i];
      const Vec3 com = f.p - f.R * link.port("J_base");
      Mat6 D = Mat6::Zero();
      D.topLeftCorner<3, 3>() = link.mass * Mat3::Identity();
      D.bottomRightCorner<3, 3>() = link.inertia_G;
      M += at_G(D, f.R, com);
    }
  }
  M += at_G(cfg_.robot.hub.mass_matrix_G(), fr.hub.R, fr.hub.p);
  if (s.delta == 1) M += at_G(cfg_.tile.mass_matrix_G(), fr.links[2][0].R, fr.j0[2]);
  return 0.5 * (M + M.transpose());
}

Mat3 Scenario::total_inertia(const AssemblyState& s, const RobotConfiguration& rc) const {
  return mass_matrix(s, rc).bottomRightCorner<3, 3>();
}

Mat3 Scenario::centroidal_inertia(const AssemblyState& s,
                                  const RobotConfiguration& rc) const {
  const Mat6 M = mass_matrix(s, rc);
  return M.bottomRightCorner<3, 3>() -
         M.bottomLeftCorner<3, 3>() * M.topLeftCorner<3, 3>().inverse() *
             M.topRightCorner<3, 3>();
}

const Eigen::MatrixXd& Scenario::controller() const {
  std::lock_guard<std::mutex> lock(mu_);
  if (!gains_) {
    double best = -1.0;
    Mat3 J_best = Mat3::Identity();
    for (const auto& v : enumerate_model_family(cfg_.tiles_total)) {
      if (!v.realizable) continue;
      const Mat3 J = total_inertia(v.state, RobotConfiguration{});
      const double lam = Eigen::SelfAdjointEigenSolver<Mat3>(J).eigenvalues().maxCoeff();
      if (lam > best) {
        best = lam;
        J_best = J;
        sizing_ = v.state;
      }
    }
    gains_ = attitude_gains(J_best, cfg_.controller_damping, cfg_.controller_freq_hz);
  }
  return *gains_;
}

AssemblyState Scenario::sizing_state() const {
  controller();
  std::lock_guard<std::mutex> lock(mu_);
  return sizing_;
}

StateSpace Scenario::closed_loop(const AssemblyState& s,
                                 const RobotConfiguration& rc) const {
  return close_loop(build_open_loop(s, rc), controller());
}

Eigen::MatrixXd attitude_gains(const Mat3& J, double xi, double freq_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz;
  Eigen::MatrixXd K(3, 6);
  K.leftCols(3) = -w * w * J;
  K.rightCols(3) = -2.0 * xi * w * J;
  return K;
}

StateSpace close_loop(const StateSpace& plant, const Eigen::MatrixXd& K) {
  if (K.rows() != 3 || K.cols() != 6) {
    fail(ErrorCode::WidthMismatch, "attitude gain must be 3 x 6");
  }
  const Eigen::MatrixXd I3 = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd Z3 = Eigen::MatrixXd::Zero(3, 3);
  const StateSpace integrator(Z3, I3, I3, Z3, {{"in", 3}}, {{"out", 3}});
  Eigen::MatrixXd sum(3, 6);
  sum << I3, I3;
  const std::vector<Block> blocks{
      {"plant", plant},
      {"int_w", integrator},
      {"int_th", integrator},
      {"K", StateSpace::gain(K, {{"theta", 3}, {"omega", 3}}, {{"u", 3}})},
      {"sum", StateSpace::gain(sum, {{"d", 3}, {"u", 3}}, {{"e", 3}})}};
  const std::vector<Wire> wires{
      {{"plant", "omega_dot"}, {"int_w", "in"}},
      {{"int_w", "out"}, {"int_th", "in"}},
      {{"int_th", "out"}, {"K", "theta"}},
      {{"int_w", "out"}, {"K", "omega"}},
      {{"K", "u"}, {"sum", "u"}},
      {{"sum", "e"}, {"plant", "T_G"}}};
  std::vector<ExternalInput> ins{{{"d_t", 3}, {{"sum", "d"}}}};
  for (const auto& c : plant.inputs()) {
    if (c.name != "T_G") ins.push_back({c, {{"plant", c.name}}});
  }
  std::vector<ExternalOutput> outs{{{"omega_dot", 3}, {"plant", "omega_dot"}},
                                   {{"theta", 3}, {"int_th", "out"}},
                                   {{"omega", 3}, {"int_w", "out"}},
                                   {{"e_t", 3}, {"sum", "e"}}};
  for (const auto& c : plant.outputs()) {
    if (c.name != "omega_dot") outs.push_back({c, {"plant", c.name}});
  }
  return linss::interconnect(blocks, wires, ins, outs);
}

std::vector<ModelVariant> enumerate_model_family(int N) {
  if (N < 1) fail(ErrorCode::InvalidArgument, "N must be >= 1");
  std::vector<ModelVariant> out;
  for (int n = 1; n <= N; ++n) {
    for (int j = 1; j <= n; ++j) {
      for (int arm = 1; arm <= 2; ++arm) {
        for (int delta = 0; delta <= 1; ++delta) {
          out.push_back({{n, j, arm, delta}, N - n - delta >= 0});
        }
      }
    }
  }
  return out;
}

}  // namespace flexasm::scenario
