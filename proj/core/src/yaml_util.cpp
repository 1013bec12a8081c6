#include "yaml_util.hpp"

#include <set>

#include "flexasm/error.hpp"

namespace flexasm::yaml {

namespace {

[[noreturn]] void schema(const std::string& ctx, const std::string& what) {
  fail(ErrorCode::SchemaError, ctx + ": " + what);
}

YAML::Node required(const YAML::Node& node, const char* key,
                    const std::string& ctx) {
  if (!node.IsMap() || !node[key]) schema(ctx, std::string("missing key '") + key + "'");
  return node[key];
}

double as_double(const YAML::Node& n, const std::string& ctx) {
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    schema(ctx, "expected a number");
  }
}

}  // namespace

YAML::Node load_file(const std::string& path) {
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    fail(ErrorCode::ParseError, "cannot open '" + path + "'");
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::ParseError, path + ": " + e.what());
  }
}

YAML::Node load_string(const std::string& text, const std::string& origin) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::ParseError, origin + ": " + e.what());
  }
}

void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
  if (!node.IsMap()) schema(ctx, "expected a mapping");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (ok.count(key)) continue;
    for (const auto& a : ok) {
      if (a.rfind(key + "_", 0) == 0) {
        fail(ErrorCode::UnitError,
             ctx + ": key '" + key + "' needs a unit suffix (expected '" + a + "')");
      }
    }
    for (const char* unit : {"_kg", "_g", "_m", "_mm", "_cm", "_hz", "_rad_s", "_kgm2", "_gcm2",
                             "_nm_rad", "_n_m", "_deg", "_rad", "_s"}) {
      const std::string u = unit;
      if (key.size() <= u.size() || key.compare(key.size() - u.size(), u.size(), u) != 0) continue;
      const std::string stem = key.substr(0, key.size() - u.size() + 1);
      for (const auto& a : ok) {
        if (a.rfind(stem, 0) == 0) {
          fail(ErrorCode::UnitError,
               ctx + ": key '" + key + "' has the wrong unit (expected '" + a + "')");
        }
      }
    }
    schema(ctx, "unknown key '" + key + "'");
  }
}

bool has(const YAML::Node& node, const char* key) {
  return node.IsMap() && node[key];
}

double get_double(const YAML::Node& node, const char* key, const std::string& ctx) {
  return as_double(required(node, key, ctx), ctx + "." + key);
}

int get_int(const YAML::Node& node, const char* key, const std::string& ctx) {
  const auto n = required(node, key, ctx);
  try {
    return n.as<int>();
  } catch (const YAML::Exception&) {
    schema(ctx + "." + key, "expected an integer");
  }
}

std::string get_string(const YAML::Node& node, const char* key,
                       const std::string& ctx) {
  const auto n = required(node, key, ctx);
  if (!n.IsScalar()) schema(ctx + "." + key, "expected a string");
  return n.as<std::string>();
}

std::vector<double> get_list(const YAML::Node& node, const char* key,
                             const std::string& ctx) {
  const auto n = required(node, key, ctx);
  const std::string c = ctx + "." + key;
  if (!n.IsSequence()) schema(c, "expected a list");
  std::vector<double> out;
  for (const auto& v : n) out.push_back(as_double(v, c));
  return out;
}

Eigen::Vector3d get_vec3(const YAML::Node& node, const char* key,
                         const std::string& ctx) {
  const auto v = get_list(node, key, ctx);
  if (v.size() != 3) schema(ctx + "." + key, "expected 3 components");
  return {v[0], v[1], v[2]};
}

Eigen::Matrix3d get_sym3(const YAML::Node& node, const char* key,
                         const std::string& ctx) {
  const auto v = get_list(node, key, ctx);
  if (v.size() != 6) schema(ctx + "." + key, "expected upper triangle [xx, xy, xz, yy, yz, zz]");
  Eigen::Matrix3d J;
  J << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
  return J;
}

Eigen::Matrix3d get_mat3(const YAML::Node& node, const char* key,
                         const std::string& ctx) {
  const Eigen::MatrixXd M = get_matrix(node, key, ctx, 3);
  if (M.rows() != 3) schema(ctx + "." + key, "expected 3 rows");
  return M;
}

Eigen::MatrixXd get_matrix(const YAML::Node& node, const char* key,
                           const std::string& ctx, int cols) {
  const auto n = required(node, key, ctx);
  const std::string c = ctx + "." + key;
  if (!n.IsSequence()) schema(c, "expected a list of rows");
  const int rows = static_cast<int>(n.size());
  if (rows == 0) return Eigen::MatrixXd(0, std::max(cols, 0));
  int width = -1;
  Eigen::MatrixXd M;
  for (int i = 0; i < rows; ++i) {
    const auto& row = n[i];
    if (!row.IsSequence()) schema(c, "expected a list of rows");
    if (width < 0) {
      width = static_cast<int>(row.size());
      if (cols >= 0 && width != cols) {
        schema(c, "expected " + std::to_string(cols) + " columns");
      }
      M.resize(rows, width);
    }
    if (static_cast<int>(row.size()) != width) schema(c, "ragged rows");
    for (int j = 0; j < width; ++j) M(i, j) = as_double(row[j], c);
  }
  return M;
}

}  // namespace flexasm::yaml
