#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <yaml-cpp/yaml.h>

namespace flexasm::yaml {

YAML::Node load_file(const std::string& path);
YAML::Node load_string(const std::string& text, const std::string& origin);

/// Unknown keys raise SchemaError, or UnitError when the key is a
/// unit-suffixed allowed key with its suffix missing.
void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed,
                const std::string& ctx);

bool has(const YAML::Node& node, const char* key);
double get_double(const YAML::Node& node, const char* key, const std::string& ctx);
int get_int(const YAML::Node& node, const char* key, const std::string& ctx);
std::string get_string(const YAML::Node& node, const char* key,
                       const std::string& ctx);
std::vector<double> get_list(const YAML::Node& node, const char* key,
                             const std::string& ctx);
Eigen::Vector3d get_vec3(const YAML::Node& node, const char* key,
                         const std::string& ctx);
/// Symmetric 3x3 from upper triangle [xx, xy, xz, yy, yz, zz].
Eigen::Matrix3d get_sym3(const YAML::Node& node, const char* key,
                         const std::string& ctx);
/// Full 3x3 from nested rows.
Eigen::Matrix3d get_mat3(const YAML::Node& node, const char* key,
                         const std::string& ctx);
/// Rectangular matrix from nested rows; an empty list gives 0 x cols.
Eigen::MatrixXd get_matrix(const YAML::Node& node, const char* key,
                           const std::string& ctx, int cols = -1);

}  // namespace flexasm::yaml
