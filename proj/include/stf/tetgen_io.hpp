#pragma once

#include <string>
#include <vector>

#include "stf/types.hpp"

namespace stf {

/// TetGen ASCII mesh files. Writers emit 0-based indices; readers accept
/// 0- or 1-based files, autodetected from the first index column.
void write_node(const std::string& path, std::span<const Vec3> positions);
void write_ele(const std::string& path, std::span<const Tet> tets);
std::vector<Vec3> read_node(const std::string& path);
std::vector<Tet> read_ele(const std::string& path);

}  // namespace stf
