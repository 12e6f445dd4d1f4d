#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "ndop/trajectory.hpp"

namespace ndop {

/// In-memory image of an array file: a one-line JSON header
/// {"magic":"NDOP1","dtype":"f64","shape":[...],"endianness":"LE",
///  "times":[...]?, "meta":{...}?} and a newline, followed by the values as
/// raw little-endian IEEE doubles in row-major order.
struct ArrayData {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::optional<std::vector<double>> times;  // named time axis (axis 0)
  nlohmann::json meta = nlohmann::json::object();
};

/// Throws IoError on failure, ShapeError if values do not match the shape.
void write_array(const std::filesystem::path& path, const ArrayData& data);

/// Throws IoError on a malformed header or truncated payload.
ArrayData read_array(const std::filesystem::path& path);

/// Shape [T, nx] or [T, nx, ny] (a channel axis after T when channels > 1);
/// grid extents and channel count go to meta.
ArrayData trajectory_to_array(const Trajectory& trajectory);
Trajectory array_to_trajectory(const ArrayData& data);

void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory read_trajectory(const std::filesystem::path& path);

}  // namespace ndop
