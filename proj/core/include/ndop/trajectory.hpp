#pragma once

#include <cstddef>
#include <vector>

#include "ndop/tensor.hpp"

namespace ndop {

/// Time-stamped sequence of states on a shared grid.
struct Trajectory {
  Grid grid;
  std::vector<double> times;
  std::vector<Field> states;

  std::size_t size() const noexcept { return times.size(); }

  /// Throws ShapeError/InvalidArgument unless times are strictly increasing,
  /// states match times one to one and every state lives on `grid`.
  void validate() const;

  void push_back(double t, Field state);

  /// Snapshots [first, first + count).
  Trajectory slice(std::size_t first, std::size_t count) const;

  /// Every `space_stride`-th grid point and every `time_stride`-th snapshot.
  Trajectory subsampled(int space_stride, int time_stride) const;
};

}  // namespace ndop
