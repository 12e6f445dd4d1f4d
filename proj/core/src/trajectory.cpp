#include "ndop/trajectory.hpp"

#include <string>

#include "ndop/error.hpp"

namespace ndop {

void Trajectory::validate() const {
  if (times.size() != states.size()) {
    throw ShapeError("trajectory: " + std::to_string(times.size()) + " times but " +
                     std::to_string(states.size()) + " states");
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!(states[i].grid() == grid)) throw ShapeError("trajectory: state grid mismatch");
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw InvalidArgument("trajectory: times must be strictly increasing");
    }
  }
}

void Trajectory::push_back(double t, Field state) {
  if (!(state.grid() == grid)) throw ShapeError("trajectory: state grid mismatch");
  if (!times.empty() && !(t > times.back())) {
    throw InvalidArgument("trajectory: times must be strictly increasing");
  }
  times.push_back(t);
  states.push_back(std::move(state));
}

Trajectory Trajectory::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw InvalidArgument("trajectory: slice out of range");
  Trajectory out;
  out.grid = grid;
  out.times.assign(times.begin() + static_cast<long>(first), times.begin() + static_cast<long>(first + count));
  out.states.assign(states.begin() + static_cast<long>(first), states.begin() + static_cast<long>(first + count));
  return out;
}

Trajectory Trajectory::subsampled(int space_stride, int time_stride) const {
  if (time_stride < 1) throw InvalidArgument("trajectory: time stride must be >= 1");
  Trajectory out;
  out.grid = grid.coarsened(space_stride);
  for (std::size_t i = 0; i < size(); i += static_cast<std::size_t>(time_stride)) {
    out.times.push_back(times[i]);
    out.states.push_back(states[i].subsampled(space_stride));
  }
  return out;
}

}  // namespace ndop
