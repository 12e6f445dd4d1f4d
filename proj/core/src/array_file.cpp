#include "ndop/array_file.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>

#include "ndop/error.hpp"

namespace ndop {

namespace {

constexpr const char* kMagic = "NDOP1";

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace

void write_array(const std::filesystem::path& path, const ArrayData& data) {
  const std::size_t count = element_count(data.shape);
  if (count != data.values.size()) {
    throw ShapeError("write_array: shape holds " + std::to_string(count) + " values, got " +
                     std::to_string(data.values.size()));
  }
  if (data.times && (data.shape.empty() || data.times->size() != data.shape.front())) {
    throw ShapeError("write_array: time axis length must equal shape[0]");
  }
  nlohmann::json header = {{"magic", kMagic}, {"dtype", "f64"}, {"shape", data.shape}, {"endianness", "LE"}};
  if (data.times) header["times"] = *data.times;
  if (!data.meta.empty()) header["meta"] = data.meta;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  // dump() escapes control characters, so the header stays on one line.
  out << header.dump() << '\n';
  std::vector<std::uint64_t> raw(count);
  for (std::size_t i = 0; i < count; ++i) raw[i] = to_little_endian(std::bit_cast<std::uint64_t>(data.values[i]));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(count * 8));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

ArrayData read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path.string() + "': missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "': malformed header: " + e.what());
  }
  ArrayData data;
  try {
    if (header.at("magic").get<std::string>() != kMagic) throw IoError("'" + path.string() + "': bad magic");
    if (header.at("dtype").get<std::string>() != "f64") throw IoError("'" + path.string() + "': dtype must be f64");
    if (header.at("endianness").get<std::string>() != "LE") throw IoError("'" + path.string() + "': endianness must be LE");
    data.shape = header.at("shape").get<std::vector<std::size_t>>();
    if (header.contains("times")) data.times = header["times"].get<std::vector<double>>();
    if (header.contains("meta")) data.meta = header["meta"];
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "': invalid header: " + e.what());
  }
  const std::size_t count = element_count(data.shape);
  std::vector<std::uint64_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 8));
  if (static_cast<std::size_t>(in.gcount()) != count * 8) throw IoError("'" + path.string() + "': truncated payload");
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("'" + path.string() + "': trailing bytes after payload");
  data.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) data.values[i] = std::bit_cast<double>(to_little_endian(raw[i]));
  return data;
}

ArrayData trajectory_to_array(const Trajectory& t) {
  t.validate();
  ArrayData a;
  const Grid& g = t.grid;
  const int channels = t.states.empty() ? 1 : t.states.front().channels();
  a.shape.push_back(t.size());
  if (channels > 1) a.shape.push_back(static_cast<std::size_t>(channels));
  for (int d = 0; d < g.dims(); ++d) a.shape.push_back(static_cast<std::size_t>(g.n(d)));
  a.times = t.times;
  std::vector<double> extent;
  for (int d = 0; d < g.dims(); ++d) extent.push_back(g.extent(d));
  a.meta = {{"kind", "trajectory"}, {"extent", extent}, {"channels", channels}};
  for (const Field& f : t.states) a.values.insert(a.values.end(), f.values().begin(), f.values().end());
  return a;
}

Trajectory array_to_trajectory(const ArrayData& a) {
  if (!a.times) throw IoError("array has no time axis; not a trajectory");
  std::vector<double> extent;
  int channels = 1;
  try {
    extent = a.meta.at("extent").get<std::vector<double>>();
    channels = a.meta.value("channels", 1);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("trajectory metadata: ") + e.what());
  }
  const std::size_t dims = extent.size();
  const std::size_t lead = channels > 1 ? 2 : 1;
  if ((dims != 1 && dims != 2) || a.shape.size() != lead + dims) throw IoError("trajectory array has an unexpected shape");
  Trajectory t;
  t.grid = dims == 1 ? Grid::line(static_cast<int>(a.shape[lead]), extent[0])
                     : Grid::plane(static_cast<int>(a.shape[lead]), static_cast<int>(a.shape[lead + 1]), extent[0], extent[1]);
  const std::size_t per = t.grid.size() * static_cast<std::size_t>(channels);
  for (std::size_t i = 0; i < a.shape[0]; ++i) {
    std::vector<double> v(a.values.begin() + static_cast<long>(i * per), a.values.begin() + static_cast<long>((i + 1) * per));
    t.push_back((*a.times)[i], Field(t.grid, std::move(v), channels));
  }
  t.validate();
  return t;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  write_array(path, trajectory_to_array(trajectory));
}

Trajectory read_trajectory(const std::filesystem::path& path) { return array_to_trajectory(read_array(path)); }

}  // namespace ndop
