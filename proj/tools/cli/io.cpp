#include "cli/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <memory>

#include "ndop/array_file.hpp"
#include "ndop/error.hpp"

namespace ndop::cli {

using nlohmann::json;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256: init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header, bool append)
    : path_(path), columns_(header.size()) {
  const bool fresh = !append || !fs::exists(path);
  out_.open(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
  if (fresh) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
}

void CsvWriter::row(const std::vector<double>& values) { row({}, values); }

void CsvWriter::row(const std::vector<long long>& ints, const std::vector<double>& values) {
  if (ints.size() + values.size() != columns_) throw ShapeError("csv '" + path_.string() + "': wrong column count");
  bool first = true;
  for (long long v : ints) {
    out_ << (first ? "" : ",") << v;
    first = false;
  }
  for (double v : values) {
    out_ << (first ? "" : ",") << format_double(v);
    first = false;
  }
  out_ << '\n';
  out_.flush();
  if (!out_) throw IoError("write to '" + path_.string() + "' failed");
}

json fno_spec_to_json(const FnoSpec& s) {
  return {{"dims", s.dims},
          {"width", s.width},
          {"k_max", s.dims == 1 ? json::array({s.k_max[0]}) : json::array({s.k_max[0], s.k_max[1]})},
          {"n_layers", s.n_layers},
          {"activation", to_string(s.activation)},
          {"in_channels", s.in_channels},
          {"out_channels", s.out_channels},
          {"append_coordinates", s.append_coordinates},
          {"projection_width", s.projection_width}};
}

FnoSpec fno_spec_from_json(const json& j) {
  try {
    FnoSpec s;
    s.dims = j.at("dims").get<int>();
    s.width = j.at("width").get<int>();
    const auto k = j.at("k_max").get<std::vector<int>>();
    if (k.empty()) throw IoError("checkpoint spec: empty k_max");
    s.k_max = {k[0], k.size() > 1 ? k[1] : k[0]};
    s.n_layers = j.at("n_layers").get<int>();
    s.activation = activation_from_string(j.at("activation").get<std::string>());
    s.in_channels = j.at("in_channels").get<int>();
    s.out_channels = j.at("out_channels").get<int>();
    s.append_coordinates = j.at("append_coordinates").get<bool>();
    s.projection_width = j.at("projection_width").get<int>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint spec: ") + e.what());
  }
}

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  ArrayData a;
  a.shape = {ckpt.params.values.size()};
  a.values = ckpt.params.values;
  a.meta = {{"kind", "fno_checkpoint"}, {"spec", fno_spec_to_json(ckpt.params.spec)}, {"epoch", ckpt.epoch}};
  write_array(path, a);
  fs::path adam_path = path;
  adam_path += ".adam";
  if (ckpt.adam) {
    ArrayData s;
    const std::size_t n = ckpt.adam->m.size();
    s.shape = {2, n};
    s.values = ckpt.adam->m;
    s.values.insert(s.values.end(), ckpt.adam->v.begin(), ckpt.adam->v.end());
    s.meta = {{"kind", "adam_state"}, {"t", ckpt.adam->t}};
    write_array(adam_path, s);
  } else {
    fs::remove(adam_path);
  }
}

Checkpoint read_checkpoint(const fs::path& path) {
  const ArrayData a = read_array(path);
  if (a.meta.value("kind", "") != "fno_checkpoint" || !a.meta.contains("spec")) {
    throw IoError("'" + path.string() + "' is not a parameter checkpoint");
  }
  Checkpoint c;
  c.params = params_unflatten(fno_spec_from_json(a.meta.at("spec")), a.values);
  c.epoch = a.meta.value("epoch", 0);
  fs::path adam_path = path;
  adam_path += ".adam";
  if (fs::exists(adam_path)) {
    const ArrayData s = read_array(adam_path);
    const std::size_t n = c.params.values.size();
    if (s.shape != std::vector<std::size_t>{2, n}) throw IoError("'" + adam_path.string() + "' has the wrong shape");
    AdamState st(n);
    std::copy(s.values.begin(), s.values.begin() + static_cast<long>(n), st.m.begin());
    std::copy(s.values.begin() + static_cast<long>(n), s.values.end(), st.v.begin());
    st.t = s.meta.value("t", std::int64_t{0});
    c.adam = std::move(st);
  }
  return c;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs, const json& extra) {
  auto checksums = [&](const std::vector<fs::path>& files) {
    json j = json::object();
    for (const auto& f : files) {
      const fs::path rel = f.lexically_relative(dir);
      const std::string key = rel.empty() || rel.native().starts_with("..") ? f.generic_string() : rel.generic_string();
      j[key] = sha256_file(f);
    }
    return j;
  };
  json m = {{"command", command},
            {"format", "NDOP1"},
            {"config", config},
            {"inputs", checksums(inputs)},
            {"outputs", checksums(outputs)}};
  for (const auto& item : extra.items()) m[item.key()] = item.value();
  write_json(dir / "manifest.json", m);
}

}  // namespace ndop::cli
