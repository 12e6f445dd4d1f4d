#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ndop/fno.hpp"
#include "ndop/train.hpp"

namespace ndop::cli {

namespace fs = std::filesystem;

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Comma-separated file with a fixed header; values are written in
/// round-trip precision so reruns compare byte for byte.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header, bool append = false);
  void row(const std::vector<double>& values);
  /// Leading integer columns (epoch counters) followed by doubles.
  void row(const std::vector<long long>& ints, const std::vector<double>& values);

 private:
  fs::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

nlohmann::json fno_spec_to_json(const FnoSpec& spec);
FnoSpec fno_spec_from_json(const nlohmann::json& j);

struct Checkpoint {
  FnoParams params;
  int epoch = 0;                    // training epochs completed
  std::optional<AdamState> adam;    // present when resumable
};

/// Parameters go to `path`; the optimizer state (if any) to path + ".adam".
void write_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const fs::path& path);

/// manifest.json in `dir`: command, exact config, seeds, input and output
/// checksums, plus command-specific `extra`.
void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& config,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    const nlohmann::json& extra = nlohmann::json::object());

void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

}  // namespace ndop::cli
