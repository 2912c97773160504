#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/grad/parameters.hpp"

namespace iad::grad {

// Binary container layout (all integers little-endian):
//   magic "IADPARAM" | u32 version | u32 entry count
//   per entry: u32 name length | name bytes | u32 rank | u64 dims[rank]
//              | f64 payload[numel], row-major
// A JSON manifest next to it (`<path>.json`) lists names, shapes, the FNV-1a
// checksum of the binary file, and free-form metadata.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct CheckpointContents {
  std::vector<NamedArray> arrays;
  nlohmann::json metadata = nlohmann::json::object();

  const NamedArray* find(const std::string& name) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

// Writes the container and its manifest atomically. Returns the checksum.
std::string save_checkpoint(const std::filesystem::path& path,
                            const CheckpointContents& contents);

// Reads and validates magic, version and checksum against the manifest.
CheckpointContents load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the container bytes, as recorded in the manifest.
std::string file_checksum(const std::filesystem::path& path);

void append_parameters(CheckpointContents& contents, const ParameterSet& params,
                       const std::string& prefix = "");

// Copies values for every parameter (looked up as prefix + name). Missing
// names or shape mismatches throw ConfigError naming the parameter.
void restore_parameters(ParameterSet& params, const CheckpointContents& contents,
                        const std::string& prefix = "");

}  // namespace iad::grad
