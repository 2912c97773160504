#include "iad/grad/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "iad/common/digest.hpp"
#include "iad/common/error.hpp"
#include "iad/common/io.hpp"

namespace iad::grad {

namespace {

constexpr char kMagic[8] = {'I', 'A', 'D', 'P', 'A', 'R', 'A', 'M'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  std::uint64_t read_uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string read_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ConfigError(origin_ + ": truncated checkpoint");
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string checksum_of(const std::string& bytes) {
  Fnv1a h;
  h.update(bytes);
  return "fnv1a64:" + h.hex();
}

}  // namespace

const NamedArray* CheckpointContents::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p += ".json";
  return p;
}

std::string save_checkpoint(const std::filesystem::path& path,
                            const CheckpointContents& contents) {
  std::string bytes(kMagic, sizeof(kMagic));
  put_u32(bytes, kCheckpointVersion);
  put_u32(bytes, static_cast<std::uint32_t>(contents.arrays.size()));
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& a : contents.arrays) {
    if (shape_numel(a.shape) != a.data.size()) {
      throw ContractViolation("checkpoint entry " + a.name + " has inconsistent shape");
    }
    put_u32(bytes, static_cast<std::uint32_t>(a.name.size()));
    bytes += a.name;
    put_u32(bytes, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) put_u64(bytes, d);
    for (double v : a.data) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
    entries.push_back({{"name", a.name}, {"shape", a.shape}});
  }
  const std::string checksum = checksum_of(bytes);
  nlohmann::json manifest = {{"format", "iad-params"},
                             {"version", kCheckpointVersion},
                             {"checksum", checksum},
                             {"entries", entries},
                             {"metadata", contents.metadata}};
  write_file_atomic(path, bytes);
  write_file_atomic(manifest_path(path), manifest.dump(2) + "\n");
  return checksum;
}

std::string file_checksum(const std::filesystem::path& path) {
  return checksum_of(read_text_file(path));
}

CheckpointContents load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  const std::string origin = path.string();
  Reader reader(bytes, origin);
  if (reader.read_bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw ConfigError(origin + ": not a parameter checkpoint");
  }
  const auto version = reader.read_uint(4);
  if (version != kCheckpointVersion) {
    throw ConfigError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointContents contents;
  const auto count = reader.read_uint(4);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = reader.read_bytes(reader.read_uint(4));
    const auto rank = reader.read_uint(4);
    for (std::uint64_t d = 0; d < rank; ++d) a.shape.push_back(reader.read_uint(8));
    a.data.resize(shape_numel(a.shape));
    for (double& v : a.data) v = std::bit_cast<double>(reader.read_uint(8));
    contents.arrays.push_back(std::move(a));
  }
  if (!reader.at_end()) throw ConfigError(origin + ": trailing bytes in checkpoint");

  const auto mpath = manifest_path(path);
  if (std::filesystem::exists(mpath)) {
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(read_text_file(mpath));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(mpath.string() + ": " + e.what());
    }
    if (manifest.value("checksum", "") != checksum_of(bytes)) {
      throw ConfigError(origin + ": checksum does not match manifest");
    }
    contents.metadata = manifest.value("metadata", nlohmann::json::object());
  }
  return contents;
}

void append_parameters(CheckpointContents& contents, const ParameterSet& params,
                       const std::string& prefix) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto d = params[i].data();
    contents.arrays.push_back(
        {prefix + params.name(i), params[i].shape(), std::vector<double>(d.begin(), d.end())});
  }
}

void restore_parameters(ParameterSet& params, const CheckpointContents& contents,
                        const std::string& prefix) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string key = prefix + params.name(i);
    const NamedArray* a = contents.find(key);
    if (a == nullptr) throw ConfigError("checkpoint is missing parameter " + key);
    if (a->shape != params[i].shape()) {
      throw ConfigError("checkpoint parameter " + key + " has shape " + shape_string(a->shape) +
                        ", expected " + shape_string(params[i].shape()));
    }
    auto dst = params[i].mutable_data();
    std::copy(a->data.begin(), a->data.end(), dst.begin());
  }
}

}  // namespace iad::grad
