#include "iad/common/io.hpp"

#include <fstream>
#include <sstream>

#include "iad/common/error.hpp"

namespace iad {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ConfigError("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void ensure_writable(const std::filesystem::path& path, bool force) {
  if (!force && std::filesystem::exists(path)) {
    throw ConfigError("refusing to overwrite " + path.string() +
                      " (pass --force)");
  }
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<KeyValueEntry> parse_key_values(std::string_view text) {
  std::vector<KeyValueEntry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected `key = value`", line_no, 1);
    }
    KeyValueEntry entry{trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                        line_no};
    if (entry.key.empty()) throw ParseError("empty key", line_no, 1);
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::map<std::string, KeyValueEntry> parse_key_value_map(std::string_view text) {
  std::map<std::string, KeyValueEntry> out;
  for (auto& entry : parse_key_values(text)) out[entry.key] = entry;
  return out;
}

std::vector<std::string> split(std::string_view text, char delimiter) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto at = text.find(delimiter, start);
    if (at == std::string_view::npos) {
      parts.push_back(trim(text.substr(start)));
      break;
    }
    parts.push_back(trim(text.substr(start, at - start)));
    start = at + 1;
  }
  return parts;
}

}  // namespace iad
