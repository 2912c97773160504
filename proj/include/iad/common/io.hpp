#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace iad {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

// Refuses to clobber an existing file unless `force` is set.
void ensure_writable(const std::filesystem::path& path, bool force);

std::string trim(std::string_view text);

// One `key = value` entry of a human-editable config or layout header.
struct KeyValueEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Parses `key = value` lines. Blank lines and lines starting with `#` are
// skipped. Throws ParseError on a line without `=`.
std::vector<KeyValueEntry> parse_key_values(std::string_view text);

// Same as parse_key_values but folds entries into a map; later keys win.
std::map<std::string, KeyValueEntry> parse_key_value_map(std::string_view text);

std::vector<std::string> split(std::string_view text, char delimiter);

}  // namespace iad
