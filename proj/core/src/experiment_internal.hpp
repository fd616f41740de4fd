#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace oscchain {

std::string sha256_hex(std::string_view data);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const;
  /// Index of a column; throws DataError naming `source` when it is absent.
  std::size_t column(const std::string& name, const std::filesystem::path& source) const;
};

CsvTable read_csv(const std::filesystem::path& path);
/// Writes the file and returns its contents.
std::string write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace oscchain
