#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace contjump {

/** @brief Shortest-safe text for a double: 17 significant digits, locale independent. */
std::string format_double(double x);

/** @brief Header-first CSV writer. */
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  /** @brief Append a row of mixed text and numbers (numbers pre-formatted by the caller). */
  void row(const std::vector<std::string>& cells);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

/** @brief Convenience: format a number for a CSV cell. */
inline std::string cell(double x) { return format_double(x); }
inline std::string cell(std::size_t x) { return std::to_string(x); }
inline std::string cell(int x) { return std::to_string(x); }
inline std::string cell(const std::string& s) { return s; }
inline std::string cell(const char* s) { return s; }
inline std::string cell(bool b) { return b ? "PASS" : "FAIL"; }

}  // namespace contjump
