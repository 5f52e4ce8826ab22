#pragma once

#include "nlgrad/grid.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace nlgrad {

/// 17 significant digits, so repeated runs can be compared textually.
std::string format_number(double v);

/// Comma-separated table with a header row. Throws std::runtime_error when
/// the file cannot be written.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Raw dump: int64 rows, int64 cols, then rows * cols little-endian doubles
/// in column-major order.
void write_field(const std::filesystem::path& path, const Field& f);
Field read_field(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace nlgrad
