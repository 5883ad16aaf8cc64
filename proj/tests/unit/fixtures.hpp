#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "partsel/datastore.hpp"

namespace partsel::testing {

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("partsel_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Schema xyz_schema() {
  return Schema({{"x", ColumnKind::Numeric}, {"d", ColumnKind::Date}, {"g", ColumnKind::Categorical}});
}

// x = 1..rows, d = day x, g cycles a, b, c, ...
inline RowBlock xyz_rows(std::size_t rows, std::size_t categories = 3) {
  RowBlock block(xyz_schema());
  for (std::size_t i = 0; i < rows; ++i) {
    block.push_number(0, static_cast<double>(i + 1));
    block.push_number(1, static_cast<double>(18000 + i));
    block.push_text(2, std::string(1, static_cast<char>('a' + i % categories)));
    block.end_row();
  }
  return block;
}

// One numeric column "x" with the given values.
inline RowBlock numbers(const std::vector<double>& values) {
  RowBlock block(Schema({{"x", ColumnKind::Numeric}}));
  for (double v : values) {
    block.push_number(0, v);
    block.end_row();
  }
  return block;
}

// Columns x (numeric) and g (categorical).
inline RowBlock pairs(const std::vector<std::pair<double, std::string>>& rows) {
  RowBlock block(Schema({{"x", ColumnKind::Numeric}, {"g", ColumnKind::Categorical}}));
  for (const auto& [x, g] : rows) {
    block.push_number(0, x);
    block.push_text(1, g);
    block.end_row();
  }
  return block;
}

}  // namespace partsel::testing
