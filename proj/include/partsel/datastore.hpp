#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "partsel/common.hpp"

namespace partsel {

using json = nlohmann::json;

// Dates are stored as integer days since the epoch and behave like numbers
// everywhere except in text rendering.
enum class ColumnKind { Numeric, Categorical, Date };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

inline bool is_numeric(ColumnKind kind) { return kind != ColumnKind::Categorical; }

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns);

  std::size_t size() const { return columns_.size(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
  const std::vector<ColumnSpec>& columns() const { return columns_; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws SchemaError for unknown names.
  std::size_t index_of(std::string_view name) const;

  json to_json() const;
  static Schema from_json(const json& doc);

  friend bool operator==(const Schema& a, const Schema& b) { return a.columns_ == b.columns_; }

 private:
  std::vector<ColumnSpec> columns_;
};

struct LayoutSpec {
  enum class Mode { IngestOrder, SortedBy, Random };

  Mode mode = Mode::IngestOrder;
  std::vector<std::string> sort_columns;
  std::uint64_t seed = 0;

  // Accepts "ingest", "sorted:<col>[,<col>...]" and "random:<seed>".
  static LayoutSpec parse(std::string_view text);
  std::string to_string() const;
};

// Columnar block of rows. Categorical columns are dictionary encoded per block.
class RowBlock {
 public:
  RowBlock() = default;
  explicit RowBlock(Schema schema);

  const Schema& schema() const { return schema_; }
  std::size_t row_count() const { return rows_; }
  std::size_t column_count() const { return schema_.size(); }

  std::span<const double> numbers(std::size_t column) const { return columns_[column].numbers; }
  std::span<const std::uint32_t> codes(std::size_t column) const { return columns_[column].codes; }
  const std::vector<std::string>& dictionary(std::size_t column) const {
    return columns_[column].dictionary;
  }
  std::optional<std::uint32_t> find_code(std::size_t column, std::string_view value) const;

  double number(std::size_t column, std::size_t row) const { return columns_[column].numbers[row]; }
  std::string_view text(std::size_t column, std::size_t row) const {
    const auto& c = columns_[column];
    return c.dictionary[c.codes[row]];
  }
  // Rendered cell: shortest number text, ISO date, or the category value.
  std::string cell_text(std::size_t column, std::size_t row) const;

  // Row construction: push every column once, then end_row().
  void push_number(std::size_t column, double value);
  void push_text(std::size_t column, std::string_view value);
  void end_row();

  // New block holding the given rows in the given order.
  RowBlock take(std::span<const std::size_t> rows) const;
  RowBlock slice(std::size_t first, std::size_t count) const;
  static RowBlock concat(std::span<const RowBlock> blocks);

  // Ordered row-by-row equality on rendered values.
  bool same_rows(const RowBlock& other) const;

 private:
  struct ColumnData {
    std::vector<double> numbers;
    std::vector<std::uint32_t> codes;
    std::vector<std::string> dictionary;
    std::unordered_map<std::string, std::uint32_t> lookup;
  };

  Schema schema_;
  std::vector<ColumnData> columns_;
  std::size_t rows_ = 0;
};

struct CsvReadReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::string> warnings;  // first few rejection reasons
};

// Reads a delimited table whose header names the schema columns (any order).
// Rows with unparseable cells are rejected; more than 1% rejected fails.
RowBlock read_table(const std::filesystem::path& path, const Schema& schema,
                    CsvReadReport* report = nullptr, char delimiter = ',');
void write_table(const RowBlock& block, const std::filesystem::path& path, char delimiter = ',');
// Splits one delimited line, honouring double-quoted fields.
std::vector<std::string> split_delimited(std::string_view line, char delimiter);

struct PartitionInfo {
  std::size_t first_row = 0;
  std::size_t row_count = 0;
  std::string file;  // relative to the dataset root
};

// Partition indices are 0-based in memory; files and manifests use id = index + 1.
class PartitionedDataset {
 public:
  std::filesystem::path root;
  Schema schema;
  LayoutSpec layout;
  std::vector<PartitionInfo> partitions;
  std::uint64_t hash_seed = kDefaultHashSeed;
  std::size_t total_rows = 0;
  std::size_t rejected_rows = 0;

  std::size_t partition_count() const { return partitions.size(); }

  void save_manifest() const;
  static PartitionedDataset open(const std::filesystem::path& root);

  std::filesystem::path stats_path(std::size_t index) const;
  std::filesystem::path model_dir() const { return root / "model"; }
};

// Orders rows per layout, splits them into partition_count contiguous
// partitions of equal size (+-1) and writes one file per partition plus
// manifest.json under out_dir.
PartitionedDataset ingest(const std::filesystem::path& source, const Schema& schema,
                          const LayoutSpec& layout, std::size_t partition_count,
                          const std::filesystem::path& out_dir,
                          std::uint64_t hash_seed = kDefaultHashSeed);

// Same as ingest() for rows already in memory.
PartitionedDataset ingest_block(const RowBlock& rows, const LayoutSpec& layout,
                                std::size_t partition_count, const std::filesystem::path& out_dir,
                                std::uint64_t hash_seed = kDefaultHashSeed);

// Row order a layout imposes on a block.
std::vector<std::size_t> layout_order(const RowBlock& rows, const LayoutSpec& layout);

RowBlock load_partition(const PartitionedDataset& dataset, std::size_t index);
std::vector<RowBlock> load_all_partitions(const PartitionedDataset& dataset);

}  // namespace partsel
