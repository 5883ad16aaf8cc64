#include "partsel/datastore.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace partsel {

namespace fs = std::filesystem;

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Date: return "date";
  }
  return "numeric";
}

ColumnKind parse_column_kind(std::string_view text) {
  const std::string lower = to_lower(text);
  if (lower == "numeric" || lower == "number") return ColumnKind::Numeric;
  if (lower == "categorical" || lower == "string" || lower == "text") return ColumnKind::Categorical;
  if (lower == "date") return ColumnKind::Date;
  throw SchemaError("unknown column kind '" + std::string(text) + "'");
}

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("empty column name");
    if (!seen.insert(c.name).second) throw SchemaError("duplicate column name '" + c.name + "'");
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw SchemaError("unknown column '" + std::string(name) + "'");
}

json Schema::to_json() const {
  json cols = json::array();
  for (const auto& c : columns_) cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
  return json{{"columns", cols}};
}

Schema Schema::from_json(const json& doc) {
  const json& cols = doc.is_array() ? doc : doc.at("columns");
  std::vector<ColumnSpec> specs;
  for (const auto& c : cols) {
    specs.push_back({c.at("name").get<std::string>(), parse_column_kind(c.at("kind").get<std::string>())});
  }
  return Schema(std::move(specs));
}

LayoutSpec LayoutSpec::parse(std::string_view text) {
  LayoutSpec spec;
  const std::string t = trim(text);
  if (t == "ingest" || t == "ingest-order") return spec;
  if (t.rfind("sorted:", 0) == 0) {
    spec.mode = Mode::SortedBy;
    std::stringstream ss(t.substr(7));
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (!trim(col).empty()) spec.sort_columns.push_back(trim(col));
    }
    if (spec.sort_columns.empty()) throw ParseError("sorted layout needs at least one column");
    return spec;
  }
  if (t.rfind("random:", 0) == 0) {
    spec.mode = Mode::Random;
    auto seed = parse_number(t.substr(7));
    if (!seed || *seed < 0) throw ParseError("bad random layout seed in '" + t + "'");
    spec.seed = static_cast<std::uint64_t>(*seed);
    return spec;
  }
  throw ParseError("unknown layout '" + t + "' (expected ingest, sorted:<col> or random:<seed>)");
}

std::string LayoutSpec::to_string() const {
  switch (mode) {
    case Mode::IngestOrder: return "ingest";
    case Mode::Random: return "random:" + std::to_string(seed);
    case Mode::SortedBy: {
      std::string out = "sorted:";
      for (std::size_t i = 0; i < sort_columns.size(); ++i) {
        if (i) out += ',';
        out += sort_columns[i];
      }
      return out;
    }
  }
  return "ingest";
}

RowBlock::RowBlock(Schema schema) : schema_(std::move(schema)), columns_(schema_.size()) {}

std::optional<std::uint32_t> RowBlock::find_code(std::size_t column, std::string_view value) const {
  const auto& lookup = columns_[column].lookup;
  auto it = lookup.find(std::string(value));
  if (it == lookup.end()) return std::nullopt;
  return it->second;
}

std::string RowBlock::cell_text(std::size_t column, std::size_t row) const {
  switch (schema_[column].kind) {
    case ColumnKind::Categorical: return std::string(text(column, row));
    case ColumnKind::Date: return format_iso_date(static_cast<std::int64_t>(number(column, row)));
    case ColumnKind::Numeric: return format_number(number(column, row));
  }
  return {};
}

void RowBlock::push_number(std::size_t column, double value) { columns_[column].numbers.push_back(value); }

void RowBlock::push_text(std::size_t column, std::string_view value) {
  auto& c = columns_[column];
  auto [it, inserted] = c.lookup.try_emplace(std::string(value), static_cast<std::uint32_t>(c.dictionary.size()));
  if (inserted) c.dictionary.emplace_back(value);
  c.codes.push_back(it->second);
}

void RowBlock::end_row() {
  ++rows_;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const std::size_t have = is_numeric(schema_[i].kind) ? columns_[i].numbers.size() : columns_[i].codes.size();
    if (have != rows_) throw SchemaError("row " + std::to_string(rows_) + " is missing column '" + schema_[i].name + "'");
  }
}

RowBlock RowBlock::take(std::span<const std::size_t> rows) const {
  RowBlock out(schema_);
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& src = columns_[c];
    auto& dst = out.columns_[c];
    if (is_numeric(schema_[c].kind)) {
      dst.numbers.reserve(rows.size());
      for (auto r : rows) dst.numbers.push_back(src.numbers[r]);
    } else {
      dst.codes.reserve(rows.size());
      std::vector<std::uint32_t> remap(src.dictionary.size(), UINT32_MAX);
      for (auto r : rows) {
        std::uint32_t& code = remap[src.codes[r]];
        if (code == UINT32_MAX) {
          code = static_cast<std::uint32_t>(dst.dictionary.size());
          dst.dictionary.push_back(src.dictionary[src.codes[r]]);
          dst.lookup.emplace(dst.dictionary.back(), code);
        }
        dst.codes.push_back(code);
      }
    }
  }
  out.rows_ = rows.size();
  return out;
}

RowBlock RowBlock::slice(std::size_t first, std::size_t count) const {
  std::vector<std::size_t> rows(count);
  std::iota(rows.begin(), rows.end(), first);
  return take(rows);
}

RowBlock RowBlock::concat(std::span<const RowBlock> blocks) {
  if (blocks.empty()) return RowBlock();
  RowBlock out(blocks.front().schema());
  for (const auto& b : blocks) {
    if (!(b.schema() == out.schema())) throw SchemaError("cannot concatenate blocks with different schemas");
    for (std::size_t r = 0; r < b.row_count(); ++r) {
      for (std::size_t c = 0; c < b.column_count(); ++c) {
        if (is_numeric(b.schema()[c].kind)) {
          out.push_number(c, b.number(c, r));
        } else {
          out.push_text(c, b.text(c, r));
        }
      }
      out.end_row();
    }
  }
  return out;
}

bool RowBlock::same_rows(const RowBlock& other) const {
  if (!(schema_ == other.schema_) || rows_ != other.rows_) return false;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    for (std::size_t r = 0; r < rows_; ++r) {
      if (is_numeric(schema_[c].kind)) {
        if (number(c, r) != other.number(c, r)) return false;
      } else if (text(c, r) != other.text(c, r)) {
        return false;
      }
    }
  }
  return true;
}

std::vector<std::string> split_delimited(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += ch;
      }
    } else if (ch == '"' && current.empty()) {
      quoted = true;
    } else if (ch == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

RowBlock read_table(const fs::path& path, const Schema& schema, CsvReadReport* report, char delimiter) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error("empty input '" + path.string() + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_delimited(line, delimiter);
  if (header.size() != schema.size()) {
    throw SchemaError("header has " + std::to_string(header.size()) + " columns, schema has " +
                      std::to_string(schema.size()));
  }
  // field position -> schema column
  std::vector<std::size_t> column_of(header.size());
  std::vector<bool> seen(schema.size(), false);
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto col = schema.find(trim(header[i]));
    if (!col) throw SchemaError("header column '" + header[i] + "' is not in the schema");
    if (seen[*col]) throw SchemaError("header repeats column '" + header[i] + "'");
    seen[*col] = true;
    column_of[i] = *col;
  }

  RowBlock block(schema);
  CsvReadReport local;
  std::vector<double> numbers(schema.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string reason;
    std::vector<std::string> fields;
    try {
      fields = split_delimited(line, delimiter);
    } catch (const ParseError& e) {
      reason = e.what();
    }
    if (reason.empty() && fields.size() != header.size()) {
      reason = "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size());
    }
    for (std::size_t i = 0; reason.empty() && i < fields.size(); ++i) {
      const std::size_t col = column_of[i];
      switch (schema[col].kind) {
        case ColumnKind::Numeric: {
          auto v = parse_number(fields[i]);
          if (!v) reason = "unparseable number '" + fields[i] + "' in column '" + schema[col].name + "'";
          else numbers[col] = *v;
          break;
        }
        case ColumnKind::Date: {
          auto v = parse_iso_date(fields[i]);
          if (!v) reason = "unparseable date '" + fields[i] + "' in column '" + schema[col].name + "'";
          else numbers[col] = static_cast<double>(*v);
          break;
        }
        case ColumnKind::Categorical: break;
      }
    }
    if (!reason.empty()) {
      ++local.rejected;
      if (local.warnings.size() < 10) local.warnings.push_back("line " + std::to_string(line_no) + ": " + reason);
      continue;
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::size_t col = column_of[i];
      if (is_numeric(schema[col].kind)) {
        block.push_number(col, numbers[col]);
      } else {
        block.push_text(col, fields[i]);
      }
    }
    block.end_row();
    ++local.accepted;
  }

  const std::size_t total = local.accepted + local.rejected;
  if (total == 0) throw Error("empty input '" + path.string() + "'");
  if (static_cast<double>(local.rejected) > 0.01 * static_cast<double>(total)) {
    std::string msg = "rejected " + std::to_string(local.rejected) + " of " + std::to_string(total) +
                      " rows (more than 1%) in '" + path.string() + "'";
    if (!local.warnings.empty()) msg += "; first: " + local.warnings.front();
    throw ParseError(msg);
  }
  if (report) *report = std::move(local);
  return block;
}

namespace {

void write_field(std::ostream& out, std::string_view text, char delimiter) {
  const bool needs_quotes = text.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs_quotes) {
    out << text;
    return;
  }
  out << '"';
  for (char ch : text) {
    if (ch == '"') out << '"';
    out << ch;
  }
  out << '"';
}

}  // namespace

void write_table(const RowBlock& block, const fs::path& path, char delimiter) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  const Schema& schema = block.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out << delimiter;
    write_field(out, schema[c].name, delimiter);
  }
  out << '\n';
  for (std::size_t r = 0; r < block.row_count(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out << delimiter;
      write_field(out, block.cell_text(c, r), delimiter);
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<std::size_t> layout_order(const RowBlock& rows, const LayoutSpec& layout) {
  std::vector<std::size_t> order(rows.row_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  switch (layout.mode) {
    case LayoutSpec::Mode::IngestOrder: break;
    case LayoutSpec::Mode::Random: {
      Rng rng(derive_seed(layout.seed, "layout"));
      shuffle(order, rng);
      break;
    }
    case LayoutSpec::Mode::SortedBy: {
      std::vector<std::size_t> keys;
      for (const auto& name : layout.sort_columns) keys.push_back(rows.schema().index_of(name));
      const Schema& schema = rows.schema();
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (auto col : keys) {
          if (is_numeric(schema[col].kind)) {
            const double x = rows.number(col, a), y = rows.number(col, b);
            if (x != y) return x < y;
          } else {
            const auto x = rows.text(col, a), y = rows.text(col, b);
            if (x != y) return x < y;
          }
        }
        return false;
      });
      break;
    }
  }
  return order;
}

void PartitionedDataset::save_manifest() const {
  json parts = json::array();
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    parts.push_back({{"id", i + 1},
                     {"first_row", partitions[i].first_row},
                     {"row_count", partitions[i].row_count},
                     {"file", partitions[i].file}});
  }
  json doc{{"schema", schema.to_json()},
           {"layout", layout.to_string()},
           {"partition_count", partitions.size()},
           {"hash_seed", hash_seed},
           {"total_rows", total_rows},
           {"rejected_rows", rejected_rows},
           {"partitions", parts}};
  std::ofstream out(root / "manifest.json");
  if (!out) throw Error("cannot write manifest in '" + root.string() + "'");
  out << doc.dump(2) << '\n';
}

PartitionedDataset PartitionedDataset::open(const fs::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw Error("no manifest.json in '" + root.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
  PartitionedDataset ds;
  ds.root = root;
  ds.schema = Schema::from_json(doc.at("schema"));
  ds.layout = LayoutSpec::parse(doc.at("layout").get<std::string>());
  ds.hash_seed = doc.at("hash_seed").get<std::uint64_t>();
  ds.total_rows = doc.at("total_rows").get<std::size_t>();
  ds.rejected_rows = doc.value("rejected_rows", std::size_t{0});
  for (const auto& p : doc.at("partitions")) {
    ds.partitions.push_back({p.at("first_row").get<std::size_t>(), p.at("row_count").get<std::size_t>(),
                             p.at("file").get<std::string>()});
  }
  return ds;
}

fs::path PartitionedDataset::stats_path(std::size_t index) const {
  return root / "stats" / (std::to_string(index + 1) + ".json");
}

PartitionedDataset ingest_block(const RowBlock& rows, const LayoutSpec& layout, std::size_t partition_count,
                                const fs::path& out_dir, std::uint64_t hash_seed) {
  if (rows.row_count() == 0) throw Error("empty input");
  if (partition_count < 1 || partition_count > rows.row_count()) {
    throw RangeError("partition count " + std::to_string(partition_count) + " must be in [1, " +
                     std::to_string(rows.row_count()) + "]");
  }
  const auto order = layout_order(rows, layout);

  PartitionedDataset ds;
  ds.root = out_dir;
  ds.schema = rows.schema();
  ds.layout = layout;
  ds.hash_seed = hash_seed;
  ds.total_rows = rows.row_count();
  fs::create_directories(out_dir / "partitions");

  const std::size_t base = rows.row_count() / partition_count;
  const std::size_t extra = rows.row_count() % partition_count;
  std::size_t first = 0;
  for (std::size_t p = 0; p < partition_count; ++p) {
    const std::size_t count = base + (p < extra ? 1 : 0);
    char name[64];
    std::snprintf(name, sizeof name, "partitions/part-%05zu.csv", p + 1);
    const std::span<const std::size_t> part(order.data() + first, count);
    write_table(rows.take(part), out_dir / name);
    ds.partitions.push_back({first, count, name});
    first += count;
  }
  ds.save_manifest();
  return ds;
}

PartitionedDataset ingest(const fs::path& source, const Schema& schema, const LayoutSpec& layout,
                          std::size_t partition_count, const fs::path& out_dir, std::uint64_t hash_seed) {
  if (layout.mode == LayoutSpec::Mode::SortedBy) {
    for (const auto& col : layout.sort_columns) {
      if (!schema.find(col)) throw SchemaError("layout sorts by unknown column '" + col + "'");
    }
  }
  CsvReadReport report;
  RowBlock rows = read_table(source, schema, &report);
  auto ds = ingest_block(rows, layout, partition_count, out_dir, hash_seed);
  ds.rejected_rows = report.rejected;
  ds.save_manifest();
  return ds;
}

RowBlock load_partition(const PartitionedDataset& dataset, std::size_t index) {
  if (index >= dataset.partition_count()) {
    throw RangeError("partition " + std::to_string(index) + " out of range [0, " +
                     std::to_string(dataset.partition_count()) + ")");
  }
  const fs::path file = dataset.root / dataset.partitions[index].file;
  if (!fs::exists(file)) throw Error("missing partition file '" + file.string() + "'");
  return read_table(file, dataset.schema);
}

std::vector<RowBlock> load_all_partitions(const PartitionedDataset& dataset) {
  std::vector<RowBlock> blocks(dataset.partition_count());
  parallel_for(blocks.size(), [&](std::size_t i) { blocks[i] = load_partition(dataset, i); });
  return blocks;
}

}  // namespace partsel
