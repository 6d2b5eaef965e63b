#include "whatif/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_set>

#include "whatif/error.hpp"
#include "whatif/random.hpp"
#include "whatif/stats.hpp"

namespace whatif {

namespace {

struct RawRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

std::vector<RawRecord> tokenize(std::string_view in) {
  std::vector<RawRecord> records;
  RawRecord current;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_open = false;
  std::size_t line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = RawRecord{};
    record_open = false;
  };

  std::size_t i = 0;
  if (in.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  for (; i < in.size(); ++i) {
    const char c = in[i];
    if (!record_open) {
      current.line = line;
      record_open = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < in.size() && in[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          fail(ErrorKind::invalid_input, "bad_quote",
               "line " + std::to_string(line) + ": unexpected quote inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < in.size() && in[i + 1] == '\n') ++i;
        ++line;
        end_record();
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        if (field_was_quoted) {
          fail(ErrorKind::invalid_input, "bad_quote",
               "line " + std::to_string(line) + ": characters after closing quote");
        }
        field.push_back(c);
    }
  }
  if (in_quotes) {
    fail(ErrorKind::invalid_input, "bad_quote", "unterminated quoted field starting near line " +
                                                    std::to_string(current.line));
  }
  if (record_open) end_record();
  return records;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_missing_token(std::string_view cell) {
  if (cell.empty()) return true;
  static const std::unordered_set<std::string> tokens{"na", "n/a", "nan", "null", "none"};
  return tokens.count(lower(cell)) > 0;
}

std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return std::nullopt;
  // from_chars would also accept "inf"/"nan"; only plain decimal numbers count.
  const char c0 = cell.front();
  if (!(std::isdigit(static_cast<unsigned char>(c0)) || c0 == '-' || c0 == '.')) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<double> parse_boolean(std::string_view cell) {
  const auto l = lower(cell);
  if (l == "true" || l == "yes") return 1.0;
  if (l == "false" || l == "no") return 0.0;
  return std::nullopt;
}

enum class CellClass { missing, number, boolean, other };

ColumnKind infer_kind(const std::vector<RawRecord>& rows, std::size_t col) {
  bool any_other = false, any_boolean_token = false, any_value = false;
  bool all_01 = true, saw0 = false, saw1 = false;
  for (const auto& r : rows) {
    const auto cell = trim(r.fields[col]);
    if (is_missing_token(cell)) continue;
    any_value = true;
    std::optional<double> v = parse_number(cell);
    if (!v) {
      v = parse_boolean(cell);
      if (v) any_boolean_token = true;
    }
    if (!v) {
      any_other = true;
      break;
    }
    if (*v == 0.0) saw0 = true;
    else if (*v == 1.0) saw1 = true;
    else all_01 = false;
  }
  if (any_other || !any_value) return ColumnKind::categorical_text;
  if (all_01 && saw0 && saw1) return ColumnKind::binary;
  if (any_boolean_token) return ColumnKind::categorical_text;  // e.g. "yes" mixed with 7, or only "yes"
  return ColumnKind::numeric;
}

double coerce(std::string_view cell, ColumnKind kind) {
  if (auto v = parse_number(cell)) return *v;
  if (kind == ColumnKind::binary) {
    if (auto b = parse_boolean(cell)) return *b;
  }
  return std::nan("");
}

ColumnStats compute_stats(const std::vector<double>& v) {
  ColumnStats s;
  if (v.empty()) return s;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  s.min = *mn;
  s.max = *mx;
  s.mean = std::clamp(stats::mean(v), s.min, s.max);
  s.std = stats::stddev(v);
  s.distinct_count = std::set<double>(v.begin(), v.end()).size();
  return s;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool needs_quotes(std::string_view s) {
  if (s.empty()) return false;
  if (s.front() == ' ' || s.back() == ' ' || s.front() == '\t' || s.back() == '\t') return true;
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view s) {
  if (!needs_quotes(s)) {
    out.append(s);
    return;
  }
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), ptr);
}

Dataset::Dataset(std::string id, std::vector<ColumnSchema> columns, std::vector<std::vector<double>> numbers,
                 std::vector<std::vector<std::string>> text, std::size_t row_count, std::size_t dropped_rows)
    : id_(std::move(id)),
      columns_(std::move(columns)),
      numbers_(std::move(numbers)),
      text_(std::move(text)),
      row_count_(row_count),
      dropped_rows_(dropped_rows) {}

std::optional<std::size_t> Dataset::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Dataset::index_of(std::string_view name) const {
  const auto idx = find_column(name);
  if (!idx) fail(ErrorKind::invalid_input, "unknown_column", "unknown column '" + std::string(name) + "'");
  return *idx;
}

const ColumnSchema& Dataset::column(std::string_view name) const { return columns_[index_of(name)]; }

std::span<const double> Dataset::numbers(std::string_view name) const {
  const auto idx = index_of(name);
  require(columns_[idx].modelable(), "categorical_text_column",
          "column '" + std::string(name) + "' is categorical text");
  return numbers_[idx];
}

std::span<const std::string> Dataset::text(std::string_view name) const {
  const auto idx = index_of(name);
  require(!columns_[idx].modelable(), "not_text_column", "column '" + std::string(name) + "' is not text");
  return text_[idx];
}

std::string Dataset::cell_text(std::size_t row, std::size_t col) const {
  if (columns_.at(col).modelable()) return format_number(numbers_[col].at(row));
  return text_[col].at(row);
}

Dataset parse_csv(std::string_view content) {
  if (content.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    fail(ErrorKind::invalid_input, "empty_input", "empty input");
  }
  auto records = tokenize(content);
  // Trailing blank lines.
  while (!records.empty() && records.back().fields.size() == 1 && records.back().fields[0].empty()) {
    records.pop_back();
  }
  if (records.empty()) fail(ErrorKind::invalid_input, "empty_input", "empty input");

  RawRecord header = std::move(records.front());
  records.erase(records.begin());
  const std::size_t width = header.fields.size();
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < width; ++c) {
    std::string name(trim(header.fields[c]));
    require(!name.empty(), "empty_header", "header column " + std::to_string(c + 1) + " is empty");
    require(seen.insert(name).second, "duplicate_header", "duplicate header name '" + name + "' (column " +
                                                              std::to_string(c + 1) + ")");
    names.push_back(std::move(name));
  }

  // Interior blank lines are skipped unless the table has a single column,
  // where an empty line is an empty (missing) cell.
  std::vector<RawRecord> rows;
  rows.reserve(records.size());
  for (auto& r : records) {
    if (width > 1 && r.fields.size() == 1 && r.fields[0].empty()) continue;
    if (r.fields.size() != width) {
      fail(ErrorKind::invalid_input, "ragged_row",
           "data row " + std::to_string(rows.size() + 1) + " (line " + std::to_string(r.line) + ") has " +
               std::to_string(r.fields.size()) + " fields, expected " + std::to_string(width));
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(ErrorKind::invalid_input, "no_data_rows", "no data rows");

  std::vector<ColumnKind> kinds(width);
  for (std::size_t c = 0; c < width; ++c) kinds[c] = infer_kind(rows, c);

  std::vector<std::vector<double>> numbers(width);
  std::vector<std::vector<std::string>> text(width);
  std::size_t dropped = 0;
  for (const auto& r : rows) {
    bool keep = true;
    std::vector<double> coerced(width, 0.0);
    for (std::size_t c = 0; c < width && keep; ++c) {
      if (kinds[c] == ColumnKind::categorical_text) continue;
      const auto cell = trim(r.fields[c]);
      if (is_missing_token(cell)) {
        keep = false;
        break;
      }
      coerced[c] = coerce(cell, kinds[c]);
      if (std::isnan(coerced[c])) keep = false;
    }
    if (!keep) {
      ++dropped;
      continue;
    }
    for (std::size_t c = 0; c < width; ++c) {
      if (kinds[c] == ColumnKind::categorical_text) {
        text[c].emplace_back(r.fields[c]);
      } else {
        numbers[c].push_back(coerced[c]);
      }
    }
  }
  const std::size_t retained = rows.size() - dropped;
  if (retained == 0) {
    fail(ErrorKind::invalid_input, "no_data_rows",
         "no data rows remain after dropping " + std::to_string(dropped) + " rows with missing values");
  }

  std::vector<ColumnSchema> schema(width);
  for (std::size_t c = 0; c < width; ++c) {
    schema[c].name = names[c];
    schema[c].kind = kinds[c];
    if (kinds[c] != ColumnKind::categorical_text) schema[c].stats = compute_stats(numbers[c]);
  }
  return Dataset("ds-" + hex64(fnv1a64(content)), std::move(schema), std::move(numbers), std::move(text), retained,
                 dropped);
}

std::string serialize_csv(const Dataset& dataset) {
  std::string out;
  const auto& cols = dataset.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out.push_back(',');
    append_field(out, cols[c].name);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < dataset.row_count(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out.push_back(',');
      append_field(out, dataset.cell_text(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

std::optional<std::size_t> AnalysisFrame::driver_index(std::string_view name) const {
  for (std::size_t i = 0; i < drivers.size(); ++i) {
    if (drivers[i] == name) return i;
  }
  return std::nullopt;
}

AnalysisFrame make_frame(const Dataset& dataset, const std::string& kpi, const std::vector<std::string>& drivers) {
  const auto kpi_idx = dataset.find_column(kpi);
  require(kpi_idx.has_value(), "unknown_column", "unknown KPI column '" + kpi + "'");
  const auto& kpi_col = dataset.columns()[*kpi_idx];
  require(kpi_col.modelable(), "categorical_text_kpi", "KPI column '" + kpi + "' is categorical text");

  AnalysisFrame frame;
  frame.dataset_id = dataset.id();
  frame.kpi = kpi;
  frame.kpi_kind = kpi_col.kind == ColumnKind::binary ? KpiKind::discrete : KpiKind::continuous;

  if (drivers.empty()) {
    for (const auto& col : dataset.columns()) {
      if (col.name == kpi || !col.modelable()) continue;
      frame.drivers.push_back(col.name);
      frame.driver_kinds.push_back(col.kind);
    }
    require(!frame.drivers.empty(), "no_drivers", "no eligible driver columns besides the KPI");
    return frame;
  }

  std::set<std::string> seen;
  for (const auto& name : drivers) {
    require(name != kpi, "kpi_among_drivers", "KPI column '" + kpi + "' cannot also be a driver");
    const auto idx = dataset.find_column(name);
    require(idx.has_value(), "unknown_column", "unknown driver column '" + name + "'");
    const auto& col = dataset.columns()[*idx];
    require(col.modelable(), "categorical_text_driver", "categorical-text driver '" + name + "' cannot be modeled");
    require(seen.insert(name).second, "duplicate_driver", "driver '" + name + "' listed twice");
    frame.drivers.push_back(name);
    frame.driver_kinds.push_back(col.kind);
  }
  return frame;
}

Matrix driver_matrix(const Dataset& dataset, const AnalysisFrame& frame) {
  Matrix x(static_cast<Eigen::Index>(dataset.row_count()), static_cast<Eigen::Index>(frame.driver_count()));
  for (std::size_t j = 0; j < frame.driver_count(); ++j) {
    const auto idx = dataset.find_column(frame.drivers[j]);
    require(idx.has_value(), "frame_mismatch", "dataset lacks driver column '" + frame.drivers[j] + "'");
    require(dataset.columns()[*idx].kind == frame.driver_kinds[j], "frame_mismatch",
            "driver column '" + frame.drivers[j] + "' changed kind");
    const auto values = dataset.numbers(frame.drivers[j]);
    for (std::size_t i = 0; i < values.size(); ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i];
  }
  return x;
}

Vector kpi_vector(const Dataset& dataset, const AnalysisFrame& frame) {
  const auto idx = dataset.find_column(frame.kpi);
  require(idx.has_value(), "frame_mismatch", "dataset lacks KPI column '" + frame.kpi + "'");
  const auto values = dataset.numbers(frame.kpi);
  if (frame.kpi_kind == KpiKind::discrete) {
    require(dataset.columns()[*idx].kind == ColumnKind::binary, "frame_mismatch",
            "KPI column '" + frame.kpi + "' is no longer binary");
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string_view to_string(ColumnKind kind) noexcept {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical_text: return "categorical-text";
  }
  return "numeric";
}

std::string_view to_string(KpiKind kind) noexcept {
  return kind == KpiKind::discrete ? "discrete" : "continuous";
}

}  // namespace whatif
