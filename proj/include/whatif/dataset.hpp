#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace whatif {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ColumnKind { numeric, binary, categorical_text };

struct ColumnStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t distinct_count = 0;
};

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::optional<ColumnStats> stats;  // numeric and binary columns only

  bool modelable() const noexcept { return kind != ColumnKind::categorical_text; }
};

// Immutable parsed table. Storage is column-major: modelable columns hold
// doubles (binary coerced to 0/1), categorical-text columns hold strings.
class Dataset {
 public:
  Dataset(std::string id, std::vector<ColumnSchema> columns, std::vector<std::vector<double>> numbers,
          std::vector<std::vector<std::string>> text, std::size_t row_count, std::size_t dropped_rows);

  const std::string& id() const noexcept { return id_; }
  const std::vector<ColumnSchema>& columns() const noexcept { return columns_; }
  std::size_t row_count() const noexcept { return row_count_; }
  std::size_t dropped_rows() const noexcept { return dropped_rows_; }

  std::optional<std::size_t> find_column(std::string_view name) const;
  // Throws not_found for unknown names.
  const ColumnSchema& column(std::string_view name) const;
  std::span<const double> numbers(std::string_view name) const;
  std::span<const std::string> text(std::string_view name) const;

  // Display form of a cell; numbers use the shortest round-trip representation.
  std::string cell_text(std::size_t row, std::size_t col) const;

 private:
  std::size_t index_of(std::string_view name) const;

  std::string id_;
  std::vector<ColumnSchema> columns_;
  std::vector<std::vector<double>> numbers_;
  std::vector<std::vector<std::string>> text_;
  std::size_t row_count_ = 0;
  std::size_t dropped_rows_ = 0;
};

// RFC 4180 input with a mandatory header row. Rows with a missing value in
// any numeric or binary column are dropped and counted.
Dataset parse_csv(std::string_view content);

// Inverse of parse_csv on the retained rows.
std::string serialize_csv(const Dataset& dataset);

// Shortest decimal string that parses back to the same double.
std::string format_number(double value);

enum class KpiKind { continuous, discrete };

// Optional per-driver floor/ceiling applied after perturbation.
struct ValueClamp {
  std::optional<double> floor;
  std::optional<double> ceiling;
  bool operator==(const ValueClamp&) const = default;
};

struct AnalysisFrame {
  std::string dataset_id;
  std::string kpi;
  KpiKind kpi_kind = KpiKind::continuous;
  std::vector<std::string> drivers;
  std::vector<ColumnKind> driver_kinds;  // parallel to drivers
  std::map<std::string, ValueClamp> clamps;

  std::size_t driver_count() const noexcept { return drivers.size(); }
  std::optional<std::size_t> driver_index(std::string_view name) const;
  bool operator==(const AnalysisFrame&) const = default;
};

// `drivers` empty means every numeric/binary column other than the KPI.
AnalysisFrame make_frame(const Dataset& dataset, const std::string& kpi,
                         const std::vector<std::string>& drivers = {});

// rows x drivers, in frame driver order. Throws when the dataset no longer
// matches the frame (missing column or changed kind).
Matrix driver_matrix(const Dataset& dataset, const AnalysisFrame& frame);
Vector kpi_vector(const Dataset& dataset, const AnalysisFrame& frame);

std::string_view to_string(ColumnKind kind) noexcept;
std::string_view to_string(KpiKind kind) noexcept;

}  // namespace whatif
