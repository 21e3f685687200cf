#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace survkit {

enum class CovariateKind { continuous, binary, categorical };

struct SchemaEntry {
  std::string name;
  CovariateKind kind = CovariateKind::continuous;
  std::vector<std::string> levels;  // categorical only, >= 2, first = baseline
  std::string unit;
};

/// Ordered covariate declaration shared by every downstream module.
///
/// Encoding: continuous and binary entries map to one column each; a
/// categorical with L levels maps to L-1 indicator columns (the first
/// declared level is the baseline and gets the all-zero code).
class CovariateSchema {
 public:
  CovariateSchema() = default;
  explicit CovariateSchema(std::vector<SchemaEntry> entries);

  const std::vector<SchemaEntry>& entries() const { return entries_; }
  int width() const { return static_cast<int>(column_names_.size()); }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const std::vector<bool>& column_is_binary() const { return column_is_binary_; }

  /// Encoded column range [first, first+count) of entry i.
  std::pair<int, int> column_span(int entry_index) const;

  /// Encode one raw cell string per entry. row_label feeds error messages.
  Eigen::VectorXd encode_row(const std::vector<std::string>& raw,
                             const std::string& row_label) const;

  /// Recover the level label of categorical entry i from an encoded row.
  std::string decode_categorical(int entry_index, const Eigen::VectorXd& row) const;

  /// Raw cell values (labels for categoricals) for an encoded row.
  std::vector<std::string> decode_row(const Eigen::VectorXd& row) const;

  std::string to_json_string() const;
  static CovariateSchema from_json_string(const std::string& text);
  static CovariateSchema from_json_file(const std::string& path);

 private:
  std::vector<SchemaEntry> entries_;
  std::vector<std::string> column_names_;
  std::vector<bool> column_is_binary_;
  std::vector<int> entry_first_column_;
};

struct Instance {
  Eigen::VectorXd covariates;
  double duration = 0.0;
  int event = 0;
};

/// Replayable per-column standardization record (population sd convention).
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;           // 1.0 for untouched (binary) columns
  std::vector<bool> affected;   // true for continuous columns
};

/// Immutable rectangular survival table: encoded covariates, durations,
/// event indicators. Safe to share read-only across threads.
class Dataset {
 public:
  Dataset() = default;
  Dataset(CovariateSchema schema, Eigen::MatrixXd covariates,
          Eigen::VectorXd durations, std::vector<int> events,
          std::optional<Standardization> standardization = std::nullopt);

  int n() const { return static_cast<int>(x_.rows()); }
  int width() const { return static_cast<int>(x_.cols()); }
  int n_events() const;

  const CovariateSchema& schema() const { return schema_; }
  const Eigen::MatrixXd& covariates() const { return x_; }
  const Eigen::VectorXd& durations() const { return durations_; }
  const std::vector<int>& events() const { return events_; }
  const std::vector<std::string>& column_names() const { return schema_.column_names(); }
  const std::optional<Standardization>& standardization() const { return standardization_; }

  Instance instance(int i) const;

  /// Row subset in the given order (standardization record carried over).
  Dataset rows(const std::vector<int>& indices) const;

 private:
  CovariateSchema schema_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd durations_;
  std::vector<int> events_;
  std::optional<Standardization> standardization_;
};

/// CSV with a header of schema names plus reserved `duration` and `event`
/// columns, any column order. Rejects blanks, undeclared categorical levels,
/// negative durations and non-0/1 events with the offending row number.
Dataset load_csv(const std::string& path, const CovariateSchema& schema);

/// Write a dataset back out in load_csv's format (categoricals decoded).
void write_csv(const Dataset& ds, const std::string& path);

/// Zero-mean/unit-sd rescale of continuous columns using statistics from
/// fit_rows only (population 1/N sd); binary columns untouched. The recorded
/// (mean, sd) let the same transform replay on held-out rows.
Dataset standardize(const Dataset& ds, const std::vector<int>& fit_rows);

/// Replay a previously fitted standardization onto another dataset.
Dataset apply_standardization(const Dataset& ds, const Standardization& st);

/// VIF_i = 1/(1-R_i^2) from regressing column i on the others plus an
/// intercept. Exact collinearity (1-R^2 below 1e-12) reports +inf, not an
/// exception.
std::vector<std::pair<std::string, double>> vif(const Dataset& ds);

struct VifScreen {
  std::vector<std::pair<std::string, double>> initial;  // VIFs before removal
  std::vector<int> kept;     // column indices, schema order
  std::vector<int> dropped;  // removal order, highest VIF first
};

/// Iterative greedy removal of columns with VIF above threshold, highest
/// first, ties broken by schema order.
VifScreen vif_filter(const Dataset& ds, double threshold = 10.0);

/// Column subset (names and kinds follow). The resulting dataset keeps a
/// synthesized schema whose entries are the surviving encoded columns.
Dataset select_columns(const Dataset& ds, const std::vector<int>& columns);

/// Seed-derived deterministic train/test split.
std::pair<std::vector<int>, std::vector<int>> train_test_split(int n, double train_fraction,
                                                               std::uint64_t seed);

}  // namespace survkit
