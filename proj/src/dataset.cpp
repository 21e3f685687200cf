#include "survkit/dataset.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "survkit/errors.hpp"
#include "survkit/rng.hpp"

namespace survkit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CovariateSchema
// ---------------------------------------------------------------------------

CovariateSchema::CovariateSchema(std::vector<SchemaEntry> entries)
    : entries_(std::move(entries)) {
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (e.name.empty()) throw ValidationError("schema: empty covariate name");
    if (e.name == "duration" || e.name == "event")
      throw ValidationError("schema: '" + e.name + "' is a reserved column name");
    if (!seen.insert(e.name).second)
      throw ValidationError("schema: duplicate covariate name '" + e.name + "'");
    if (e.kind == CovariateKind::categorical) {
      if (e.levels.size() < 2)
        throw ValidationError("schema: categorical '" + e.name + "' needs >= 2 levels");
      std::set<std::string> lv(e.levels.begin(), e.levels.end());
      if (lv.size() != e.levels.size())
        throw ValidationError("schema: duplicate level in '" + e.name + "'");
    } else if (!e.levels.empty()) {
      throw ValidationError("schema: levels only allowed on categorical '" + e.name + "'");
    }
  }
  for (int i = 0; i < static_cast<int>(entries_.size()); ++i) {
    const auto& e = entries_[i];
    entry_first_column_.push_back(static_cast<int>(column_names_.size()));
    if (e.kind == CovariateKind::categorical) {
      // first declared level is the baseline; remaining levels get indicators
      for (std::size_t l = 1; l < e.levels.size(); ++l) {
        column_names_.push_back(e.name + "=" + e.levels[l]);
        column_is_binary_.push_back(true);
      }
    } else {
      column_names_.push_back(e.name);
      column_is_binary_.push_back(e.kind == CovariateKind::binary);
    }
  }
}

std::pair<int, int> CovariateSchema::column_span(int entry_index) const {
  const auto& e = entries_.at(entry_index);
  const int first = entry_first_column_.at(entry_index);
  const int count = e.kind == CovariateKind::categorical
                        ? static_cast<int>(e.levels.size()) - 1
                        : 1;
  return {first, count};
}

Eigen::VectorXd CovariateSchema::encode_row(const std::vector<std::string>& raw,
                                            const std::string& row_label) const {
  if (raw.size() != entries_.size())
    throw ValidationError("encode: expected " + std::to_string(entries_.size()) +
                          " values, got " + std::to_string(raw.size()) + " (" + row_label + ")");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(width());
  for (int i = 0; i < static_cast<int>(entries_.size()); ++i) {
    const auto& e = entries_[i];
    const std::string& cell = raw[i];
    if (cell.empty())
      throw ValidationError("blank cell in column '" + e.name + "' (" + row_label + ")");
    const auto [first, count] = column_span(i);
    if (e.kind == CovariateKind::categorical) {
      const auto it = std::find(e.levels.begin(), e.levels.end(), cell);
      if (it == e.levels.end())
        throw ValidationError("undeclared level '" + cell + "' in column '" + e.name +
                              "' (" + row_label + ")");
      const int idx = static_cast<int>(it - e.levels.begin());
      if (idx > 0) out[first + idx - 1] = 1.0;
      (void)count;
    } else {
      std::size_t pos = 0;
      double v;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw ValidationError("unparseable value '" + cell + "' in column '" + e.name +
                              "' (" + row_label + ")");
      }
      if (pos != cell.size())
        throw ValidationError("unparseable value '" + cell + "' in column '" + e.name +
                              "' (" + row_label + ")");
      if (e.kind == CovariateKind::binary && v != 0.0 && v != 1.0)
        throw ValidationError("binary column '" + e.name + "' must be 0 or 1, got '" +
                              cell + "' (" + row_label + ")");
      out[first] = v;
    }
  }
  return out;
}

std::string CovariateSchema::decode_categorical(int entry_index,
                                                const Eigen::VectorXd& row) const {
  const auto& e = entries_.at(entry_index);
  if (e.kind != CovariateKind::categorical)
    throw ValidationError("decode_categorical: '" + e.name + "' is not categorical");
  const auto [first, count] = column_span(entry_index);
  for (int l = 0; l < count; ++l)
    if (row[first + l] == 1.0) return e.levels[l + 1];
  return e.levels[0];
}

std::vector<std::string> CovariateSchema::decode_row(const Eigen::VectorXd& row) const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (int i = 0; i < static_cast<int>(entries_.size()); ++i) {
    const auto& e = entries_[i];
    if (e.kind == CovariateKind::categorical) {
      out.push_back(decode_categorical(i, row));
    } else {
      std::ostringstream os;
      os.precision(17);
      os << row[column_span(i).first];
      out.push_back(os.str());
    }
  }
  return out;
}

namespace {

CovariateKind kind_from_string(const std::string& s) {
  if (s == "continuous") return CovariateKind::continuous;
  if (s == "binary") return CovariateKind::binary;
  if (s == "categorical") return CovariateKind::categorical;
  throw ValidationError("schema: unknown kind '" + s + "'");
}

std::string kind_to_string(CovariateKind k) {
  switch (k) {
    case CovariateKind::continuous: return "continuous";
    case CovariateKind::binary: return "binary";
    case CovariateKind::categorical: return "categorical";
  }
  return "?";
}

}  // namespace

std::string CovariateSchema::to_json_string() const {
  json arr = json::array();
  for (const auto& e : entries_) {
    json j{{"name", e.name}, {"kind", kind_to_string(e.kind)}};
    if (e.kind == CovariateKind::categorical) j["levels"] = e.levels;
    if (!e.unit.empty()) j["unit"] = e.unit;
    arr.push_back(j);
  }
  return json{{"covariates", arr}}.dump(2);
}

CovariateSchema CovariateSchema::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("schema JSON: ") + e.what());
  }
  if (!j.contains("covariates") || !j["covariates"].is_array())
    throw ValidationError("schema JSON: missing 'covariates' array");
  std::vector<SchemaEntry> entries;
  for (const auto& je : j["covariates"]) {
    SchemaEntry e;
    e.name = je.at("name").get<std::string>();
    e.kind = kind_from_string(je.at("kind").get<std::string>());
    if (je.contains("levels")) e.levels = je["levels"].get<std::vector<std::string>>();
    if (je.contains("unit")) e.unit = je["unit"].get<std::string>();
    entries.push_back(std::move(e));
  }
  return CovariateSchema(std::move(entries));
}

CovariateSchema CovariateSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

Dataset::Dataset(CovariateSchema schema, Eigen::MatrixXd covariates,
                 Eigen::VectorXd durations, std::vector<int> events,
                 std::optional<Standardization> standardization)
    : schema_(std::move(schema)),
      x_(std::move(covariates)),
      durations_(std::move(durations)),
      events_(std::move(events)),
      standardization_(std::move(standardization)) {
  if (x_.cols() != schema_.width())
    throw ValidationError("dataset: covariate width " + std::to_string(x_.cols()) +
                          " does not match schema width " + std::to_string(schema_.width()));
  if (x_.rows() != durations_.size() || x_.rows() != static_cast<Eigen::Index>(events_.size()))
    throw ValidationError("dataset: row count mismatch");
  for (Eigen::Index i = 0; i < durations_.size(); ++i) {
    if (!(durations_[i] >= 0.0))
      throw ValidationError("dataset: negative duration at row " + std::to_string(i + 1));
    if (events_[i] != 0 && events_[i] != 1)
      throw ValidationError("dataset: event must be 0 or 1 at row " + std::to_string(i + 1));
  }
}

int Dataset::n_events() const {
  int c = 0;
  for (int e : events_) c += e;
  return c;
}

Instance Dataset::instance(int i) const {
  return Instance{x_.row(i).transpose(), durations_[i], events_[i]};
}

Dataset Dataset::rows(const std::vector<int>& indices) const {
  Eigen::MatrixXd x(indices.size(), x_.cols());
  Eigen::VectorXd d(indices.size());
  std::vector<int> e(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= n()) throw ValidationError("rows: index out of range");
    x.row(r) = x_.row(i);
    d[r] = durations_[i];
    e[r] = events_[i];
  }
  return Dataset(schema_, std::move(x), std::move(d), std::move(e), standardization_);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path, const CovariateSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty file '" + path + "'");
  const auto header = split_csv_line(line);

  // locate every schema column plus the reserved pair, any order
  std::vector<int> entry_col(schema.entries().size(), -1);
  int duration_col = -1, event_col = -1;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string& h = header[c];
    if (h == "duration") {
      duration_col = c;
      continue;
    }
    if (h == "event") {
      event_col = c;
      continue;
    }
    bool known = false;
    for (std::size_t i = 0; i < schema.entries().size(); ++i) {
      if (schema.entries()[i].name == h) {
        if (entry_col[i] != -1)
          throw ValidationError("duplicate column '" + h + "' in '" + path + "'");
        entry_col[i] = c;
        known = true;
        break;
      }
    }
    if (!known) throw ValidationError("unexpected column '" + h + "' in '" + path + "'");
  }
  for (std::size_t i = 0; i < entry_col.size(); ++i)
    if (entry_col[i] == -1)
      throw ValidationError("missing column '" + schema.entries()[i].name + "' in '" + path + "'");
  if (duration_col == -1) throw ValidationError("missing column 'duration' in '" + path + "'");
  if (event_col == -1) throw ValidationError("missing column 'event' in '" + path + "'");

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> durations;
  std::vector<int> events;
  int row_number = 1;  // data rows, 1-based
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::string row_label = "row " + std::to_string(row_number);
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ValidationError(row_label + ": expected " + std::to_string(header.size()) +
                            " cells, got " + std::to_string(cells.size()));
    std::vector<std::string> raw(schema.entries().size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = cells[entry_col[i]];
    rows.push_back(schema.encode_row(raw, row_label));

    const std::string& dcell = cells[duration_col];
    std::size_t pos = 0;
    double d;
    try {
      d = std::stod(dcell, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != dcell.size())
      throw ValidationError("unparseable duration '" + dcell + "' (" + row_label + ")");
    if (d < 0.0)
      throw ValidationError("negative duration " + dcell + " (" + row_label + ")");
    durations.push_back(d);

    const std::string& ecell = cells[event_col];
    if (ecell == "0")
      events.push_back(0);
    else if (ecell == "1")
      events.push_back(1);
    else
      throw ValidationError("event must be 0 or 1, got '" + ecell + "' (" + row_label + ")");
    ++row_number;
  }

  Eigen::MatrixXd x(rows.size(), schema.width());
  for (std::size_t r = 0; r < rows.size(); ++r) x.row(r) = rows[r].transpose();
  Eigen::VectorXd dv = Eigen::Map<Eigen::VectorXd>(durations.data(), durations.size());
  return Dataset(schema, std::move(x), std::move(dv), std::move(events));
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  for (const auto& e : ds.schema().entries()) out << e.name << ",";
  out << "duration,event\n";
  for (int r = 0; r < ds.n(); ++r) {
    const auto raw = ds.schema().decode_row(ds.covariates().row(r).transpose());
    for (const auto& cell : raw) out << cell << ",";
    out << ds.durations()[r] << "," << ds.events()[r] << "\n";
  }
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

Dataset standardize(const Dataset& ds, const std::vector<int>& fit_rows) {
  if (fit_rows.empty()) throw ValidationError("standardize: empty fit_rows");
  for (int i : fit_rows)
    if (i < 0 || i >= ds.n()) throw ValidationError("standardize: fit row out of range");

  const auto& is_binary = ds.schema().column_is_binary();
  Standardization st;
  st.mean = Eigen::VectorXd::Zero(ds.width());
  st.sd = Eigen::VectorXd::Ones(ds.width());
  st.affected.assign(ds.width(), false);

  const double n = static_cast<double>(fit_rows.size());
  for (int c = 0; c < ds.width(); ++c) {
    if (is_binary[c]) continue;
    double mean = 0.0;
    for (int i : fit_rows) mean += ds.covariates()(i, c);
    mean /= n;
    double var = 0.0;
    for (int i : fit_rows) {
      const double d = ds.covariates()(i, c) - mean;
      var += d * d;
    }
    var /= n;  // population convention
    const double sd = std::sqrt(var);
    if (sd <= 0.0)
      throw ValidationError("standardize: zero-sd column '" + ds.column_names()[c] + "'");
    st.mean[c] = mean;
    st.sd[c] = sd;
    st.affected[c] = true;
  }
  return apply_standardization(ds, st);
}

Dataset apply_standardization(const Dataset& ds, const Standardization& st) {
  if (st.mean.size() != ds.width())
    throw ValidationError("apply_standardization: width mismatch");
  Eigen::MatrixXd x = ds.covariates();
  for (int c = 0; c < ds.width(); ++c) {
    if (!st.affected[c]) continue;
    x.col(c) = (x.col(c).array() - st.mean[c]) / st.sd[c];
  }
  return Dataset(ds.schema(), std::move(x), ds.durations(), ds.events(), st);
}

// ---------------------------------------------------------------------------
// VIF
// ---------------------------------------------------------------------------

namespace {

// R^2 of regressing column target on the remaining columns plus an intercept.
double r_squared(const Eigen::MatrixXd& x, int target, const std::vector<int>& others) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd a(n, others.size() + 1);
  a.col(0).setOnes();
  for (std::size_t j = 0; j < others.size(); ++j) a.col(j + 1) = x.col(others[j]);
  const Eigen::VectorXd y = x.col(target);
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
  const double rss = (y - a * coef).squaredNorm();
  const double mean = y.mean();
  const double tss = (y.array() - mean).square().sum();
  if (tss <= 0.0) return 1.0;  // constant target; caller guards this
  return 1.0 - rss / tss;
}

std::vector<double> vif_values(const Eigen::MatrixXd& x,
                               const std::vector<std::string>& names,
                               const std::vector<int>& columns) {
  if (x.rows() < static_cast<Eigen::Index>(columns.size()) + 1)
    throw ValidationError("vif: need at least width+1 instances");
  for (int c : columns) {
    const double lo = x.col(c).minCoeff(), hi = x.col(c).maxCoeff();
    if (lo == hi)
      throw ValidationError("vif: constant column '" + names[c] + "'");
  }
  std::vector<double> out;
  out.reserve(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    std::vector<int> others;
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (j != i) others.push_back(columns[j]);
    if (others.empty()) {
      out.push_back(1.0);
      continue;
    }
    const double r2 = r_squared(x, columns[i], others);
    const double denom = 1.0 - r2;
    out.push_back(denom < 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / denom);
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, double>> vif(const Dataset& ds) {
  std::vector<int> all(ds.width());
  for (int i = 0; i < ds.width(); ++i) all[i] = i;
  const auto values = vif_values(ds.covariates(), ds.column_names(), all);
  std::vector<std::pair<std::string, double>> out;
  for (int i = 0; i < ds.width(); ++i) out.emplace_back(ds.column_names()[i], values[i]);
  return out;
}

VifScreen vif_filter(const Dataset& ds, double threshold) {
  VifScreen screen;
  std::vector<int> kept(ds.width());
  for (int i = 0; i < ds.width(); ++i) kept[i] = i;

  auto initial = vif_values(ds.covariates(), ds.column_names(), kept);
  for (int i = 0; i < ds.width(); ++i)
    screen.initial.emplace_back(ds.column_names()[i], initial[i]);

  auto current = initial;
  while (true) {
    // highest VIF above threshold; ties by schema order (first wins)
    int worst = -1;
    double worst_v = threshold;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (current[i] > worst_v) {
        worst_v = current[i];
        worst = static_cast<int>(i);
      }
    }
    if (worst < 0) break;
    screen.dropped.push_back(kept[worst]);
    kept.erase(kept.begin() + worst);
    if (kept.empty()) break;
    current = vif_values(ds.covariates(), ds.column_names(), kept);
  }
  screen.kept = kept;
  return screen;
}

Dataset select_columns(const Dataset& ds, const std::vector<int>& columns) {
  std::vector<SchemaEntry> entries;
  Eigen::MatrixXd x(ds.n(), columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const int c = columns[j];
    if (c < 0 || c >= ds.width()) throw ValidationError("select_columns: index out of range");
    SchemaEntry e;
    e.name = ds.column_names()[c];
    e.kind = ds.schema().column_is_binary()[c] ? CovariateKind::binary
                                               : CovariateKind::continuous;
    entries.push_back(std::move(e));
    x.col(j) = ds.covariates().col(c);
  }
  std::optional<Standardization> st;
  if (ds.standardization()) {
    Standardization s;
    s.mean.resize(columns.size());
    s.sd.resize(columns.size());
    s.affected.resize(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      s.mean[j] = ds.standardization()->mean[columns[j]];
      s.sd[j] = ds.standardization()->sd[columns[j]];
      s.affected[j] = ds.standardization()->affected[columns[j]];
    }
    st = std::move(s);
  }
  return Dataset(CovariateSchema(std::move(entries)), std::move(x), ds.durations(),
                 ds.events(), std::move(st));
}

std::pair<std::vector<int>, std::vector<int>> train_test_split(int n, double train_fraction,
                                                               std::uint64_t seed) {
  if (n <= 1) throw ValidationError("train_test_split: need at least 2 rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train_test_split: fraction must be in (0,1)");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  const int n_train = std::max(1, std::min(n - 1, static_cast<int>(std::lround(train_fraction * n))));
  std::vector<int> train(idx.begin(), idx.begin() + n_train);
  std::vector<int> test(idx.begin() + n_train, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

}  // namespace survkit
