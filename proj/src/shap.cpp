#include "survkit/shap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "survkit/errors.hpp"
#include "survkit/rng.hpp"

namespace survkit {

using nlohmann::json;

BaselineConvention BaselineConvention::standard(const Dataset& ds) {
  BaselineConvention b;
  b.values.resize(ds.width());
  const auto& is_binary = ds.schema().column_is_binary();
  for (int c = 0; c < ds.width(); ++c)
    b.values[c] = is_binary[c] ? 0.0 : ds.covariates().col(c).mean();
  return b;
}

Eigen::VectorXd shap_exact(const RiskFn& g, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& baseline) {
  const int f = static_cast<int>(z.size());
  if (baseline.size() != f) throw ValidationError("shap_exact: baseline length mismatch");
  if (f > 20)
    throw ValidationError("shap_exact: feature count " + std::to_string(f) +
                          " exceeds the 2^20 enumeration cap; use shap_sampled");

  // one model call per subset
  const std::size_t subsets = std::size_t{1} << f;
  std::vector<double> value(subsets);
  Eigen::VectorXd x = baseline;
  for (std::size_t s = 0; s < subsets; ++s) {
    for (int i = 0; i < f; ++i) x[i] = (s >> i) & 1 ? z[i] : baseline[i];
    value[s] = g(x);
  }

  // factorial weights |S|!(F-|S|-1)!/F!
  std::vector<double> logfact(f + 1, 0.0);
  for (int i = 2; i <= f; ++i) logfact[i] = logfact[i - 1] + std::log(static_cast<double>(i));
  std::vector<double> weight(f);
  for (int s = 0; s < f; ++s)
    weight[s] = std::exp(logfact[s] + logfact[f - s - 1] - logfact[f]);

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(f);
  for (std::size_t s = 0; s < subsets; ++s) {
    const int size = __builtin_popcountll(s);
    for (int i = 0; i < f; ++i) {
      if ((s >> i) & 1) continue;
      phi[i] += weight[size] * (value[s | (std::size_t{1} << i)] - value[s]);
    }
  }
  return phi;
}

SampledShap shap_sampled(const RiskFn& g, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& baseline, int samples, std::uint64_t seed) {
  const int f = static_cast<int>(z.size());
  if (baseline.size() != f) throw ValidationError("shap_sampled: baseline length mismatch");
  if (samples < 1) throw ValidationError("shap_sampled: samples must be >= 1");

  Rng rng(seed);
  std::vector<int> perm(f);
  std::iota(perm.begin(), perm.end(), 0);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(f);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(f);

  // walk one permutation, adding features one at a time
  auto walk = [&](const std::vector<int>& order, Eigen::VectorXd& contrib) {
    Eigen::VectorXd x = baseline;
    double prev = g(x);
    for (int i : order) {
      x[i] = z[i];
      const double cur = g(x);
      contrib[i] = cur - prev;
      prev = cur;
    }
  };

  Eigen::VectorXd forward(f), reverse(f);
  std::vector<int> rev(f);
  for (int s = 0; s < samples; ++s) {
    rng.shuffle(perm);
    std::reverse_copy(perm.begin(), perm.end(), rev.begin());
    walk(perm, forward);
    walk(rev, reverse);
    const Eigen::VectorXd pair_mean = 0.5 * (forward + reverse);  // antithetic pair
    sum += pair_mean;
    sumsq += pair_mean.cwiseProduct(pair_mean);
  }

  SampledShap out;
  out.samples = samples;
  out.seed = seed;
  out.phi = sum / samples;
  out.std_error.resize(f);
  for (int i = 0; i < f; ++i) {
    const double var =
        samples > 1 ? std::max(0.0, (sumsq[i] - samples * out.phi[i] * out.phi[i]) /
                                        (samples - 1))
                    : 0.0;
    out.std_error[i] = std::sqrt(var / samples);
  }
  return out;
}

ShapReport shap_report(const RiskFn& g, const Dataset& ds, const BaselineConvention& baseline,
                       const ShapMethod& method) {
  if (baseline.values.size() != ds.width())
    throw ValidationError("shap_report: baseline width mismatch");
  ShapReport report;
  report.baseline = baseline.values;
  report.method = method;
  report.phi.resize(ds.n(), ds.width());

  for (int i = 0; i < ds.n(); ++i) {
    const Eigen::VectorXd z = ds.covariates().row(i).transpose();
    if (method.kind == ShapMethod::Kind::exact) {
      report.phi.row(i) = shap_exact(g, z, baseline.values).transpose();
    } else {
      report.phi.row(i) =
          shap_sampled(g, z, baseline.values, method.samples,
                       Rng(method.seed).spawn(static_cast<std::uint64_t>(i)).next_u64())
              .phi.transpose();
    }
  }

  const auto& is_binary = ds.schema().column_is_binary();
  for (int c = 0; c < ds.width(); ++c) {
    ShapFeatureStat stat;
    stat.name = ds.column_names()[c];
    stat.feature = c;
    double sum = 0.0, sumsq = 0.0;
    int n = 0;
    for (int i = 0; i < ds.n(); ++i) {
      if (is_binary[c] && ds.covariates()(i, c) == 0.0) continue;  // baseline instances
      sum += report.phi(i, c);
      sumsq += report.phi(i, c) * report.phi(i, c);
      ++n;
    }
    if (n == 0) {
      report.warnings.push_back("feature '" + stat.name +
                                "' is 0 everywhere; excluded from the table");
      continue;
    }
    stat.n_included = n;
    stat.mean = sum / n;
    stat.stddev = std::sqrt(std::max(0.0, sumsq / n - stat.mean * stat.mean));
    stat.uniform = std::abs(stat.mean) > stat.stddev;
    report.aggregates.push_back(stat);
  }
  std::stable_sort(report.aggregates.begin(), report.aggregates.end(),
                   [](const ShapFeatureStat& a, const ShapFeatureStat& b) {
                     return std::abs(a.mean) > std::abs(b.mean);
                   });
  return report;
}

std::vector<InteractionRow> conditional_interactions(const ShapReport& report,
                                                     const Dataset& ds,
                                                     const Condition& condition,
                                                     const std::vector<int>& targets,
                                                     int min_count) {
  if (condition.feature < 0 || condition.feature >= ds.width())
    throw ValidationError("conditional_interactions: condition feature out of range");
  std::vector<int> stratum;
  for (int i = 0; i < ds.n(); ++i)
    if (condition.holds(ds.covariates()(i, condition.feature))) stratum.push_back(i);
  if (stratum.empty()) throw ValidationError("conditional_interactions: empty condition stratum");
  if (static_cast<int>(stratum.size()) < min_count)
    throw ValidationError("conditional_interactions: stratum smaller than the floor of " +
                          std::to_string(min_count) + " instances");

  std::string cond_name = ds.column_names()[condition.feature];
  if (condition.op == Condition::Op::at_least)
    cond_name += ">=" + std::to_string(condition.value);

  const auto& is_binary = ds.schema().column_is_binary();
  std::vector<InteractionRow> rows;
  for (int c : targets) {
    if (c < 0 || c >= ds.width())
      throw ValidationError("conditional_interactions: target feature out of range");
    double sum = 0.0, sumsq = 0.0;
    int n = 0;
    for (int i : stratum) {
      if (is_binary[c] && ds.covariates()(i, c) == 0.0) continue;
      sum += report.phi(i, c);
      sumsq += report.phi(i, c) * report.phi(i, c);
      ++n;
    }
    if (n == 0) continue;
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sumsq / n - mean * mean));
    if (!(std::abs(mean) > sd)) continue;  // only uniform rows are reported
    rows.push_back({cond_name, ds.column_names()[c], mean, sd, n});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const InteractionRow& a, const InteractionRow& b) {
    return std::abs(a.mean) > std::abs(b.mean);
  });
  return rows;
}

void write_report_csv(const ShapReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  out << "feature,mean_shap,std_shap,uniform,n_included\n";
  for (const auto& s : report.aggregates)
    out << s.name << "," << s.mean << "," << s.stddev << "," << (s.uniform ? 1 : 0) << ","
        << s.n_included << "\n";
}

std::string report_to_json(const ShapReport& report) {
  json rows = json::array();
  for (const auto& s : report.aggregates)
    rows.push_back({{"feature", s.name},
                    {"mean_shap", s.mean},
                    {"std_shap", s.stddev},
                    {"uniform", s.uniform},
                    {"n_included", s.n_included}});
  json j{{"aggregates", rows},
         {"baseline", std::vector<double>(report.baseline.data(),
                                          report.baseline.data() + report.baseline.size())},
         {"method", report.method.kind == ShapMethod::Kind::exact ? "exact" : "sampled"}};
  if (report.method.kind == ShapMethod::Kind::sampled) {
    j["samples"] = report.method.samples;
    j["seed"] = report.method.seed;
  }
  if (!report.warnings.empty()) j["warnings"] = report.warnings;
  return j.dump(2);
}

void write_beeswarm_csv(const ShapReport& report, const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  out << "instance,feature,feature_value,phi\n";
  for (int i = 0; i < ds.n(); ++i)
    for (int c = 0; c < ds.width(); ++c)
      out << i << "," << ds.column_names()[c] << "," << ds.covariates()(i, c) << ","
          << report.phi(i, c) << "\n";
}

void write_interactions_csv(const std::vector<InteractionRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  out << "condition_variable,variable,mean_shap,std_shap,n_included\n";
  for (const auto& r : rows)
    out << r.condition_name << "," << r.name << "," << r.mean << "," << r.stddev << ","
        << r.n_included << "\n";
}

}  // namespace survkit
