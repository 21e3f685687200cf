#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "survkit/dataset.hpp"

namespace survkit {

/// Risk function g evaluated on an arbitrary mixed covariate vector.
using RiskFn = std::function<double(const Eigen::VectorXd&)>;

/// Reference values masked-out features fall back to: dataset mean for
/// continuous covariates, zero for binary ones, fixed overrides allowed.
struct BaselineConvention {
  Eigen::VectorXd values;

  static BaselineConvention standard(const Dataset& ds);
  BaselineConvention& fix(int feature, double value) {
    values[feature] = value;
    return *this;
  }
};

/// Exact Shapley attribution by subset enumeration (single-reference
/// masking: absent features take baseline values). Feature count capped at
/// 20 -- beyond that use shap_sampled.
Eigen::VectorXd shap_exact(const RiskFn& g, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& baseline);

struct SampledShap {
  Eigen::VectorXd phi;
  Eigen::VectorXd std_error;  // Monte-Carlo standard error per feature
  int samples = 0;
  std::uint64_t seed = 0;
};

/// Antithetic permutation-sampling estimator of the same value; unbiased,
/// deterministic per seed. `samples` counts permutation pairs.
SampledShap shap_sampled(const RiskFn& g, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& baseline, int samples, std::uint64_t seed);

struct ShapMethod {
  enum class Kind { exact, sampled } kind = Kind::exact;
  int samples = 200;
  std::uint64_t seed = 0;
};

struct ShapFeatureStat {
  std::string name;
  int feature = 0;
  double mean = 0.0;
  double stddev = 0.0;
  bool uniform = false;  // |mean| > std rule of thumb
  int n_included = 0;
};

struct ShapReport {
  Eigen::MatrixXd phi;  // instances x features
  Eigen::VectorXd baseline;
  ShapMethod method;
  std::vector<ShapFeatureStat> aggregates;  // sorted by |mean| descending
  std::vector<std::string> warnings;
};

/// Per-feature mean/std of the attribution matrix. For each binary feature,
/// instances where that feature is 0 are excluded from its aggregate (they
/// sit at the baseline and carry no contribution).
ShapReport shap_report(const RiskFn& g, const Dataset& ds, const BaselineConvention& baseline,
                       const ShapMethod& method);

struct Condition {
  int feature = 0;
  enum class Op { equals, at_least } op = Op::equals;
  double value = 1.0;

  bool holds(double x) const { return op == Op::equals ? x == value : x >= value; }
};

struct InteractionRow {
  std::string condition_name;
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;
  int n_included = 0;
};

/// Conditional re-aggregation of an existing report restricted to instances
/// satisfying the condition; same inclusion and uniformity rules; only rows
/// passing the uniformity flag are emitted.
std::vector<InteractionRow> conditional_interactions(const ShapReport& report,
                                                     const Dataset& ds,
                                                     const Condition& condition,
                                                     const std::vector<int>& targets,
                                                     int min_count = 10);

void write_report_csv(const ShapReport& report, const std::string& path);
std::string report_to_json(const ShapReport& report);

/// Per-instance (feature value, phi) pairs for external beeswarm plotting.
void write_beeswarm_csv(const ShapReport& report, const Dataset& ds, const std::string& path);

void write_interactions_csv(const std::vector<InteractionRow>& rows, const std::string& path);

}  // namespace survkit
