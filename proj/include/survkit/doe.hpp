#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace survkit {

/// One controlled factor: either numeric levels (one design column holding
/// the level value) or categorical labels (one-hot, first level baseline).
struct Factor {
  std::string name;
  std::vector<double> numeric_levels;      // exactly one of the two is set
  std::vector<std::string> label_levels;

  bool numeric() const { return !numeric_levels.empty(); }
  int level_count() const {
    return numeric() ? static_cast<int>(numeric_levels.size())
                     : static_cast<int>(label_levels.size());
  }
  std::string level_label(int level) const;
};

/// Enumerable factor-level catalog with the design-vector encoder
/// (intercept 1 prepended).
class FactorCatalog {
 public:
  FactorCatalog() = default;
  explicit FactorCatalog(std::vector<Factor> factors);

  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t scenario_count() const;  // full-factorial size
  int design_dim() const;              // intercept + numeric + one-hot columns

  /// Level tuple of scenario `index` in mixed-radix order.
  std::vector<int> scenario(std::size_t index) const;
  std::size_t index_of(const std::vector<int>& levels) const;

  /// Design vector Z: [1, columns...].
  Eigen::VectorXd encode(const std::vector<int>& levels) const;

  std::string to_json_string() const;
  static FactorCatalog from_json_string(const std::string& text);
  static FactorCatalog from_json_file(const std::string& path);

 private:
  std::vector<Factor> factors_;
};

/// Weighted set of distinct scenarios with its current log-det objective.
struct Design {
  std::vector<std::size_t> scenarios;  // catalog indices, distinct
  Eigen::VectorXd weights;             // nonnegative, sums to 1
  double objective = 0.0;              // log det M; -inf when singular
};

/// Per-scenario Fisher information for the type-I-censored exponential model:
/// (1 - exp(-c * exp(beta.Z))) * Z Z^T.
Eigen::MatrixXd fisher_info(const Eigen::VectorXd& z, const Eigen::VectorXd& beta, double c);

/// log det of sum_j w_j I(S_j, beta); -inf sentinel for singular M
/// (a value the annealer traverses, never an exception).
double design_objective(const FactorCatalog& catalog, const Design& design,
                        const Eigen::VectorXd& beta, double c);

struct AnnealConfig {
  Eigen::VectorXd beta0;       // defaults to zero (null-hypothesis prior)
  double censor_time = 60.0;
  int m = 0;                   // scenarios in the design
  int iters = 2000;
  double t0 = 1.0;
  double alpha = 0.995;        // cooling T <- alpha*T once per iteration
  std::uint64_t seed = 0;
  bool delta_on_raw_det = false;  // Algorithm-1-literal relative det decrease
  double weight_concentration = 60.0;  // gamma shape of the weight perturbation
};

struct AnnealResult {
  Design best;
  Design initial;
  std::vector<double> objective_trace;  // best objective after each iteration
  long long worse_proposed = 0;
  long long worse_accepted = 0;
};

/// Simulated annealing over (scenario swap | weight perturbation) moves,
/// picked with probability 1/2 each; cooling once per iteration; returns the
/// best design ever evaluated.
AnnealResult anneal(const FactorCatalog& catalog, const AnnealConfig& cfg);

/// Scenario indices sorted by weight descending, top `budget`; ties by
/// catalog order.
std::vector<std::size_t> select_scenarios(const Design& design, int budget);

/// CSV: one scenario per row, factor level values plus weight.
void write_design_csv(const FactorCatalog& catalog, const Design& design,
                      const std::string& path);

}  // namespace survkit
