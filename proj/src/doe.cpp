#include "survkit/doe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "survkit/errors.hpp"
#include "survkit/rng.hpp"

namespace survkit {

using nlohmann::json;

std::string Factor::level_label(int level) const {
  if (numeric()) {
    std::ostringstream os;
    os.precision(17);
    os << numeric_levels.at(level);
    return os.str();
  }
  return label_levels.at(level);
}

FactorCatalog::FactorCatalog(std::vector<Factor> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw ValidationError("catalog: no factors");
  std::set<std::string> names;
  for (const auto& f : factors_) {
    if (!names.insert(f.name).second)
      throw ValidationError("catalog: duplicate factor '" + f.name + "'");
    if (f.numeric_levels.empty() == f.label_levels.empty())
      throw ValidationError("catalog: factor '" + f.name +
                            "' needs numeric or label levels (not both)");
    if (f.level_count() < 2)
      throw ValidationError("catalog: factor '" + f.name + "' needs >= 2 levels");
  }
}

std::size_t FactorCatalog::scenario_count() const {
  std::size_t n = 1;
  for (const auto& f : factors_) n *= static_cast<std::size_t>(f.level_count());
  return n;
}

int FactorCatalog::design_dim() const {
  int d = 1;  // intercept
  for (const auto& f : factors_) d += f.numeric() ? 1 : f.level_count() - 1;
  return d;
}

std::vector<int> FactorCatalog::scenario(std::size_t index) const {
  if (index >= scenario_count()) throw ValidationError("catalog: scenario index out of range");
  std::vector<int> levels(factors_.size());
  for (std::size_t i = factors_.size(); i-- > 0;) {
    const std::size_t base = static_cast<std::size_t>(factors_[i].level_count());
    levels[i] = static_cast<int>(index % base);
    index /= base;
  }
  return levels;
}

std::size_t FactorCatalog::index_of(const std::vector<int>& levels) const {
  if (levels.size() != factors_.size()) throw ValidationError("catalog: level tuple size");
  std::size_t index = 0;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const int base = factors_[i].level_count();
    if (levels[i] < 0 || levels[i] >= base)
      throw ValidationError("catalog: level out of range for '" + factors_[i].name + "'");
    index = index * static_cast<std::size_t>(base) + static_cast<std::size_t>(levels[i]);
  }
  return index;
}

Eigen::VectorXd FactorCatalog::encode(const std::vector<int>& levels) const {
  if (levels.size() != factors_.size()) throw ValidationError("catalog: level tuple size");
  Eigen::VectorXd z = Eigen::VectorXd::Zero(design_dim());
  z[0] = 1.0;
  int at = 1;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const auto& f = factors_[i];
    if (f.numeric()) {
      z[at++] = f.numeric_levels.at(levels[i]);
    } else {
      if (levels[i] > 0) z[at + levels[i] - 1] = 1.0;
      at += f.level_count() - 1;
    }
  }
  return z;
}

std::string FactorCatalog::to_json_string() const {
  json arr = json::array();
  for (const auto& f : factors_) {
    json j{{"name", f.name}};
    if (f.numeric())
      j["levels"] = f.numeric_levels;
    else
      j["levels"] = f.label_levels;
    arr.push_back(j);
  }
  return json{{"factors", arr}}.dump(2);
}

FactorCatalog FactorCatalog::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("catalog JSON: ") + e.what());
  }
  std::vector<Factor> factors;
  for (const auto& jf : j.at("factors")) {
    Factor f;
    f.name = jf.at("name").get<std::string>();
    const auto& levels = jf.at("levels");
    if (!levels.is_array() || levels.empty())
      throw ValidationError("catalog JSON: factor '" + f.name + "' has no levels");
    if (levels[0].is_number()) {
      for (const auto& l : levels) f.numeric_levels.push_back(l.get<double>());
    } else {
      for (const auto& l : levels) f.label_levels.push_back(l.get<std::string>());
    }
    factors.push_back(std::move(f));
  }
  return FactorCatalog(std::move(factors));
}

FactorCatalog FactorCatalog::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open catalog '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

Eigen::MatrixXd fisher_info(const Eigen::VectorXd& z, const Eigen::VectorXd& beta, double c) {
  if (z.size() != beta.size()) throw ValidationError("fisher_info: dimension mismatch");
  if (c < 0.0) throw ValidationError("fisher_info: censor time must be >= 0");
  const double eta = beta.dot(z);
  // censoring factor 1 - exp(-c*exp(eta)) in (0,1); exponent overflow-guarded
  double factor;
  const double rate_exponent = eta > 690.0 ? 690.0 : eta;
  const double arg = c * std::exp(rate_exponent);
  factor = arg > 690.0 ? 1.0 : 1.0 - std::exp(-arg);
  return factor * (z * z.transpose());
}

namespace {

double logdet_or_neg_inf(const Eigen::MatrixXd& m) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd d = ldlt.vectorD();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    sum += std::log(d[i]);
  }
  // rank-deficient M can still produce tiny positive pivots; treat anything
  // below machine-scale of the largest pivot as singular
  const double dmax = d.maxCoeff();
  if (d.minCoeff() <= dmax * 1e-13) return -std::numeric_limits<double>::infinity();
  return sum;
}

}  // namespace

double design_objective(const FactorCatalog& catalog, const Design& design,
                        const Eigen::VectorXd& beta, double c) {
  if (design.scenarios.empty()) throw ValidationError("design_objective: empty design");
  if (design.weights.size() != static_cast<Eigen::Index>(design.scenarios.size()))
    throw ValidationError("design_objective: weights/scenarios length mismatch");
  const double wsum = design.weights.sum();
  if (design.weights.minCoeff() < 0.0 || std::abs(wsum - 1.0) > 1e-9)
    throw ValidationError("design_objective: weights must be nonnegative and sum to 1");

  const int dim = catalog.design_dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t j = 0; j < design.scenarios.size(); ++j) {
    const Eigen::VectorXd z = catalog.encode(catalog.scenario(design.scenarios[j]));
    m += design.weights[j] * fisher_info(z, beta, c);
  }
  return logdet_or_neg_inf(m);
}

// ---------------------------------------------------------------------------
// Simulated annealing
// ---------------------------------------------------------------------------

AnnealResult anneal(const FactorCatalog& catalog, const AnnealConfig& cfg) {
  const int dim = catalog.design_dim();
  const std::size_t total = catalog.scenario_count();
  if (cfg.m < dim)
    throw ValidationError("anneal: m = " + std::to_string(cfg.m) +
                          " scenarios cannot span a dimension-" + std::to_string(dim) +
                          " information matrix; every design would be singular");
  if (static_cast<std::size_t>(cfg.m) > total)
    throw ValidationError("anneal: m exceeds the catalog's scenario count");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw ValidationError("anneal: alpha must be in (0,1)");
  if (cfg.t0 <= 0.0) throw ValidationError("anneal: T0 must be positive");

  Eigen::VectorXd beta = cfg.beta0;
  if (beta.size() == 0) beta = Eigen::VectorXd::Zero(dim);
  if (beta.size() != dim) throw ValidationError("anneal: beta prior dimension mismatch");

  Rng rng(cfg.seed);

  // initial random design: m distinct scenarios, Dirichlet(1) weights
  Design current;
  {
    std::vector<int> draw = rng.sample_without_replacement(
        static_cast<int>(std::min<std::size_t>(total, std::size_t{1} << 30)), cfg.m);
    for (int s : draw) current.scenarios.push_back(static_cast<std::size_t>(s));
    current.weights.resize(cfg.m);
    double sum = 0.0;
    for (int j = 0; j < cfg.m; ++j) {
      current.weights[j] = rng.gamma(1.0);
      sum += current.weights[j];
    }
    current.weights /= sum;
  }
  current.objective = design_objective(catalog, current, beta, cfg.censor_time);

  AnnealResult result;
  result.initial = current;
  Design best = current;

  std::set<std::size_t> in_design(current.scenarios.begin(), current.scenarios.end());

  double temperature = cfg.t0;
  for (int it = 0; it < cfg.iters; ++it) {
    Design neighbor = current;
    const bool swap_move =
        in_design.size() < total && rng.uniform() < 0.5;  // weight move only when no spare scenario
    std::size_t swapped_out = 0, swapped_in = 0;
    if (swap_move) {
      // uniformly drawn out-of-design scenario replaces a random member
      const int pos = rng.uniform_int(0, cfg.m - 1);
      std::size_t candidate;
      do {
        candidate = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(total) - 1));
      } while (in_design.count(candidate));
      swapped_out = neighbor.scenarios[pos];
      swapped_in = candidate;
      neighbor.scenarios[pos] = candidate;
    } else {
      // Dirichlet-style multiplicative perturbation, renormalized
      double sum = 0.0;
      for (int j = 0; j < cfg.m; ++j) {
        neighbor.weights[j] =
            current.weights[j] * rng.gamma(cfg.weight_concentration) / cfg.weight_concentration;
        sum += neighbor.weights[j];
      }
      if (sum <= 0.0) continue;
      neighbor.weights /= sum;
    }
    neighbor.objective = design_objective(catalog, neighbor, beta, cfg.censor_time);

    bool accept;
    if (neighbor.objective > current.objective) {
      accept = true;
    } else {
      ++result.worse_proposed;
      double delta;
      if (cfg.delta_on_raw_det) {
        const double det_cur = std::isinf(current.objective) ? 0.0 : std::exp(current.objective);
        const double det_n = std::isinf(neighbor.objective) ? 0.0 : std::exp(neighbor.objective);
        delta = det_cur > 0.0 ? (det_cur - det_n) / det_cur : 0.0;
      } else {
        if (std::isinf(current.objective)) {
          delta = 0.0;  // singular current state: free traversal
        } else if (std::isinf(neighbor.objective)) {
          delta = std::numeric_limits<double>::infinity();
        } else {
          const double scale = std::max(std::abs(current.objective), 1e-12);
          delta = (current.objective - neighbor.objective) / scale;
        }
      }
      const double h = std::exp(-delta / temperature);
      accept = h >= rng.uniform();
      if (accept) ++result.worse_accepted;
    }

    if (accept) {
      if (swap_move) {
        in_design.erase(swapped_out);
        in_design.insert(swapped_in);
      }
      current = std::move(neighbor);
      if (current.objective > best.objective) best = current;
    }
    temperature *= cfg.alpha;
    result.objective_trace.push_back(best.objective);
  }

  result.best = best;
  return result;
}

std::vector<std::size_t> select_scenarios(const Design& design, int budget) {
  if (budget < 0 || budget > static_cast<int>(design.scenarios.size()))
    throw ValidationError("select_scenarios: budget out of range");
  std::vector<int> order(design.scenarios.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (design.weights[a] != design.weights[b]) return design.weights[a] > design.weights[b];
    return design.scenarios[a] < design.scenarios[b];  // ties by catalog order
  });
  std::vector<std::size_t> out;
  for (int i = 0; i < budget; ++i) out.push_back(design.scenarios[order[i]]);
  return out;
}

void write_design_csv(const FactorCatalog& catalog, const Design& design,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  for (const auto& f : catalog.factors()) out << f.name << ",";
  out << "weight\n";
  for (std::size_t j = 0; j < design.scenarios.size(); ++j) {
    const auto levels = catalog.scenario(design.scenarios[j]);
    for (std::size_t i = 0; i < levels.size(); ++i)
      out << catalog.factors()[i].level_label(levels[i]) << ",";
    out << design.weights[j] << "\n";
  }
}

}  // namespace survkit
