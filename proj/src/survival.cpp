#include "survkit/survival.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "survkit/errors.hpp"

namespace survkit {

using nlohmann::json;

double SurvivalCurve::at(double t) const {
  double s = 1.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] <= t)
      s = survival[i];
    else
      break;
  }
  return s;
}

namespace {

std::vector<int> order_by_duration(const Dataset& ds) {
  std::vector<int> order(ds.n());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ds.durations()[a] < ds.durations()[b];
  });
  return order;
}

// Shared sweep over event times with suffix (risk set) accumulators kept in a
// shifted representation: sum exp(eta - shift), sum exp(eta - shift) * Z, and
// optionally sum exp(eta - shift) * Z Z^T. Breslow ties: every event in a tie
// group sees the same risk set.
struct CoxSweep {
  double lpl = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;  // negated Hessian

  CoxSweep(const Dataset& ds, const Eigen::VectorXd& beta, bool want_score, bool want_info) {
    const int n = ds.n();
    const int p = ds.width();
    if (beta.size() != p) throw ValidationError("beta length does not match covariate width");
    if (!beta.allFinite()) throw NumericError("beta contains NaN/inf");
    if (ds.n_events() < 1) throw ValidationError("need at least one event");

    score = Eigen::VectorXd::Zero(p);
    info = Eigen::MatrixXd::Zero(p, p);
    const Eigen::VectorXd eta = ds.covariates() * beta;

    const auto order = order_by_duration(ds);
    double shift = -std::numeric_limits<double>::infinity();
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

    auto add_to_risk_set = [&](int idx) {
      const double e = eta[idx];
      const Eigen::VectorXd z = ds.covariates().row(idx).transpose();
      if (e <= shift) {
        const double w = std::exp(e - shift);
        s0 += w;
        if (want_score || want_info) s1 += w * z;
        if (want_info) s2 += w * (z * z.transpose());
      } else {
        const double f = std::isinf(shift) ? 0.0 : std::exp(shift - e);
        s0 = s0 * f + 1.0;
        if (want_score || want_info) s1 = s1 * f + z;
        if (want_info) s2 = s2 * f + z * z.transpose();
        shift = e;
      }
    };

    int g_end = n;
    while (g_end > 0) {
      int g_start = g_end;
      const double t = ds.durations()[order[g_end - 1]];
      while (g_start > 0 && ds.durations()[order[g_start - 1]] == t) --g_start;
      for (int k = g_end - 1; k >= g_start; --k) add_to_risk_set(order[k]);
      const double lse = shift + std::log(s0);
      for (int k = g_start; k < g_end; ++k) {
        const int idx = order[k];
        if (!ds.events()[idx]) continue;
        lpl += eta[idx] - lse;
        if (want_score || want_info) {
          const Eigen::VectorXd mean = s1 / s0;
          if (want_score) score += ds.covariates().row(idx).transpose() - mean;
          if (want_info) info += s2 / s0 - mean * mean.transpose();
        }
      }
      g_end = g_start;
    }
  }
};

}  // namespace

double log_partial_likelihood(const Dataset& ds, const Eigen::VectorXd& beta) {
  return CoxSweep(ds, beta, false, false).lpl;
}

Eigen::VectorXd cox_score(const Dataset& ds, const Eigen::VectorXd& beta) {
  return CoxSweep(ds, beta, true, false).score;
}

Eigen::MatrixXd cox_information(const Dataset& ds, const Eigen::VectorXd& beta) {
  return CoxSweep(ds, beta, true, true).info;
}

namespace {

// LDLT solve with an explicit relative-pivot singularity check.
Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs,
                          const std::string& context) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || dmax <= 0.0 ||
      d.minCoeff() <= dmax * 1e-12) {
    throw NumericError(context +
                       ": singular information matrix; screen collinear covariates "
                       "with vif_filter before fitting");
  }
  return ldlt.solve(rhs);
}

}  // namespace

CoxModel fit_cox(const Dataset& ds, const CoxFitOptions& opts) {
  const int p = ds.width();
  CoxModel model;
  model.covariate_names = ds.column_names();
  model.beta = Eigen::VectorXd::Zero(p);

  double lpl = 0.0;
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    CoxSweep sweep(ds, model.beta, true, true);
    lpl = sweep.lpl;
    if (sweep.score.cwiseAbs().maxCoeff() < opts.tol) {
      model.fit_meta = {lpl, iter, true, ""};
      return model;
    }
    const Eigen::VectorXd step = solve_spd(sweep.info, sweep.score, "fit_cox");

    // step-halving keeps the ascent monotone on awkward starts
    double scale = 1.0;
    Eigen::VectorXd candidate = model.beta + step;
    for (int h = 0; h < 30; ++h) {
      if (candidate.allFinite() &&
          CoxSweep(ds, candidate, false, false).lpl >= lpl - 1e-12)
        break;
      scale *= 0.5;
      candidate = model.beta + scale * step;
    }
    model.beta = candidate;
    if (model.beta.cwiseAbs().maxCoeff() > opts.beta_bound)
      throw NumericError(
          "fit_cox: coefficient escaped |beta| <= " + std::to_string(opts.beta_bound) +
          "; monotone likelihood (perfect separation) suspected");
  }
  model.fit_meta = {CoxSweep(ds, model.beta, false, false).lpl, iter, false,
                    "fit_cox: not converged after " + std::to_string(opts.max_iter) +
                        " iterations"};
  return model;
}

namespace {

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

CoxSummary cox_summary(const CoxModel& model, const Dataset& ds) {
  if (!model.fit_meta.converged)
    throw ValidationError("cox_summary: model did not converge");
  const int p = ds.width();
  const Eigen::MatrixXd info = cox_information(ds, model.beta);
  const Eigen::MatrixXd cov =
      solve_spd(info, Eigen::MatrixXd::Identity(p, p), "cox_summary");
  CoxSummary s;
  for (int i = 0; i < p; ++i) {
    CoxSummaryRow row;
    row.name = model.covariate_names[i];
    row.coefficient = model.beta[i];
    row.hazard_ratio = std::exp(model.beta[i]);
    row.standard_error = std::sqrt(cov(i, i));
    row.z = row.standard_error > 0 ? row.coefficient / row.standard_error : 0.0;
    row.p_value = normal_two_sided_p(row.z);
    s.rows.push_back(row);
  }
  return s;
}

SurvivalCurve breslow_baseline(const CoxModel& model, const Dataset& ds) {
  if (!model.fit_meta.converged)
    throw ValidationError("breslow_baseline: model did not converge");
  const Eigen::VectorXd eta = ds.covariates() * model.beta;
  const auto order = order_by_duration(ds);
  const int n = ds.n();

  // suffix sums give each event time's risk-set denominator sum_{T_j >= t} exp(eta_j)
  std::vector<double> suffix(n + 1, 0.0);
  for (int k = n - 1; k >= 0; --k)
    suffix[k] = suffix[k + 1] + std::exp(eta[order[k]]);

  SurvivalCurve curve;
  double cum = 0.0;
  int k = 0;
  while (k < n) {
    int g = k;
    const double t = ds.durations()[order[k]];
    int d = 0;
    while (g < n && ds.durations()[order[g]] == t) {
      d += ds.events()[order[g]];
      ++g;
    }
    if (d > 0) {
      cum += static_cast<double>(d) / suffix[k];
      curve.times.push_back(t);
      curve.survival.push_back(std::exp(-cum));
    }
    k = g;
  }
  return curve;
}

SurvivalCurve kaplan_meier(const Dataset& ds) {
  if (ds.n_events() < 1) throw ValidationError("kaplan_meier: need at least one event");
  const auto order = order_by_duration(ds);
  const int n = ds.n();
  SurvivalCurve curve;
  double s = 1.0;
  int k = 0;
  while (k < n) {
    int g = k;
    const double t = ds.durations()[order[k]];
    int d = 0;
    while (g < n && ds.durations()[order[g]] == t) {
      d += ds.events()[order[g]];
      ++g;
    }
    if (d > 0) {
      const int at_risk = n - k;
      s *= 1.0 - static_cast<double>(d) / at_risk;
      curve.times.push_back(t);
      curve.survival.push_back(s);
    }
    k = g;
  }
  return curve;
}

double concordance_index(const std::vector<double>& durations, const std::vector<int>& events,
                         const std::vector<double>& risks) {
  const std::size_t n = durations.size();
  if (events.size() != n || risks.size() != n)
    throw ValidationError("concordance_index: length mismatch");
  double concordant = 0.0;
  long long comparable = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!events[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (durations[i] >= durations[j]) continue;  // needs T_i < T_j
      ++comparable;
      if (risks[i] > risks[j])
        concordant += 1.0;
      else if (risks[i] == risks[j])
        concordant += 0.5;
    }
  }
  if (comparable == 0) throw ValidationError("concordance_index: no comparable pairs");
  return concordant / static_cast<double>(comparable);
}

// ---------------------------------------------------------------------------
// Logistic baseline
// ---------------------------------------------------------------------------

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double LogisticBaseline::probability(const Eigen::VectorXd& z, double elapsed) const {
  return sigmoid(intercept + beta.dot(z) + time_coefficient * elapsed);
}

double LogisticBaseline::risk(const Eigen::VectorXd& z, double reference_elapsed) const {
  return probability(z, reference_elapsed);
}

LogisticBaseline fit_logistic_baseline(const Dataset& ds, double interval) {
  if (interval <= 0.0) throw ValidationError("logistic baseline: interval must be positive");
  for (int i = 0; i < ds.n(); ++i)
    if (ds.durations()[i] <= 0.0)
      throw ValidationError("logistic baseline: durations must be positive (row " +
                            std::to_string(i + 1) + ")");

  // expand: one row per elapsed interval, last row carries the event label
  const int p = ds.width();
  long long total = 0;
  std::vector<int> rows_per(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    const int r = std::max(1, static_cast<int>(std::ceil(ds.durations()[i] / interval - 1e-12)));
    rows_per[i] = r;
    total += r;
  }

  Eigen::MatrixXd x(total, p + 2);  // intercept, covariates, elapsed time
  Eigen::VectorXd y(total);
  long long r = 0;
  for (int i = 0; i < ds.n(); ++i) {
    for (int k = 0; k < rows_per[i]; ++k, ++r) {
      x(r, 0) = 1.0;
      x.block(r, 1, 1, p) = ds.covariates().row(i);
      x(r, p + 1) = k * interval;
      y[r] = (k == rows_per[i] - 1 && ds.events()[i]) ? 1.0 : 0.0;
    }
  }

  const double ymin = y.minCoeff(), ymax = y.maxCoeff();
  if (ymin == ymax)
    throw NumericError("logistic baseline: all expanded labels equal; separation");

  const double bound = 50.0;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(p + 2);
  bool converged = false;
  int iter = 0;
  for (; iter < 100; ++iter) {
    Eigen::VectorXd pr(total);
    for (long long t = 0; t < total; ++t) pr[t] = sigmoid(x.row(t).dot(coef));
    const Eigen::VectorXd g = x.transpose() * (y - pr);
    if (g.cwiseAbs().maxCoeff() < 1e-8) {
      converged = true;
      break;
    }
    const Eigen::VectorXd w = pr.array() * (1.0 - pr.array());
    const Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
    coef += solve_spd(h, g, "logistic baseline");
    if (coef.cwiseAbs().maxCoeff() > bound)
      throw NumericError("logistic baseline: coefficient escaped |beta| <= 50; separation");
  }

  LogisticBaseline m;
  m.intercept = coef[0];
  m.beta = coef.segment(1, p);
  m.time_coefficient = coef[p + 1];
  m.interval = interval;
  m.covariate_names = ds.column_names();
  // log-likelihood: sum y*eta - log(1+exp(eta))
  double ll = 0.0;
  for (long long t = 0; t < total; ++t) {
    const double eta = x.row(t).dot(coef);
    const double log1pe = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    ll += y[t] * eta - log1pe;
  }
  m.fit_meta = {ll, iter, converged,
                converged ? "" : "logistic baseline: not converged after 100 iterations"};
  return m;
}

// ---------------------------------------------------------------------------
// JSON model export/import
// ---------------------------------------------------------------------------

std::string cox_to_json(const CoxModel& model, const CoxSummary* summary) {
  json j;
  j["format_version"] = 1;
  j["type"] = "cox";
  j["covariates"] = model.covariate_names;
  j["beta"] = std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
  j["fit"] = {{"log_partial_likelihood", model.fit_meta.log_partial_likelihood},
              {"iterations", model.fit_meta.iterations},
              {"converged", model.fit_meta.converged}};
  if (!model.fit_meta.warning.empty()) j["fit"]["warning"] = model.fit_meta.warning;
  if (summary) {
    json rows = json::array();
    for (const auto& r : summary->rows) {
      rows.push_back({{"name", r.name},
                      {"coefficient", r.coefficient},
                      {"hazard_ratio", r.hazard_ratio},
                      {"standard_error", r.standard_error},
                      {"z", r.z},
                      {"p_value", r.p_value}});
    }
    j["summary"] = rows;
  }
  return j.dump(2);
}

CoxModel cox_from_json(const std::string& text, CoxSummary* summary_out) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("cox model JSON: ") + e.what());
  }
  if (j.value("type", "") != "cox") throw ValidationError("cox model JSON: type != cox");
  CoxModel m;
  m.covariate_names = j.at("covariates").get<std::vector<std::string>>();
  const auto b = j.at("beta").get<std::vector<double>>();
  if (b.size() != m.covariate_names.size())
    throw ValidationError("cox model JSON: beta/covariates length mismatch");
  m.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  const auto& f = j.at("fit");
  m.fit_meta.log_partial_likelihood = f.at("log_partial_likelihood").get<double>();
  m.fit_meta.iterations = f.at("iterations").get<int>();
  m.fit_meta.converged = f.at("converged").get<bool>();
  if (f.contains("warning")) m.fit_meta.warning = f["warning"].get<std::string>();
  if (summary_out && j.contains("summary")) {
    summary_out->rows.clear();
    for (const auto& r : j["summary"]) {
      summary_out->rows.push_back({r.at("name").get<std::string>(),
                                   r.at("coefficient").get<double>(),
                                   r.at("hazard_ratio").get<double>(),
                                   r.at("standard_error").get<double>(),
                                   r.at("z").get<double>(),
                                   r.at("p_value").get<double>()});
    }
  }
  return m;
}

}  // namespace survkit
