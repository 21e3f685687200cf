#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "survkit/dataset.hpp"

namespace survkit {

/// Right-continuous step function S(t); survival non-increasing, S(0-) = 1.
struct SurvivalCurve {
  std::vector<double> times;     // increasing event times
  std::vector<double> survival;  // aligned values after each time

  double at(double t) const;
};

struct FitMeta {
  double log_partial_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string warning;
};

struct CoxModel {
  Eigen::VectorXd beta;
  std::vector<std::string> covariate_names;
  FitMeta fit_meta;

  double risk(const Eigen::VectorXd& z) const { return beta.dot(z); }
};

struct CoxSummaryRow {
  std::string name;
  double coefficient = 0.0;
  double hazard_ratio = 1.0;
  double standard_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

struct CoxSummary {
  std::vector<CoxSummaryRow> rows;
};

struct CoxFitOptions {
  double tol = 1e-8;       // convergence: max |score| < tol
  int max_iter = 100;
  double beta_bound = 50.0;  // |beta_j| beyond this flags monotone likelihood
};

/// Eq.-style log partial likelihood with Breslow tie handling: the risk set
/// of event k is every instance with T_j >= T_k (the index case included).
/// Log-sum-exp stabilized.
double log_partial_likelihood(const Dataset& ds, const Eigen::VectorXd& beta);

/// Analytic score (gradient) of the log partial likelihood.
Eigen::VectorXd cox_score(const Dataset& ds, const Eigen::VectorXd& beta);

/// Negated Hessian (observed information) of the log partial likelihood.
Eigen::MatrixXd cox_information(const Dataset& ds, const Eigen::VectorXd& beta);

/// Newton-Raphson fit. Non-convergence returns converged=false with a
/// warning; a singular Hessian or runaway |beta| (perfect separation) throws.
CoxModel fit_cox(const Dataset& ds, const CoxFitOptions& opts = {});

/// Wald inference: SE from the inverse observed information at beta-hat,
/// hazard ratio exp(beta), two-sided normal p-values.
CoxSummary cox_summary(const CoxModel& model, const Dataset& ds);

/// Breslow cumulative baseline hazard, composed into S0(t) = exp(-Lambda0(t)).
SurvivalCurve breslow_baseline(const CoxModel& model, const Dataset& ds);

/// Product-limit estimate; censored rows leave the risk set without a factor.
SurvivalCurve kaplan_meier(const Dataset& ds);

/// Fraction of comparable pairs (T_i < T_j, event_i = 1) where risk_i > risk_j,
/// ties in risk scored 0.5. Throws when no pair is comparable.
double concordance_index(const std::vector<double>& durations, const std::vector<int>& events,
                         const std::vector<double>& risks);

/// Per-interval cross/wait discrete-choice model used as a comparison
/// baseline: each instance expands into ceil(duration/interval) rows with an
/// appended elapsed-time covariate, the last row labeled by the event flag.
struct LogisticBaseline {
  double intercept = 0.0;
  Eigen::VectorXd beta;          // schema covariates
  double time_coefficient = 0.0; // elapsed-time column
  double interval = 0.1;
  std::vector<std::string> covariate_names;
  FitMeta fit_meta;

  double probability(const Eigen::VectorXd& z, double elapsed) const;
  /// Risk used for concordance: crossing probability at a fixed reference
  /// elapsed time (0 by default).
  double risk(const Eigen::VectorXd& z, double reference_elapsed = 0.0) const;
};

LogisticBaseline fit_logistic_baseline(const Dataset& ds, double interval = 0.1);

/// Model export/import: covariate names, coefficients, SEs, fit metadata.
std::string cox_to_json(const CoxModel& model, const CoxSummary* summary = nullptr);
CoxModel cox_from_json(const std::string& text, CoxSummary* summary_out = nullptr);

}  // namespace survkit
