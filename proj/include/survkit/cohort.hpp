#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "survkit/dataset.hpp"
#include "survkit/doe.hpp"

namespace survkit {

/// One street-crossing scenario: the nine controlled factors plus the
/// derived traffic density (arrival rate / speed limit).
struct ScenarioSpec {
  double speed_limit_kmh = 50.0;
  double min_gap_s = 2.0;
  double lane_width_m = 3.0;
  std::string road_type = "two_way";  // one_way | two_way | two_way_median
  int braking_level = 1;              // 1 | 2 | 3
  std::string automation = "HDV";     // HDV | mixed | AV
  double arrival_rate_vph = 530.0;
  bool night = false;
  bool snowy = false;

  double traffic_density() const { return arrival_rate_vph / speed_limit_kmh; }
};

/// The full street-factor catalog the design module optimizes over.
FactorCatalog default_scenario_catalog();

/// Scenario for a catalog level tuple.
ScenarioSpec scenario_from_levels(const FactorCatalog& catalog, const std::vector<int>& levels);

void write_scenarios_csv(const std::vector<ScenarioSpec>& scenarios, const std::string& path);
std::vector<ScenarioSpec> read_scenarios_csv(const std::string& path);

/// Level probabilities for the questionnaire fields of synthetic participants.
struct ParticipantMarginals {
  std::vector<double> age = {0.35, 0.25, 0.2, 0.2};        // 18-29, 30-39, 40-49, 50+
  double female = 0.5;
  double walk_to_work = 0.4;
  double walk_to_shopping = 0.5;
  double driving_license = 0.8;
  std::vector<double> cars_in_household = {0.25, 0.45, 0.3};  // 0, 1, 2+
  std::vector<double> main_mode = {0.4, 0.3, 0.3};            // transit, active, car
  double vr_experience = 0.35;
};

struct NonlinearTerm {
  enum class Kind { sin, cos, square, product } kind = Kind::sin;
  std::string feature;
  std::string feature2;      // product terms only
  double inner_scale = 1.0;  // f(inner_scale * z)
  double scale = 1.0;        // scale * f(...)
};

/// Declared log-rate of the exponential wait-time hazard. Terms reference
/// encoded schema column names; continuous inputs are population-standardized
/// before evaluation so coefficients stay scale-free.
struct GroundTruthHazard {
  double intercept = 0.0;
  std::map<std::string, double> linear;
  std::vector<NonlinearTerm> nonlinear;
};

struct CohortConfig {
  int n_participants = 0;
  int scenarios_per_participant = 15;  // drawn without replacement per participant
  int repeats = 2;
  double censor_time = 0.0;  // 0: no censoring
  double dangerous_cross_prob = 0.0;  // PET-filter drop probability for event rows
  std::uint64_t seed = 0;
  ParticipantMarginals marginals;
};

/// Schema of the generated table: scenario covariates (incl. derived
/// density), then participant covariates.
CovariateSchema cohort_schema();

/// Synthetic crossing cohort: participants sampled from the marginals,
/// scenarios assigned per participant, wait times drawn from the declared
/// hazard, dangerous crossings (PET below threshold) dropped stochastically.
/// Deterministic per seed.
Dataset generate_cohort(const std::vector<ScenarioSpec>& scenarios,
                        const GroundTruthHazard& hazard, const CohortConfig& cfg);

}  // namespace survkit
