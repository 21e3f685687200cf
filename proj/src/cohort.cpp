#include "survkit/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "survkit/errors.hpp"
#include "survkit/rng.hpp"

namespace survkit {

FactorCatalog default_scenario_catalog() {
  std::vector<Factor> factors;
  factors.push_back({"speed_limit", {30.0, 40.0, 50.0}, {}});
  factors.push_back({"min_gap", {1.0, 1.5, 2.0}, {}});
  factors.push_back({"lane_width", {2.5, 2.75, 3.0}, {}});
  factors.push_back({"road_type", {}, {"one_way", "two_way", "two_way_median"}});
  factors.push_back({"braking_level", {}, {"1", "2", "3"}});
  factors.push_back({"automation", {}, {"HDV", "mixed", "AV"}});
  factors.push_back({"arrival_rate", {530.0, 750.0, 1100.0}, {}});
  factors.push_back({"time_of_day", {}, {"day", "night"}});
  factors.push_back({"weather", {}, {"clear", "snowy"}});
  return FactorCatalog(std::move(factors));
}

ScenarioSpec scenario_from_levels(const FactorCatalog& catalog,
                                  const std::vector<int>& levels) {
  ScenarioSpec s;
  const auto& fs = catalog.factors();
  if (levels.size() != fs.size())
    throw ValidationError("scenario_from_levels: tuple size mismatch");
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const Factor& f = fs[i];
    const int l = levels[i];
    if (f.name == "speed_limit")
      s.speed_limit_kmh = f.numeric_levels.at(l);
    else if (f.name == "min_gap")
      s.min_gap_s = f.numeric_levels.at(l);
    else if (f.name == "lane_width")
      s.lane_width_m = f.numeric_levels.at(l);
    else if (f.name == "road_type")
      s.road_type = f.label_levels.at(l);
    else if (f.name == "braking_level")
      s.braking_level = std::stoi(f.label_levels.at(l));
    else if (f.name == "automation")
      s.automation = f.label_levels.at(l);
    else if (f.name == "arrival_rate")
      s.arrival_rate_vph = f.numeric_levels.at(l);
    else if (f.name == "time_of_day")
      s.night = f.label_levels.at(l) == "night";
    else if (f.name == "weather")
      s.snowy = f.label_levels.at(l) == "snowy";
    else
      throw ValidationError("scenario_from_levels: unknown factor '" + f.name + "'");
  }
  return s;
}

void write_scenarios_csv(const std::vector<ScenarioSpec>& scenarios, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  out << "speed_limit,min_gap,lane_width,road_type,braking_level,automation,"
         "arrival_rate,time_of_day,weather\n";
  for (const auto& s : scenarios) {
    out << s.speed_limit_kmh << "," << s.min_gap_s << "," << s.lane_width_m << ","
        << s.road_type << "," << s.braking_level << "," << s.automation << ","
        << s.arrival_rate_vph << "," << (s.night ? "night" : "day") << ","
        << (s.snowy ? "snowy" : "clear") << "\n";
  }
}

std::vector<ScenarioSpec> read_scenarios_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty scenario file '" + path + "'");
  std::vector<ScenarioSpec> out;
  int row = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
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
    if (cells.size() < 9)
      throw ValidationError("scenario row " + std::to_string(row) + ": expected 9 columns");
    ScenarioSpec s;
    try {
      s.speed_limit_kmh = std::stod(cells[0]);
      s.min_gap_s = std::stod(cells[1]);
      s.lane_width_m = std::stod(cells[2]);
      s.road_type = cells[3];
      s.braking_level = std::stoi(cells[4]);
      s.automation = cells[5];
      s.arrival_rate_vph = std::stod(cells[6]);
      s.night = cells[7] == "night";
      s.snowy = cells[8] == "snowy";
    } catch (const std::exception&) {
      throw ValidationError("scenario row " + std::to_string(row) + ": unparseable cell");
    }
    out.push_back(s);
    ++row;
  }
  return out;
}

CovariateSchema cohort_schema() {
  std::vector<SchemaEntry> e;
  e.push_back({"speed_limit", CovariateKind::continuous, {}, "km/h"});
  e.push_back({"min_gap", CovariateKind::continuous, {}, "s"});
  e.push_back({"lane_width", CovariateKind::continuous, {}, "m"});
  e.push_back({"road_type", CovariateKind::categorical,
               {"two_way", "one_way", "two_way_median"}, ""});
  e.push_back({"braking_level", CovariateKind::categorical, {"1", "2", "3"}, ""});
  e.push_back({"automation", CovariateKind::categorical, {"HDV", "mixed", "AV"}, ""});
  e.push_back({"arrival_rate", CovariateKind::continuous, {}, "veh/hr"});
  e.push_back({"traffic_density", CovariateKind::continuous, {}, "veh/km"});
  e.push_back({"night", CovariateKind::binary, {}, ""});
  e.push_back({"snowy", CovariateKind::binary, {}, ""});
  e.push_back({"age", CovariateKind::categorical, {"40_49", "18_29", "30_39", "over_50"}, ""});
  e.push_back({"female", CovariateKind::binary, {}, ""});
  e.push_back({"walk_to_work", CovariateKind::binary, {}, ""});
  e.push_back({"walk_to_shopping", CovariateKind::binary, {}, ""});
  e.push_back({"driving_license", CovariateKind::binary, {}, ""});
  e.push_back({"cars_in_household", CovariateKind::categorical, {"1", "0", "2_plus"}, ""});
  e.push_back({"main_mode", CovariateKind::categorical, {"transit", "active", "car"}, ""});
  e.push_back({"vr_experience", CovariateKind::binary, {}, ""});
  return CovariateSchema(std::move(e));
}

namespace {

struct Participant {
  int age;           // level index into schema order
  int female;
  int walk_to_work;
  int walk_to_shopping;
  int driving_license;
  int cars;          // level index
  int main_mode;     // level index
  int vr;
};

int pick_level(Rng& rng, const std::vector<double>& probs) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

Participant sample_participant(Rng& rng, const ParticipantMarginals& m) {
  Participant p;
  // marginals are declared in natural order; map onto schema level order
  // age marginals: 18-29, 30-39, 40-49, 50+ -> schema {40_49,18_29,30_39,over_50}
  const int age_nat = pick_level(rng, m.age);
  const int age_map[4] = {1, 2, 0, 3};
  p.age = age_map[age_nat];
  p.female = rng.uniform() < m.female;
  p.walk_to_work = rng.uniform() < m.walk_to_work;
  p.walk_to_shopping = rng.uniform() < m.walk_to_shopping;
  p.driving_license = rng.uniform() < m.driving_license;
  // cars marginals: 0, 1, 2+ -> schema {1, 0, 2_plus}
  const int cars_nat = pick_level(rng, m.cars_in_household);
  const int cars_map[3] = {1, 0, 2};
  p.cars = cars_map[cars_nat];
  p.main_mode = pick_level(rng, m.main_mode);  // schema order matches
  p.vr = rng.uniform() < m.vr_experience;
  return p;
}

std::vector<std::string> raw_row(const ScenarioSpec& s, const Participant& p,
                                 const CovariateSchema& schema) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  std::vector<std::string> row;
  row.push_back(num(s.speed_limit_kmh));
  row.push_back(num(s.min_gap_s));
  row.push_back(num(s.lane_width_m));
  row.push_back(s.road_type);
  row.push_back(std::to_string(s.braking_level));
  row.push_back(s.automation);
  row.push_back(num(s.arrival_rate_vph));
  row.push_back(num(s.traffic_density()));
  row.push_back(s.night ? "1" : "0");
  row.push_back(s.snowy ? "1" : "0");
  row.push_back(schema.entries()[10].levels[p.age]);
  row.push_back(p.female ? "1" : "0");
  row.push_back(p.walk_to_work ? "1" : "0");
  row.push_back(p.walk_to_shopping ? "1" : "0");
  row.push_back(p.driving_license ? "1" : "0");
  row.push_back(schema.entries()[15].levels[p.cars]);
  row.push_back(schema.entries()[16].levels[p.main_mode]);
  row.push_back(p.vr ? "1" : "0");
  return row;
}

}  // namespace

Dataset generate_cohort(const std::vector<ScenarioSpec>& scenarios,
                        const GroundTruthHazard& hazard, const CohortConfig& cfg) {
  if (cfg.n_participants < 1)
    throw ValidationError("generate_cohort: n_participants must be positive");
  if (scenarios.empty()) throw ValidationError("generate_cohort: no scenarios");
  if (cfg.scenarios_per_participant < 1 ||
      cfg.scenarios_per_participant > static_cast<int>(scenarios.size()))
    throw ValidationError("generate_cohort: scenarios_per_participant out of range");
  if (cfg.repeats < 1) throw ValidationError("generate_cohort: repeats must be positive");

  const CovariateSchema schema = cohort_schema();

  // resolve hazard terms against encoded column names up front
  auto column_of = [&](const std::string& name) {
    const auto& names = schema.column_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
      throw ValidationError("hazard references unknown covariate '" + name + "'");
    return static_cast<int>(it - names.begin());
  };
  std::vector<std::pair<int, double>> linear;
  for (const auto& [name, coef] : hazard.linear) linear.emplace_back(column_of(name), coef);
  struct ResolvedTerm {
    NonlinearTerm::Kind kind;
    int col, col2;
    double inner, scale;
  };
  std::vector<ResolvedTerm> nonlinear;
  for (const auto& t : hazard.nonlinear) {
    ResolvedTerm r{t.kind, column_of(t.feature), -1, t.inner_scale, t.scale};
    if (t.kind == NonlinearTerm::Kind::product) r.col2 = column_of(t.feature2);
    nonlinear.push_back(r);
  }

  // pass 1: covariate rows (scenario assignment + participant sampling)
  Rng master(cfg.seed);
  std::vector<Eigen::VectorXd> rows;
  for (int pi = 0; pi < cfg.n_participants; ++pi) {
    Rng rng = master.spawn(static_cast<std::uint64_t>(pi) + 1);
    const Participant person = sample_participant(rng, cfg.marginals);
    const auto assigned = rng.sample_without_replacement(
        static_cast<int>(scenarios.size()), cfg.scenarios_per_participant);
    for (int rep = 0; rep < cfg.repeats; ++rep)
      for (int sc : assigned)
        rows.push_back(schema.encode_row(raw_row(scenarios[sc], person, schema),
                                         "participant " + std::to_string(pi)));
  }

  Eigen::MatrixXd x(rows.size(), schema.width());
  for (std::size_t r = 0; r < rows.size(); ++r) x.row(r) = rows[r].transpose();

  // pass 2: population standardization of continuous columns for the hazard
  Eigen::VectorXd mean = x.colwise().mean();
  Eigen::VectorXd sd(x.cols());
  const auto& is_binary = schema.column_is_binary();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    sd[c] = std::sqrt((x.col(c).array() - mean[c]).square().sum() / x.rows());
    if (is_binary[c] || sd[c] <= 0.0) {
      mean[c] = 0.0;
      sd[c] = 1.0;
    }
  }
  auto standardized = [&](Eigen::Index row, int col) {
    return (x(row, col) - mean[col]) / sd[col];
  };

  // pass 3: wait times from the exponential hazard, PET filter, censoring
  Rng draw = master.spawn(0);  // streams 1..n are the participants
  std::vector<double> durations;
  std::vector<int> events;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double log_rate = hazard.intercept;
    for (const auto& [col, coef] : linear) log_rate += coef * standardized(r, col);
    for (const auto& t : nonlinear) {
      const double z = standardized(r, t.col);
      switch (t.kind) {
        case NonlinearTerm::Kind::sin: log_rate += t.scale * std::sin(t.inner * z); break;
        case NonlinearTerm::Kind::cos: log_rate += t.scale * std::cos(t.inner * z); break;
        case NonlinearTerm::Kind::square: log_rate += t.scale * z * z; break;
        case NonlinearTerm::Kind::product:
          log_rate += t.scale * z * standardized(r, t.col2);
          break;
      }
    }
    const double rate = std::exp(log_rate);
    const double u = draw.uniform();
    double t = -std::log1p(-u) / rate;  // exponential draw
    if (t <= 0.0) t = 1e-12;
    int event = 1;
    if (cfg.censor_time > 0.0 && t > cfg.censor_time) {
      t = cfg.censor_time;
      event = 0;
    }
    if (event == 1 && cfg.dangerous_cross_prob > 0.0 &&
        draw.uniform() < cfg.dangerous_cross_prob)
      continue;  // dangerous crossing (PET below threshold): dropped
    keep.push_back(r);
    durations.push_back(t);
    events.push_back(event);
  }

  Eigen::MatrixXd xk(keep.size(), x.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) xk.row(i) = x.row(keep[i]);
  Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(durations.data(), durations.size());
  return Dataset(schema, std::move(xk), std::move(d), std::move(events));
}

}  // namespace survkit
