#pragma once

#include <string>
#include <vector>

namespace survkit {

struct BrakingStage {
  double decel = 0.0;          // magnitude, m/s^2
  double start_distance = 0.0; // m from where braking begins
  double end_distance = 0.0;
  double start_speed = 0.0;    // m/s
  double end_speed = 0.0;
  bool clamped = false;        // required decel exceeded a_max
};

/// Level-L braking plan: L constant-deceleration stages with distance
/// boundaries at d*k/L and speed targets v0*(L-k)/L. Each stage's required
/// deceleration is recomputed from the achieved entry speed and clamped at
/// a_max; a clamped final stage overshoots the barrier and the profile
/// records the true stop point.
struct BrakingProfile {
  int level = 1;
  double v0 = 0.0;     // m/s
  double d = 0.0;      // m, initial distance to the barrier
  double a_max = 3.0;  // m/s^2
  std::vector<BrakingStage> stages;  // exactly `level` entries
  double stop_distance = 0.0;
  bool overshoot = false;
};

BrakingProfile braking_profile(int level, double v0, double d, double a_max = 3.0);

/// Piecewise v(x) = sqrt(v_start^2 - 2 a (x - x_start)); continuous across
/// stage boundaries. x past the stop point is an error.
double velocity_at(const BrakingProfile& profile, double x);

/// (x, v) samples at the given resolution for external plotting.
void write_profile_csv(const BrakingProfile& profile, const std::string& path,
                       double resolution = 0.1);

inline double kmh_to_ms(double kmh) { return kmh / 3.6; }

}  // namespace survkit
