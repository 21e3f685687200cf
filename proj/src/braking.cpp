#include "survkit/braking.hpp"

#include <cmath>
#include <fstream>

#include "survkit/errors.hpp"

namespace survkit {

BrakingProfile braking_profile(int level, double v0, double d, double a_max) {
  if (level < 1 || level > 3) throw ValidationError("braking: level must be 1, 2 or 3");
  if (!(v0 > 0.0)) throw ValidationError("braking: v0 must be positive");
  if (!(d > 0.0)) throw ValidationError("braking: d must be positive");
  if (!(a_max > 0.0)) throw ValidationError("braking: a_max must be positive");

  BrakingProfile p;
  p.level = level;
  p.v0 = v0;
  p.d = d;
  p.a_max = a_max;

  double v = v0;
  for (int k = 1; k <= level; ++k) {
    BrakingStage s;
    // planned boundaries at exact fractions of d
    s.start_distance = d * (k - 1) / level;
    s.end_distance = d * k / level;
    s.start_speed = v;
    const double len = s.end_distance - s.start_distance;
    const double target = v0 * static_cast<double>(level - k) / level;  // fixed V0 fractions
    const double required = (v * v - target * target) / (2.0 * len);
    s.clamped = required > a_max;
    s.decel = s.clamped ? a_max : required;

    if (!s.clamped) {
      s.end_speed = target;  // reached exactly by construction
    } else {
      const double v2 = v * v - 2.0 * a_max * len;  // > target^2 >= 0 when clamped
      if (k == level) {
        // cannot stop by the barrier: extend at a_max past d
        p.overshoot = true;
        s.end_distance = d + v2 / (2.0 * a_max);
        s.end_speed = 0.0;
      } else {
        s.end_speed = std::sqrt(v2);
      }
    }
    v = s.end_speed;
    p.stages.push_back(s);
  }
  p.stop_distance = p.stages.back().end_distance;
  return p;
}

double velocity_at(const BrakingProfile& profile, double x) {
  if (x < 0.0) throw ValidationError("velocity_at: x must be >= 0");
  if (x > profile.stop_distance + 1e-12)
    throw ValidationError("velocity_at: x beyond the stop point");
  for (const auto& s : profile.stages) {
    if (x <= s.end_distance + 1e-12) {
      const double v2 = s.start_speed * s.start_speed - 2.0 * s.decel * (x - s.start_distance);
      return std::sqrt(std::max(0.0, v2));
    }
  }
  return 0.0;
}

void write_profile_csv(const BrakingProfile& profile, const std::string& path,
                       double resolution) {
  if (resolution <= 0.0) throw ValidationError("profile csv: resolution must be positive");
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  out << "x,v\n";
  for (double x = 0.0; x < profile.stop_distance; x += resolution)
    out << x << "," << velocity_at(profile, x) << "\n";
  out << profile.stop_distance << "," << 0.0 << "\n";
}

}  // namespace survkit
