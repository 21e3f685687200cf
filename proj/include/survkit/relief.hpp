#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "survkit/dataset.hpp"

namespace survkit {

struct ReliefParams {
  int k_neighbors = 10;
  int n_sampled = -1;   // -1: every instance
  double sigma = 20.0;  // rank-influence decay exp(-(rank/sigma)^2)
  std::uint64_t seed = 0;
};

struct ReliefWeights {
  std::vector<std::string> names;
  Eigen::VectorXd weights;
  std::vector<int> ranking;  // column indices by descending weight
  ReliefParams params;
  std::string warning;
};

/// Regression Relief: accumulator estimator of the probability-ratio weight
/// for each covariate, target = duration.
///
/// For each sampled instance the k nearest neighbors (Manhattan distance on
/// internally z-scored continuous columns + 0/1 mismatch on binary columns,
/// rank-weighted by exp(-(rank/sigma)^2), normalized per instance) contribute
///   N_dY      += w * diff_target
///   N_dF[f]   += w * diff_f
///   N_dYdF[f] += w * diff_target * diff_f
/// with range-normalized diffs in [0,1], and
///   W_f = N_dYdF[f]/N_dY - (N_dF[f] - N_dYdF[f])/(m - N_dY).
///
/// Sampling and neighbor ties run over a canonical content-based ordering,
/// so results do not depend on instance storage order.
ReliefWeights rrelieff(const Dataset& ds, const ReliefParams& params = {});

ReliefWeights rrelieff(const Dataset& ds, int k, int m, double sigma, std::uint64_t seed);

/// First n of the ranking; ties already broken by schema order.
std::vector<int> top_n(const ReliefWeights& w, int n);

/// CSV: name, weight, rank.
void write_weights_csv(const ReliefWeights& w, const std::string& path);

}  // namespace survkit
