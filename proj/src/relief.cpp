#include "survkit/relief.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "survkit/errors.hpp"
#include "survkit/rng.hpp"

namespace survkit {

namespace {

// Total order on instance content; makes sampling and tie-breaks independent
// of storage order.
std::vector<int> canonical_order(const Dataset& ds) {
  std::vector<int> order(ds.n());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (ds.durations()[a] != ds.durations()[b]) return ds.durations()[a] < ds.durations()[b];
    if (ds.events()[a] != ds.events()[b]) return ds.events()[a] < ds.events()[b];
    for (int c = 0; c < ds.width(); ++c) {
      const double va = ds.covariates()(a, c), vb = ds.covariates()(b, c);
      if (va != vb) return va < vb;
    }
    return false;
  });
  return order;
}

}  // namespace

ReliefWeights rrelieff(const Dataset& ds, const ReliefParams& params) {
  const int n = ds.n();
  const int p = ds.width();
  const int k = params.k_neighbors;
  if (k < 1) throw ValidationError("rrelieff: k must be positive");
  if (k >= n) throw ValidationError("rrelieff: need at least k+1 instances");
  if (params.sigma <= 0.0) throw ValidationError("rrelieff: sigma must be positive");

  ReliefWeights out;
  out.names = ds.column_names();
  out.params = params;
  out.weights = Eigen::VectorXd::Zero(p);

  const auto& is_binary = ds.schema().column_is_binary();

  // z-scored continuous view for the neighbor metric
  Eigen::MatrixXd zx = ds.covariates();
  for (int c = 0; c < p; ++c) {
    if (is_binary[c]) continue;
    const double mean = zx.col(c).mean();
    const double sd = std::sqrt((zx.col(c).array() - mean).square().sum() / n);
    if (sd > 0.0) zx.col(c) = (zx.col(c).array() - mean) / sd;
  }

  // range normalization for the diff accumulators
  Eigen::VectorXd range(p);
  for (int c = 0; c < p; ++c) {
    const double lo = ds.covariates().col(c).minCoeff();
    const double hi = ds.covariates().col(c).maxCoeff();
    range[c] = hi - lo;
  }
  const double t_lo = ds.durations().minCoeff();
  const double t_hi = ds.durations().maxCoeff();
  const double t_range = t_hi - t_lo;
  if (t_range <= 0.0) {
    out.warning = "rrelieff: all target values identical; weights are 0";
    std::vector<int> rank_all(p);
    std::iota(rank_all.begin(), rank_all.end(), 0);
    out.ranking = rank_all;
    return out;
  }

  auto diff_col = [&](int c, int a, int b) -> double {
    if (is_binary[c]) return ds.covariates()(a, c) != ds.covariates()(b, c) ? 1.0 : 0.0;
    if (range[c] <= 0.0) return 0.0;
    return std::abs(ds.covariates()(a, c) - ds.covariates()(b, c)) / range[c];
  };

  // rank weights, normalized to sum 1 over the k neighbors
  std::vector<double> rank_w(k);
  double rank_sum = 0.0;
  for (int r = 0; r < k; ++r) {
    rank_w[r] = std::exp(-std::pow((r + 1) / params.sigma, 2.0));
    rank_sum += rank_w[r];
  }
  for (double& w : rank_w) w /= rank_sum;

  const auto canon = canonical_order(ds);
  std::vector<int> canon_rank(n);
  for (int i = 0; i < n; ++i) canon_rank[canon[i]] = i;

  // sample m instances over the canonical order
  std::vector<int> sampled;
  const int m = params.n_sampled;
  if (m < 0 || m >= n) {
    sampled = canon;
  } else {
    if (m == 0) throw ValidationError("rrelieff: n_sampled must be nonzero");
    Rng rng(params.seed);
    for (int pick : rng.sample_without_replacement(n, m)) sampled.push_back(canon[pick]);
  }

  double n_dy = 0.0;
  Eigen::VectorXd n_df = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd n_dydf = Eigen::VectorXd::Zero(p);

  std::vector<std::pair<double, int>> dist(n);
  for (const int i : sampled) {
    // linear-scan k nearest, ties by canonical rank
    int cnt = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (int c = 0; c < p; ++c)
        d += is_binary[c] ? (ds.covariates()(i, c) != ds.covariates()(j, c) ? 1.0 : 0.0)
                          : std::abs(zx(i, c) - zx(j, c));
      dist[cnt++] = {d, canon_rank[j]};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.begin() + cnt);
    for (int r = 0; r < k; ++r) {
      const int j = canon[dist[r].second];
      const double w = rank_w[r];
      const double dy = std::abs(ds.durations()[i] - ds.durations()[j]) / t_range;
      n_dy += w * dy;
      for (int c = 0; c < p; ++c) {
        const double df = diff_col(c, i, j);
        n_df[c] += w * df;
        n_dydf[c] += w * dy * df;
      }
    }
  }

  const double m_total = static_cast<double>(sampled.size());
  if (n_dy <= 0.0 || n_dy >= m_total) {
    out.warning = "rrelieff: degenerate target-difference mass; weights are 0";
  } else {
    for (int c = 0; c < p; ++c)
      out.weights[c] = n_dydf[c] / n_dy - (n_df[c] - n_dydf[c]) / (m_total - n_dy);
  }

  out.ranking.resize(p);
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](int a, int b) {
    return out.weights[a] > out.weights[b];  // ties keep schema order
  });
  return out;
}

ReliefWeights rrelieff(const Dataset& ds, int k, int m, double sigma, std::uint64_t seed) {
  return rrelieff(ds, ReliefParams{k, m, sigma, seed});
}

std::vector<int> top_n(const ReliefWeights& w, int n) {
  if (n < 1 || n > static_cast<int>(w.ranking.size()))
    throw ValidationError("top_n: n out of range");
  return std::vector<int>(w.ranking.begin(), w.ranking.begin() + n);
}

void write_weights_csv(const ReliefWeights& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  out << "name,weight,rank\n";
  std::vector<int> rank_of(w.ranking.size());
  for (std::size_t r = 0; r < w.ranking.size(); ++r) rank_of[w.ranking[r]] = static_cast<int>(r) + 1;
  for (std::size_t c = 0; c < w.names.size(); ++c)
    out << w.names[c] << "," << w.weights[c] << "," << rank_of[c] << "\n";
}

}  // namespace survkit
