#include "survkit/deep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "survkit/errors.hpp"
#include "survkit/survival.hpp"

namespace survkit {

using nlohmann::json;

namespace {

constexpr double kBnEps = 1e-5;

void check_spec(const NetworkSpec& spec) {
  if (spec.input_width < 1) throw ValidationError("network: input width must be positive");
  if (spec.hidden_layers < 0) throw ValidationError("network: hidden_layers must be >= 0");
  if (spec.hidden_layers > 0 && spec.hidden_units < 1)
    throw ValidationError("network: hidden_units must be positive");
  if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0))
    throw ValidationError("network: dropout_rate must be in [0,1)");
}

double activate(double x, Activation a) {
  return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

double activate_grad(double pre, double post, Activation a) {
  return a == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

}  // namespace

DeepCoxModel DeepCoxModel::init(const NetworkSpec& spec) {
  check_spec(spec);
  DeepCoxModel m;
  m.spec_ = spec;
  Rng rng(spec.seed);
  int fan_in = spec.input_width;
  for (int l = 0; l < spec.hidden_layers; ++l) {
    LayerParams p;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    p.w.resize(spec.hidden_units, fan_in);
    for (Eigen::Index i = 0; i < p.w.rows(); ++i)
      for (Eigen::Index j = 0; j < p.w.cols(); ++j) p.w(i, j) = rng.uniform(-bound, bound);
    p.b.resize(spec.hidden_units);
    for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b[i] = rng.uniform(-bound, bound);
    p.bn_gamma = Eigen::VectorXd::Ones(spec.hidden_units);
    p.bn_beta = Eigen::VectorXd::Zero(spec.hidden_units);
    p.bn_running_mean = Eigen::VectorXd::Zero(spec.hidden_units);
    p.bn_running_var = Eigen::VectorXd::Ones(spec.hidden_units);
    m.hidden_.push_back(std::move(p));
    fan_in = spec.hidden_units;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  m.out_w_.resize(fan_in);
  for (Eigen::Index i = 0; i < m.out_w_.size(); ++i) m.out_w_[i] = rng.uniform(-bound, bound);
  m.out_b_ = rng.uniform(-bound, bound);
  return m;
}

void DeepCoxModel::set_covariate_names(std::vector<std::string> names) {
  if (!names.empty() && static_cast<int>(names.size()) != spec_.input_width)
    throw ValidationError("covariate names do not match input width");
  covariate_names_ = std::move(names);
}

Eigen::VectorXd DeepCoxModel::forward(const Eigen::MatrixXd& z) const {
  if (z.cols() != spec_.input_width)
    throw ValidationError("forward: batch width " + std::to_string(z.cols()) +
                          " != input width " + std::to_string(spec_.input_width));
  Eigen::MatrixXd h = z;
  for (const auto& p : hidden_) {
    Eigen::MatrixXd a = (h * p.w.transpose()).rowwise() + p.b.transpose();
    if (spec_.use_batch_norm) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double inv = 1.0 / std::sqrt(p.bn_running_var[c] + kBnEps);
        a.col(c) = ((a.col(c).array() - p.bn_running_mean[c]) * inv) * p.bn_gamma[c] +
                   p.bn_beta[c];
      }
    }
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = activate(a(r, c), spec_.activation);
    h = std::move(a);
  }
  return (h * out_w_).array() + out_b_;
}

Eigen::VectorXd DeepCoxModel::forward_train(const Eigen::MatrixXd& z, Rng& rng,
                                            ForwardCache& cache, double bn_momentum) {
  if (z.cols() != spec_.input_width)
    throw ValidationError("forward_train: batch width mismatch");
  const Eigen::Index batch = z.rows();
  cache.params_version = version_;
  cache.input = z;
  cache.layers.assign(hidden_.size(), {});

  Eigen::MatrixXd h = z;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    auto& p = hidden_[l];
    auto& c = cache.layers[l];
    c.affine = (h * p.w.transpose()).rowwise() + p.b.transpose();

    if (spec_.use_batch_norm) {
      c.batch_mean = c.affine.colwise().mean();
      c.batch_var.resize(c.affine.cols());
      for (Eigen::Index j = 0; j < c.affine.cols(); ++j)
        c.batch_var[j] = (c.affine.col(j).array() - c.batch_mean[j]).square().sum() / batch;
      c.normalized.resize(batch, c.affine.cols());
      for (Eigen::Index j = 0; j < c.affine.cols(); ++j) {
        const double inv = 1.0 / std::sqrt(c.batch_var[j] + kBnEps);
        c.normalized.col(j) = (c.affine.col(j).array() - c.batch_mean[j]) * inv;
      }
      c.pre_activation.resize(batch, c.affine.cols());
      for (Eigen::Index j = 0; j < c.affine.cols(); ++j)
        c.pre_activation.col(j) = c.normalized.col(j) * p.bn_gamma[j] +
                                  Eigen::VectorXd::Constant(batch, p.bn_beta[j]);
      p.bn_running_mean = (1.0 - bn_momentum) * p.bn_running_mean +
                          bn_momentum * c.batch_mean;
      p.bn_running_var = (1.0 - bn_momentum) * p.bn_running_var + bn_momentum * c.batch_var;
    } else {
      c.pre_activation = c.affine;
    }

    c.activated = c.pre_activation.unaryExpr(
        [&](double x) { return activate(x, spec_.activation); });

    if (spec_.dropout_rate > 0.0) {
      const double keep = 1.0 - spec_.dropout_rate;
      c.dropout_mask.resize(batch, c.activated.cols());
      for (Eigen::Index r = 0; r < batch; ++r)
        for (Eigen::Index j = 0; j < c.activated.cols(); ++j)
          c.dropout_mask(r, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
      c.output = c.activated.cwiseProduct(c.dropout_mask);
    } else {
      c.output = c.activated;
    }
    h = c.output;
  }
  return (h * out_w_).array() + out_b_;
}

Gradients DeepCoxModel::backward(const ForwardCache& cache,
                                 const Eigen::VectorXd& dloss_dg) const {
  if (cache.params_version != version_)
    throw ValidationError("backward: stale forward cache (weights changed since forward)");
  if (cache.layers.size() != hidden_.size())
    throw ValidationError("backward: cache does not match network depth");
  const Eigen::Index batch = cache.input.rows();
  if (dloss_dg.size() != batch) throw ValidationError("backward: dloss size mismatch");

  Gradients g;
  g.hidden.resize(hidden_.size());

  const Eigen::MatrixXd& last =
      hidden_.empty() ? cache.input : cache.layers.back().output;
  g.out_w = last.transpose() * dloss_dg;
  g.out_b = dloss_dg.sum();

  Eigen::MatrixXd dh = dloss_dg * out_w_.transpose();  // batch x units

  for (int l = static_cast<int>(hidden_.size()) - 1; l >= 0; --l) {
    const auto& p = hidden_[l];
    const auto& c = cache.layers[l];
    auto& gl = g.hidden[l];

    if (spec_.dropout_rate > 0.0) dh = dh.cwiseProduct(c.dropout_mask);

    Eigen::MatrixXd dpre(batch, dh.cols());
    for (Eigen::Index r = 0; r < batch; ++r)
      for (Eigen::Index j = 0; j < dh.cols(); ++j)
        dpre(r, j) = dh(r, j) * activate_grad(c.pre_activation(r, j), c.activated(r, j),
                                              spec_.activation);

    Eigen::MatrixXd daffine;
    if (spec_.use_batch_norm) {
      gl.bn_gamma = (dpre.cwiseProduct(c.normalized)).colwise().sum().transpose();
      gl.bn_beta = dpre.colwise().sum().transpose();
      daffine.resize(batch, dpre.cols());
      const double bn = static_cast<double>(batch);
      for (Eigen::Index j = 0; j < dpre.cols(); ++j) {
        const Eigen::VectorXd dxhat = dpre.col(j) * p.bn_gamma[j];
        const double inv = 1.0 / std::sqrt(c.batch_var[j] + kBnEps);
        const double sum_dxhat = dxhat.sum();
        const double sum_dxhat_xhat = dxhat.dot(c.normalized.col(j));
        daffine.col(j) =
            (inv / bn) *
            (bn * dxhat.array() - sum_dxhat - c.normalized.col(j).array() * sum_dxhat_xhat);
      }
    } else {
      gl.bn_gamma = Eigen::VectorXd::Zero(p.bn_gamma.size());
      gl.bn_beta = Eigen::VectorXd::Zero(p.bn_beta.size());
      daffine = dpre;
    }

    const Eigen::MatrixXd& layer_in = l == 0 ? cache.input : cache.layers[l - 1].output;
    gl.w = daffine.transpose() * layer_in;
    gl.b = daffine.colwise().sum().transpose();
    dh = daffine * p.w;
  }
  return g;
}

void DeepCoxModel::apply_update(const Gradients& g, double lr, double momentum,
                                Gradients* velocity) {
  auto step = [&](auto& param, const auto& grad, auto* vel) {
    if (momentum > 0.0 && vel) {
      *vel = momentum * *vel + grad;
      param -= lr * *vel;
    } else {
      param -= lr * grad;
    }
  };
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    step(hidden_[l].w, g.hidden[l].w, velocity ? &velocity->hidden[l].w : nullptr);
    step(hidden_[l].b, g.hidden[l].b, velocity ? &velocity->hidden[l].b : nullptr);
    if (spec_.use_batch_norm) {
      step(hidden_[l].bn_gamma, g.hidden[l].bn_gamma,
           velocity ? &velocity->hidden[l].bn_gamma : nullptr);
      step(hidden_[l].bn_beta, g.hidden[l].bn_beta,
           velocity ? &velocity->hidden[l].bn_beta : nullptr);
    }
  }
  if (momentum > 0.0 && velocity) {
    velocity->out_w = momentum * velocity->out_w + g.out_w;
    out_w_ -= lr * velocity->out_w;
    velocity->out_b = momentum * velocity->out_b + g.out_b;
    out_b_ -= lr * velocity->out_b;
  } else {
    out_w_ -= lr * g.out_w;
    out_b_ -= lr * g.out_b;
  }
  ++version_;
}

Eigen::VectorXd DeepCoxModel::get_parameters() const {
  std::vector<double> flat;
  for (const auto& p : hidden_) {
    flat.insert(flat.end(), p.w.data(), p.w.data() + p.w.size());
    flat.insert(flat.end(), p.b.data(), p.b.data() + p.b.size());
    if (spec_.use_batch_norm) {
      flat.insert(flat.end(), p.bn_gamma.data(), p.bn_gamma.data() + p.bn_gamma.size());
      flat.insert(flat.end(), p.bn_beta.data(), p.bn_beta.data() + p.bn_beta.size());
    }
  }
  flat.insert(flat.end(), out_w_.data(), out_w_.data() + out_w_.size());
  flat.push_back(out_b_);
  return Eigen::Map<Eigen::VectorXd>(flat.data(), flat.size());
}

void DeepCoxModel::set_parameters(const Eigen::VectorXd& flat) {
  Eigen::Index at = 0;
  auto take = [&](double* dst, Eigen::Index count) {
    if (at + count > flat.size()) throw ValidationError("set_parameters: flat vector too short");
    std::copy(flat.data() + at, flat.data() + at + count, dst);
    at += count;
  };
  for (auto& p : hidden_) {
    take(p.w.data(), p.w.size());
    take(p.b.data(), p.b.size());
    if (spec_.use_batch_norm) {
      take(p.bn_gamma.data(), p.bn_gamma.size());
      take(p.bn_beta.data(), p.bn_beta.size());
    }
  }
  take(out_w_.data(), out_w_.size());
  take(&out_b_, 1);
  if (at != flat.size()) throw ValidationError("set_parameters: flat vector too long");
  ++version_;
}

Eigen::VectorXd DeepCoxModel::flatten(const Gradients& g) const {
  std::vector<double> flat;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    const auto& gl = g.hidden[l];
    flat.insert(flat.end(), gl.w.data(), gl.w.data() + gl.w.size());
    flat.insert(flat.end(), gl.b.data(), gl.b.data() + gl.b.size());
    if (spec_.use_batch_norm) {
      flat.insert(flat.end(), gl.bn_gamma.data(), gl.bn_gamma.data() + gl.bn_gamma.size());
      flat.insert(flat.end(), gl.bn_beta.data(), gl.bn_beta.data() + gl.bn_beta.size());
    }
  }
  flat.insert(flat.end(), g.out_w.data(), g.out_w.data() + g.out_w.size());
  flat.push_back(g.out_b);
  return Eigen::Map<Eigen::VectorXd>(flat.data(), flat.size());
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

namespace {

struct RiskSetSweep {
  std::vector<int> order;           // ascending duration
  std::vector<int> group_start;     // tie-group boundaries over `order`
  std::vector<double> group_lse;    // log sum exp(g) over each group's risk set
  std::vector<int> group_events;
  int n_events = 0;

  RiskSetSweep(const Eigen::VectorXd& g, const Eigen::VectorXd& durations,
               const std::vector<int>& events) {
    const int n = static_cast<int>(g.size());
    if (durations.size() != n || static_cast<int>(events.size()) != n)
      throw ValidationError("cox_loss: length mismatch");
    if (!g.allFinite()) throw NumericError("cox_loss: non-finite risk scores");
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return durations[a] < durations[b]; });

    // suffix log-sum-exp with max-shift, walked from the latest time back
    double shift = -std::numeric_limits<double>::infinity();
    double s = 0.0;
    std::vector<double> lse_tmp;
    std::vector<int> starts_tmp, events_tmp;
    int g_end = n;
    while (g_end > 0) {
      int g_start = g_end;
      const double t = durations[order[g_end - 1]];
      int d = 0;
      while (g_start > 0 && durations[order[g_start - 1]] == t) {
        --g_start;
        d += events[order[g_start]];
      }
      for (int k = g_end - 1; k >= g_start; --k) {
        const double v = g[order[k]];
        if (v <= shift) {
          s += std::exp(v - shift);
        } else {
          s = s * (std::isinf(shift) ? 0.0 : std::exp(shift - v)) + 1.0;
          shift = v;
        }
      }
      starts_tmp.push_back(g_start);
      lse_tmp.push_back(shift + std::log(s));
      events_tmp.push_back(d);
      n_events += d;
      g_end = g_start;
    }
    // reverse into ascending-time order
    group_start.assign(starts_tmp.rbegin(), starts_tmp.rend());
    group_lse.assign(lse_tmp.rbegin(), lse_tmp.rend());
    group_events.assign(events_tmp.rbegin(), events_tmp.rend());
    if (n_events == 0) throw ValidationError("cox_loss: batch has no events");
  }
};

}  // namespace

double cox_loss(const Eigen::VectorXd& g, const Eigen::VectorXd& durations,
                const std::vector<int>& events) {
  RiskSetSweep sweep(g, durations, events);
  double sum = 0.0;
  const int n = static_cast<int>(g.size());
  for (std::size_t gi = 0; gi < sweep.group_start.size(); ++gi) {
    const int start = sweep.group_start[gi];
    const int end = gi + 1 < sweep.group_start.size() ? sweep.group_start[gi + 1] : n;
    for (int k = start; k < end; ++k) {
      const int idx = sweep.order[k];
      if (events[idx]) sum += g[idx] - sweep.group_lse[gi];
    }
  }
  return -sum / sweep.n_events;
}

Eigen::VectorXd cox_loss_grad(const Eigen::VectorXd& g, const Eigen::VectorXd& durations,
                              const std::vector<int>& events) {
  RiskSetSweep sweep(g, durations, events);
  const int n = static_cast<int>(g.size());
  const double anchor = sweep.group_lse.front();  // largest risk set, largest lse
  Eigen::VectorXd grad(n);
  double cum = 0.0;  // sum over event groups so far of d_k * exp(anchor - lse_k)
  for (std::size_t gi = 0; gi < sweep.group_start.size(); ++gi) {
    cum += sweep.group_events[gi] * std::exp(anchor - sweep.group_lse[gi]);
    const int start = sweep.group_start[gi];
    const int end = gi + 1 < sweep.group_start.size() ? sweep.group_start[gi + 1] : n;
    for (int k = start; k < end; ++k) {
      const int idx = sweep.order[k];
      const double term = std::exp(g[idx] - anchor) * cum;
      grad[idx] = -(static_cast<double>(events[idx]) - term) / sweep.n_events;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

double validation_cindex(const DeepCoxModel& model, const Dataset& val) {
  const Eigen::VectorXd g = model.forward(val.covariates());
  std::vector<double> risks(g.data(), g.data() + g.size());
  std::vector<double> durations(val.durations().data(),
                                val.durations().data() + val.n());
  return concordance_index(durations, val.events(), risks);
}

}  // namespace

DeepCoxModel train(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg,
                   const Dataset* validation) {
  if (!ds.standardization())
    throw ValidationError("train: dataset must be standardized first");
  if (ds.n_events() < 1) throw ValidationError("train: need at least one event");
  NetworkSpec s = spec;
  if (s.input_width == 0) s.input_width = ds.width();
  if (s.input_width != ds.width())
    throw ValidationError("train: spec input width does not match dataset");
  if (cfg.epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (cfg.learning_rate <= 0.0) throw ValidationError("train: learning rate must be positive");

  DeepCoxModel model = DeepCoxModel::init(s);
  model.set_covariate_names(ds.column_names());
  Rng rng(cfg.seed);

  Gradients velocity;
  if (cfg.momentum > 0.0) {
    // zero-initialized buffers with the right shapes
    ForwardCache cache;
    Eigen::MatrixXd probe = ds.covariates().topRows(std::min(ds.n(), 2));
    Rng probe_rng(0);
    model.forward_train(probe, probe_rng, cache);
    velocity = model.backward(cache, Eigen::VectorXd::Zero(probe.rows()));
  }

  std::vector<int> all(ds.n());
  std::iota(all.begin(), all.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch);

    double epoch_loss = std::numeric_limits<double>::quiet_NaN();
    if (cfg.batch_size <= 0 || cfg.batch_size >= ds.n()) {
      ForwardCache cache;
      const Eigen::VectorXd g = model.forward_train(ds.covariates(), rng, cache,
                                                    cfg.bn_momentum);
      epoch_loss = cox_loss(g, ds.durations(), ds.events());
      if (!std::isfinite(epoch_loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           " (lr " + std::to_string(lr) + ")");
      const Eigen::VectorXd dg = cox_loss_grad(g, ds.durations(), ds.events());
      const Gradients grads = model.backward(cache, dg);
      model.apply_update(grads, lr, cfg.momentum, cfg.momentum > 0 ? &velocity : nullptr);
    } else {
      // mini-batch mode: risk sets restricted to each shuffled batch
      rng.shuffle(all);
      double loss_sum = 0.0;
      int batches = 0;
      for (int at = 0; at < ds.n(); at += cfg.batch_size) {
        const int len = std::min(cfg.batch_size, ds.n() - at);
        std::vector<int> idx(all.begin() + at, all.begin() + at + len);
        Eigen::MatrixXd x(len, ds.width());
        Eigen::VectorXd d(len);
        std::vector<int> e(len);
        for (int i = 0; i < len; ++i) {
          x.row(i) = ds.covariates().row(idx[i]);
          d[i] = ds.durations()[idx[i]];
          e[i] = ds.events()[idx[i]];
        }
        if (std::accumulate(e.begin(), e.end(), 0) == 0) continue;  // no events: skip
        ForwardCache cache;
        const Eigen::VectorXd g = model.forward_train(x, rng, cache, cfg.bn_momentum);
        const double loss = cox_loss(g, d, e);
        if (!std::isfinite(loss))
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             " (lr " + std::to_string(lr) + ")");
        loss_sum += loss;
        ++batches;
        const Gradients grads = model.backward(cache, cox_loss_grad(g, d, e));
        model.apply_update(grads, lr, cfg.momentum, cfg.momentum > 0 ? &velocity : nullptr);
      }
      epoch_loss = batches > 0 ? loss_sum / batches : std::numeric_limits<double>::quiet_NaN();
    }

    TrainLogRow row{epoch, lr, epoch_loss, std::numeric_limits<double>::quiet_NaN()};
    if (validation) {
      try {
        row.val_cindex = validation_cindex(model, *validation);
      } catch (const std::exception&) {
        // fold too small for comparable pairs; leave NaN
      }
    }
    model.mutable_train_log().push_back(row);
  }
  return model;
}

CvResult cross_validate(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg) {
  if (cfg.folds < 2) throw ValidationError("cross_validate: folds must be >= 2");
  // event-stratified fold assignment keeps comparable pairs in every fold
  std::vector<int> ev, cens;
  for (int i = 0; i < ds.n(); ++i) (ds.events()[i] ? ev : cens).push_back(i);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  rng.shuffle(ev);
  rng.shuffle(cens);
  std::vector<std::vector<int>> folds(cfg.folds);
  int at = 0;
  for (int i : ev) folds[at++ % cfg.folds].push_back(i);
  for (int i : cens) folds[at++ % cfg.folds].push_back(i);

  CvResult result;
  double sum = 0.0;
  int counted = 0;
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<int> train_idx;
    for (int g = 0; g < cfg.folds; ++g)
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    std::sort(train_idx.begin(), train_idx.end());
    std::vector<int> val_idx = folds[f];
    std::sort(val_idx.begin(), val_idx.end());
    if (train_idx.empty() || val_idx.empty())
      throw ValidationError("cross_validate: fold without data");

    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = Rng(cfg.seed).spawn(static_cast<std::uint64_t>(f) + 1).next_u64();
    const Dataset train_ds = ds.rows(train_idx);
    const Dataset val_ds = ds.rows(val_idx);
    const DeepCoxModel model = train(train_ds, spec, fold_cfg);
    double ci = std::numeric_limits<double>::quiet_NaN();
    try {
      ci = validation_cindex(model, val_ds);
    } catch (const std::exception&) {
    }
    result.fold_cindex.push_back(ci);
    if (std::isfinite(ci)) {
      sum += ci;
      ++counted;
    }
  }
  if (counted == 0) throw NumericError("cross_validate: no fold produced a concordance index");
  result.mean_val_cindex = sum / counted;
  return result;
}

SearchResult random_search(const Dataset& ds, const HyperSearchSpace& space,
                           const std::vector<int>* ranking) {
  if (space.trials < 1) throw ValidationError("random_search: trials must be >= 1");
  if (space.use_batch_norm.empty())
    throw ValidationError("random_search: use_batch_norm choices empty");

  const bool select_n = !(space.n_top.lo == 0 && space.n_top.hi == 0);
  if (select_n) {
    if (!ranking) throw ValidationError("random_search: n_top range needs a ranking");
    if (space.n_top.lo < 1 || space.n_top.hi > static_cast<int>(ranking->size()) ||
        space.n_top.lo > space.n_top.hi)
      throw ValidationError("random_search: n_top range out of bounds");
  }

  Rng rng(space.seed);
  SearchResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < space.trials; ++t) {
    TrialRecord rec;
    rec.index = t;
    rec.n_top = select_n ? rng.uniform_int(space.n_top.lo, space.n_top.hi) : ds.width();
    NetworkSpec spec;
    spec.input_width = rec.n_top;
    spec.hidden_layers = rng.uniform_int(space.hidden_layers.lo, space.hidden_layers.hi);
    spec.hidden_units = rng.uniform_int(space.hidden_units.lo, space.hidden_units.hi);
    spec.dropout_rate = rng.uniform(space.dropout_rate.lo, space.dropout_rate.hi);
    spec.use_batch_norm =
        space.use_batch_norm[rng.uniform_int(0, static_cast<int>(space.use_batch_norm.size()) - 1)];
    spec.seed = rng.next_u64();
    rec.learning_rate = rng.uniform(space.learning_rate.lo, space.learning_rate.hi);
    rec.lr_decay = rng.uniform(space.lr_decay.lo, space.lr_decay.hi);
    rec.spec = spec;

    TrainConfig cfg;
    cfg.learning_rate = rec.learning_rate;
    cfg.lr_decay = rec.lr_decay;
    cfg.epochs = space.epochs;
    cfg.folds = space.folds;
    cfg.seed = rng.next_u64();

    try {
      Dataset subset = select_n
                           ? select_columns(ds, std::vector<int>(ranking->begin(),
                                                                 ranking->begin() + rec.n_top))
                           : ds;
      rec.mean_val_cindex = cross_validate(subset, spec, cfg).mean_val_cindex;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.mean_val_cindex = std::numeric_limits<double>::quiet_NaN();
    }
    if (!rec.failed && rec.mean_val_cindex > best) {
      best = rec.mean_val_cindex;
      result.best_index = t;
      result.best_spec = spec;
      result.best_n_top = rec.n_top;
      result.best_cfg = cfg;
    }
    result.trials.push_back(std::move(rec));
  }
  if (result.best_index < 0) throw NumericError("random_search: every trial failed");
  return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

json mat_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat(m.size());
  Eigen::Map<Eigen::MatrixXd>(flat.data(), m.rows(), m.cols()) = m;
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const auto flat = j.at("data").get<std::vector<double>>();
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw ValidationError("deep model JSON: matrix size mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), rows, cols);
}

}  // namespace

std::string DeepCoxModel::to_json() const {
  json j;
  j["format_version"] = 1;
  j["type"] = "deep_cox";
  j["spec"] = {{"input_width", spec_.input_width},
               {"hidden_layers", spec_.hidden_layers},
               {"hidden_units", spec_.hidden_units},
               {"dropout_rate", spec_.dropout_rate},
               {"use_batch_norm", spec_.use_batch_norm},
               {"activation", spec_.activation == Activation::relu ? "relu" : "tanh"},
               {"seed", spec_.seed}};
  j["covariates"] = covariate_names_;
  json layers = json::array();
  for (const auto& p : hidden_) {
    layers.push_back({{"w", mat_to_json(p.w)},
                      {"b", vec_to_json(p.b)},
                      {"bn_gamma", vec_to_json(p.bn_gamma)},
                      {"bn_beta", vec_to_json(p.bn_beta)},
                      {"bn_running_mean", vec_to_json(p.bn_running_mean)},
                      {"bn_running_var", vec_to_json(p.bn_running_var)}});
  }
  j["hidden"] = layers;
  j["out"] = {{"w", vec_to_json(out_w_)}, {"b", out_b_}};
  return j.dump(2);
}

DeepCoxModel DeepCoxModel::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("deep model JSON: ") + e.what());
  }
  if (j.value("type", "") != "deep_cox")
    throw ValidationError("deep model JSON: type != deep_cox");
  DeepCoxModel m;
  const auto& s = j.at("spec");
  m.spec_.input_width = s.at("input_width").get<int>();
  m.spec_.hidden_layers = s.at("hidden_layers").get<int>();
  m.spec_.hidden_units = s.at("hidden_units").get<int>();
  m.spec_.dropout_rate = s.at("dropout_rate").get<double>();
  m.spec_.use_batch_norm = s.at("use_batch_norm").get<bool>();
  m.spec_.activation =
      s.at("activation").get<std::string>() == "tanh" ? Activation::tanh_ : Activation::relu;
  m.spec_.seed = s.at("seed").get<std::uint64_t>();
  if (j.contains("covariates"))
    m.covariate_names_ = j["covariates"].get<std::vector<std::string>>();
  for (const auto& lj : j.at("hidden")) {
    LayerParams p;
    p.w = mat_from_json(lj.at("w"));
    p.b = vec_from_json(lj.at("b"));
    p.bn_gamma = vec_from_json(lj.at("bn_gamma"));
    p.bn_beta = vec_from_json(lj.at("bn_beta"));
    p.bn_running_mean = vec_from_json(lj.at("bn_running_mean"));
    p.bn_running_var = vec_from_json(lj.at("bn_running_var"));
    m.hidden_.push_back(std::move(p));
  }
  if (static_cast<int>(m.hidden_.size()) != m.spec_.hidden_layers)
    throw ValidationError("deep model JSON: layer count mismatch");
  m.out_w_ = vec_from_json(j.at("out").at("w"));
  m.out_b_ = j.at("out").at("b").get<double>();
  return m;
}

void write_train_log_csv(const DeepCoxModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  out << "epoch,learning_rate,loss,val_cindex\n";
  for (const auto& r : model.train_log()) {
    out << r.epoch << "," << r.lr << "," << r.loss << ",";
    if (std::isfinite(r.val_cindex)) out << r.val_cindex;
    out << "\n";
  }
}

}  // namespace survkit
