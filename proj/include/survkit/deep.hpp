#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survkit/dataset.hpp"
#include "survkit/rng.hpp"

namespace survkit {

enum class Activation { relu, tanh_ };

struct NetworkSpec {
  int input_width = 0;
  int hidden_layers = 3;
  int hidden_units = 90;
  double dropout_rate = 0.1;   // [0,1), hidden layers only
  bool use_batch_norm = true;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double lr_decay = 0.001;     // lr at epoch e (0-based) = lr / (1 + decay*e)
  int epochs = 100;
  int folds = 10;
  double momentum = 0.0;       // optional heavy-ball term, off by default
  int batch_size = 0;          // 0: full-dataset risk sets each epoch
  double bn_momentum = 0.1;    // running-stats update rate
  std::uint64_t seed = 0;
};

struct TrainLogRow {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;          // loss at epoch start, before the update
  double val_cindex = 0.0;    // NaN when no validation split given
};

struct LayerParams {
  Eigen::MatrixXd w;   // units x fan_in
  Eigen::VectorXd b;
  Eigen::VectorXd bn_gamma, bn_beta;          // trained when batch norm on
  Eigen::VectorXd bn_running_mean, bn_running_var;
};

struct LayerGrads {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
  Eigen::VectorXd bn_gamma, bn_beta;
};

struct Gradients {
  std::vector<LayerGrads> hidden;
  Eigen::VectorXd out_w;
  double out_b = 0.0;
};

/// Train-mode forward state consumed by backward(). Invalidated by any
/// weight update.
struct ForwardCache {
  std::uint64_t params_version = ~0ull;
  Eigen::MatrixXd input;
  struct LayerCache {
    Eigen::MatrixXd affine;       // pre-batch-norm
    Eigen::VectorXd batch_mean, batch_var;
    Eigen::MatrixXd normalized;   // (affine - mean)/sqrt(var+eps)
    Eigen::MatrixXd pre_activation;
    Eigen::MatrixXd activated;
    Eigen::MatrixXd dropout_mask;  // scale 1/(1-p) kept inside the mask
    Eigen::MatrixXd output;
  };
  std::vector<LayerCache> layers;
};

/// Dense feed-forward log-partial-hazard g_w(Z): per hidden layer
/// affine -> batch norm -> activation -> dropout; one linear output unit.
class DeepCoxModel {
 public:
  DeepCoxModel() = default;

  /// Fresh network, symmetric uniform fan-in init, seed-controlled.
  static DeepCoxModel init(const NetworkSpec& spec);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<LayerParams>& hidden() const { return hidden_; }
  const Eigen::VectorXd& output_w() const { return out_w_; }
  double output_b() const { return out_b_; }
  std::uint64_t params_version() const { return version_; }

  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  void set_covariate_names(std::vector<std::string> names);

  /// Inference mode: no dropout, running batch-norm statistics. Pure.
  Eigen::VectorXd forward(const Eigen::MatrixXd& z) const;

  /// Train mode: batch statistics (and running-stat update), fresh dropout
  /// masks from rng; fills the cache backward() needs.
  Eigen::VectorXd forward_train(const Eigen::MatrixXd& z, Rng& rng, ForwardCache& cache,
                                double bn_momentum = 0.1);

  /// Exact gradient of a scalar loss given dloss/dg, chained through dropout,
  /// activation, batch norm and the affine maps. Throws on a stale cache.
  Gradients backward(const ForwardCache& cache, const Eigen::VectorXd& dloss_dg) const;

  void apply_update(const Gradients& g, double lr, double momentum = 0.0,
                    Gradients* velocity = nullptr);

  /// Flat views of every trained parameter, for serialization and the
  /// finite-difference oracle.
  Eigen::VectorXd get_parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  Eigen::VectorXd flatten(const Gradients& g) const;

  const std::vector<TrainLogRow>& train_log() const { return train_log_; }
  std::vector<TrainLogRow>& mutable_train_log() { return train_log_; }

  std::string to_json() const;
  static DeepCoxModel from_json(const std::string& text);

 private:
  NetworkSpec spec_;
  std::vector<LayerParams> hidden_;
  Eigen::VectorXd out_w_;
  double out_b_ = 0.0;
  std::vector<std::string> covariate_names_;
  std::vector<TrainLogRow> train_log_;
  std::uint64_t version_ = 0;
};

/// Average negative log partial likelihood of the batch (Breslow ties,
/// log-sum-exp stabilized); N = number of events.
double cox_loss(const Eigen::VectorXd& g, const Eigen::VectorXd& durations,
                const std::vector<int>& events);

/// dL/dg_j = -(1/N) [ 1{event_j} - sum_{events k: T_k <= T_j} exp(g_j)/sum_{i in R_k} exp(g_i) ].
Eigen::VectorXd cox_loss_grad(const Eigen::VectorXd& g, const Eigen::VectorXd& durations,
                              const std::vector<int>& events);

/// Full-batch (default) gradient descent with the lr/(1+decay*e) schedule.
/// Records per-epoch loss and, when a validation split is given, its
/// concordance index. Deterministic per cfg.seed.
DeepCoxModel train(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg,
                   const Dataset* validation = nullptr);

struct CvResult {
  double mean_val_cindex = 0.0;
  std::vector<double> fold_cindex;
};

/// Event-stratified k-fold cross-validation of one configuration.
CvResult cross_validate(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg);

struct IntRange { int lo = 0, hi = 0; };
struct RealRange { double lo = 0.0, hi = 0.0; };

struct HyperSearchSpace {
  IntRange n_top{0, 0};  // 0,0: use every column (no relief front end)
  IntRange hidden_layers{1, 3};
  IntRange hidden_units{30, 90};
  RealRange dropout_rate{0.0, 0.3};
  std::vector<bool> use_batch_norm{false, true};
  RealRange learning_rate{1e-4, 1e-2};
  RealRange lr_decay{0.0, 1e-2};
  int trials = 10;
  std::uint64_t seed = 0;
  int epochs = 100;
  int folds = 10;
};

struct TrialRecord {
  int index = 0;
  int n_top = 0;
  NetworkSpec spec;
  double learning_rate = 0.0;
  double lr_decay = 0.0;
  double mean_val_cindex = 0.0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  int best_index = -1;
  int best_n_top = 0;
  NetworkSpec best_spec;
  TrainConfig best_cfg;
  std::vector<TrialRecord> trials;
};

/// Uniform random search over the declared ranges, scored by mean fold
/// C-index; failed trials are recorded and skipped. `ranking` (covariate
/// indices by importance) drives the n_top front end when its range is set.
SearchResult random_search(const Dataset& ds, const HyperSearchSpace& space,
                           const std::vector<int>* ranking = nullptr);

void write_train_log_csv(const DeepCoxModel& model, const std::string& path);

}  // namespace survkit
