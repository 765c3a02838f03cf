#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selemb/loaders.hpp"

namespace selemb::nn {

// Dense row-major tensor of doubles. All arithmetic in this module is
// double precision.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s);

  size_t numel() const { return data.size(); }
  size_t dim(size_t i) const { return shape[i]; }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  bool finite() const;
};

// ---- layer primitives -------------------------------------------------
// Shapes: activations (B, C, W); conv weights (Co, Ci, K); linear (Out, In).

Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& bias);
// d_x may be null for the first layer.
void conv1d_backward(const Tensor& x, const Tensor& w, const Tensor& d_out, Tensor& d_w,
                     Tensor& d_bias, Tensor* d_x);

struct BatchNormCache {
  Tensor xhat;
  std::vector<double> invstd;
};

struct BatchNormState {
  Tensor gamma, beta;
  Tensor running_mean, running_var;
};

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

// Train mode normalizes per channel over (batch, width) with batch
// statistics and, unless frozen, folds them into the running stats.
Tensor batchnorm_forward_train(const Tensor& x, BatchNormState& state, BatchNormCache& cache,
                               bool update_running_stats = true);
Tensor batchnorm_forward_eval(const Tensor& x, const BatchNormState& state);
void batchnorm_backward(const Tensor& d_out, const BatchNormCache& cache, const Tensor& gamma,
                        Tensor& d_gamma, Tensor& d_beta, Tensor& d_x);

Tensor relu_forward(const Tensor& x);
void relu_backward(const Tensor& activation, const Tensor& d_out, Tensor& d_x);

// Bin b covers input positions [floor(b*W/out), floor((b+1)*W/out)); bins
// tile the width exactly. Requires W >= out_width.
Tensor adaptive_max_pool1d_forward(const Tensor& x, size_t out_width, std::vector<size_t>* argmax);
void adaptive_max_pool1d_backward(const Tensor& d_out, const std::vector<size_t>& argmax,
                                  Tensor& d_x);

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& bias);
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& d_out, Tensor& d_w,
                     Tensor& d_bias, Tensor& d_x);

// Row-wise softmax (max-shifted) and mean cross-entropy; labels are 0-based.
Tensor softmax_rows(const Tensor& logits);
double cross_entropy_mean(const Tensor& probs, const std::vector<int>& labels);
Tensor cross_entropy_backward(const Tensor& probs, const std::vector<int>& labels);

// ---- the network ------------------------------------------------------

struct CnnConfig {
  size_t in_channels = 1;
  size_t conv1_filters = 16;
  size_t conv1_kernel = 3;
  size_t conv2_filters = 32;
  size_t conv2_kernel = 3;
  size_t pool_out = 10;
  int n_c = 0;

  size_t flatten_width() const { return conv2_filters * pool_out; }
  size_t min_input_width() const { return conv1_kernel + conv2_kernel - 2 + pool_out; }
  size_t parameter_count() const;
};

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

// Conv - BN - ReLU, Conv - BN - ReLU - AdaptiveMaxPool, Linear. Weights are
// seeded uniform in +-sqrt(1/fan_in); gamma 1, beta 0.
class Cnn {
 public:
  Cnn(const CnnConfig& config, uint64_t seed);

  const CnnConfig& config() const { return config_; }

  // Training path; caches the intermediates backward() consumes.
  // `update_running_stats=false` leaves the model state untouched, which is
  // what gradient checking needs.
  Tensor forward_train(const Tensor& batch, bool update_running_stats = true);
  // Softmax cross-entropy, mean over the batch; caches probabilities.
  double loss(const Tensor& logits, const std::vector<int>& labels);
  void zero_grads();
  void backward(const std::vector<int>& labels);

  // Pure inference (eval-mode batchnorm, no caches, no mutation).
  Tensor infer(const Tensor& batch) const;

  std::vector<ParamRef> params();
  // Parameters plus batchnorm running stats; used for best-epoch snapshots
  // and checkpoints.
  std::vector<Tensor> state() const;
  void set_state(const std::vector<Tensor>& state);

 private:
  CnnConfig config_;

  Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_, fc_w_, fc_b_;
  Tensor d_conv1_w_, d_conv1_b_, d_conv2_w_, d_conv2_b_, d_fc_w_, d_fc_b_;
  BatchNormState bn1_, bn2_;
  Tensor d_bn1_gamma_, d_bn1_beta_, d_bn2_gamma_, d_bn2_beta_;

  // forward caches
  Tensor in_, act1_, act2_, pooled_, probs_;
  BatchNormCache bn1_cache_, bn2_cache_;
  std::vector<size_t> pool_argmax_;
};

class Adam {
 public:
  Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double epsilon);
  void step();

 private:
  std::vector<ParamRef> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, epsilon_;
  uint64_t t_ = 0;
};

// ---- training and evaluation -------------------------------------------

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  size_t batch_size = 64;
  size_t epochs = 30;
  uint64_t seed = 0;
  size_t repeats = 10;  // repeat runs; consumed by bench

  void validate() const;
};

struct EvalMetrics {
  double accuracy = 0.0;
  size_t correct = 0;
  size_t total = 0;
  std::vector<double> per_class_accuracy;  // index j-1; 0 when class absent
  std::vector<size_t> per_class_total;
};

struct TrainMetrics {
  double train_time_s = 0.0;
  std::vector<double> epoch_loss;          // mean batch loss per epoch
  std::vector<double> epoch_val_accuracy;  // eval-mode val accuracy per epoch
  double best_val_accuracy = 0.0;
  size_t best_epoch = 0;  // 1-based
};

// Mini-batch optimization with seeded per-epoch shuffling. Restores the
// parameters from the epoch with the best validation accuracy (ties go to
// the earliest). Throws Error(divergence) on non-finite loss.
TrainMetrics train(Cnn& model, const loaders::Dataset& train_set, const loaders::Dataset& val_set,
                   const TrainConfig& config);

EvalMetrics evaluate(const Cnn& model, const loaders::Dataset& test_set,
                     size_t batch_size = 128);

// Copies a [begin, end) range of dataset examples into a (B, C, W) batch.
Tensor assemble_batch(const loaders::Dataset& dataset, const std::vector<size_t>& indices,
                      size_t begin, size_t end, std::vector<int>* labels);

// ---- checkpoints (layout in docs/FORMATS.md) ----------------------------

void save_checkpoint(const Cnn& model, const std::filesystem::path& path);
Cnn load_checkpoint(const std::filesystem::path& path);

}  // namespace selemb::nn
