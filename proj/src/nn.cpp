#include "selemb/nn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "selemb/errors.hpp"
#include "selemb/rng.hpp"

namespace selemb::nn {

namespace {

size_t numel_of(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

void check_shape(const Tensor& t, size_t dims, const char* what) {
  if (t.shape.size() != dims) {
    raise(ErrorCode::invalid_argument, std::string(what) + ": expected " + std::to_string(dims) +
                                           "-d tensor, got " + std::to_string(t.shape.size()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<size_t> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}

bool Tensor::finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---- conv1d -------------------------------------------------------------

Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& bias) {
  check_shape(x, 3, "conv1d input");
  check_shape(w, 3, "conv1d weight");
  const size_t batch = x.dim(0), ci = x.dim(1), width = x.dim(2);
  const size_t co = w.dim(0), k = w.dim(2);
  if (w.dim(1) != ci) {
    raise(ErrorCode::invalid_argument, "conv1d: weight expects " + std::to_string(w.dim(1)) +
                                           " input channels, batch has " + std::to_string(ci));
  }
  if (width < k) {
    raise(ErrorCode::invalid_argument, "conv1d: input width " + std::to_string(width) +
                                           " shorter than kernel " + std::to_string(k));
  }
  const size_t wo = width - k + 1;
  Tensor out({batch, co, wo});
  for (size_t b = 0; b < batch; ++b) {
    for (size_t f = 0; f < co; ++f) {
      double* o = out.ptr() + (b * co + f) * wo;
      const double bv = bias.data[f];
      for (size_t t = 0; t < wo; ++t) o[t] = bv;
      for (size_t c = 0; c < ci; ++c) {
        const double* xi = x.ptr() + (b * ci + c) * width;
        const double* wf = w.ptr() + (f * ci + c) * k;
        for (size_t d = 0; d < k; ++d) {
          const double wv = wf[d];
          const double* xs = xi + d;
          for (size_t t = 0; t < wo; ++t) o[t] += wv * xs[t];
        }
      }
    }
  }
  return out;
}

void conv1d_backward(const Tensor& x, const Tensor& w, const Tensor& d_out, Tensor& d_w,
                     Tensor& d_bias, Tensor* d_x) {
  const size_t batch = x.dim(0), ci = x.dim(1), width = x.dim(2);
  const size_t co = w.dim(0), k = w.dim(2);
  const size_t wo = width - k + 1;
  if (d_x) d_x->fill(0.0);
  for (size_t b = 0; b < batch; ++b) {
    for (size_t f = 0; f < co; ++f) {
      const double* go = d_out.ptr() + (b * co + f) * wo;
      double acc = 0.0;
      for (size_t t = 0; t < wo; ++t) acc += go[t];
      d_bias.data[f] += acc;
      for (size_t c = 0; c < ci; ++c) {
        const double* xi = x.ptr() + (b * ci + c) * width;
        double* gw = d_w.ptr() + (f * ci + c) * k;
        for (size_t d = 0; d < k; ++d) {
          const double* xs = xi + d;
          double dot = 0.0;
          for (size_t t = 0; t < wo; ++t) dot += go[t] * xs[t];
          gw[d] += dot;
        }
        if (d_x) {
          double* gx = d_x->ptr() + (b * ci + c) * width;
          const double* wf = w.ptr() + (f * ci + c) * k;
          for (size_t d = 0; d < k; ++d) {
            const double wv = wf[d];
            double* gs = gx + d;
            for (size_t t = 0; t < wo; ++t) gs[t] += wv * go[t];
          }
        }
      }
    }
  }
}

// ---- batchnorm ----------------------------------------------------------

Tensor batchnorm_forward_train(const Tensor& x, BatchNormState& state, BatchNormCache& cache,
                               bool update_running_stats) {
  check_shape(x, 3, "batchnorm input");
  const size_t batch = x.dim(0), channels = x.dim(1), width = x.dim(2);
  const double n = static_cast<double>(batch * width);
  Tensor out(x.shape);
  cache.xhat = Tensor(x.shape);
  cache.invstd.assign(channels, 0.0);
  for (size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (size_t b = 0; b < batch; ++b) {
      const double* xi = x.ptr() + (b * channels + c) * width;
      for (size_t t = 0; t < width; ++t) mean += xi[t];
    }
    mean /= n;
    double var = 0.0;
    for (size_t b = 0; b < batch; ++b) {
      const double* xi = x.ptr() + (b * channels + c) * width;
      for (size_t t = 0; t < width; ++t) var += (xi[t] - mean) * (xi[t] - mean);
    }
    var /= n;
    const double invstd = 1.0 / std::sqrt(var + kBatchNormEps);
    cache.invstd[c] = invstd;
    const double g = state.gamma.data[c], be = state.beta.data[c];
    for (size_t b = 0; b < batch; ++b) {
      const double* xi = x.ptr() + (b * channels + c) * width;
      double* xh = cache.xhat.ptr() + (b * channels + c) * width;
      double* o = out.ptr() + (b * channels + c) * width;
      for (size_t t = 0; t < width; ++t) {
        xh[t] = (xi[t] - mean) * invstd;
        o[t] = g * xh[t] + be;
      }
    }
    if (update_running_stats) {
      // running variance uses the unbiased estimate when possible
      const double unbiased = n > 1.0 ? var * n / (n - 1.0) : var;
      state.running_mean.data[c] =
          (1.0 - kBatchNormMomentum) * state.running_mean.data[c] + kBatchNormMomentum * mean;
      state.running_var.data[c] =
          (1.0 - kBatchNormMomentum) * state.running_var.data[c] + kBatchNormMomentum * unbiased;
    }
  }
  return out;
}

Tensor batchnorm_forward_eval(const Tensor& x, const BatchNormState& state) {
  check_shape(x, 3, "batchnorm input");
  const size_t batch = x.dim(0), channels = x.dim(1), width = x.dim(2);
  Tensor out(x.shape);
  for (size_t c = 0; c < channels; ++c) {
    const double invstd = 1.0 / std::sqrt(state.running_var.data[c] + kBatchNormEps);
    const double mean = state.running_mean.data[c];
    const double g = state.gamma.data[c], be = state.beta.data[c];
    for (size_t b = 0; b < batch; ++b) {
      const double* xi = x.ptr() + (b * channels + c) * width;
      double* o = out.ptr() + (b * channels + c) * width;
      for (size_t t = 0; t < width; ++t) o[t] = g * (xi[t] - mean) * invstd + be;
    }
  }
  return out;
}

void batchnorm_backward(const Tensor& d_out, const BatchNormCache& cache, const Tensor& gamma,
                        Tensor& d_gamma, Tensor& d_beta, Tensor& d_x) {
  const size_t batch = d_out.dim(0), channels = d_out.dim(1), width = d_out.dim(2);
  const double n = static_cast<double>(batch * width);
  for (size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (size_t b = 0; b < batch; ++b) {
      const double* dy = d_out.ptr() + (b * channels + c) * width;
      const double* xh = cache.xhat.ptr() + (b * channels + c) * width;
      for (size_t t = 0; t < width; ++t) {
        sum_dy += dy[t];
        sum_dy_xhat += dy[t] * xh[t];
      }
    }
    d_gamma.data[c] += sum_dy_xhat;
    d_beta.data[c] += sum_dy;
    const double scale = gamma.data[c] * cache.invstd[c] / n;
    for (size_t b = 0; b < batch; ++b) {
      const double* dy = d_out.ptr() + (b * channels + c) * width;
      const double* xh = cache.xhat.ptr() + (b * channels + c) * width;
      double* dx = d_x.ptr() + (b * channels + c) * width;
      for (size_t t = 0; t < width; ++t) {
        dx[t] = scale * (n * dy[t] - sum_dy - xh[t] * sum_dy_xhat);
      }
    }
  }
}

// ---- relu / pool / linear ------------------------------------------------

Tensor relu_forward(const Tensor& x) {
  Tensor out(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  return out;
}

void relu_backward(const Tensor& activation, const Tensor& d_out, Tensor& d_x) {
  for (size_t i = 0; i < d_out.numel(); ++i) {
    d_x.data[i] = activation.data[i] > 0.0 ? d_out.data[i] : 0.0;
  }
}

Tensor adaptive_max_pool1d_forward(const Tensor& x, size_t out_width,
                                   std::vector<size_t>* argmax) {
  check_shape(x, 3, "adaptive_max_pool1d input");
  const size_t batch = x.dim(0), channels = x.dim(1), width = x.dim(2);
  if (width < out_width) {
    raise(ErrorCode::invalid_argument, "adaptive_max_pool1d: input width " +
                                           std::to_string(width) + " below output width " +
                                           std::to_string(out_width));
  }
  Tensor out({batch, channels, out_width});
  if (argmax) argmax->assign(batch * channels * out_width, 0);
  for (size_t b = 0; b < batch; ++b) {
    for (size_t c = 0; c < channels; ++c) {
      const double* xi = x.ptr() + (b * channels + c) * width;
      double* o = out.ptr() + (b * channels + c) * out_width;
      for (size_t bin = 0; bin < out_width; ++bin) {
        const size_t lo = bin * width / out_width;
        const size_t hi = (bin + 1) * width / out_width;
        size_t best = lo;
        for (size_t t = lo + 1; t < hi; ++t) {
          if (xi[t] > xi[best]) best = t;
        }
        o[bin] = xi[best];
        if (argmax) (*argmax)[(b * channels + c) * out_width + bin] = best;
      }
    }
  }
  return out;
}

void adaptive_max_pool1d_backward(const Tensor& d_out, const std::vector<size_t>& argmax,
                                  Tensor& d_x) {
  const size_t batch = d_out.dim(0), channels = d_out.dim(1), out_width = d_out.dim(2);
  const size_t width = d_x.dim(2);
  d_x.fill(0.0);
  for (size_t b = 0; b < batch; ++b) {
    for (size_t c = 0; c < channels; ++c) {
      const double* go = d_out.ptr() + (b * channels + c) * out_width;
      double* gx = d_x.ptr() + (b * channels + c) * width;
      for (size_t bin = 0; bin < out_width; ++bin) {
        gx[argmax[(b * channels + c) * out_width + bin]] += go[bin];
      }
    }
  }
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& bias) {
  check_shape(x, 2, "linear input");
  const size_t batch = x.dim(0), in = x.dim(1);
  const size_t out_features = w.dim(0);
  if (w.dim(1) != in) {
    raise(ErrorCode::invalid_argument, "linear: weight expects " + std::to_string(w.dim(1)) +
                                           " inputs, batch has " + std::to_string(in));
  }
  Tensor out({batch, out_features});
  for (size_t b = 0; b < batch; ++b) {
    const double* xi = x.ptr() + b * in;
    double* o = out.ptr() + b * out_features;
    for (size_t f = 0; f < out_features; ++f) {
      const double* wf = w.ptr() + f * in;
      double acc = bias.data[f];
      for (size_t i = 0; i < in; ++i) acc += wf[i] * xi[i];
      o[f] = acc;
    }
  }
  return out;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& d_out, Tensor& d_w,
                     Tensor& d_bias, Tensor& d_x) {
  const size_t batch = x.dim(0), in = x.dim(1), out_features = w.dim(0);
  d_x.fill(0.0);
  for (size_t b = 0; b < batch; ++b) {
    const double* xi = x.ptr() + b * in;
    const double* go = d_out.ptr() + b * out_features;
    double* gx = d_x.ptr() + b * in;
    for (size_t f = 0; f < out_features; ++f) {
      const double g = go[f];
      d_bias.data[f] += g;
      double* gw = d_w.ptr() + f * in;
      const double* wf = w.ptr() + f * in;
      for (size_t i = 0; i < in; ++i) {
        gw[i] += g * xi[i];
        gx[i] += g * wf[i];
      }
    }
  }
}

// ---- loss -----------------------------------------------------------------

Tensor softmax_rows(const Tensor& logits) {
  check_shape(logits, 2, "softmax input");
  const size_t batch = logits.dim(0), classes = logits.dim(1);
  Tensor probs(logits.shape);
  for (size_t b = 0; b < batch; ++b) {
    const double* z = logits.ptr() + b * classes;
    double* p = probs.ptr() + b * classes;
    double zmax = z[0];
    for (size_t j = 1; j < classes; ++j) zmax = std::max(zmax, z[j]);
    double sum = 0.0;
    for (size_t j = 0; j < classes; ++j) {
      p[j] = std::exp(z[j] - zmax);
      sum += p[j];
    }
    for (size_t j = 0; j < classes; ++j) p[j] /= sum;
  }
  return probs;
}

double cross_entropy_mean(const Tensor& probs, const std::vector<int>& labels) {
  const size_t batch = probs.dim(0), classes = probs.dim(1);
  if (labels.size() != batch) {
    raise(ErrorCode::invalid_argument, "cross_entropy: label count mismatch");
  }
  double total = 0.0;
  for (size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<size_t>(y) >= classes) {
      raise(ErrorCode::invalid_argument, "cross_entropy: label out of range");
    }
    total += -std::log(std::max(probs.data[b * classes + static_cast<size_t>(y)], 1e-300));
  }
  return total / static_cast<double>(batch);
}

Tensor cross_entropy_backward(const Tensor& probs, const std::vector<int>& labels) {
  const size_t batch = probs.dim(0), classes = probs.dim(1);
  Tensor d_logits(probs.shape);
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (size_t b = 0; b < batch; ++b) {
    for (size_t j = 0; j < classes; ++j) {
      const double target = static_cast<size_t>(labels[b]) == j ? 1.0 : 0.0;
      d_logits.data[b * classes + j] = (probs.data[b * classes + j] - target) * inv_b;
    }
  }
  return d_logits;
}

// ---- Cnn -------------------------------------------------------------------

size_t CnnConfig::parameter_count() const {
  const size_t conv1 = conv1_filters * in_channels * conv1_kernel + conv1_filters;
  const size_t bn1 = 2 * conv1_filters;
  const size_t conv2 = conv2_filters * conv1_filters * conv2_kernel + conv2_filters;
  const size_t bn2 = 2 * conv2_filters;
  const size_t fc = static_cast<size_t>(n_c) * flatten_width() + static_cast<size_t>(n_c);
  return conv1 + bn1 + conv2 + bn2 + fc;
}

namespace {

void init_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.data) v = (2.0 * rng.next_double() - 1.0) * bound;
}

}  // namespace

Cnn::Cnn(const CnnConfig& config, uint64_t seed) : config_(config) {
  if (config.n_c < 2) {
    raise(ErrorCode::invalid_argument, "model needs at least 2 classes");
  }
  const size_t ci = config.in_channels, f1 = config.conv1_filters, f2 = config.conv2_filters;
  conv1_w_ = Tensor({f1, ci, config.conv1_kernel});
  conv1_b_ = Tensor({f1});
  conv2_w_ = Tensor({f2, f1, config.conv2_kernel});
  conv2_b_ = Tensor({f2});
  fc_w_ = Tensor({static_cast<size_t>(config.n_c), config.flatten_width()});
  fc_b_ = Tensor({static_cast<size_t>(config.n_c)});

  bn1_ = {Tensor({f1}), Tensor({f1}), Tensor({f1}), Tensor({f1})};
  bn2_ = {Tensor({f2}), Tensor({f2}), Tensor({f2}), Tensor({f2})};
  bn1_.gamma.fill(1.0);
  bn2_.gamma.fill(1.0);
  bn1_.running_var.fill(1.0);
  bn2_.running_var.fill(1.0);

  Rng rng(derive_seed(seed, "init"));
  init_uniform(conv1_w_, std::sqrt(1.0 / static_cast<double>(ci * config.conv1_kernel)), rng);
  init_uniform(conv1_b_, std::sqrt(1.0 / static_cast<double>(ci * config.conv1_kernel)), rng);
  init_uniform(conv2_w_, std::sqrt(1.0 / static_cast<double>(f1 * config.conv2_kernel)), rng);
  init_uniform(conv2_b_, std::sqrt(1.0 / static_cast<double>(f1 * config.conv2_kernel)), rng);
  init_uniform(fc_w_, std::sqrt(1.0 / static_cast<double>(config.flatten_width())), rng);
  init_uniform(fc_b_, std::sqrt(1.0 / static_cast<double>(config.flatten_width())), rng);

  d_conv1_w_ = Tensor(conv1_w_.shape);
  d_conv1_b_ = Tensor(conv1_b_.shape);
  d_conv2_w_ = Tensor(conv2_w_.shape);
  d_conv2_b_ = Tensor(conv2_b_.shape);
  d_fc_w_ = Tensor(fc_w_.shape);
  d_fc_b_ = Tensor(fc_b_.shape);
  d_bn1_gamma_ = Tensor(bn1_.gamma.shape);
  d_bn1_beta_ = Tensor(bn1_.beta.shape);
  d_bn2_gamma_ = Tensor(bn2_.gamma.shape);
  d_bn2_beta_ = Tensor(bn2_.beta.shape);
}

Tensor Cnn::forward_train(const Tensor& batch, bool update_running_stats) {
  check_shape(batch, 3, "forward input");
  if (batch.dim(1) != config_.in_channels) {
    raise(ErrorCode::invalid_argument,
          "forward: batch has " + std::to_string(batch.dim(1)) + " channels, model expects " +
              std::to_string(config_.in_channels));
  }
  if (batch.dim(2) < config_.min_input_width()) {
    raise(ErrorCode::invalid_argument,
          "forward: input width " + std::to_string(batch.dim(2)) + " below minimum " +
              std::to_string(config_.min_input_width()));
  }
  in_ = batch;
  const Tensor z1 = conv1d_forward(in_, conv1_w_, conv1_b_);
  const Tensor n1 = batchnorm_forward_train(z1, bn1_, bn1_cache_, update_running_stats);
  act1_ = relu_forward(n1);
  const Tensor z2 = conv1d_forward(act1_, conv2_w_, conv2_b_);
  const Tensor n2 = batchnorm_forward_train(z2, bn2_, bn2_cache_, update_running_stats);
  act2_ = relu_forward(n2);
  pooled_ = adaptive_max_pool1d_forward(act2_, config_.pool_out, &pool_argmax_);
  Tensor flat({pooled_.dim(0), config_.flatten_width()});
  flat.data = pooled_.data;
  Tensor logits = linear_forward(flat, fc_w_, fc_b_);
  if (!logits.finite()) {
    raise(ErrorCode::divergence, "non-finite activations in forward pass");
  }
  return logits;
}

double Cnn::loss(const Tensor& logits, const std::vector<int>& labels) {
  probs_ = softmax_rows(logits);
  const double value = cross_entropy_mean(probs_, labels);
  if (!std::isfinite(value)) {
    raise(ErrorCode::divergence, "non-finite loss");
  }
  return value;
}

void Cnn::zero_grads() {
  for (auto& p : params()) p.grad->fill(0.0);
}

void Cnn::backward(const std::vector<int>& labels) {
  const Tensor d_logits = cross_entropy_backward(probs_, labels);

  Tensor flat({pooled_.dim(0), config_.flatten_width()});
  flat.data = pooled_.data;
  Tensor d_flat(flat.shape);
  linear_backward(flat, fc_w_, d_logits, d_fc_w_, d_fc_b_, d_flat);

  Tensor d_pooled(pooled_.shape);
  d_pooled.data = d_flat.data;
  Tensor d_act2(act2_.shape);
  adaptive_max_pool1d_backward(d_pooled, pool_argmax_, d_act2);

  Tensor d_n2(act2_.shape);
  relu_backward(act2_, d_act2, d_n2);
  Tensor d_z2(act2_.shape);
  batchnorm_backward(d_n2, bn2_cache_, bn2_.gamma, d_bn2_gamma_, d_bn2_beta_, d_z2);

  Tensor d_act1(act1_.shape);
  conv1d_backward(act1_, conv2_w_, d_z2, d_conv2_w_, d_conv2_b_, &d_act1);

  Tensor d_n1(act1_.shape);
  relu_backward(act1_, d_act1, d_n1);
  Tensor d_z1(act1_.shape);
  batchnorm_backward(d_n1, bn1_cache_, bn1_.gamma, d_bn1_gamma_, d_bn1_beta_, d_z1);

  conv1d_backward(in_, conv1_w_, d_z1, d_conv1_w_, d_conv1_b_, nullptr);
}

Tensor Cnn::infer(const Tensor& batch) const {
  const Tensor z1 = conv1d_forward(batch, conv1_w_, conv1_b_);
  const Tensor n1 = batchnorm_forward_eval(z1, bn1_);
  const Tensor a1 = relu_forward(n1);
  const Tensor z2 = conv1d_forward(a1, conv2_w_, conv2_b_);
  const Tensor n2 = batchnorm_forward_eval(z2, bn2_);
  const Tensor a2 = relu_forward(n2);
  const Tensor pooled = adaptive_max_pool1d_forward(a2, config_.pool_out, nullptr);
  Tensor flat({pooled.dim(0), config_.flatten_width()});
  flat.data = pooled.data;
  return linear_forward(flat, fc_w_, fc_b_);
}

std::vector<ParamRef> Cnn::params() {
  return {
      {"conv1.weight", &conv1_w_, &d_conv1_w_}, {"conv1.bias", &conv1_b_, &d_conv1_b_},
      {"bn1.gamma", &bn1_.gamma, &d_bn1_gamma_}, {"bn1.beta", &bn1_.beta, &d_bn1_beta_},
      {"conv2.weight", &conv2_w_, &d_conv2_w_}, {"conv2.bias", &conv2_b_, &d_conv2_b_},
      {"bn2.gamma", &bn2_.gamma, &d_bn2_gamma_}, {"bn2.beta", &bn2_.beta, &d_bn2_beta_},
      {"fc.weight", &fc_w_, &d_fc_w_}, {"fc.bias", &fc_b_, &d_fc_b_},
  };
}

std::vector<Tensor> Cnn::state() const {
  return {conv1_w_, conv1_b_, bn1_.gamma, bn1_.beta, bn1_.running_mean, bn1_.running_var,
          conv2_w_, conv2_b_, bn2_.gamma, bn2_.beta, bn2_.running_mean, bn2_.running_var,
          fc_w_,    fc_b_};
}

void Cnn::set_state(const std::vector<Tensor>& state) {
  if (state.size() != 14) {
    raise(ErrorCode::invalid_argument, "model state must hold 14 tensors");
  }
  conv1_w_ = state[0];
  conv1_b_ = state[1];
  bn1_.gamma = state[2];
  bn1_.beta = state[3];
  bn1_.running_mean = state[4];
  bn1_.running_var = state[5];
  conv2_w_ = state[6];
  conv2_b_ = state[7];
  bn2_.gamma = state[8];
  bn2_.beta = state[9];
  bn2_.running_mean = state[10];
  bn2_.running_var = state[11];
  fc_w_ = state[12];
  fc_b_ = state[13];
}

// ---- Adam -------------------------------------------------------------------

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const auto& p : params_) {
    m_.emplace_back(p.value->shape);
    v_.emplace_back(p.value->shape);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    double* value = params_[i].value->ptr();
    const double* grad = params_[i].grad->ptr();
    double* m = m_[i].ptr();
    double* v = v_[i].ptr();
    const size_t n = params_[i].value->numel();
    for (size_t j = 0; j < n; ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad[j] * grad[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      value[j] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
    }
  }
}

// ---- training ------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs < 1) raise(ErrorCode::invalid_argument, "epochs must be >= 1");
  if (batch_size < 1) raise(ErrorCode::invalid_argument, "batch size must be >= 1");
  if (repeats < 1) raise(ErrorCode::invalid_argument, "repeats must be >= 1");
  if (!(lr > 0.0)) raise(ErrorCode::invalid_argument, "learning rate must be positive");
}

Tensor assemble_batch(const loaders::Dataset& dataset, const std::vector<size_t>& indices,
                      size_t begin, size_t end, std::vector<int>* labels) {
  const size_t batch = end - begin;
  Tensor out({batch, dataset.channels, dataset.width});
  if (labels) labels->resize(batch);
  const size_t stride = dataset.channels * dataset.width;
  for (size_t i = 0; i < batch; ++i) {
    const auto& ex = dataset.examples[indices[begin + i]];
    std::memcpy(out.ptr() + i * stride, ex.features.data(), stride * sizeof(double));
    if (labels) (*labels)[i] = ex.class_id - 1;
  }
  return out;
}

namespace {

EvalMetrics evaluate_indices(const Cnn& model, const loaders::Dataset& ds, size_t batch_size) {
  EvalMetrics metrics;
  const size_t n = ds.size();
  metrics.total = n;
  metrics.per_class_accuracy.assign(static_cast<size_t>(ds.n_c), 0.0);
  metrics.per_class_total.assign(static_cast<size_t>(ds.n_c), 0);
  std::vector<size_t> correct_per_class(static_cast<size_t>(ds.n_c), 0);

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t begin = 0; begin < n; begin += batch_size) {
    const size_t end = std::min(n, begin + batch_size);
    std::vector<int> labels;
    const Tensor batch = assemble_batch(ds, idx, begin, end, &labels);
    const Tensor logits = model.infer(batch);
    const size_t classes = logits.dim(1);
    for (size_t b = 0; b < end - begin; ++b) {
      const double* z = logits.ptr() + b * classes;
      size_t best = 0;
      for (size_t j = 1; j < classes; ++j) {
        if (z[j] > z[best]) best = j;
      }
      const size_t truth = static_cast<size_t>(labels[b]);
      metrics.per_class_total[truth] += 1;
      if (best == truth) {
        metrics.correct += 1;
        correct_per_class[truth] += 1;
      }
    }
  }
  metrics.accuracy = n == 0 ? 0.0 : static_cast<double>(metrics.correct) / static_cast<double>(n);
  for (size_t j = 0; j < correct_per_class.size(); ++j) {
    metrics.per_class_accuracy[j] =
        metrics.per_class_total[j] == 0
            ? 0.0
            : static_cast<double>(correct_per_class[j]) /
                  static_cast<double>(metrics.per_class_total[j]);
  }
  return metrics;
}

}  // namespace

TrainMetrics train(Cnn& model, const loaders::Dataset& train_set, const loaders::Dataset& val_set,
                   const TrainConfig& config) {
  config.validate();
  if (train_set.size() == 0 || val_set.size() == 0) {
    raise(ErrorCode::invalid_argument, "train and validation sets must be non-empty");
  }
  if (train_set.channels != model.config().in_channels) {
    raise(ErrorCode::invalid_argument, "dataset channel count does not match model");
  }

  TrainMetrics metrics;
  Adam optimizer(model.params(), config.lr, config.beta1, config.beta2, config.epsilon);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});

  std::vector<Tensor> best_state = model.state();
  double best_val = -1.0;
  size_t best_epoch = 0;

  const auto started = std::chrono::steady_clock::now();
  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "epoch", epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<int> labels;
      const Tensor batch = assemble_batch(train_set, order, begin, end, &labels);
      model.zero_grads();
      const Tensor logits = model.forward_train(batch);
      loss_sum += model.loss(logits, labels);
      ++batches;
      model.backward(labels);
      optimizer.step();
    }
    metrics.epoch_loss.push_back(loss_sum / static_cast<double>(batches));

    const EvalMetrics val = evaluate_indices(model, val_set, 128);
    metrics.epoch_val_accuracy.push_back(val.accuracy);
    if (val.accuracy > best_val) {
      best_val = val.accuracy;
      best_epoch = epoch;
      best_state = model.state();
    }
  }
  const auto finished = std::chrono::steady_clock::now();
  metrics.train_time_s = std::chrono::duration<double>(finished - started).count();
  metrics.best_val_accuracy = best_val;
  metrics.best_epoch = best_epoch;
  model.set_state(best_state);
  return metrics;
}

EvalMetrics evaluate(const Cnn& model, const loaders::Dataset& test_set, size_t batch_size) {
  if (test_set.size() == 0) {
    raise(ErrorCode::invalid_argument, "test set is empty");
  }
  return evaluate_indices(model, test_set, batch_size);
}

// ---- checkpoints ------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'E', 'L', 'M', 'B', 'C', 'K', '1'};
constexpr uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void save_checkpoint(const Cnn& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    raise(ErrorCode::io, "checkpoint '" + path.string() + "' cannot be opened for writing");
  }
  const auto& cfg = model.config();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<uint32_t>(cfg.in_channels));
  write_u32(out, static_cast<uint32_t>(cfg.conv1_filters));
  write_u32(out, static_cast<uint32_t>(cfg.conv1_kernel));
  write_u32(out, static_cast<uint32_t>(cfg.conv2_filters));
  write_u32(out, static_cast<uint32_t>(cfg.conv2_kernel));
  write_u32(out, static_cast<uint32_t>(cfg.pool_out));
  write_u32(out, static_cast<uint32_t>(cfg.n_c));
  for (const Tensor& t : model.state()) {
    write_u64(out, t.numel());
    out.write(reinterpret_cast<const char*>(t.ptr()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) {
    raise(ErrorCode::io, "checkpoint '" + path.string() + "': write failed");
  }
}

Cnn load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::io, "checkpoint '" + path.string() + "' cannot be opened");
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    raise(ErrorCode::parse, "checkpoint '" + path.string() + "': bad magic");
  }
  if (read_u32(in) != kCheckpointVersion) {
    raise(ErrorCode::parse, "checkpoint '" + path.string() + "': unsupported version");
  }
  CnnConfig cfg;
  cfg.in_channels = read_u32(in);
  cfg.conv1_filters = read_u32(in);
  cfg.conv1_kernel = read_u32(in);
  cfg.conv2_filters = read_u32(in);
  cfg.conv2_kernel = read_u32(in);
  cfg.pool_out = read_u32(in);
  cfg.n_c = static_cast<int>(read_u32(in));

  Cnn model(cfg, 0);
  std::vector<Tensor> state = model.state();
  for (Tensor& t : state) {
    const uint64_t n = read_u64(in);
    if (n != t.numel()) {
      raise(ErrorCode::parse, "checkpoint '" + path.string() + "': tensor size mismatch");
    }
    in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!in) {
    raise(ErrorCode::parse, "checkpoint '" + path.string() + "': truncated");
  }
  model.set_state(state);
  return model;
}

}  // namespace selemb::nn
