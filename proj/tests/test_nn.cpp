#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "selemb/errors.hpp"
#include "selemb/nn.hpp"
#include "selemb/rng.hpp"
#include "testutil.hpp"

using namespace selemb;
using nn::Tensor;

namespace {

Tensor random_tensor(std::vector<size_t> shape, uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data) v = scale * rng.next_gaussian();
  return t;
}

nn::CnnConfig small_config(int n_c = 3, size_t in_channels = 1) {
  nn::CnnConfig cfg;
  cfg.in_channels = in_channels;
  cfg.pool_out = 4;
  cfg.n_c = n_c;
  return cfg;
}

// scalar head L = sum(out^2)/2 turns any layer into a checkable loss
double half_square_sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data) s += v * v;
  return 0.5 * s;
}

Tensor half_square_grad(const Tensor& t) { return t; }

}  // namespace

TEST_CASE("conv1d output shape is (C_out, W-k+1)") {
  const Tensor x = random_tensor({2, 1, 512}, 1);
  const Tensor w = random_tensor({16, 1, 3}, 2, 0.1);
  const Tensor b = random_tensor({16}, 3, 0.1);
  const Tensor out = nn::conv1d_forward(x, w, b);
  CHECK(out.shape == std::vector<size_t>{2, 16, 510});
}

TEST_CASE("conv1d identity kernel trims one sample each side") {
  Tensor x = random_tensor({1, 1, 64}, 4);
  Tensor w({1, 1, 3});
  w.data = {0.0, 1.0, 0.0};
  Tensor b({1});
  const Tensor out = nn::conv1d_forward(x, w, b);
  REQUIRE(out.dim(2) == 62);
  for (size_t t = 0; t < 62; ++t) {
    CHECK(out.data[t] == doctest::Approx(x.data[t + 1]));
  }
}

TEST_CASE("conv1d zero weights give zero output and width errors are caught") {
  const Tensor x = random_tensor({1, 2, 16}, 5);
  Tensor w({4, 2, 3});
  Tensor b({4});
  const Tensor out = nn::conv1d_forward(x, w, b);
  for (double v : out.data) CHECK(v == 0.0);

  const Tensor tiny = random_tensor({1, 1, 2}, 6);
  const Tensor w3 = random_tensor({1, 1, 3}, 7);
  CHECK_THROWS_AS(nn::conv1d_forward(tiny, w3, Tensor({1})), Error);
}

TEST_CASE("conv1d gradients match finite differences") {
  const Tensor x = random_tensor({2, 3, 10}, 8);
  Tensor w = random_tensor({4, 3, 3}, 9, 0.5);
  Tensor b = random_tensor({4}, 10, 0.5);

  const Tensor out = nn::conv1d_forward(x, w, b);
  Tensor d_w(w.shape), d_b(b.shape), d_x(x.shape);
  nn::conv1d_backward(x, w, half_square_grad(out), d_w, d_b, &d_x);

  const double h = 1e-6;
  auto loss_with = [&](Tensor& target, size_t i, double delta) {
    target.data[i] += delta;
    const double l = half_square_sum(nn::conv1d_forward(x, w, b));
    target.data[i] -= delta;
    return l;
  };
  for (size_t i = 0; i < w.numel(); ++i) {
    const double num = (loss_with(w, i, h) - loss_with(w, i, -h)) / (2 * h);
    CHECK(d_w.data[i] == doctest::Approx(num).epsilon(1e-5));
  }
  for (size_t i = 0; i < b.numel(); ++i) {
    const double num = (loss_with(b, i, h) - loss_with(b, i, -h)) / (2 * h);
    CHECK(d_b.data[i] == doctest::Approx(num).epsilon(1e-5));
  }
  Tensor xm = x;
  for (size_t i = 0; i < xm.numel(); i += 7) {
    auto loss_x = [&](double delta) {
      xm.data[i] += delta;
      const double l = half_square_sum(nn::conv1d_forward(xm, w, b));
      xm.data[i] -= delta;
      return l;
    };
    const double num = (loss_x(h) - loss_x(-h)) / (2 * h);
    CHECK(d_x.data[i] == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("batchnorm train mode normalizes per channel") {
  const Tensor x = random_tensor({4, 3, 50}, 11, 5.0);
  nn::BatchNormState state{Tensor({3}), Tensor({3}), Tensor({3}), Tensor({3})};
  state.gamma.fill(1.0);
  nn::BatchNormCache cache;
  const Tensor out = nn::batchnorm_forward_train(x, state, cache);
  for (size_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (size_t b = 0; b < 4; ++b) {
      for (size_t t = 0; t < 50; ++t) mean += out.data[(b * 3 + c) * 50 + t];
    }
    mean /= 200.0;
    for (size_t b = 0; b < 4; ++b) {
      for (size_t t = 0; t < 50; ++t) {
        const double v = out.data[(b * 3 + c) * 50 + t] - mean;
        var += v * v;
      }
    }
    var /= 200.0;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("batchnorm constant channel collapses to beta") {
  Tensor x({2, 1, 8});
  x.fill(7.0);
  nn::BatchNormState state{Tensor({1}), Tensor({1}), Tensor({1}), Tensor({1})};
  state.gamma.fill(1.0);
  state.beta.data[0] = 0.25;
  nn::BatchNormCache cache;
  const Tensor out = nn::batchnorm_forward_train(x, state, cache);
  for (double v : out.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("batchnorm eval mode is pure") {
  const Tensor x = random_tensor({2, 2, 10}, 12);
  nn::BatchNormState state{Tensor({2}), Tensor({2}), Tensor({2}), Tensor({2})};
  state.gamma.data = {1.5, 0.5};
  state.beta.data = {0.1, -0.1};
  state.running_mean.data = {0.2, -0.3};
  state.running_var.data = {1.1, 0.9};
  const auto snapshot = state;
  const Tensor a = nn::batchnorm_forward_eval(x, state);
  const Tensor b = nn::batchnorm_forward_eval(x, state);
  CHECK(a.data == b.data);
  CHECK(state.running_mean.data == snapshot.running_mean.data);
  CHECK(state.running_var.data == snapshot.running_var.data);
}

TEST_CASE("batchnorm running stats update only in train mode") {
  const Tensor x = random_tensor({4, 1, 16}, 13, 2.0);
  nn::BatchNormState state{Tensor({1}), Tensor({1}), Tensor({1}), Tensor({1})};
  state.gamma.fill(1.0);
  state.running_var.fill(1.0);
  nn::BatchNormCache cache;
  nn::batchnorm_forward_train(x, state, cache);
  CHECK(state.running_mean.data[0] != 0.0);
  const double rm = state.running_mean.data[0];
  nn::batchnorm_forward_train(x, state, cache, /*update_running_stats=*/false);
  CHECK(state.running_mean.data[0] == rm);
}

TEST_CASE("adaptive pool bins tile the width exactly") {
  const Tensor x = random_tensor({1, 32, 510}, 14);
  std::vector<size_t> argmax;
  const Tensor out = nn::adaptive_max_pool1d_forward(x, 10, &argmax);
  CHECK(out.shape == std::vector<size_t>{1, 32, 10});
  // W=510 -> bins of exactly 51
  for (size_t bin = 0; bin < 10; ++bin) {
    CHECK(bin * 510 / 10 == bin * 51);
  }
  // every argmax index lies inside its bin
  for (size_t c = 0; c < 32; ++c) {
    for (size_t bin = 0; bin < 10; ++bin) {
      const size_t idx = argmax[c * 10 + bin];
      CHECK(idx >= bin * 51);
      CHECK(idx < (bin + 1) * 51);
    }
  }
}

TEST_CASE("adaptive pool at W == out is the identity") {
  const Tensor x = random_tensor({2, 3, 10}, 15);
  const Tensor out = nn::adaptive_max_pool1d_forward(x, 10, nullptr);
  CHECK(out.data == x.data);
}

TEST_CASE("adaptive pool on increasing input takes the last element of each bin") {
  Tensor x({1, 1, 25});
  for (size_t t = 0; t < 25; ++t) x.data[t] = static_cast<double>(t);
  const Tensor out = nn::adaptive_max_pool1d_forward(x, 5, nullptr);
  for (size_t bin = 0; bin < 5; ++bin) {
    CHECK(out.data[bin] == doctest::Approx(static_cast<double>((bin + 1) * 5 - 1)));
  }
  CHECK_THROWS_AS(nn::adaptive_max_pool1d_forward(Tensor({1, 1, 4}), 10, nullptr), Error);
}

TEST_CASE("forward produces (batch, n_c) logits with flatten width 320") {
  nn::CnnConfig cfg;
  cfg.n_c = 3;
  CHECK(cfg.flatten_width() == 320);
  nn::Cnn model(cfg, 1);
  const Tensor batch = random_tensor({4, 1, 512}, 16);
  const Tensor logits = model.forward_train(batch);
  CHECK(logits.shape == std::vector<size_t>{4, 3});
}

TEST_CASE("flatten width is 320 for any input width >= 14") {
  for (size_t width : {14u, 20u, 100u, 511u, 512u, 1000u}) {
    nn::CnnConfig cfg;
    cfg.n_c = 2;
    nn::Cnn model(cfg, 2);
    const Tensor batch = random_tensor({1, 1, width}, width);
    const Tensor logits = model.infer(batch);
    CHECK(logits.shape == std::vector<size_t>{1, 2});
    CHECK(cfg.flatten_width() == 320);
  }
  // below the minimum width the pipeline must refuse
  nn::CnnConfig cfg;
  cfg.n_c = 2;
  nn::Cnn model(cfg, 3);
  CHECK_THROWS_AS(model.forward_train(random_tensor({1, 1, 13}, 99)), Error);
}

TEST_CASE("uniform logits lose ln(n_c)") {
  Tensor logits({5, 4});
  logits.fill(0.7);
  const Tensor probs = nn::softmax_rows(logits);
  for (size_t b = 0; b < 5; ++b) {
    double row = 0.0;
    for (size_t j = 0; j < 4; ++j) row += probs.data[b * 4 + j];
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
  }
  const double loss = nn::cross_entropy_mean(probs, {0, 1, 2, 3, 0});
  CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("confident correct logits give near-zero loss") {
  Tensor logits({2, 3});
  logits.data = {30.0, 0.0, 0.0, 0.0, 30.0, 0.0};
  const double loss = nn::cross_entropy_mean(nn::softmax_rows(logits), {0, 1});
  CHECK(loss < 1e-3);
}

TEST_CASE("composed network gradients match central differences") {
  // Finite differences are only valid away from ReLU kinks and pool ties;
  // this pinned instance sits at a generic point (margin ~40x under the
  // tolerance).
  nn::Cnn model(small_config(), 100);
  const Tensor batch = random_tensor({2, 1, 32}, 101);
  const std::vector<int> labels = {0, 2};
  const auto result = testutil::finite_difference_check(model, batch, labels, 1e-4);
  CHECK(result.checked == model.config().parameter_count());
  INFO("worst: ", result.worst_param, " rel ", result.max_rel_error);
  CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("gradients vanish when the model is already confident") {
  nn::Cnn model(small_config(2), 19);
  loaders::Dataset tiny = testutil::separable_spectra(2, 8, 32, 20);
  std::vector<size_t> idx(tiny.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::vector<int> labels;
  const Tensor batch = nn::assemble_batch(tiny, idx, 0, tiny.size(), &labels);

  // full-batch steps until the correct logits saturate
  nn::Adam optimizer(model.params(), 5e-2, 0.9, 0.999, 1e-8);
  double loss = 1.0;
  for (int step = 0; step < 500 && loss > 1e-9; ++step) {
    model.zero_grads();
    loss = model.loss(model.forward_train(batch), labels);
    model.backward(labels);
    optimizer.step();
  }
  CHECK(loss < 1e-9);

  model.zero_grads();
  model.loss(model.forward_train(batch, false), labels);
  model.backward(labels);
  double norm = 0.0;
  for (auto& p : model.params()) {
    for (double g : p.grad->data) norm += g * g;
  }
  CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("duplicating the batch leaves mean-loss gradients unchanged") {
  nn::Cnn model(small_config(), 22);
  const Tensor batch = random_tensor({2, 1, 32}, 23);
  const std::vector<int> labels = {1, 2};

  model.zero_grads();
  model.loss(model.forward_train(batch, false), labels);
  model.backward(labels);
  std::vector<std::vector<double>> g1;
  for (auto& p : model.params()) g1.push_back(p.grad->data);

  Tensor doubled({4, 1, 32});
  std::copy(batch.data.begin(), batch.data.end(), doubled.data.begin());
  std::copy(batch.data.begin(), batch.data.end(), doubled.data.begin() + batch.numel());
  const std::vector<int> labels2 = {1, 2, 1, 2};
  model.zero_grads();
  model.loss(model.forward_train(doubled, false), labels2);
  model.backward(labels2);
  auto params = model.params();
  for (size_t pi = 0; pi < params.size(); ++pi) {
    for (size_t i = 0; i < g1[pi].size(); ++i) {
      CHECK(params[pi].grad->data[i] == doctest::Approx(g1[pi][i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("parallel variant differs only in conv1 fan-in") {
  const auto one = small_config(4, 1);
  const auto three = small_config(4, 3);
  CHECK(three.parameter_count() - one.parameter_count() == 16 * (3 - 1) * 3);
}

TEST_CASE("training is deterministic given the seed") {
  const auto train_set = testutil::separable_spectra(2, 30, 64, 24);
  const auto val_set = testutil::separable_spectra(2, 10, 64, 25);
  nn::TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 16;
  tc.seed = 77;

  nn::Cnn a(small_config(2), tc.seed);
  nn::Cnn b(small_config(2), tc.seed);
  const auto ma = nn::train(a, train_set, val_set, tc);
  const auto mb = nn::train(b, train_set, val_set, tc);
  CHECK(ma.epoch_loss == mb.epoch_loss);
  CHECK(ma.epoch_val_accuracy == mb.epoch_val_accuracy);
  const auto sa = a.state();
  const auto sb = b.state();
  for (size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].data == sb[i].data);
}

TEST_CASE("separable two-class spectra reach 95 percent within 10 epochs") {
  const auto train_set = testutil::separable_spectra(2, 100, 512, 26);
  const auto val_set = testutil::separable_spectra(2, 20, 512, 27);
  const auto test_set = testutil::separable_spectra(2, 30, 512, 28);
  // the independent oracle confirms separability first
  CHECK(testutil::nearest_centroid_accuracy(train_set, test_set) == doctest::Approx(1.0));

  nn::CnnConfig cfg;
  cfg.n_c = 2;
  nn::Cnn model(cfg, 5);
  nn::TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 32;
  tc.seed = 5;
  nn::train(model, train_set, val_set, tc);
  const auto metrics = nn::evaluate(model, test_set);
  CHECK(metrics.accuracy >= 0.95);
}

TEST_CASE("epochs=0 is a precondition error") {
  nn::TrainConfig tc;
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.validate(), Error);
}

TEST_CASE("loss is non-increasing on a tiny dataset with small steps") {
  const auto tiny = testutil::separable_spectra(2, 4, 32, 29);
  nn::Cnn model(small_config(2), 30);
  nn::TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 8;  // full batch
  tc.lr = 1e-4;
  tc.seed = 31;
  const auto metrics = nn::train(model, tiny, tiny, tc);
  for (size_t e = 1; e < metrics.epoch_loss.size(); ++e) {
    CHECK(metrics.epoch_loss[e] <= metrics.epoch_loss[e - 1] + 1e-12);
  }
}

TEST_CASE("evaluate counts exactly and per class") {
  const auto test_set = testutil::separable_spectra(4, 10, 64, 32);
  nn::Cnn model(small_config(4), 33);
  const auto metrics = nn::evaluate(model, test_set);
  CHECK(metrics.total == 40);
  CHECK(metrics.accuracy ==
        doctest::Approx(static_cast<double>(metrics.correct) / 40.0).epsilon(1e-15));
  REQUIRE(metrics.per_class_total.size() == 4);
  for (size_t j = 0; j < 4; ++j) CHECK(metrics.per_class_total[j] == 10);
}

TEST_CASE("untrained model accuracy sits near chance on balanced data") {
  // Labels drawn independently of the features make each prediction correct
  // with probability exactly 1/n_c, so accuracy is Binomial(N, 1/4)/N:
  // N=400 gives sigma = sqrt(p(1-p)/N) ~ 0.02165.
  loaders::Dataset data;
  data.n_c = 4;
  data.strategy = "random";
  data.channels = 1;
  data.width = 64;
  Rng rng(34);
  for (size_t i = 0; i < 400; ++i) {
    loaders::Example ex;
    ex.channels = 1;
    ex.width = 64;
    ex.class_id = static_cast<int>(i % 4) + 1;
    ex.prov = {"rand", "gen", i, "D0"};
    ex.features.resize(64);
    for (auto& v : ex.features) v = rng.next_gaussian();
    data.examples.push_back(std::move(ex));
  }
  nn::Cnn model(small_config(4), 35);
  const auto metrics = nn::evaluate(model, data);
  const double p = 0.25;
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(data.size()));
  CHECK(metrics.accuracy > p - 5 * sigma);
  CHECK(metrics.accuracy < p + 5 * sigma);
}

TEST_CASE("constant-prediction model scores exactly the class share") {
  const auto test_set = testutil::separable_spectra(4, 25, 64, 91);
  nn::Cnn model(small_config(4), 92);
  // zero everything, bias the classifier toward class 3
  auto params = model.params();
  for (auto& p : params) p.value->fill(0.0);
  params[2].value->fill(1.0);  // bn1 gamma
  params[6].value->fill(1.0);  // bn2 gamma
  for (auto& p : params) {
    if (p.name == "fc.bias") p.value->data[2] = 10.0;
  }
  const auto metrics = nn::evaluate(model, test_set);
  CHECK(metrics.accuracy == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(metrics.per_class_accuracy[2] == doctest::Approx(1.0));
  CHECK(metrics.per_class_accuracy[0] == doctest::Approx(0.0));
}

TEST_CASE("exploding step size raises a divergence error") {
  const auto tiny = testutil::separable_spectra(2, 8, 32, 93);
  nn::Cnn model(small_config(2), 94);
  nn::TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 8;
  tc.lr = 1e308;
  tc.seed = 95;
  try {
    nn::train(model, tiny, tiny, tc);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::divergence);
  }
}

TEST_CASE("checkpoint round-trips the exact model state") {
  nn::Cnn model(small_config(3, 2), 36);
  // perturb running stats so they are not the init values
  const Tensor batch = random_tensor({3, 2, 48}, 37);
  model.forward_train(batch);

  const auto path = std::filesystem::temp_directory_path() /
                    ("selemb-ck-" + std::to_string(std::random_device{}() % 1000000) + ".bin");
  nn::save_checkpoint(model, path);
  nn::Cnn loaded = nn::load_checkpoint(path);
  std::filesystem::remove(path);

  CHECK(loaded.config().in_channels == 2);
  CHECK(loaded.config().n_c == 3);
  const auto sa = model.state();
  const auto sb = loaded.state();
  REQUIRE(sa.size() == sb.size());
  for (size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].data == sb[i].data);

  // identical inference
  const Tensor probe = random_tensor({2, 2, 48}, 38);
  CHECK(model.infer(probe).data == loaded.infer(probe).data);
}
