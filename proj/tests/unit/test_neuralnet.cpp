#include <cmath>
#include <limits>

#include "doctest.h"
#include "mpat/nn/adam.hpp"
#include "mpat/nn/checkpoint.hpp"
#include "mpat/nn/gradcheck.hpp"
#include "mpat/nn/layers.hpp"
#include "support.hpp"

using namespace mpat;
using namespace mpat::nn;
using mpat::testing::TempDir;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal() * scale;
  return t;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Direct loops, written independently of the library.
std::vector<std::vector<double>> naive_conv(const Tensor& x, const Conv1D& p) {
  const std::size_t len = x.dim(0), out_len = len - (p.width() - 1) * p.dilation;
  std::vector<std::vector<double>> y(out_len, std::vector<double>(p.filters()));
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t f = 0; f < p.filters(); ++f) {
      long double z = p.bias[f];
      for (std::size_t w = 0; w < p.width(); ++w) {
        for (std::size_t c = 0; c < p.channels(); ++c) z += p.kernel.at(f, w, c) * x.at(t + w * p.dilation, c);
      }
      y[t][f] = activate(p.activation, static_cast<double>(z));
    }
  }
  return y;
}

std::vector<double> naive_lstm(const Tensor& x, const Lstm& p, std::size_t steps) {
  const std::size_t H = p.hidden_size(), in = p.input_size();
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double s = p.bias[r];
      for (std::size_t k = 0; k < in; ++k) s += p.input_weight.at(r, k) * x.at(t, k);
      for (std::size_t k = 0; k < H; ++k) s += p.recurrent_weight.at(r, k) * h[k];
      z[r] = s;
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double i = sigmoid(z[j]), f = sigmoid(z[H + j]), g = std::tanh(z[2 * H + j]), o = sigmoid(z[3 * H + j]);
      c[j] = f * c[j] + i * g;
      h[j] = o * std::tanh(c[j]);
    }
  }
  return h;
}

// Doubles every analytic gradient of the wrapped probe.
struct DoubledGradient {
  DenseProbe inner;
  std::vector<Tensor*> parameters() { return inner.parameters(); }
  double loss() const { return inner.loss(); }
  std::vector<Tensor> gradients() const {
    auto g = inner.gradients();
    for (auto& t : g) {
      for (auto& v : t.data()) v *= 2.0;
    }
    return g;
  }
};

// Absolute comparison against a five-point stencil, used where entries are
// too small for the relative criterion to be meaningful.
template <class Net>
double max_stencil_gap(Net& net, double h = 1e-3) {
  const auto analytic = net.gradients();
  auto params = net.parameters();
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      auto at = [&](double d) {
        p[i] = saved + d;
        return net.loss();
      };
      const double num = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      p[i] = saved;
      worst = std::max(worst, std::abs(analytic[k][i] - num));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("dense_forward") {
  Dense d{Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::vector({0, 0}), Activation::Identity};
  CHECK(dense_forward(Tensor::vector({1, 1}), d) == Tensor::vector({3, 7}));

  Dense id{Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), Tensor::vector({0, 0, 0}), Activation::Identity};
  CHECK(dense_forward(Tensor::vector({0.5, -2, 7}), id) == Tensor::vector({0.5, -2, 7}));

  Dense relu{Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({0, 0}), Activation::ReLU};
  CHECK(dense_forward(Tensor::vector({-1, 2}), relu) == Tensor::vector({0, 2}));

  CHECK_THROWS(dense_forward(Tensor::vector({1, 2, 3}), d));
}

TEST_CASE("conv1d_forward") {
  const Tensor x({5, 1}, {1, 2, 3, 4, 5});
  Conv1D p{Tensor({1, 3, 1}, {1, 0, -1}), Tensor::vector({0}), 1, Activation::Identity};
  CHECK(conv1d_forward(x, p) == Tensor({3, 1}, {-2, -2, -2}));
  p.dilation = 2;
  CHECK(conv1d_forward(x, p) == Tensor({1, 1}, {-4}));
  Conv1D unit{Tensor({1, 1, 1}, {1}), Tensor::vector({0}), 1, Activation::Identity};
  CHECK(conv1d_forward(x, unit) == x);
  p.dilation = 3;
  CHECK_THROWS(conv1d_forward(x, p));
}

TEST_CASE("conv1d_forward matches direct loops on random shapes") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t channels = 1 + rng.below(4), filters = 1 + rng.below(5), width = 1 + rng.below(4),
                      dilation = 1 + rng.below(3);
    const std::size_t len = (width - 1) * dilation + 1 + rng.below(8);
    auto p = make_conv1d(channels, filters, width, dilation, trial % 2 ? Activation::ReLU : Activation::Tanh, rng);
    for (auto& b : p.bias.data()) b = rng.uniform(-0.5, 0.5);
    const auto x = random_tensor({len, channels}, rng);
    const auto y = conv1d_forward(x, p);
    const auto ref = naive_conv(x, p);
    REQUIRE(y.dim(0) == ref.size());
    for (std::size_t t = 0; t < ref.size(); ++t) {
      for (std::size_t f = 0; f < filters; ++f) CHECK(y.at(t, f) == doctest::Approx(ref[t][f]).epsilon(1e-12));
    }
  }
}

TEST_CASE("global_max_pool") {
  CHECK(global_max_pool(Tensor::matrix(2, 2, {1, 5, 3, 2})) == Tensor::vector({3, 5}));
  CHECK(global_max_pool(Tensor::matrix(1, 3, {4, -1, 2})) == Tensor::vector({4, -1, 2}));

  PoolCache cache;
  const auto y = global_max_pool(Tensor::matrix(3, 1, {7, 7, 7}), &cache);
  CHECK(y == Tensor::vector({7}));
  const auto dx = global_max_pool_backward(cache, Tensor::vector({1.5}));
  CHECK(dx == Tensor::matrix(3, 1, {1.5, 0, 0}));
}

TEST_CASE("lstm_forward") {
  Rng rng(4);
  SUBCASE("zero parameters give a zero final state") {
    Lstm p{Tensor({8, 3}), Tensor({8, 2}), Tensor({8})};
    const auto h = lstm_forward(random_tensor({5, 3}, rng), p);
    CHECK(h == Tensor({2}));
  }
  SUBCASE("single unit recurrence by hand") {
    // One step with x = 1: every pre-activation equals its weight plus bias.
    Lstm p{Tensor({4, 1}, {0.5, -0.3, 0.8, 1.1}), Tensor({4, 1}), Tensor({4}, {0.1, 0.2, -0.1, 0.0})};
    const auto h = lstm_forward(Tensor({1, 1}, {1.0}), p);
    const double i = sigmoid(0.6), g = std::tanh(0.7), o = sigmoid(1.1);
    CHECK(h[0] == doctest::Approx(o * std::tanh(i * g)).epsilon(1e-14));
  }
  SUBCASE("matches direct loops and honours valid_length") {
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t in = 1 + rng.below(4), H = 1 + rng.below(6), len = 1 + rng.below(7);
      auto p = make_lstm(in, H, rng);
      for (auto& b : p.bias.data()) b = rng.uniform(-0.5, 0.5);
      const auto x = random_tensor({len, in}, rng);
      const std::size_t valid = 1 + rng.below(len);
      const auto h = lstm_forward(x, p, valid);
      const auto ref = naive_lstm(x, p, valid);
      for (std::size_t j = 0; j < H; ++j) CHECK(h[j] == doctest::Approx(ref[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax and cross entropy") {
  CHECK(softmax(Tensor::vector({0, 0})) == Tensor::vector({0.5, 0.5}));
  const auto big = softmax(Tensor::vector({1000, 0}));
  CHECK(big.all_finite());
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] == doctest::Approx(0.0));
  const auto q = softmax(Tensor::vector({std::log(1.0), std::log(3.0)}));
  CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-14));

  CHECK(cross_entropy_loss(Tensor::vector({0.5, 0.5}), 1) == doctest::Approx(std::log(2.0)));
  CHECK(cross_entropy_loss(Tensor::vector({0.0, 1.0}), 1) == doctest::Approx(0.0));
  CHECK(cross_entropy_loss(Tensor::vector({0.25, 0.75}), 0) == doctest::Approx(1.3862943611));
  CHECK(std::isfinite(cross_entropy_loss(Tensor::vector({0.0, 1.0}), 0)));
  CHECK_THROWS(cross_entropy_loss(Tensor::vector({0.5, 0.5}), 2));

  CHECK(softmax_cross_entropy_grad(Tensor::vector({0.0, 1.0}), 1) == Tensor::vector({0.0, 0.0}));
  CHECK(softmax_cross_entropy_grad(Tensor::vector({0.25, 0.75}), 0) == Tensor::vector({-0.75, 0.75}));
}

TEST_CASE("softmax sums to one and preserves order") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor z({2 + rng.below(6)});
    for (auto& v : z.data()) v = rng.normal() * 30.0;
    const auto p = softmax(z);
    double sum = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p[i] >= 0.0);
      sum += p[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (z[i] > z[j]) CHECK(p[i] >= p[j]);
      }
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("grad_check on probe networks") {
  Rng rng(12);
  SUBCASE("dense, conv and pool probes") {
    for (int trial = 0; trial < 10; ++trial) {
      auto d = DenseProbe::random(2 + rng.below(4), 2 + rng.below(4), trial % 2 ? Activation::Tanh : Activation::ReLU,
                                  rng);
      CHECK(grad_check(d) < 1e-4);
      auto c = Conv1DProbe::random(8, 2, 3, 2, 2, Activation::ReLU, rng);
      CHECK(grad_check(c) < 1e-4);
      auto m = MaxPoolProbe::random(5, 3, rng);
      CHECK(grad_check(m) < 1e-4);
    }
  }
  SUBCASE("linear network is nearly exact") {
    auto d = DenseProbe::random(4, 3, Activation::Identity, rng);
    CHECK(grad_check(d) < 1e-7);
  }
  SUBCASE("a doubled gradient is detected") {
    DoubledGradient bad{DenseProbe::random(3, 3, Activation::Tanh, rng)};
    CHECK(grad_check(bad) == doctest::Approx(0.5).epsilon(1e-3));
  }
  SUBCASE("lstm gradients agree with a high-order stencil") {
    for (int trial = 0; trial < 5; ++trial) {
      auto l = LstmProbe::random(2 + rng.below(4), 1 + rng.below(3), 6, rng);
      CHECK(max_stencil_gap(l) < 1e-8);
    }
  }
  SUBCASE("sampled checks visit the requested number of entries") {
    auto c = Conv1DProbe::random(9, 2, 4, 3, 1, Activation::Tanh, rng);
    const auto r = grad_check_detailed(c, {.h = 1e-5, .max_checks_per_tensor = 3, .seed = 1});
    CHECK(r.checked <= 3 * c.parameters().size());
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("first step moves each parameter by about lr against the gradient sign") {
    Tensor w = Tensor::vector({0.0, 1.0, -2.0, 5.0});
    Tensor g = Tensor::vector({1e-3, -7.0, 250.0, -0.02});
    std::vector<Tensor*> params = {&w};
    std::vector<const Tensor*> grads = {&g};
    auto state = AdamState::for_params(std::span<Tensor* const>(params));
    adam_step(params, grads, state);
    const double lr = 1e-3;
    CHECK(w[0] == doctest::Approx(0.0 - lr).epsilon(1e-4));
    CHECK(w[1] == doctest::Approx(1.0 + lr).epsilon(1e-4));
    CHECK(w[2] == doctest::Approx(-2.0 - lr).epsilon(1e-4));
    CHECK(w[3] == doctest::Approx(5.0 + lr).epsilon(1e-4));
    CHECK(state.step == 1);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor w = Tensor::vector({0.3, -0.4});
    const Tensor before = w;
    Tensor g({2});
    std::vector<Tensor*> params = {&w};
    std::vector<const Tensor*> grads = {&g};
    auto state = AdamState::for_params(std::span<Tensor* const>(params));
    for (int i = 0; i < 100; ++i) adam_step(params, grads, state);
    CHECK(w == before);
  }
  SUBCASE("identical inputs give identical results") {
    Rng rng(3);
    Tensor w1 = random_tensor({3, 4}, rng), g = random_tensor({3, 4}, rng);
    Tensor w2 = w1;
    std::vector<Tensor*> p1 = {&w1}, p2 = {&w2};
    std::vector<const Tensor*> grads = {&g};
    auto s1 = AdamState::for_params(std::span<Tensor* const>(p1));
    adam_step(p1, grads, s1);
    auto s2 = AdamState::for_params(std::span<Tensor* const>(p2));
    adam_step(p2, grads, s2);
    CHECK(w1 == w2);
    CHECK(s1.first_moment == s2.first_moment);
    CHECK(s1.second_moment == s2.second_moment);
  }
  SUBCASE("non-finite gradients are rejected") {
    Tensor w = Tensor::vector({0.0});
    Tensor g = Tensor::vector({std::numeric_limits<double>::quiet_NaN()});
    std::vector<Tensor*> params = {&w};
    std::vector<const Tensor*> grads = {&g};
    auto state = AdamState::for_params(std::span<Tensor* const>(params));
    CHECK_THROWS(adam_step(params, grads, state));
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng(6);
  Checkpoint c;
  c.seed = 0xdeadbeefcafeULL;
  c.adam_step = 17;
  c.adam.learning_rate = 3e-4;
  c.config_text = "a = 1\nb = \"x\"\n";
  c.tensors.emplace_back("enc.w", random_tensor({3, 4}, rng));
  c.tensors.emplace_back("enc.b", random_tensor({4}, rng));
  c.tensors.emplace_back("k", random_tensor({2, 3, 2}, rng));

  const auto bytes = serialize_checkpoint(c);
  CHECK(bytes.substr(0, 8) == "MPATCKPT");
  CHECK(deserialize_checkpoint(bytes) == c);
  CHECK(serialize_checkpoint(deserialize_checkpoint(bytes)) == bytes);
  REQUIRE(c.find("enc.b"));
  CHECK_FALSE(c.find("nope"));

  TempDir dir;
  save_checkpoint(c, dir / "m.ckpt");
  CHECK(load_checkpoint(dir / "m.ckpt") == c);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), DataError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 5)), DataError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), DataError);
  CHECK_THROWS_AS(deserialize_checkpoint(""), DataError);
}

TEST_CASE("initializers") {
  Rng rng(1);
  const auto d = make_dense(30, 20, Activation::ReLU, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  for (double w : d.weight.data()) CHECK(std::abs(w) <= limit);
  for (double b : d.bias.data()) CHECK(b == 0.0);
  const auto l = make_lstm(3, 5, rng);
  CHECK(l.input_weight.shape() == std::vector<std::size_t>{20, 3});
  CHECK(l.recurrent_weight.shape() == std::vector<std::size_t>{20, 5});
  Rng a(9), b(9);
  CHECK(make_conv1d(2, 4, 3, 2, Activation::ReLU, a).kernel == make_conv1d(2, 4, 3, 2, Activation::ReLU, b).kernel);
}
