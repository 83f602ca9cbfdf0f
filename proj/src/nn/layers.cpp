#include "mpat/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace mpat::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view s) {
  if (s == "identity" || s == "linear") return Activation::Identity;
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw DataError("unknown activation '" + std::string(s) + "'");
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void glorot(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.data()) v = rng.uniform(-r, r);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::ReLU: return z > 0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Sigmoid: return sigmoid(z);
  }
  return z;
}

double activation_derivative(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::ReLU: return z > 0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

Dense make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  Dense d{Tensor({out, in}), Tensor({out}), act};
  glorot(d.weight, in, out, rng);
  return d;
}

Conv1D make_conv1d(std::size_t channels, std::size_t filters, std::size_t width, std::size_t dilation,
                   Activation act, Rng& rng) {
  require(dilation >= 1, "dilation must be >= 1");
  Conv1D c{Tensor({filters, width, channels}), Tensor({filters}), dilation, act};
  glorot(c.kernel, width * channels, width * filters, rng);
  return c;
}

Lstm make_lstm(std::size_t in, std::size_t hidden, Rng& rng) {
  Lstm l{Tensor({4 * hidden, in}), Tensor({4 * hidden, hidden}), Tensor({4 * hidden})};
  glorot(l.input_weight, in, 4 * hidden, rng);
  glorot(l.recurrent_weight, hidden, 4 * hidden, rng);
  return l;
}

Dense zeros_like(const Dense& p) { return {zeros_like(p.weight), zeros_like(p.bias), p.activation}; }
Conv1D zeros_like(const Conv1D& p) { return {zeros_like(p.kernel), zeros_like(p.bias), p.dilation, p.activation}; }
Lstm zeros_like(const Lstm& p) {
  return {zeros_like(p.input_weight), zeros_like(p.recurrent_weight), zeros_like(p.bias)};
}

Tensor dense_forward(const Tensor& x, const Dense& p, DenseCache* cache) {
  require(x.rank() == 1 && x.size() == p.in(),
          "dense_forward: input " + shape_string(x.shape()) + " vs weight " + shape_string(p.weight.shape()));
  const auto out = p.out();
  const auto in = p.in();
  Tensor z({out});
  for (std::size_t o = 0; o < out; ++o) {
    const double* w = p.weight.raw() + o * in;
    double s = p.bias[o];
    for (std::size_t i = 0; i < in; ++i) s += w[i] * x[i];
    z[o] = s;
  }
  Tensor y({out});
  for (std::size_t o = 0; o < out; ++o) y[o] = activate(p.activation, z[o]);
  if (cache) {
    cache->input = x;
    cache->preact = std::move(z);
  }
  return y;
}

Tensor dense_backward(const Dense& p, const DenseCache& cache, const Tensor& dy, Dense& grad) {
  const auto out = p.out();
  const auto in = p.in();
  require(dy.size() == out, "dense_backward: gradient size mismatch");
  Tensor dx({in});
  for (std::size_t o = 0; o < out; ++o) {
    const double dz = dy[o] * activation_derivative(p.activation, cache.preact[o]);
    if (dz == 0.0) continue;
    grad.bias[o] += dz;
    double* gw = grad.weight.raw() + o * in;
    const double* w = p.weight.raw() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      gw[i] += dz * cache.input[i];
      dx[i] += dz * w[i];
    }
  }
  return dx;
}

Tensor conv1d_forward(const Tensor& x, const Conv1D& p, Conv1DCache* cache) {
  require(x.rank() == 2 && x.dim(1) == p.channels(),
          "conv1d_forward: input " + shape_string(x.shape()) + " vs kernel " + shape_string(p.kernel.shape()));
  require(p.dilation >= 1, "conv1d_forward: dilation must be >= 1");
  const auto len = x.dim(0);
  const auto rf = p.receptive_field();
  if (len < rf) {
    throw std::invalid_argument("conv1d_forward: input length " + std::to_string(len) +
                                " shorter than receptive field " + std::to_string(rf));
  }
  const auto out_len = len - (p.width() - 1) * p.dilation;
  const auto F = p.filters(), W = p.width(), C = p.channels();
  Tensor z({out_len, F});
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      double s = p.bias[f];
      for (std::size_t w = 0; w < W; ++w) {
        const double* k = p.kernel.raw() + (f * W + w) * C;
        const double* xr = x.raw() + (t + w * p.dilation) * C;
        for (std::size_t c = 0; c < C; ++c) s += k[c] * xr[c];
      }
      z.at(t, f) = s;
    }
  }
  Tensor y({out_len, F});
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = activate(p.activation, z[i]);
  if (cache) {
    cache->input = x;
    cache->preact = std::move(z);
  }
  return y;
}

Tensor conv1d_backward(const Conv1D& p, const Conv1DCache& cache, const Tensor& dy, Conv1D& grad) {
  const auto& x = cache.input;
  const auto out_len = cache.preact.dim(0);
  const auto F = p.filters(), W = p.width(), C = p.channels();
  require(dy.shape() == cache.preact.shape(), "conv1d_backward: gradient shape mismatch");
  Tensor dx(x.shape());
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      const double dz = dy.at(t, f) * activation_derivative(p.activation, cache.preact.at(t, f));
      if (dz == 0.0) continue;
      grad.bias[f] += dz;
      for (std::size_t w = 0; w < W; ++w) {
        const auto row = t + w * p.dilation;
        const double* k = p.kernel.raw() + (f * W + w) * C;
        double* gk = grad.kernel.raw() + (f * W + w) * C;
        const double* xr = x.raw() + row * C;
        double* dxr = dx.raw() + row * C;
        for (std::size_t c = 0; c < C; ++c) {
          gk[c] += dz * xr[c];
          dxr[c] += dz * k[c];
        }
      }
    }
  }
  return dx;
}

Tensor global_max_pool(const Tensor& x, PoolCache* cache) {
  require(x.rank() == 2, "global_max_pool: expected a len x filters tensor");
  const auto len = x.dim(0), F = x.dim(1);
  Tensor y({F});
  std::vector<std::size_t> arg(F, 0);
  for (std::size_t f = 0; f < F; ++f) {
    double best = x.at(0, f);
    for (std::size_t t = 1; t < len; ++t) {
      if (x.at(t, f) > best) {
        best = x.at(t, f);
        arg[f] = t;
      }
    }
    y[f] = best;
  }
  if (cache) {
    cache->length = len;
    cache->argmax = std::move(arg);
  }
  return y;
}

Tensor global_max_pool_backward(const PoolCache& cache, const Tensor& dy) {
  const auto F = cache.argmax.size();
  require(dy.size() == F, "global_max_pool_backward: gradient size mismatch");
  Tensor dx({cache.length, F});
  for (std::size_t f = 0; f < F; ++f) dx.at(cache.argmax[f], f) = dy[f];
  return dx;
}

Tensor lstm_forward(const Tensor& x, const Lstm& p, std::size_t valid_length, LstmCache* cache) {
  const auto H = p.hidden_size();
  const auto in = p.input_size();
  require(x.rank() == 2 && x.dim(1) == in,
          "lstm_forward: input " + shape_string(x.shape()) + " vs input weight " +
              shape_string(p.input_weight.shape()));
  require(p.input_weight.dim(0) == 4 * H && p.bias.size() == 4 * H, "lstm_forward: inconsistent gate shapes");
  const auto steps = std::min(valid_length, x.dim(0));

  std::vector<double> gates(steps * 4 * H);
  std::vector<double> cells((steps + 1) * H, 0.0);
  std::vector<double> hiddens((steps + 1) * H, 0.0);
  std::vector<double> z(4 * H);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* xt = x.raw() + t * in;
    const double* hprev = hiddens.data() + t * H;
    for (std::size_t g = 0; g < 4 * H; ++g) {
      double s = p.bias[g];
      const double* wi = p.input_weight.raw() + g * in;
      for (std::size_t i = 0; i < in; ++i) s += wi[i] * xt[i];
      const double* wh = p.recurrent_weight.raw() + g * H;
      for (std::size_t j = 0; j < H; ++j) s += wh[j] * hprev[j];
      z[g] = s;
    }
    double* gt = gates.data() + t * 4 * H;
    const double* cprev = cells.data() + t * H;
    double* ct = cells.data() + (t + 1) * H;
    double* ht = hiddens.data() + (t + 1) * H;
    for (std::size_t j = 0; j < H; ++j) {
      const double ig = sigmoid(z[j]);
      const double fg = sigmoid(z[H + j]);
      const double cand = std::tanh(z[2 * H + j]);
      const double og = sigmoid(z[3 * H + j]);
      gt[j] = ig;
      gt[H + j] = fg;
      gt[2 * H + j] = cand;
      gt[3 * H + j] = og;
      ct[j] = fg * cprev[j] + ig * cand;
      ht[j] = og * std::tanh(ct[j]);
    }
  }
  Tensor h({H}, std::vector<double>(hiddens.end() - static_cast<std::ptrdiff_t>(H), hiddens.end()));
  if (cache) {
    cache->input = x;
    cache->steps = steps;
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->hiddens = std::move(hiddens);
  }
  return h;
}

Tensor lstm_backward(const Lstm& p, const LstmCache& cache, const Tensor& dh, Lstm& grad) {
  const auto H = p.hidden_size();
  const auto in = p.input_size();
  require(dh.size() == H, "lstm_backward: gradient size mismatch");
  Tensor dx(cache.input.shape());
  std::vector<double> dh_next(dh.data().begin(), dh.data().end());
  std::vector<double> dc_next(H, 0.0);
  std::vector<double> dz(4 * H);
  for (std::size_t t = cache.steps; t-- > 0;) {
    const double* gt = cache.gates.data() + t * 4 * H;
    const double* cprev = cache.cells.data() + t * H;
    const double* ct = cache.cells.data() + (t + 1) * H;
    for (std::size_t j = 0; j < H; ++j) {
      const double ig = gt[j], fg = gt[H + j], cand = gt[2 * H + j], og = gt[3 * H + j];
      const double tc = std::tanh(ct[j]);
      const double dct = dc_next[j] + dh_next[j] * og * (1.0 - tc * tc);
      dz[j] = dct * cand * ig * (1.0 - ig);
      dz[H + j] = dct * cprev[j] * fg * (1.0 - fg);
      dz[2 * H + j] = dct * ig * (1.0 - cand * cand);
      dz[3 * H + j] = dh_next[j] * tc * og * (1.0 - og);
      dc_next[j] = dct * fg;
    }
    const double* xt = cache.input.raw() + t * in;
    const double* hprev = cache.hiddens.data() + t * H;
    double* dxt = dx.raw() + t * in;
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    for (std::size_t g = 0; g < 4 * H; ++g) {
      const double d = dz[g];
      if (d == 0.0) continue;
      grad.bias[g] += d;
      const double* wi = p.input_weight.raw() + g * in;
      double* gwi = grad.input_weight.raw() + g * in;
      for (std::size_t i = 0; i < in; ++i) {
        gwi[i] += d * xt[i];
        dxt[i] += d * wi[i];
      }
      const double* wh = p.recurrent_weight.raw() + g * H;
      double* gwh = grad.recurrent_weight.raw() + g * H;
      for (std::size_t j = 0; j < H; ++j) {
        gwh[j] += d * hprev[j];
        dh_next[j] += d * wh[j];
      }
    }
  }
  return dx;
}

Tensor softmax(const Tensor& x) {
  require(x.rank() == 1 && x.size() >= 1, "softmax: expected a non-empty vector");
  const double m = *std::max_element(x.data().begin(), x.data().end());
  Tensor y(x.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - m);
    sum += y[i];
  }
  for (auto& v : y.data()) v /= sum;
  return y;
}

double cross_entropy_loss(const Tensor& probabilities, int label) {
  require(label >= 0 && static_cast<std::size_t>(label) < probabilities.size(), "cross_entropy_loss: bad label");
  return -std::log(std::max(probabilities[static_cast<std::size_t>(label)], 1e-12));
}

Tensor softmax_cross_entropy_grad(const Tensor& probabilities, int label) {
  Tensor g = probabilities;
  g[static_cast<std::size_t>(label)] -= 1.0;
  return g;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  std::vector<double> v(a.data().begin(), a.data().end());
  v.insert(v.end(), b.data().begin(), b.data().end());
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

}  // namespace mpat::nn
