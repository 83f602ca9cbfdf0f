#include "mpat/nn/gradcheck.hpp"

namespace mpat::nn {

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

void randomize_bias(Tensor& b, Rng& rng) {
  for (auto& v : b.data()) v = rng.uniform(-0.1, 0.1);
}

Dense random_head(std::size_t in, Rng& rng) {
  Dense d = make_dense(in, 2, Activation::Identity, rng);
  randomize_bias(d.bias, rng);
  return d;
}

int random_label(Rng& rng) { return static_cast<int>(rng.below(2)); }

/// Forward through the head and return (loss, dlogits, head cache).
struct HeadPass {
  double loss;
  Tensor dlogits;
  DenseCache cache;
};

HeadPass run_head(const Tensor& features, const Dense& head, int label) {
  HeadPass hp;
  const Tensor probs = softmax(dense_forward(features, head, &hp.cache));
  hp.loss = cross_entropy_loss(probs, label);
  hp.dlogits = softmax_cross_entropy_grad(probs, label);
  return hp;
}

}  // namespace

DenseProbe DenseProbe::random(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseProbe p;
  p.input = random_tensor({in}, rng);
  p.layer = make_dense(in, out, act, rng);
  randomize_bias(p.layer.bias, rng);
  p.head = random_head(out, rng);
  p.label = random_label(rng);
  return p;
}

std::vector<Tensor*> DenseProbe::parameters() {
  return {&input, &layer.weight, &layer.bias, &head.weight, &head.bias};
}

double DenseProbe::loss() const {
  return cross_entropy_loss(softmax(dense_forward(dense_forward(input, layer), head)), label);
}

std::vector<Tensor> DenseProbe::gradients() const {
  DenseCache c1;
  const Tensor h = dense_forward(input, layer, &c1);
  HeadPass hp = run_head(h, head, label);
  Dense g_head = zeros_like(head);
  Dense g_layer = zeros_like(layer);
  const Tensor dh = dense_backward(head, hp.cache, hp.dlogits, g_head);
  Tensor dx = dense_backward(layer, c1, dh, g_layer);
  return {dx, g_layer.weight, g_layer.bias, g_head.weight, g_head.bias};
}

Conv1DProbe Conv1DProbe::random(std::size_t len, std::size_t channels, std::size_t filters, std::size_t width,
                                std::size_t dilation, Activation act, Rng& rng) {
  Conv1DProbe p;
  p.input = random_tensor({len, channels}, rng);
  p.layer = make_conv1d(channels, filters, width, dilation, act, rng);
  randomize_bias(p.layer.bias, rng);
  p.head = random_head(filters, rng);
  p.label = random_label(rng);
  return p;
}

std::vector<Tensor*> Conv1DProbe::parameters() {
  return {&input, &layer.kernel, &layer.bias, &head.weight, &head.bias};
}

double Conv1DProbe::loss() const {
  return cross_entropy_loss(softmax(dense_forward(global_max_pool(conv1d_forward(input, layer)), head)), label);
}

std::vector<Tensor> Conv1DProbe::gradients() const {
  Conv1DCache cc;
  PoolCache pc;
  const Tensor pooled = global_max_pool(conv1d_forward(input, layer, &cc), &pc);
  HeadPass hp = run_head(pooled, head, label);
  Dense g_head = zeros_like(head);
  Conv1D g_layer = zeros_like(layer);
  const Tensor dpooled = dense_backward(head, hp.cache, hp.dlogits, g_head);
  Tensor dx = conv1d_backward(layer, cc, global_max_pool_backward(pc, dpooled), g_layer);
  return {dx, g_layer.kernel, g_layer.bias, g_head.weight, g_head.bias};
}

MaxPoolProbe MaxPoolProbe::random(std::size_t len, std::size_t filters, Rng& rng) {
  MaxPoolProbe p;
  p.input = random_tensor({len, filters}, rng);
  p.head = random_head(filters, rng);
  p.label = random_label(rng);
  return p;
}

std::vector<Tensor*> MaxPoolProbe::parameters() { return {&input, &head.weight, &head.bias}; }

double MaxPoolProbe::loss() const {
  return cross_entropy_loss(softmax(dense_forward(global_max_pool(input), head)), label);
}

std::vector<Tensor> MaxPoolProbe::gradients() const {
  PoolCache pc;
  const Tensor pooled = global_max_pool(input, &pc);
  HeadPass hp = run_head(pooled, head, label);
  Dense g_head = zeros_like(head);
  const Tensor dpooled = dense_backward(head, hp.cache, hp.dlogits, g_head);
  return {global_max_pool_backward(pc, dpooled), g_head.weight, g_head.bias};
}

LstmProbe LstmProbe::random(std::size_t len, std::size_t in, std::size_t hidden, Rng& rng) {
  LstmProbe p;
  p.input = random_tensor({len, in}, rng);
  p.layer = make_lstm(in, hidden, rng);
  randomize_bias(p.layer.bias, rng);
  p.head = random_head(hidden, rng);
  p.valid_length = 1 + rng.below(len);
  p.label = random_label(rng);
  return p;
}

std::vector<Tensor*> LstmProbe::parameters() {
  return {&input, &layer.input_weight, &layer.recurrent_weight, &layer.bias, &head.weight, &head.bias};
}

double LstmProbe::loss() const {
  return cross_entropy_loss(softmax(dense_forward(lstm_forward(input, layer, valid_length), head)), label);
}

std::vector<Tensor> LstmProbe::gradients() const {
  LstmCache lc;
  const Tensor h = lstm_forward(input, layer, valid_length, &lc);
  HeadPass hp = run_head(h, head, label);
  Dense g_head = zeros_like(head);
  Lstm g_layer = zeros_like(layer);
  const Tensor dh = dense_backward(head, hp.cache, hp.dlogits, g_head);
  Tensor dx = lstm_backward(layer, lc, dh, g_layer);
  return {dx, g_layer.input_weight, g_layer.recurrent_weight, g_layer.bias, g_head.weight, g_head.bias};
}

}  // namespace mpat::nn
