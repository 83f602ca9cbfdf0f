#include "mpat/model.hpp"

#include <sstream>

#include "mpat/config.hpp"

namespace mpat {

using nn::Tensor;

std::string_view to_string(InputMode m) { return m == InputMode::WithContext ? "with_context" : "target_only"; }

InputMode parse_input_mode(std::string_view s) {
  if (s == "with_context" || s == "with-context" || s == "context") return InputMode::WithContext;
  if (s == "target_only" || s == "target-only" || s == "target") return InputMode::TargetOnly;
  throw DataError("unknown input mode '" + std::string(s) + "' (expected target_only or with_context)");
}

void EncoderConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw DataError(std::string("config: ") + name + " must be positive");
  };
  positive(embedding_dim, "embedding_dim");
  positive(cnn.filters, "cnn.filters");
  positive(cnn.width, "cnn.width");
  positive(cnn.dilation, "cnn.dilation");
  positive(cnn.layers, "cnn.layers");
  positive(lstm_hidden, "lstm_hidden");
  positive(head_hidden, "head_hidden");
  if (fc_sizes.size() != 2 || fc_sizes[0] == 0 || fc_sizes[1] != kSentenceVectorSize) {
    throw DataError("config: fc_sizes must be two positive sizes ending in 10");
  }
  if (max_len != 0 && max_len < cnn_receptive_field()) {
    throw DataError("config: max_len " + std::to_string(max_len) + " is shorter than the CNN receptive field " +
                    std::to_string(cnn_receptive_field()));
  }
}

std::size_t EncoderConfig::resolved_max_len(InputMode mode) const {
  if (max_len) return max_len;
  return mode == InputMode::WithContext ? kDefaultMaxLenWithContext : kDefaultMaxLenTargetOnly;
}

std::size_t encoder_parameter_count(const EncoderConfig& c) {
  const auto E = c.embedding_dim, F = c.cnn.filters, W = c.cnn.width, H = c.lstm_hidden;
  const auto fc = c.fc_sizes.at(0);
  std::size_t n = F * (W * E + 1) + (c.cnn.layers - 1) * F * (W * F + 1);
  n += 4 * H * (E + H + 1);
  n += fc * (F + H + 1);
  n += kSentenceVectorSize * (fc + 1);
  return n;
}

std::size_t head_parameter_count(const EncoderConfig& c) {
  return c.head_hidden * (2 * kSentenceVectorSize + 1) + 2 * (c.head_hidden + 1);
}

EncoderParams make_encoder(const EncoderConfig& c, Rng& rng) {
  EncoderParams e;
  std::size_t channels = c.embedding_dim;
  for (std::size_t i = 0; i < c.cnn.layers; ++i) {
    e.convs.push_back(nn::make_conv1d(channels, c.cnn.filters, c.cnn.width, c.cnn.dilation, c.activation, rng));
    channels = c.cnn.filters;
  }
  e.lstm = nn::make_lstm(c.embedding_dim, c.lstm_hidden, rng);
  e.fc1 = nn::make_dense(c.cnn.filters + c.lstm_hidden, c.fc_sizes[0], c.activation, rng);
  e.fc2 = nn::make_dense(c.fc_sizes[0], kSentenceVectorSize, nn::Activation::Identity, rng);
  return e;
}

EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams z;
  for (const auto& c : p.convs) z.convs.push_back(nn::zeros_like(c));
  z.lstm = nn::zeros_like(p.lstm);
  z.fc1 = nn::zeros_like(p.fc1);
  z.fc2 = nn::zeros_like(p.fc2);
  return z;
}

MpatParams zeros_like(const MpatParams& p) {
  return {zeros_like(p.encoder_a), zeros_like(p.encoder_b), nn::zeros_like(p.head_hidden),
          nn::zeros_like(p.head_out)};
}

Tensor encode_sentence(const EncodedSentence& s, const EncoderParams& p, const EncoderConfig& c,
                       EncoderTape* tape) {
  const auto& x = s.matrix;
  if (x.rank() != 2 || x.dim(1) != c.embedding_dim) {
    throw std::invalid_argument("encode_sentence: sentence matrix " + nn::shape_string(x.shape()) +
                                " does not match embedding_dim " + std::to_string(c.embedding_dim));
  }
  if (tape) tape->convs.resize(p.convs.size());
  Tensor h = x;
  for (std::size_t i = 0; i < p.convs.size(); ++i) {
    h = nn::conv1d_forward(h, p.convs[i], tape ? &tape->convs[i] : nullptr);
  }
  const Tensor pooled = nn::global_max_pool(h, tape ? &tape->pool : nullptr);
  const Tensor last = nn::lstm_forward(x, p.lstm, s.valid_length, tape ? &tape->lstm : nullptr);
  const Tensor hidden = nn::dense_forward(nn::concat(pooled, last), p.fc1, tape ? &tape->fc1 : nullptr);
  return nn::dense_forward(hidden, p.fc2, tape ? &tape->fc2 : nullptr);
}

void encode_sentence_backward(const EncoderParams& p, const EncoderTape& tape, const Tensor& dvec,
                              EncoderParams& grad) {
  const Tensor dhidden = nn::dense_backward(p.fc2, tape.fc2, dvec, grad.fc2);
  const Tensor dcat = nn::dense_backward(p.fc1, tape.fc1, dhidden, grad.fc1);
  const auto F = tape.pool.argmax.size();
  const auto H = p.lstm.hidden_size();
  Tensor dpooled({F}, std::vector<double>(dcat.data().begin(), dcat.data().begin() + static_cast<std::ptrdiff_t>(F)));
  Tensor dlast({H}, std::vector<double>(dcat.data().begin() + static_cast<std::ptrdiff_t>(F), dcat.data().end()));
  nn::lstm_backward(p.lstm, tape.lstm, dlast, grad.lstm);
  Tensor dh = nn::global_max_pool_backward(tape.pool, dpooled);
  for (std::size_t i = p.convs.size(); i-- > 0;) {
    dh = nn::conv1d_backward(p.convs[i], tape.convs[i], dh, grad.convs[i]);
  }
}

MpatModel::MpatModel(EncoderConfig config, InputMode mode, std::uint64_t seed)
    : config_(std::move(config)), mode_(mode) {
  config_.validate();
  config_.max_len = config_.resolved_max_len(mode_);
  config_.validate();
  Rng rng(seed);
  params_.encoder_a = make_encoder(config_, rng);
  params_.encoder_b = make_encoder(config_, rng);
  params_.head_hidden = nn::make_dense(2 * kSentenceVectorSize, config_.head_hidden, config_.activation, rng);
  params_.head_out = nn::make_dense(config_.head_hidden, 2, nn::Activation::Identity, rng);
}

namespace {

struct ForwardState {
  EncoderTape tape_a, tape_b;
  nn::DenseCache hidden, out;
};

Tensor head_logits(const MpatParams& p, const EncoderConfig& c, const EncodedSentence& a, const EncodedSentence& b,
                   ForwardState* st) {
  const Tensor va = encode_sentence(a, p.encoder_a, c, st ? &st->tape_a : nullptr);
  const Tensor vb = encode_sentence(b, p.encoder_b, c, st ? &st->tape_b : nullptr);
  const Tensor h = nn::dense_forward(nn::concat(va, vb), p.head_hidden, st ? &st->hidden : nullptr);
  return nn::dense_forward(h, p.head_out, st ? &st->out : nullptr);
}

}  // namespace

Tensor MpatModel::probabilities(const EncodedSentence& metaphor, const EncodedSentence& candidate) const {
  return nn::softmax(head_logits(params_, config_, metaphor, candidate, nullptr));
}

double MpatModel::loss_and_gradients(const EncodedSentence& metaphor, const EncodedSentence& candidate, int label,
                                     MpatParams& grad) const {
  ForwardState st;
  const Tensor probs = nn::softmax(head_logits(params_, config_, metaphor, candidate, &st));
  const double loss = nn::cross_entropy_loss(probs, label);
  const Tensor dlogits = nn::softmax_cross_entropy_grad(probs, label);
  const Tensor dh = nn::dense_backward(params_.head_out, st.out, dlogits, grad.head_out);
  const Tensor dcat = nn::dense_backward(params_.head_hidden, st.hidden, dh, grad.head_hidden);
  const auto n = static_cast<std::ptrdiff_t>(kSentenceVectorSize);
  Tensor da({kSentenceVectorSize}, std::vector<double>(dcat.data().begin(), dcat.data().begin() + n));
  Tensor db({kSentenceVectorSize}, std::vector<double>(dcat.data().begin() + n, dcat.data().end()));
  encode_sentence_backward(params_.encoder_a, st.tape_a, da, grad.encoder_a);
  encode_sentence_backward(params_.encoder_b, st.tape_b, db, grad.encoder_b);
  return loss;
}

std::vector<Tensor*> MpatModel::tensors() {
  std::vector<Tensor*> out;
  for_each_param(params_, [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> MpatModel::tensors() const {
  std::vector<const Tensor*> out;
  for_each_param(params_, [&](const std::string&, const Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<std::string> MpatModel::tensor_names() const {
  std::vector<std::string> out;
  for_each_param(params_, [&](const std::string& name, const Tensor&) { out.push_back(name); });
  return out;
}

std::size_t MpatModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += t->size();
  return n;
}

double score_pair(const EncodedSentence& metaphor, const EncodedSentence& candidate, const MpatModel& model) {
  return model.probabilities(metaphor, candidate)[1];
}

int classify(double score) { return score >= 0.5 ? 1 : 0; }

double gradient_rating(double score) { return 1.0 + 3.0 * score; }

std::pair<std::string, std::string> render_input(const PairRecord& pair, InputMode mode) {
  if (mode == InputMode::TargetOnly) return {pair.metaphor_text, pair.candidate_text};
  if (pair.condition() != Condition::InContext) {
    throw DataError("pair '" + pair.pair_id + "' has no context but the input mode requires one");
  }
  return {pair.rendered_metaphor(), pair.rendered_candidate()};
}

std::pair<EncodedSentence, EncodedSentence> encode_pair(const PairRecord& pair, InputMode mode,
                                                        const EmbeddingTable& table, std::size_t max_len) {
  auto [a, b] = render_input(pair, mode);
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  return {encode(ta, table, max_len), encode(tb, table, max_len)};
}

double PairObjective::loss() const {
  return nn::cross_entropy_loss(model->probabilities(metaphor, candidate), label);
}

std::vector<Tensor> PairObjective::gradients() const {
  MpatParams grad = zeros_like(model->params());
  model->loss_and_gradients(metaphor, candidate, label, grad);
  std::vector<Tensor> out;
  for_each_param(grad, [&](const std::string&, Tensor& t) { out.push_back(std::move(t)); });
  return out;
}

std::string encoder_config_to_text(const EncoderConfig& c, InputMode mode) {
  std::ostringstream os;
  os << "max_len = " << c.max_len << "\n"
     << "embedding_dim = " << c.embedding_dim << "\n"
     << "cnn.filters = " << c.cnn.filters << "\n"
     << "cnn.width = " << c.cnn.width << "\n"
     << "cnn.dilation = " << c.cnn.dilation << "\n"
     << "cnn.layers = " << c.cnn.layers << "\n"
     << "lstm_hidden = " << c.lstm_hidden << "\n"
     << "fc_sizes = " << c.fc_sizes.at(0) << "," << c.fc_sizes.at(1) << "\n"
     << "activation = " << nn::to_string(c.activation) << "\n"
     << "head_hidden = " << c.head_hidden << "\n"
     << "input_mode = " << to_string(mode) << "\n";
  return os.str();
}

void apply_encoder_key(EncoderConfig& c, const std::string& key, const std::string& value) {
  if (key == "max_len") c.max_len = config::to_size(key, value);
  else if (key == "embedding_dim") c.embedding_dim = config::to_size(key, value);
  else if (key == "cnn.filters") c.cnn.filters = config::to_size(key, value);
  else if (key == "cnn.width") c.cnn.width = config::to_size(key, value);
  else if (key == "cnn.dilation") c.cnn.dilation = config::to_size(key, value);
  else if (key == "cnn.layers") c.cnn.layers = config::to_size(key, value);
  else if (key == "lstm_hidden") c.lstm_hidden = config::to_size(key, value);
  else if (key == "fc_sizes") c.fc_sizes = config::to_size_list(key, value);
  else if (key == "activation") c.activation = nn::parse_activation(value);
  else if (key == "head_hidden") c.head_hidden = config::to_size(key, value);
  else throw DataError("unknown model config key '" + key + "'");
}

nn::Checkpoint make_checkpoint(const MpatModel& model, const nn::AdamState* adam, std::uint64_t seed,
                               const std::string& extra_config) {
  nn::Checkpoint ck;
  ck.seed = seed;
  ck.config_text = encoder_config_to_text(model.config(), model.input_mode()) + extra_config;
  const auto names = model.tensor_names();
  const auto values = model.tensors();
  for (std::size_t i = 0; i < names.size(); ++i) ck.tensors.emplace_back(names[i], *values[i]);
  if (adam) {
    ck.adam = adam->config;
    ck.adam_step = adam->step;
    for (std::size_t i = 0; i < names.size(); ++i) ck.tensors.emplace_back("adam.m/" + names[i], adam->first_moment[i]);
    for (std::size_t i = 0; i < names.size(); ++i) {
      ck.tensors.emplace_back("adam.v/" + names[i], adam->second_moment[i]);
    }
  }
  return ck;
}

MpatModel model_from_checkpoint(const nn::Checkpoint& ck, nn::AdamState* adam) {
  EncoderConfig cfg;
  InputMode mode = InputMode::TargetOnly;
  for (const auto& [key, value] : config::parse(ck.config_text)) {
    if (key == "input_mode") mode = parse_input_mode(value);
    else if (key.starts_with("train.") || key.starts_with("run.")) continue;
    else apply_encoder_key(cfg, key, value);
  }
  MpatModel model(cfg, mode, 0);
  const auto names = model.tensor_names();
  auto tensors = model.tensors();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Tensor* t = ck.find(names[i]);
    if (!t) throw DataError("checkpoint lacks tensor '" + names[i] + "'");
    if (t->shape() != tensors[i]->shape()) {
      throw DataError("checkpoint tensor '" + names[i] + "' has shape " + nn::shape_string(t->shape()) +
                      ", expected " + nn::shape_string(tensors[i]->shape()));
    }
    *tensors[i] = *t;
  }
  if (adam) {
    *adam = nn::AdamState::for_params(std::span<Tensor* const>(tensors), ck.adam);
    adam->step = ck.adam_step;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const Tensor* m = ck.find("adam.m/" + names[i]);
      const Tensor* v = ck.find("adam.v/" + names[i]);
      if (m && v) {
        adam->first_moment[i] = *m;
        adam->second_moment[i] = *v;
      }
    }
  }
  return model;
}

}  // namespace mpat
