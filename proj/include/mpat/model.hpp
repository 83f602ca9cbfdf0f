#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mpat/corpus.hpp"
#include "mpat/embeddings.hpp"
#include "mpat/nn/checkpoint.hpp"
#include "mpat/nn/layers.hpp"

namespace mpat {

/// Whether the network reads the bare sentences or the sentences wrapped in their contexts.
enum class InputMode { TargetOnly, WithContext };
std::string_view to_string(InputMode m);
InputMode parse_input_mode(std::string_view s);

inline constexpr std::size_t kSentenceVectorSize = 10;
inline constexpr std::size_t kDefaultMaxLenTargetOnly = 50;
inline constexpr std::size_t kDefaultMaxLenWithContext = 100;

/// Shape of one sentence encoder and of the classifier head.
///
/// Config file keys match the field names; the CNN block uses dotted keys
/// (cnn.filters, cnn.width, cnn.dilation, cnn.layers) and fc_sizes is a
/// comma-separated pair such as "64,10".
struct EncoderConfig {
  std::size_t max_len = 0;  // 0: pick from the input mode
  std::size_t embedding_dim = 300;
  struct Cnn {
    std::size_t filters = 32;
    std::size_t width = 3;
    std::size_t dilation = 2;
    std::size_t layers = 2;
    bool operator==(const Cnn&) const = default;
  } cnn;
  std::size_t lstm_hidden = 64;
  std::vector<std::size_t> fc_sizes = {64, 10};
  nn::Activation activation = nn::Activation::ReLU;
  std::size_t head_hidden = 16;

  /// Throws DataError when a size is zero, fc_sizes is not (n, 10) or
  /// max_len is shorter than the CNN stack's receptive field.
  void validate() const;
  std::size_t cnn_receptive_field() const { return cnn.layers * (cnn.width - 1) * cnn.dilation + 1; }
  std::size_t resolved_max_len(InputMode mode) const;

  bool operator==(const EncoderConfig&) const = default;
};

/// Closed-form parameter counts, used to cross-check the wiring.
std::size_t encoder_parameter_count(const EncoderConfig& c);
std::size_t head_parameter_count(const EncoderConfig& c);

struct EncoderParams {
  std::vector<nn::Conv1D> convs;
  nn::Lstm lstm;
  nn::Dense fc1;
  nn::Dense fc2;
};

struct MpatParams {
  EncoderParams encoder_a;
  EncoderParams encoder_b;
  nn::Dense head_hidden;
  nn::Dense head_out;
};

template <class E, class F>
  requires std::same_as<std::remove_const_t<E>, EncoderParams>
void for_each_param(E& e, const std::string& prefix, F&& f) {
  for (std::size_t i = 0; i < e.convs.size(); ++i) {
    nn::for_each_param(e.convs[i], prefix + "conv" + std::to_string(i) + ".", f);
  }
  nn::for_each_param(e.lstm, prefix + "lstm.", f);
  nn::for_each_param(e.fc1, prefix + "fc1.", f);
  nn::for_each_param(e.fc2, prefix + "fc2.", f);
}

template <class M, class F>
  requires std::same_as<std::remove_const_t<M>, MpatParams>
void for_each_param(M& m, F&& f) {
  for_each_param(m.encoder_a, "encoder_a.", f);
  for_each_param(m.encoder_b, "encoder_b.", f);
  nn::for_each_param(m.head_hidden, "head.hidden.", f);
  nn::for_each_param(m.head_out, "head.out.", f);
}

EncoderParams make_encoder(const EncoderConfig& c, Rng& rng);
EncoderParams zeros_like(const EncoderParams& p);
MpatParams zeros_like(const MpatParams& p);

/// Intermediate values of one encoder pass, kept for backpropagation.
struct EncoderTape {
  std::vector<nn::Conv1DCache> convs;
  nn::PoolCache pool;
  nn::LstmCache lstm;
  nn::DenseCache fc1;
  nn::DenseCache fc2;
};

/// Parallel dilated-CNN (max-pooled) and LSTM branches, concatenated and
/// passed through two fully connected layers to a 10-dimensional vector.
nn::Tensor encode_sentence(const EncodedSentence& s, const EncoderParams& p, const EncoderConfig& c,
                           EncoderTape* tape = nullptr);
/// Accumulates parameter gradients for d(loss)/d(vector) = `dvec`.
void encode_sentence_backward(const EncoderParams& p, const EncoderTape& tape, const nn::Tensor& dvec,
                              EncoderParams& grad);

/// Two untied sentence encoders whose outputs are concatenated and scored by
/// a small fully connected head ending in a 2-way softmax.
class MpatModel {
 public:
  MpatModel() = default;
  MpatModel(EncoderConfig config, InputMode mode, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  InputMode input_mode() const { return mode_; }
  std::size_t max_len() const { return config_.max_len; }
  MpatParams& params() { return params_; }
  const MpatParams& params() const { return params_; }

  /// Softmax over {non-paraphrase, paraphrase}.
  nn::Tensor probabilities(const EncodedSentence& metaphor, const EncodedSentence& candidate) const;
  /// Loss for one labelled pair; gradients are added into `grad`.
  double loss_and_gradients(const EncodedSentence& metaphor, const EncodedSentence& candidate, int label,
                            MpatParams& grad) const;

  std::vector<nn::Tensor*> tensors();
  std::vector<const nn::Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;

 private:
  EncoderConfig config_;
  InputMode mode_ = InputMode::TargetOnly;
  MpatParams params_;
};

/// Positive-class probability for (metaphor, candidate). Not symmetric in its arguments.
double score_pair(const EncodedSentence& metaphor, const EncodedSentence& candidate, const MpatModel& model);

/// 1 iff score >= 0.5.
int classify(double score);
/// Affine map of a [0, 1] score onto the 1-4 rating scale.
double gradient_rating(double score);

/// Texts fed to the two encoders.
std::pair<std::string, std::string> render_input(const PairRecord& pair, InputMode mode);

/// Tokenize, embed and pad both sides of a pair for `model`.
std::pair<EncodedSentence, EncodedSentence> encode_pair(const PairRecord& pair, InputMode mode,
                                                        const EmbeddingTable& table, std::size_t max_len);

/// Loss objective for one pair, in the shape nn::grad_check expects.
struct PairObjective {
  MpatModel* model = nullptr;
  EncodedSentence metaphor;
  EncodedSentence candidate;
  int label = 0;

  std::vector<nn::Tensor*> parameters() { return model->tensors(); }
  double loss() const;
  std::vector<nn::Tensor> gradients() const;
};

// Config text round trip ("key = value" lines).
std::string encoder_config_to_text(const EncoderConfig& c, InputMode mode);
void apply_encoder_key(EncoderConfig& c, const std::string& key, const std::string& value);

/// Parameters, Adam state and config in one checkpoint.
nn::Checkpoint make_checkpoint(const MpatModel& model, const nn::AdamState* adam, std::uint64_t seed,
                               const std::string& extra_config = "");
/// Rebuilds the model (and optionally the optimizer state) from a checkpoint.
MpatModel model_from_checkpoint(const nn::Checkpoint& ckpt, nn::AdamState* adam = nullptr);

}  // namespace mpat
