#include <cmath>

#include "doctest.h"
#include "mpat/model.hpp"
#include "mpat/nn/gradcheck.hpp"
#include "support.hpp"

using namespace mpat;
using mpat::testing::synthetic_table;

namespace {

EncoderConfig small_config(std::size_t dim = 5) {
  EncoderConfig c;
  c.max_len = 12;
  c.embedding_dim = dim;
  c.cnn = {4, 3, 2, 2};
  c.lstm_hidden = 6;
  c.fc_sizes = {8, 10};
  c.head_hidden = 8;
  return c;
}

EncodedSentence random_sentence(const EncoderConfig& c, Rng& rng, std::size_t valid) {
  EncodedSentence s{nn::Tensor({c.max_len, c.embedding_dim}), valid};
  for (std::size_t r = 0; r < valid; ++r) {
    for (auto& v : s.matrix.row(r)) v = rng.normal();
  }
  return s;
}

// Counted layer by layer from the architecture description.
std::size_t expected_parameters(const EncoderConfig& c) {
  const std::size_t E = c.embedding_dim, F = c.cnn.filters, W = c.cnn.width, H = c.lstm_hidden, L = c.cnn.layers;
  std::size_t conv = 0;
  for (std::size_t i = 0; i < L; ++i) conv += F * W * (i == 0 ? E : F) + F;
  const std::size_t lstm = 4 * H * E + 4 * H * H + 4 * H;
  const std::size_t fc = (F + H) * c.fc_sizes[0] + c.fc_sizes[0] + c.fc_sizes[0] * 10 + 10;
  const std::size_t head = 20 * c.head_hidden + c.head_hidden + c.head_hidden * 2 + 2;
  return 2 * (conv + lstm + fc) + head;
}

}  // namespace

TEST_CASE("classify and gradient_rating") {
  CHECK(classify(0.5) == 1);
  CHECK(classify(0.49) == 0);
  CHECK(classify(0.51) == 1);
  CHECK(gradient_rating(0.0) == 1.0);
  CHECK(gradient_rating(1.0) == 4.0);
  CHECK(gradient_rating(0.5) == 2.5);
  // The 0.5 score threshold maps onto the 2.5 rating threshold.
  for (int i = 0; i <= 100; ++i) {
    const double s = i / 100.0;
    CHECK((gradient_rating(s) >= 2.5) == (classify(s) == 1));
  }
}

TEST_CASE("render_input") {
  PairRecord p{"2", "g", "The crowd was a roaring river.", "The crowd was huge and noisy.", {}, {}};
  CHECK(render_input(p, InputMode::TargetOnly) == std::pair<std::string, std::string>{p.metaphor_text, p.candidate_text});
  CHECK_THROWS_AS(render_input(p, InputMode::WithContext), DataError);

  const auto q = contextualize(p, "They had arrived in the capital city.", "It was glorious.");
  const auto [a, b] = render_input(q, InputMode::WithContext);
  CHECK(a.rfind("They had arrived in the capital city.", 0) == 0);
  CHECK(b.rfind("They had arrived in the capital city.", 0) == 0);
  CHECK(render_input(q, InputMode::TargetOnly).first == p.metaphor_text);
}

TEST_CASE("parameter count matches the layer-by-layer formula") {
  for (std::size_t dim : {3u, 5u, 9u}) {
    auto c = small_config(dim);
    CHECK(encoder_parameter_count(c) * 2 + head_parameter_count(c) == expected_parameters(c));
    const MpatModel m(c, InputMode::TargetOnly, 1);
    CHECK(m.parameter_count() == expected_parameters(c));
    CHECK(m.tensors().size() == m.tensor_names().size());
  }
  EncoderConfig defaults;
  CHECK(encoder_parameter_count(defaults) * 2 + head_parameter_count(defaults) == expected_parameters(defaults));
}

TEST_CASE("config validation and max_len resolution") {
  EncoderConfig c;
  CHECK(c.resolved_max_len(InputMode::TargetOnly) == 50);
  CHECK(c.resolved_max_len(InputMode::WithContext) == 100);
  c.max_len = 30;
  CHECK(c.resolved_max_len(InputMode::WithContext) == 30);
  CHECK_NOTHROW(c.validate());

  auto bad = small_config();
  bad.fc_sizes = {8, 9};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = small_config();
  bad.max_len = 4;  // receptive field is 9
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = small_config();
  bad.cnn.filters = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);

  auto text_cfg = small_config();
  text_cfg.activation = nn::Activation::Tanh;
  const auto text = encoder_config_to_text(text_cfg, InputMode::WithContext);
  EncoderConfig back;
  for (const auto& line : {std::string("cnn.filters"), std::string("fc_sizes")}) CHECK(text.find(line) != std::string::npos);
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    const auto line = text.substr(start, end - start);
    start = end + 1;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos || line.rfind("input_mode", 0) == 0) continue;
    std::string value = line.substr(eq + 3);
    if (value.size() >= 2 && value.front() == '"') value = value.substr(1, value.size() - 2);
    apply_encoder_key(back, line.substr(0, eq), value);
  }
  CHECK(back == text_cfg);
  CHECK_THROWS_AS(apply_encoder_key(back, "no_such_key", "1"), DataError);
}

TEST_CASE("encoder forward properties") {
  const auto c = small_config();
  const MpatModel m(c, InputMode::TargetOnly, 3);
  Rng rng(5);
  SUBCASE("zero input with zero biases encodes to zero") {
    const EncodedSentence zero{nn::Tensor({c.max_len, c.embedding_dim}), 4};
    const auto v = encode_sentence(zero, m.params().encoder_a, m.config());
    CHECK(v.shape() == std::vector<std::size_t>{10});
    for (double x : v.data()) CHECK(x == 0.0);
  }
  SUBCASE("different sentences give different vectors") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto a = random_sentence(c, rng, 6), b = random_sentence(c, rng, 6);
      CHECK(encode_sentence(a, m.params().encoder_a, m.config()) !=
            encode_sentence(b, m.params().encoder_a, m.config()));
    }
  }
  SUBCASE("shape mismatch is rejected") {
    const EncodedSentence wrong{nn::Tensor({c.max_len, c.embedding_dim + 1}), 2};
    CHECK_THROWS(encode_sentence(wrong, m.params().encoder_a, m.config()));
  }
}

TEST_CASE("score_pair") {
  const auto c = small_config();
  Rng rng(8);
  SUBCASE("zero head weights give 0.5 everywhere") {
    MpatModel m(c, InputMode::TargetOnly, 4);
    m.params().head_out.weight.fill(0.0);
    m.params().head_out.bias.fill(0.0);
    for (int i = 0; i < 10; ++i) {
      CHECK(score_pair(random_sentence(c, rng, 3 + i % 5), random_sentence(c, rng, 4), m) == doctest::Approx(0.5));
    }
  }
  SUBCASE("scores lie in [0, 1] and the two sides are not interchangeable") {
    const MpatModel m(c, InputMode::TargetOnly, 4);
    int asymmetric = 0;
    for (int i = 0; i < 10; ++i) {
      const auto a = random_sentence(c, rng, 6), b = random_sentence(c, rng, 8);
      const double ab = score_pair(a, b, m), ba = score_pair(b, a, m);
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
      if (std::abs(ab - ba) > 1e-12) ++asymmetric;
    }
    CHECK(asymmetric > 0);
  }
  SUBCASE("same seed gives the same model") {
    const MpatModel a(c, InputMode::TargetOnly, 99), b(c, InputMode::TargetOnly, 99), d(c, InputMode::TargetOnly, 100);
    const auto s1 = random_sentence(c, rng, 5), s2 = random_sentence(c, rng, 5);
    CHECK(score_pair(s1, s2, a) == score_pair(s1, s2, b));
    CHECK(score_pair(s1, s2, a) != score_pair(s1, s2, d));
  }
}

TEST_CASE("full model gradients agree with finite differences") {
  const auto c = small_config(4);
  Rng rng(13);
  for (int trial = 0; trial < 3; ++trial) {
    MpatModel m(c, InputMode::TargetOnly, 20 + trial);
    // Move every bias off zero so no padded position sits on the ReLU kink.
    for (auto* t : m.tensors()) {
      if (t->rank() == 1) {
        for (auto& v : t->data()) v = rng.uniform(-0.1, 0.1);
      }
    }
    PairObjective obj{&m, random_sentence(c, rng, 5 + trial), random_sentence(c, rng, 7), trial % 2};
    const auto analytic = obj.gradients();
    auto params = obj.parameters();
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      nn::Tensor& p = *params[k];
      for (std::size_t i = 0; i < p.size(); i += 3) {
        const double saved = p[i];
        auto at = [&](double d) {
          p[i] = saved + d;
          return obj.loss();
        };
        const double h = 1e-5;
        const double num = (at(h) - at(-h)) / (2 * h);
        p[i] = saved;
        worst = std::max(worst, std::abs(analytic[k][i] - num));
      }
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("checkpoint round trip restores the model") {
  const auto c = small_config();
  const MpatModel m(c, InputMode::WithContext, 31);
  const auto ckpt = make_checkpoint(m, nullptr, 31, "run.regimen = \"ooc-ic\"\n");
  const auto back = model_from_checkpoint(nn::deserialize_checkpoint(nn::serialize_checkpoint(ckpt)));
  CHECK(back.config() == m.config());
  CHECK(back.input_mode() == InputMode::WithContext);
  REQUIRE(back.tensors().size() == m.tensors().size());
  for (std::size_t i = 0; i < m.tensors().size(); ++i) CHECK(*back.tensors()[i] == *m.tensors()[i]);

  auto broken = ckpt;
  broken.tensors.pop_back();
  CHECK_THROWS_AS(model_from_checkpoint(broken), DataError);
}

TEST_CASE("encode_pair uses the rendered texts") {
  const auto table = synthetic_table(5, 1);
  PairRecord p{"p", "g", "the river.", "the stone light.", {}, {}};
  const auto [a, b] = encode_pair(p, InputMode::TargetOnly, table, 12);
  CHECK(a.valid_length == 2);
  CHECK(b.valid_length == 3);
  const auto q = contextualize(p, "before context.", "after.");
  const auto [qa, qb] = encode_pair(q, InputMode::WithContext, table, 12);
  CHECK(qa.valid_length == 5);
  CHECK(qb.valid_length == 6);
  CHECK(qa.matrix.at(0, 0) == doctest::Approx(table.lookup("before")[0]));
}
