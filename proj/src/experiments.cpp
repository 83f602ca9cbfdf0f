#include "mpat/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mpat/annotations.hpp"
#include "mpat/config.hpp"
#include "mpat/metrics.hpp"
#include "mpat/nn/gradcheck.hpp"

namespace mpat {

using nlohmann::json;

std::string Regimen::name() const { return std::string(to_string(train_set)) + "-" + std::string(to_string(test_set)); }

Regimen parse_regimen(std::string_view s) {
  for (const auto& r : all_regimens()) {
    if (r.name() == s) return r;
  }
  throw DataError("unknown regimen '" + std::string(s) + "' (expected ooc-ooc, ooc-ic, ic-ooc or ic-ic)");
}

std::vector<Regimen> all_regimens() {
  using enum Condition;
  return {{InContext, InContext}, {OutOfContext, InContext}, {InContext, OutOfContext}, {OutOfContext, OutOfContext}};
}

std::uint64_t TrainConfig::require_seed() const {
  if (!seed) throw DataError("a seed is required (set seed in the config or pass --seed)");
  return *seed;
}

void apply_train_key(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "epochs") c.epochs = config::to_size(key, value);
  else if (key == "batch_size") c.batch_size = config::to_size(key, value);
  else if (key == "seed") c.seed = config::to_u64(key, value);
  else if (key == "patience") c.patience = config::to_size(key, value);
  else if (key == "learning_rate") c.learning_rate = config::to_double(key, value);
  else if (key == "validation_fraction") c.validation_fraction = config::to_double(key, value);
  else if (key == "test_fraction") c.test_fraction = config::to_double(key, value);
  else throw DataError("unknown training config key '" + key + "'");
}

std::string train_config_to_text(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "train.epochs = " << c.epochs << "\n"
     << "train.batch_size = " << c.batch_size << "\n"
     << "train.seed = " << (c.seed ? std::to_string(*c.seed) : "") << "\n"
     << "train.patience = " << c.patience << "\n"
     << "train.learning_rate = " << c.learning_rate << "\n"
     << "train.validation_fraction = " << c.validation_fraction << "\n"
     << "train.test_fraction = " << c.test_fraction << "\n";
  return os.str();
}

std::vector<LabeledPair> prepare_examples(const Corpus& corpus, Condition label_condition, InputMode mode,
                                          const EmbeddingTable& table, std::size_t max_len) {
  std::vector<LabeledPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs()) {
    auto mean = corpus.mean(p.pair_id, label_condition);
    if (!mean) {
      throw DataError("pair '" + p.pair_id + "' has no " + std::string(to_string(label_condition)) + " mean rating");
    }
    auto [a, b] = encode_pair(p, mode, table, max_len);
    out.push_back({p.pair_id, p.group_id, std::move(a), std::move(b), *mean, binarize(*mean) ? 1 : 0});
  }
  return out;
}

namespace {

double monitored_f(const MpatModel& model, const std::vector<LabeledPair>& set) {
  std::vector<int> pred, gold;
  for (const auto& ex : set) {
    pred.push_back(classify(score_pair(ex.metaphor, ex.candidate, model)));
    gold.push_back(ex.label);
  }
  return f_score(pred, gold);
}

}  // namespace

TrainResult train(MpatModel model, const std::vector<LabeledPair>& training, const std::vector<LabeledPair>& validation,
                  const TrainConfig& config) {
  if (training.empty()) throw DataError("train: empty training set");
  if (config.batch_size == 0) throw DataError("train: batch_size must be positive");
  const auto seed = config.require_seed();

  TrainResult result;
  auto params = model.tensors();
  result.adam = nn::AdamState::for_params(std::span<nn::Tensor* const>(params), {.learning_rate = config.learning_rate});

  MpatParams grad = zeros_like(model.params());
  std::vector<nn::Tensor*> grad_tensors;
  for_each_param(grad, [&](const std::string&, nn::Tensor& t) { grad_tensors.push_back(&t); });
  std::vector<const nn::Tensor*> grad_view(grad_tensors.begin(), grad_tensors.end());

  const auto& monitor = validation.empty() ? training : validation;
  Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(training.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_f = -1.0;
  MpatParams best_params = model.params();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + config.batch_size);
      for (auto* g : grad_tensors) g->fill(0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = training[order[i]];
        const double loss = model.loss_and_gradients(ex.metaphor, ex.candidate, ex.label, grad);
        if (!std::isfinite(loss)) throw std::domain_error("train: non-finite loss at epoch " + std::to_string(epoch));
        loss_sum += loss;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto* g : grad_tensors) {
        for (auto& v : g->data()) v *= scale;
        g->require_finite("gradient");
      }
      nn::adam_step(params, grad_view, result.adam);
    }
    const double val_f = monitored_f(model, monitor);
    result.log.push_back({epoch, loss_sum / static_cast<double>(training.size()), val_f});
    if (val_f > best_f) {
      best_f = val_f;
      result.best_epoch = epoch;
      since_best = 0;
      if (config.patience) best_params = model.params();
    } else if (config.patience && ++since_best >= config.patience) {
      break;
    }
  }
  if (config.patience) model.params() = best_params;
  result.model = std::move(model);
  return result;
}

std::string training_log_csv(const std::vector<TrainingLogEntry>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,val_f\n";
  for (const auto& e : log) os << e.epoch << "," << e.loss << "," << e.val_f << "\n";
  return os.str();
}

EvalReport evaluate(const MpatModel& model, const std::vector<LabeledPair>& test) {
  if (test.empty()) throw DataError("evaluate: empty test set");
  EvalReport r;
  r.test_size = test.size();
  std::vector<int> pred, gold;
  std::vector<double> scores, means;
  std::map<std::string, GroupSample> groups;
  for (const auto& ex : test) {
    const double s = score_pair(ex.metaphor, ex.candidate, model);
    const int p = classify(s);
    r.per_pair[ex.pair_id] = {s, p, ex.gold_mean, ex.label};
    pred.push_back(p);
    gold.push_back(ex.label);
    scores.push_back(s);
    means.push_back(ex.gold_mean);
    if (!ex.group_id.empty()) {
      auto& g = groups[ex.group_id];
      g.model_scores.push_back(s);
      g.human_means.push_back(ex.gold_mean);
    }
  }
  r.f_score = f_score(pred, gold);
  if (test.size() >= 2) r.pearson = pearson(scores, means);
  std::vector<GroupSample> usable;
  for (auto& [id, g] : groups) {
    if (g.model_scores.size() >= 2) usable.push_back(std::move(g));
  }
  if (!usable.empty()) {
    try {
      const auto gp = grouped_pearson(usable);
      r.grouped_pearson = gp.value;
      r.grouped_groups_used = gp.groups_used;
      r.grouped_groups_skipped = gp.groups_skipped;
    } catch (const std::domain_error&) {
      r.grouped_groups_skipped = usable.size();
    }
  }
  return r;
}

json report_to_json(const EvalReport& r) {
  json j;
  j["regimen"] = r.regimen;
  j["f_score"] = r.f_score;
  j["pearson"] = r.pearson ? json(*r.pearson) : json(nullptr);
  j["pearson_defined"] = r.pearson.has_value();
  j["grouped_pearson"] = r.grouped_pearson ? json(*r.grouped_pearson) : json(nullptr);
  j["grouped_groups_used"] = r.grouped_groups_used;
  j["grouped_groups_skipped"] = r.grouped_groups_skipped;
  j["train_size"] = r.train_size;
  j["test_size"] = r.test_size;
  j["seed"] = r.seed;
  j["embedding_hash"] = r.embedding_hash;
  j["config"] = r.config_snapshot;
  json per = json::object();
  for (const auto& [id, p] : r.per_pair) {
    per[id] = {{"score", p.score},
               {"prediction", p.prediction},
               {"gold_mean", p.gold_mean},
               {"gold_binary", p.gold_binary},
               {"gradient_rating", gradient_rating(p.score)}};
  }
  j["per_pair"] = std::move(per);
  return j;
}

namespace {

struct SideSpec {
  const Corpus* corpus;
  Condition labels;
  InputMode mode;
};

SideSpec side(Condition which, const Corpus* ooc, const Corpus* ic, InputMode context_mode) {
  if (which == Condition::OutOfContext) {
    if (!ooc) throw DataError("this regimen needs the out-of-context corpus");
    return {ooc, Condition::OutOfContext, InputMode::TargetOnly};
  }
  if (!ic) throw DataError("this regimen needs the in-context corpus");
  return {ic, Condition::InContext, context_mode};
}

std::pair<std::vector<LabeledPair>, std::vector<LabeledPair>> training_and_validation(
    const Corpus& train_corpus, const SideSpec& s, const EmbeddingTable& table, std::size_t max_len,
    const TrainConfig& tc) {
  if (tc.patience && tc.validation_fraction > 0.0 && train_corpus.size() >= 20) {
    auto parts = split(train_corpus, tc.validation_fraction, tc.require_seed() + 1, s.labels);
    return {prepare_examples(parts.train, s.labels, s.mode, table, max_len),
            prepare_examples(parts.test, s.labels, s.mode, table, max_len)};
  }
  return {prepare_examples(train_corpus, s.labels, s.mode, table, max_len), {}};
}

EncoderConfig resolve_encoder(const RunSettings& settings, bool uses_context, const EmbeddingTable& table) {
  EncoderConfig enc = settings.encoder;
  if (enc.embedding_dim != table.dimension()) {
    throw DataError("config embedding_dim " + std::to_string(enc.embedding_dim) +
                    " does not match the embedding file dimension " + std::to_string(table.dimension()));
  }
  if (enc.max_len == 0) enc.max_len = uses_context ? kDefaultMaxLenWithContext : kDefaultMaxLenTargetOnly;
  return enc;
}

EvalReport train_and_test(const Corpus& train_corpus, const SideSpec& train_side, const Corpus& test_corpus,
                          const SideSpec& test_side, const EmbeddingTable& table, const RunSettings& settings,
                          TrainResult* training_out) {
  const bool uses_context =
      train_side.mode == InputMode::WithContext || test_side.mode == InputMode::WithContext;
  const EncoderConfig enc = resolve_encoder(settings, uses_context, table);
  const auto seed = settings.train.require_seed();

  for (const auto& p : test_corpus.pairs()) {
    if (&train_corpus != &test_corpus && train_side.corpus == test_side.corpus && train_corpus.find(p.pair_id)) {
      throw std::logic_error("pair '" + p.pair_id + "' appears in both the training and the test split");
    }
  }

  auto [training, validation] = training_and_validation(train_corpus, train_side, table, enc.max_len, settings.train);
  const auto test = prepare_examples(test_corpus, test_side.labels, test_side.mode, table, enc.max_len);

  MpatModel model(enc, uses_context ? InputMode::WithContext : InputMode::TargetOnly, seed);
  TrainResult tr = train(std::move(model), training, validation, settings.train);
  EvalReport report = evaluate(tr.model, test);
  report.train_size = train_corpus.size();
  report.seed = seed;
  report.embedding_hash = settings.embedding_hash;
  report.config_snapshot = encoder_config_to_text(tr.model.config(), tr.model.input_mode()) +
                           train_config_to_text(settings.train);
  if (training_out) *training_out = std::move(tr);
  return report;
}

}  // namespace

RegimenResult run_regimen(const Regimen& regimen, const Corpus* ooc, const Corpus* ic, const EmbeddingTable& table,
                          const RunSettings& settings) {
  const SideSpec train_side = side(regimen.train_set, ooc, ic, settings.context_mode);
  const SideSpec test_side = side(regimen.test_set, ooc, ic, settings.context_mode);
  RegimenResult out;
  if (regimen.same_corpus()) {
    const auto parts = split(*train_side.corpus, settings.train.test_fraction, settings.train.require_seed(),
                             train_side.labels);
    out.report = train_and_test(parts.train, train_side, parts.test, test_side, table, settings, &out.training);
  } else {
    out.report = train_and_test(*train_side.corpus, train_side, *test_side.corpus, test_side, table, settings,
                                &out.training);
  }
  out.report.regimen = regimen.name();
  return out;
}

CrossvalResult crossval(const Corpus& corpus, Condition condition, std::size_t k, const EmbeddingTable& table,
                        const RunSettings& settings) {
  const SideSpec s{&corpus, condition,
                   condition == Condition::InContext ? settings.context_mode : InputMode::TargetOnly};
  const auto folds = kfold(corpus, k, settings.train.require_seed(), condition);
  CrossvalResult out;
  std::vector<double> fs, rs;
  const Regimen regimen{condition, condition};
  for (std::size_t i = 0; i < folds.size(); ++i) {
    auto report = train_and_test(folds[i].train, s, folds[i].test, s, table, settings, nullptr);
    report.regimen = regimen.name() + "/fold" + std::to_string(i);
    fs.push_back(report.f_score);
    if (report.pearson) rs.push_back(*report.pearson);
    else ++out.pearson_undefined_folds;
    out.folds.push_back(std::move(report));
  }
  auto mean_std = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / static_cast<double>(v.size()))};
  };
  std::tie(out.f_mean, out.f_std) = mean_std(fs);
  if (!rs.empty()) {
    auto [m, sd] = mean_std(rs);
    out.pearson_mean = m;
    out.pearson_std = sd;
  }
  return out;
}

json crossval_to_json(const CrossvalResult& r) {
  json j;
  j["k"] = r.folds.size();
  j["f_mean"] = r.f_mean;
  j["f_std"] = r.f_std;
  j["pearson_mean"] = r.pearson_mean ? json(*r.pearson_mean) : json(nullptr);
  j["pearson_std"] = r.pearson_std ? json(*r.pearson_std) : json(nullptr);
  j["pearson_undefined_folds"] = r.pearson_undefined_folds;
  j["std_kind"] = "population";
  json folds = json::array();
  for (const auto& f : r.folds) folds.push_back(report_to_json(f));
  j["folds"] = std::move(folds);
  return j;
}

std::map<std::string, double> score_corpus(const MpatModel& model, const Corpus& corpus, InputMode mode,
                                           const EmbeddingTable& table) {
  std::map<std::string, double> out;
  for (const auto& p : corpus.pairs()) {
    auto [a, b] = encode_pair(p, mode, table, model.max_len());
    out[p.pair_id] = score_pair(a, b, model);
  }
  return out;
}

std::vector<GradCheckKind> gradcheck_suite(std::uint64_t seed, std::size_t instances, double h) {
  Rng rng(seed);
  std::vector<GradCheckKind> kinds{{"dense"}, {"conv1d"}, {"maxpool"}, {"lstm"}, {"full_model"}};
  auto record = [&](GradCheckKind& kind, auto& net) {
    const auto r = nn::grad_check_detailed(net, {.h = h});
    ++kind.instances;
    kind.entries_checked += r.checked;
    kind.max_relative_error = std::max(kind.max_relative_error, r.max_relative_error);
  };
  constexpr nn::Activation kActs[] = {nn::Activation::ReLU, nn::Activation::Tanh, nn::Activation::Identity};
  for (std::size_t i = 0; i < instances; ++i) {
    const auto act = kActs[i % 3];
    auto dense = nn::DenseProbe::random(2 + rng.below(5), 2 + rng.below(5), act, rng);
    record(kinds[0], dense);
    auto conv = nn::Conv1DProbe::random(7 + rng.below(5), 1 + rng.below(3), 4, 2 + rng.below(2), 1 + rng.below(2),
                                        act, rng);
    record(kinds[1], conv);
    auto pool = nn::MaxPoolProbe::random(2 + rng.below(6), 4, rng);
    record(kinds[2], pool);
    auto lstm = nn::LstmProbe::random(2 + rng.below(5), 1 + rng.below(3), 8, rng);
    record(kinds[3], lstm);

    EncoderConfig cfg;
    cfg.max_len = 12;
    cfg.embedding_dim = 5;
    cfg.cnn.filters = 4;
    cfg.lstm_hidden = 8;
    cfg.fc_sizes = {8, kSentenceVectorSize};
    cfg.head_hidden = 8;
    MpatModel model(cfg, InputMode::TargetOnly, rng.next_u64());
    // Zero biases put every padded position exactly on the ReLU kink.
    for_each_param(model.params(), [&](const std::string& name, nn::Tensor& t) {
      if (name.ends_with("bias")) {
        for (auto& v : t.data()) v = rng.uniform(-0.1, 0.1);
      }
    });
    auto sentence = [&] {
      EncodedSentence s{nn::Tensor({cfg.max_len, cfg.embedding_dim}), 1 + rng.below(cfg.max_len)};
      for (std::size_t r = 0; r < s.valid_length; ++r) {
        for (std::size_t c = 0; c < cfg.embedding_dim; ++c) s.matrix.at(r, c) = rng.normal();
      }
      return s;
    };
    PairObjective objective{&model, sentence(), sentence(), static_cast<int>(rng.below(2))};
    record(kinds[4], objective);
  }
  return kinds;
}

}  // namespace mpat
