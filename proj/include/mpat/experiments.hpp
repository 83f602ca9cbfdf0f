#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpat/corpus.hpp"
#include "mpat/embeddings.hpp"
#include "mpat/model.hpp"
#include "mpat/nn/adam.hpp"

namespace mpat {

/// Which corpus a model is trained on and which it is tested on.
struct Regimen {
  Condition train_set = Condition::OutOfContext;
  Condition test_set = Condition::OutOfContext;

  /// "ooc-ooc", "ooc-ic", "ic-ooc" or "ic-ic".
  std::string name() const;
  bool same_corpus() const { return train_set == test_set; }
  bool operator==(const Regimen&) const = default;
};
Regimen parse_regimen(std::string_view s);
/// The four train/test combinations, in-context training first.
std::vector<Regimen> all_regimens();

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::optional<std::uint64_t> seed;  // required by train()
  /// Epochs without validation-F improvement before stopping; 0 disables early stopping.
  std::size_t patience = 10;
  double learning_rate = 1e-3;
  /// Share of the training pairs held out for early stopping (when there are at least 20).
  double validation_fraction = 0.1;
  /// Test share for same-corpus regimens.
  double test_fraction = 0.2;

  std::uint64_t require_seed() const;
};
void apply_train_key(TrainConfig& c, const std::string& key, const std::string& value);
std::string train_config_to_text(const TrainConfig& c);

/// A pair ready for the network: both sides encoded plus its labels.
struct LabeledPair {
  std::string pair_id;
  std::string group_id;
  EncodedSentence metaphor;
  EncodedSentence candidate;
  double gold_mean = 0.0;
  int label = 0;  // binarize(gold_mean)
};

/// Encodes every pair of `corpus` with labels from its `label_condition` means.
std::vector<LabeledPair> prepare_examples(const Corpus& corpus, Condition label_condition, InputMode mode,
                                          const EmbeddingTable& table, std::size_t max_len);

struct TrainingLogEntry {
  std::size_t epoch = 0;
  double loss = 0.0;   // mean training loss over the epoch
  double val_f = 0.0;  // F on the monitoring set after the epoch
};

struct TrainResult {
  MpatModel model;
  nn::AdamState adam;
  std::vector<TrainingLogEntry> log;
  std::size_t best_epoch = 0;
};

/// Mini-batch Adam on the mean cross-entropy. Early stopping monitors F on
/// `validation` (or on the training pairs when it is empty) and restores the
/// best epoch's parameters. Deterministic for a given seed.
TrainResult train(MpatModel model, const std::vector<LabeledPair>& training,
                  const std::vector<LabeledPair>& validation, const TrainConfig& config);

std::string training_log_csv(const std::vector<TrainingLogEntry>& log);

struct PairPrediction {
  double score = 0.0;
  int prediction = 0;
  double gold_mean = 0.0;
  int gold_binary = 0;
};

struct EvalReport {
  std::string regimen;
  double f_score = 0.0;
  std::optional<double> pearson;
  std::optional<double> grouped_pearson;
  std::size_t grouped_groups_used = 0;
  std::size_t grouped_groups_skipped = 0;
  std::map<std::string, PairPrediction> per_pair;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::string config_snapshot;
  std::uint64_t seed = 0;
  std::string embedding_hash;
};

/// Scores every example and fills the metric fields of a report.
EvalReport evaluate(const MpatModel& model, const std::vector<LabeledPair>& test);

/// Stable key schema; undefined correlations serialize as null.
nlohmann::json report_to_json(const EvalReport& r);

struct RunSettings {
  EncoderConfig encoder;
  /// How in-context pairs are fed to the network; out-of-context pairs are always target-only.
  InputMode context_mode = InputMode::WithContext;
  TrainConfig train;
  std::string embedding_hash;
};

struct RegimenResult {
  EvalReport report;
  TrainResult training;
};

/// Trains and tests one regimen. Same-corpus regimens use a stratified
/// train/test split; cross-corpus regimens train on the whole training
/// corpus and test on the whole test corpus.
RegimenResult run_regimen(const Regimen& regimen, const Corpus* ooc, const Corpus* ic, const EmbeddingTable& table,
                          const RunSettings& settings);

struct CrossvalResult {
  std::vector<EvalReport> folds;
  double f_mean = 0.0;
  double f_std = 0.0;  // population standard deviation across folds
  std::optional<double> pearson_mean;
  std::optional<double> pearson_std;
  std::size_t pearson_undefined_folds = 0;
};

/// k-fold stratified cross-validation on one corpus, labels from `condition`.
CrossvalResult crossval(const Corpus& corpus, Condition condition, std::size_t k, const EmbeddingTable& table,
                        const RunSettings& settings);
nlohmann::json crossval_to_json(const CrossvalResult& r);

/// Model score for every pair of `corpus` under `mode`.
std::map<std::string, double> score_corpus(const MpatModel& model, const Corpus& corpus, InputMode mode,
                                           const EmbeddingTable& table);

struct GradCheckKind {
  std::string name;
  std::size_t instances = 0;
  std::size_t entries_checked = 0;
  double max_relative_error = 0.0;
};

/// Finite-difference checks of every layer kind (dense, conv1d, maxpool,
/// lstm) and of the full model at reduced size (4 filters, hidden 8), each on
/// `instances` seeded random draws.
std::vector<GradCheckKind> gradcheck_suite(std::uint64_t seed, std::size_t instances, double h = 1e-5);

}  // namespace mpat
