#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpat/common.hpp"

namespace mpat {

/// A metaphorical sentence paired with one literal paraphrase candidate.
///
/// Contexts are kept as separate fields so callers decide whether the
/// network sees them. `condition` is derived: InContext iff a context is set.
struct PairRecord {
  std::string pair_id;
  std::string group_id;
  std::string metaphor_text;
  std::string candidate_text;
  std::optional<std::string> context_before;
  std::optional<std::string> context_after;

  Condition condition() const {
    return context_before || context_after ? Condition::InContext : Condition::OutOfContext;
  }

  /// before + target + after, space-joined, skipping absent parts.
  std::string rendered_metaphor() const;
  std::string rendered_candidate() const;

  bool operator==(const PairRecord&) const = default;
};

/// Ordered pairs plus per-condition mean human ratings on the 1-4 scale.
///
/// A corpus file may carry both an out-of-context and an in-context mean for
/// each pair, so the means are kept per condition and operations that need a
/// rating take the condition to read.
class Corpus {
 public:
  Corpus() = default;
  /// Validates every invariant; throws DataError on the first violation.
  Corpus(std::vector<PairRecord> pairs, std::map<std::string, double> mean_ooc,
         std::map<std::string, double> mean_ic);

  const std::vector<PairRecord>& pairs() const { return pairs_; }
  const std::map<std::string, double>& means(Condition c) const {
    return c == Condition::InContext ? mean_ic_ : mean_ooc_;
  }
  std::optional<double> mean(const std::string& pair_id, Condition c) const;
  bool has_all_means(Condition c) const { return means(c).size() == pairs_.size(); }

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const PairRecord* find(const std::string& pair_id) const;

  /// Sub-corpus made of the pairs at `indices`, in that order, with their means.
  Corpus subset(const std::vector<std::size_t>& indices) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<PairRecord> pairs_;
  std::map<std::string, double> mean_ooc_;
  std::map<std::string, double> mean_ic_;
  std::map<std::string, std::size_t> index_;
};

enum class CorpusFormat { JsonLines, Csv };
CorpusFormat parse_corpus_format(std::string_view s);
/// Picks the format from the extension: .csv is Csv, anything else JsonLines.
CorpusFormat guess_corpus_format(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus parse_corpus(std::string_view text, CorpusFormat format);
std::string serialize_corpus(const Corpus& corpus, CorpusFormat format);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

/// Returns a copy of an out-of-context pair with contexts attached.
PairRecord contextualize(const PairRecord& pair, const std::string& before, const std::string& after);

/// Counts of rounded mean classes, indexed 0..3 for classes 1..4.
using ClassCounts = std::array<std::size_t, 4>;
ClassCounts class_distribution(const Corpus& corpus, Condition c);

struct Split {
  Corpus train;
  Corpus test;
};

/// Stratified by rounded class under condition `c`; deterministic per seed.
Split split(const Corpus& corpus, double test_fraction, std::uint64_t seed, Condition c);

/// k stratified folds; fold i's test set is the i-th partition block.
std::vector<Split> kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed, Condition c);

}  // namespace mpat
