#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpat/common.hpp"

namespace mpat {

/// Aptness class on the 1-4 scale. Classes 1-2 are non-paraphrases, 3-4 paraphrases.
class AptnessClass {
 public:
  explicit AptnessClass(int value);
  int value() const { return value_; }
  bool is_paraphrase() const { return value_ >= 3; }
  auto operator<=>(const AptnessClass&) const = default;

 private:
  int value_;
};

/// Nearest class with ties rounded up (2.5 -> 3), so the 2/3 class boundary
/// coincides with the binarization threshold.
AptnessClass round_to_class(double mean);

/// Human mean at or above 2.5 counts as a paraphrase.
inline constexpr double kParaphraseThreshold = 2.5;
bool binarize(double mean);

struct RatingRecord {
  std::string annotator_id;
  std::string pair_id;
  Condition condition = Condition::OutOfContext;
  int score = 0;

  bool operator==(const RatingRecord&) const = default;
};

enum class TrapBand { Low, High };

struct TrapSpec {
  std::string pair_id;
  TrapBand expected_band = TrapBand::Low;

  bool accepts(int score) const {
    return expected_band == TrapBand::Low ? score <= 2 : score >= 3;
  }
};

struct RoguePolicy {
  double extreme_fraction_threshold = 0.8;
  std::size_t min_ratings_for_extreme_rule = 10;
};

struct FlaggedAnnotator {
  std::string annotator_id;
  std::string reason;
};

struct RogueFilterResult {
  std::vector<RatingRecord> kept;
  std::vector<FlaggedAnnotator> flagged;  // sorted by annotator id
};

/// Ratings CSV with header `annotator_id,pair_id,condition,score`.
std::vector<RatingRecord> load_ratings(const std::filesystem::path& path);
std::vector<RatingRecord> parse_ratings(std::string_view csv_text);
/// JSON list of {pair_id, expected_band: "low"|"high"}.
std::vector<TrapSpec> load_traps(const std::filesystem::path& path);
std::vector<TrapSpec> parse_traps(std::string_view json_text);

/// Flags an annotator whose ratings are mostly at the scale extremes, or who
/// rated any trap pair outside its expected band. Keeps everyone else's records.
RogueFilterResult filter_rogues(const std::vector<RatingRecord>& records,
                                const std::vector<TrapSpec>& traps, const RoguePolicy& policy);

struct PairMean {
  double mean = 0.0;
  std::size_t annotators = 0;
};

/// Arithmetic mean of the scores per pair under `condition`. When
/// `expected_pairs` is given, every listed pair must have at least one rating.
std::map<std::string, PairMean> aggregate_means(
    const std::vector<RatingRecord>& records, Condition condition,
    const std::vector<std::string>* expected_pairs = nullptr);

/// Counts and row-normalized proportions of (out-of-context class, in-context class).
struct TransitionMatrix {
  std::array<std::array<std::size_t, 4>, 4> counts{};
  std::array<std::array<double, 4>, 4> proportions{};

  /// 1-based class accessors.
  std::size_t count(int ooc_class, int ic_class) const { return counts.at(ooc_class - 1).at(ic_class - 1); }
  double proportion(int ooc_class, int ic_class) const {
    return proportions.at(ooc_class - 1).at(ic_class - 1);
  }
};

TransitionMatrix transition_matrix(const std::map<std::string, double>& ooc_means,
                                   const std::map<std::string, double>& ic_means);

}  // namespace mpat
