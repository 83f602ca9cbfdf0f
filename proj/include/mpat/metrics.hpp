#pragma once

#include <optional>
#include <span>
#include <vector>

namespace mpat {

/// F1 of the positive class; 0 when precision + recall is 0.
double f_score(std::span<const int> predictions, std::span<const int> golds);

/// Product-moment correlation. nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

struct GroupSample {
  std::vector<double> model_scores;
  std::vector<double> human_means;
};

struct GroupedPearson {
  std::optional<double> value;
  std::size_t groups_used = 0;
  std::size_t groups_skipped = 0;
};

/// Mean of the within-group correlations, skipping groups whose correlation
/// is undefined. Throws std::domain_error when no group is usable.
GroupedPearson grouped_pearson(std::span<const GroupSample> groups);

}  // namespace mpat
