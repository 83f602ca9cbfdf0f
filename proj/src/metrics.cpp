#include "mpat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpat {

double f_score(std::span<const int> predictions, std::span<const int> golds) {
  if (predictions.size() != golds.size()) throw std::invalid_argument("f_score: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("f_score: empty input");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] != 0, g = golds[i] != 0;
    if (p && g) ++tp;
    else if (p) ++fp;
    else if (g) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

GroupedPearson grouped_pearson(std::span<const GroupSample> groups) {
  GroupedPearson out;
  double sum = 0;
  for (const auto& g : groups) {
    if (g.model_scores.size() != g.human_means.size()) throw std::invalid_argument("grouped_pearson: length mismatch");
    if (g.model_scores.size() < 2) throw std::invalid_argument("grouped_pearson: group with fewer than two members");
    if (auto r = pearson(g.model_scores, g.human_means)) {
      sum += *r;
      ++out.groups_used;
    } else {
      ++out.groups_skipped;
    }
  }
  if (out.groups_used == 0) throw std::domain_error("grouped_pearson: every group has zero variance");
  out.value = sum / static_cast<double>(out.groups_used);
  return out;
}

}  // namespace mpat
