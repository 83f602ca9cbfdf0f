#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mpat {

using ScoreMap = std::map<std::string, double>;

/// Ordinary least squares y = intercept + slope * x.
struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  std::size_t n = 0;
};

RegressionFit linreg(std::span<const double> xs, std::span<const double> ys);
/// Fit of in-context scores against out-of-context scores over the shared keys.
RegressionFit linreg(const ScoreMap& ooc, const ScoreMap& ic);

struct Bin {
  std::string label;
  std::size_t count = 0;
  double ooc_mean = 0.0;
  double ooc_std = 0.0;  // population
  double ic_mean = 0.0;
  double ic_std = 0.0;   // population
  double ooc_sample_std = 0.0;
  double ic_sample_std = 0.0;
};

/// Two bins by out-of-context score: [lo, boundary) and [boundary, hi].
struct BinStats {
  Bin low;
  Bin high;
};

BinStats bin_stats(const ScoreMap& ooc, const ScoreMap& ic, double boundary = 0.5);

struct ShiftCounts {
  std::size_t raised = 0;
  std::size_t lowered = 0;
  std::size_t unchanged = 0;  // |ic - ooc| < 1e-12
  std::optional<double> raised_ooc_mean;
  std::optional<double> lowered_ooc_mean;
};

ShiftCounts shift_counts(const ScoreMap& ooc, const ScoreMap& ic);

struct Scale {
  double lo = 0.0;
  double hi = 1.0;
};
/// Parses "lo,hi".
Scale parse_scale(std::string_view s);

struct CompressionVerdict {
  bool compressive = false;
  std::optional<double> fixed_point;  // intercept / (1 - slope), absent when slope == 1
};

/// Compressive when slope < 1 and the regression line crosses the identity strictly inside the scale.
CompressionVerdict compression_verdict(const RegressionFit& fit, Scale scale);

struct ScatterOptions {
  std::string x_label = "out-of-context rating";
  std::string y_label = "in-context rating";
  std::string title;
  /// Omits the generation timestamp comment so output is byte-stable.
  bool deterministic = false;
};

/// SVG scatter: one <circle> per pair, a dashed identity <line> and a solid regression <line>.
std::string render_scatter_svg(const ScoreMap& ooc, const ScoreMap& ic, Scale scale, const RegressionFit& fit,
                               const ScatterOptions& options = {});
void render_scatter(const ScoreMap& ooc, const ScoreMap& ic, Scale scale, const RegressionFit& fit,
                    const std::filesystem::path& out_path, const ScatterOptions& options = {});

/// Summary with keys {slope, intercept, r, n, bins, shifts, verdict}.
nlohmann::json analysis_summary(const RegressionFit& fit, const BinStats& bins, const ShiftCounts& shifts,
                                const CompressionVerdict& verdict, Scale scale);

/// Reads either a JSON object of pair_id -> number or JSON lines of
/// {"pair_id", "mean"} (or "score") records.
ScoreMap load_score_map(const std::filesystem::path& path);
ScoreMap parse_score_map(std::string_view json_text);
std::string score_map_json(const ScoreMap& scores);

}  // namespace mpat
