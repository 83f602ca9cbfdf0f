#include "mpat/annotations.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mpat/csv.hpp"

namespace mpat {

AptnessClass::AptnessClass(int value) : value_(value) {
  if (value < 1 || value > 4) throw std::out_of_range("aptness class must be 1..4, got " + std::to_string(value));
}

namespace {

void require_scale(double mean) {
  if (!std::isfinite(mean) || mean < 1.0 || mean > 4.0) {
    std::ostringstream os;
    os << "mean rating " << mean << " outside [1, 4]";
    throw std::out_of_range(os.str());
  }
}

}  // namespace

AptnessClass round_to_class(double mean) {
  require_scale(mean);
  return AptnessClass(static_cast<int>(std::floor(mean + 0.5)));
}

bool binarize(double mean) {
  require_scale(mean);
  return mean >= kParaphraseThreshold;
}

std::vector<RatingRecord> parse_ratings(std::string_view csv_text) {
  const auto rows = csv::parse(csv_text);
  std::vector<RatingRecord> out;
  if (rows.empty()) return out;
  const std::vector<std::string> header = {"annotator_id", "pair_id", "condition", "score"};
  if (rows[0].fields != header) {
    throw DataError("line 1: ratings header must be annotator_id,pair_id,condition,score");
  }
  std::set<std::tuple<std::string, std::string, Condition>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto where = "line " + std::to_string(row.line) + ": ";
    if (row.fields.size() != 4) throw DataError(where + "expected 4 fields");
    RatingRecord rec;
    rec.annotator_id = row.fields[0];
    rec.pair_id = row.fields[1];
    try {
      rec.condition = parse_condition(row.fields[2]);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    const auto& s = row.fields[3];
    if (s.size() != 1 || s[0] < '1' || s[0] > '4') throw DataError(where + "score must be 1, 2, 3 or 4, got '" + s + "'");
    rec.score = s[0] - '0';
    if (rec.annotator_id.empty() || rec.pair_id.empty()) throw DataError(where + "empty annotator_id or pair_id");
    if (!seen.emplace(rec.annotator_id, rec.pair_id, rec.condition).second) {
      throw DataError(where + "duplicate rating by '" + rec.annotator_id + "' for pair '" + rec.pair_id + "'");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path) {
  try {
    return parse_ratings(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<TrapSpec> parse_traps(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trap file: ") + e.what());
  }
  if (!j.is_array()) throw DataError("trap file must be a JSON list");
  std::vector<TrapSpec> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("pair_id") || !item.contains("expected_band")) {
      throw DataError("trap entries need pair_id and expected_band");
    }
    TrapSpec t;
    t.pair_id = item.at("pair_id").get<std::string>();
    const auto band = item.at("expected_band").get<std::string>();
    if (band == "low" || band == "Low") {
      t.expected_band = TrapBand::Low;
    } else if (band == "high" || band == "High") {
      t.expected_band = TrapBand::High;
    } else {
      throw DataError("expected_band must be low or high, got '" + band + "'");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TrapSpec> load_traps(const std::filesystem::path& path) {
  try {
    return parse_traps(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

RogueFilterResult filter_rogues(const std::vector<RatingRecord>& records, const std::vector<TrapSpec>& traps,
                                const RoguePolicy& policy) {
  if (!(policy.extreme_fraction_threshold > 0.0 && policy.extreme_fraction_threshold <= 1.0)) {
    throw std::invalid_argument("extreme_fraction_threshold must lie in (0, 1]");
  }
  RogueFilterResult result;
  if (records.empty()) return result;

  std::set<std::string> known_pairs;
  for (const auto& r : records) known_pairs.insert(r.pair_id);
  std::map<std::string, const TrapSpec*> trap_by_pair;
  for (const auto& t : traps) {
    if (!known_pairs.contains(t.pair_id)) throw DataError("trap pair '" + t.pair_id + "' has no ratings");
    trap_by_pair[t.pair_id] = &t;
  }

  struct Tally {
    std::size_t total = 0;
    std::size_t extreme = 0;
    std::string trap_failure;
  };
  std::map<std::string, Tally> tallies;
  for (const auto& r : records) {
    auto& t = tallies[r.annotator_id];
    ++t.total;
    if (r.score == 1 || r.score == 4) ++t.extreme;
    auto trap = trap_by_pair.find(r.pair_id);
    if (trap != trap_by_pair.end() && !trap->second->accepts(r.score) && t.trap_failure.empty()) {
      t.trap_failure = "trap pair '" + r.pair_id + "' scored " + std::to_string(r.score) + ", expected " +
                       (trap->second->expected_band == TrapBand::Low ? "1-2" : "3-4");
    }
  }

  std::set<std::string> rogue;
  for (const auto& [id, t] : tallies) {
    std::string reason;
    const double fraction = static_cast<double>(t.extreme) / static_cast<double>(t.total);
    if (t.total >= policy.min_ratings_for_extreme_rule && fraction >= policy.extreme_fraction_threshold) {
      std::ostringstream os;
      os << "extreme scores on " << t.extreme << " of " << t.total << " ratings";
      reason = os.str();
    }
    if (!t.trap_failure.empty()) reason += (reason.empty() ? "" : "; ") + t.trap_failure;
    if (!reason.empty()) {
      rogue.insert(id);
      result.flagged.push_back({id, reason});
    }
  }
  for (const auto& r : records) {
    if (!rogue.contains(r.annotator_id)) result.kept.push_back(r);
  }
  return result;
}

std::map<std::string, PairMean> aggregate_means(const std::vector<RatingRecord>& records, Condition condition,
                                                const std::vector<std::string>* expected_pairs) {
  std::map<std::string, std::pair<long, std::size_t>> sums;
  for (const auto& r : records) {
    if (r.condition != condition) continue;
    auto& s = sums[r.pair_id];
    s.first += r.score;
    ++s.second;
  }
  if (expected_pairs) {
    for (const auto& id : *expected_pairs) {
      if (!sums.contains(id)) {
        throw DataError("pair '" + id + "' has no " + std::string(to_string(condition)) + " ratings");
      }
    }
  }
  std::map<std::string, PairMean> out;
  for (const auto& [id, s] : sums) {
    out[id] = {static_cast<double>(s.first) / static_cast<double>(s.second), s.second};
  }
  return out;
}

TransitionMatrix transition_matrix(const std::map<std::string, double>& ooc_means,
                                   const std::map<std::string, double>& ic_means) {
  if (ooc_means.size() != ic_means.size()) throw DataError("transition_matrix: key sets differ in size");
  TransitionMatrix tm;
  for (const auto& [id, ooc] : ooc_means) {
    auto it = ic_means.find(id);
    if (it == ic_means.end()) throw DataError("transition_matrix: pair '" + id + "' lacks an in-context mean");
    const auto i = static_cast<std::size_t>(round_to_class(ooc).value() - 1);
    const auto j = static_cast<std::size_t>(round_to_class(it->second).value() - 1);
    ++tm.counts[i][j];
  }
  for (std::size_t i = 0; i < 4; ++i) {
    std::size_t row = 0;
    for (auto c : tm.counts[i]) row += c;
    if (row == 0) continue;
    for (std::size_t j = 0; j < 4; ++j) {
      tm.proportions[i][j] = static_cast<double>(tm.counts[i][j]) / static_cast<double>(row);
    }
  }
  return tm;
}

}  // namespace mpat
