#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <filesystem>
#include <string>
#include <vector>

#include "mpat/common.hpp"
#include "mpat/corpus.hpp"
#include "mpat/embeddings.hpp"

namespace mpat::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "mpat-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Two-word table: cat = e1, dog = e2.
inline EmbeddingTable cat_dog_table() {
  EmbeddingTable t(3);
  const float cat[] = {1.0f, 0.0f, 0.0f};
  const float dog[] = {0.0f, 1.0f, 0.0f};
  t.add("cat", cat);
  t.add("dog", dog);
  return t;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> w = {"the", "a", "river", "crowd", "stone", "light", "song",  "city",
                                             "old", "was", "is",   "heart", "storm", "glass", "road", "night"};
  return w;
}
inline const std::vector<std::string>& apt_words() {
  static const std::vector<std::string> w = {"vast", "loud", "bright", "calm", "fierce"};
  return w;
}
inline const std::vector<std::string>& inapt_words() {
  static const std::vector<std::string> w = {"purple", "seven", "wooden", "sticky", "metric"};
  return w;
}

/// Random embeddings for the synthetic vocabulary. Component 0 carries the
/// cue: +1 for apt words, -1 for inapt words, 0 otherwise.
inline EmbeddingTable synthetic_table(std::size_t dim, std::uint64_t seed) {
  EmbeddingTable t(dim);
  Rng rng(seed);
  std::vector<float> v(dim);
  for (const auto* list : {&filler_words(), &apt_words(), &inapt_words()}) {
    const float cue = list == &apt_words() ? 1.0f : list == &inapt_words() ? -1.0f : 0.0f;
    for (const auto& w : *list) {
      const double spread = cue == 0.0f ? 0.5 : 0.1;
      for (auto& x : v) x = static_cast<float>(rng.normal() * spread);
      v[0] = cue;
      t.add(w, v);
    }
  }
  for (const auto& w : {"before", "after", "context"}) {
    for (auto& x : v) x = static_cast<float>(rng.normal() * 0.5);
    v[0] = 0.0f;
    t.add(w, v);
  }
  return t;
}

/// Pairs whose candidate carries a cue word deciding the label. Means cycle
/// through all four classes so stratification has something to do. Groups
/// of five share a group id.
inline Corpus separable_corpus(std::size_t n, std::uint64_t seed, bool with_context = false) {
  Rng rng(seed);
  std::vector<PairRecord> pairs;
  std::map<std::string, double> ooc, ic;
  static const double kMeans[] = {1.0, 1.8, 3.2, 4.0, 1.4, 2.2, 2.8, 3.6};
  auto words = [&](std::size_t count) {
    std::string s;
    for (std::size_t i = 0; i < count; ++i) {
      if (i) s += ' ';
      s += filler_words()[rng.below(filler_words().size())];
    }
    return s;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = kMeans[i % 8];
    const bool apt = mean >= 2.5;
    const auto& cues = apt ? apt_words() : inapt_words();
    PairRecord p;
    p.pair_id = "p" + std::to_string(i);
    p.group_id = "g" + std::to_string(i / 5);
    p.metaphor_text = words(3 + rng.below(4)) + ".";
    p.candidate_text = words(2 + rng.below(3)) + " " + cues[rng.below(cues.size())] + " " + words(1 + rng.below(2)) + ".";
    if (with_context) {
      p.context_before = "before context " + words(2) + ".";
      p.context_after = "after context " + words(2) + ".";
    }
    ooc[p.pair_id] = mean;
    ic[p.pair_id] = std::clamp(mean + (mean < 2.5 ? 0.2 : -0.2), 1.0, 4.0);
    pairs.push_back(std::move(p));
  }
  return Corpus(std::move(pairs), std::move(ooc), std::move(ic));
}

/// Pairs that differ only in the candidate's cue word, so the label is a
/// function of one embedding component.
inline Corpus cue_only_corpus(std::size_t n) {
  std::vector<PairRecord> pairs;
  std::map<std::string, double> ooc, ic;
  static const double kMeans[] = {1.0, 1.8, 3.2, 4.0, 1.4, 2.2, 2.8, 3.6};
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = kMeans[i % 8];
    const auto& cues = mean >= 2.5 ? apt_words() : inapt_words();
    PairRecord p;
    p.pair_id = "p" + std::to_string(i);
    p.group_id = "g" + std::to_string(i / 5);
    p.metaphor_text = "the crowd was a river.";
    p.candidate_text = "the crowd was " + cues[(i / 2) % cues.size()] + ".";
    ooc[p.pair_id] = mean;
    ic[p.pair_id] = mean;
    pairs.push_back(std::move(p));
  }
  return Corpus(std::move(pairs), std::move(ooc), std::move(ic));
}

}  // namespace mpat::testing
