#include <set>

#include "doctest.h"
#include "mpat/corpus.hpp"
#include "support.hpp"

using namespace mpat;
using mpat::testing::TempDir;

namespace {

PairRecord pair(std::string id, std::string group = "g") {
  return {std::move(id), std::move(group), "The crowd was a roaring river.", "The crowd was huge and noisy.", {}, {}};
}

Corpus corpus_with_means(const std::vector<double>& means) {
  std::vector<PairRecord> pairs;
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < means.size(); ++i) {
    pairs.push_back(pair("p" + std::to_string(i), "g" + std::to_string(i / 5)));
    m["p" + std::to_string(i)] = means[i];
  }
  return Corpus(pairs, m, {});
}

std::set<std::string> ids(const Corpus& c) {
  std::set<std::string> out;
  for (const auto& p : c.pairs()) out.insert(p.pair_id);
  return out;
}

}  // namespace

TEST_CASE("load a one-row JSON lines corpus") {
  const auto c = parse_corpus(
      R"({"pair_id":"p1","metaphor":"The crowd was a roaring river.","candidate":"The crowd was huge and noisy.","mean":4.0})"
      "\n",
      CorpusFormat::JsonLines);
  REQUIRE(c.size() == 1);
  CHECK(c.pairs()[0].condition() == Condition::OutOfContext);
  CHECK(c.mean("p1", Condition::OutOfContext) == doctest::Approx(4.0));
  CHECK_FALSE(c.mean("p1", Condition::InContext));
}

TEST_CASE("empty files give empty corpora") {
  CHECK(parse_corpus("", CorpusFormat::JsonLines).empty());
  CHECK(parse_corpus("\n\n", CorpusFormat::JsonLines).empty());
  CHECK(parse_corpus("pair_id,group_id,metaphor,candidate,context_before,context_after,mean_ooc,mean_ic\n",
                     CorpusFormat::Csv)
            .empty());
}

TEST_CASE("corpus invariants are enforced on load") {
  SUBCASE("rating out of range") {
    const auto row = R"({"pair_id":"p1","metaphor":"a","candidate":"b","mean_ooc":4.2})";
    CHECK_THROWS_WITH_AS(parse_corpus(row, CorpusFormat::JsonLines), doctest::Contains("rating out of range"),
                         DataError);
  }
  SUBCASE("duplicate pair id") {
    const auto rows = "{\"pair_id\":\"p1\",\"metaphor\":\"a\",\"candidate\":\"b\"}\n"
                      "{\"pair_id\":\"p1\",\"metaphor\":\"c\",\"candidate\":\"d\"}\n";
    CHECK_THROWS_WITH_AS(parse_corpus(rows, CorpusFormat::JsonLines), doctest::Contains("duplicate pair_id"),
                         DataError);
  }
  SUBCASE("malformed row reports its line") {
    const auto rows = "{\"pair_id\":\"p1\",\"metaphor\":\"a\",\"candidate\":\"b\"}\n{not json\n";
    CHECK_THROWS_WITH_AS(parse_corpus(rows, CorpusFormat::JsonLines), doctest::Contains("line 2"), DataError);
  }
  SUBCASE("empty texts") {
    const auto row = R"({"pair_id":"p1","metaphor":"","candidate":"b"})";
    CHECK_THROWS_AS(parse_corpus(row, CorpusFormat::JsonLines), DataError);
  }
  SUBCASE("csv row with a bad number reports its line") {
    const std::string text =
        "pair_id,group_id,metaphor,candidate,context_before,context_after,mean_ooc,mean_ic\n"
        "p1,g,a,b,,,2.0,\n"
        "p2,g,c,d,,,two,\n";
    CHECK_THROWS_WITH_AS(parse_corpus(text, CorpusFormat::Csv), doctest::Contains("line 3"), DataError);
  }
  SUBCASE("means for unknown pairs") {
    CHECK_THROWS_AS(Corpus({pair("p1")}, {{"p2", 2.0}}, {}), DataError);
  }
}

TEST_CASE("contextualize renders before + target + after") {
  SUBCASE("example with a capital city") {
    const auto p = contextualize(pair("p"), "They had arrived in the capital city.", "It was glorious.");
    CHECK(p.condition() == Condition::InContext);
    CHECK(p.rendered_metaphor() ==
          "They had arrived in the capital city. The crowd was a roaring river. It was glorious.");
    CHECK(p.rendered_candidate() ==
          "They had arrived in the capital city. The crowd was huge and noisy. It was glorious.");
  }
  SUBCASE("example with an ape") {
    PairRecord p{"p", "g", "He is grinning like an ape.", "He is smiling in a charming way.", {}, {}};
    const auto q = contextualize(p, "Look at him.", "He feels so confident and self-assured.");
    CHECK(q.rendered_metaphor() == "Look at him. He is grinning like an ape. He feels so confident and self-assured.");
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(contextualize(pair("p"), "", ""), std::invalid_argument);
    const auto once = contextualize(pair("p"), "Before.", "After.");
    CHECK_THROWS_AS(contextualize(once, "Again.", "Again."), std::invalid_argument);
  }
}

TEST_CASE("class_distribution rounds half up") {
  // 1.0 -> 1, 2.6 -> 3, 3.5 -> 4
  const auto counts = class_distribution(corpus_with_means({1.0, 2.6, 3.5}), Condition::OutOfContext);
  CHECK(counts == ClassCounts{1, 0, 1, 1});
  CHECK(class_distribution(corpus_with_means({1.0, 2.6, 3.49}), Condition::OutOfContext) == ClassCounts{1, 0, 2, 0});
  CHECK(class_distribution(Corpus{}, Condition::OutOfContext) == ClassCounts{0, 0, 0, 0});
  CHECK_THROWS_AS(class_distribution(corpus_with_means({2.0}), Condition::InContext), DataError);
}

TEST_CASE("class_distribution counts sum to corpus size") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> means(1 + rng.below(60));
    for (auto& m : means) m = rng.uniform(1.0, 4.0);
    const auto counts = class_distribution(corpus_with_means(means), Condition::OutOfContext);
    CHECK(counts[0] + counts[1] + counts[2] + counts[3] == means.size());
  }
}

TEST_CASE("stratified split of 800 pairs") {
  std::vector<double> means;
  for (int i = 0; i < 800; ++i) means.push_back(1.0 + (i * 7 % 31) / 10.0);
  const auto c = corpus_with_means(means);
  const auto s = split(c, 0.2, 7, Condition::OutOfContext);
  CHECK(s.train.size() == 640);
  CHECK(s.test.size() == 160);

  const auto global = class_distribution(c, Condition::OutOfContext);
  const auto test = class_distribution(s.test, Condition::OutOfContext);
  for (int k = 0; k < 4; ++k) {
    const double expected = global[k] * 0.2;
    CHECK(std::abs(static_cast<double>(test[k]) - expected) <= 1.0);
  }

  const auto again = split(c, 0.2, 7, Condition::OutOfContext);
  CHECK(ids(again.test) == ids(s.test));
  CHECK(ids(split(c, 0.2, 8, Condition::OutOfContext).test) != ids(s.test));
}

TEST_CASE("split rejects degenerate fractions") {
  CHECK_THROWS_AS(split(corpus_with_means({1.0, 4.0}), 0.999, 1, Condition::OutOfContext), std::invalid_argument);
  CHECK_THROWS_AS(split(Corpus{}, 0.2, 1, Condition::OutOfContext), std::invalid_argument);
  CHECK_THROWS_AS(split(corpus_with_means({1.0, 4.0}), 0.0, 1, Condition::OutOfContext), std::invalid_argument);
}

TEST_CASE("split and kfold are exact partitions") {
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> means(10 + rng.below(90));
    for (auto& m : means) m = rng.uniform(1.0, 4.0);
    const auto c = corpus_with_means(means);
    const auto seed = rng.next_u64();

    const auto s = split(c, 0.25, seed, Condition::OutOfContext);
    auto train = ids(s.train), test = ids(s.test);
    CHECK(train.size() + test.size() == c.size());
    std::set<std::string> all = train;
    all.insert(test.begin(), test.end());
    CHECK(all == ids(c));

    const std::size_t k = 2 + rng.below(std::min<std::size_t>(9, c.size() - 1));
    const auto folds = kfold(c, k, seed, Condition::OutOfContext);
    REQUIRE(folds.size() == k);
    std::multiset<std::string> seen;
    for (const auto& f : folds) {
      for (const auto& p : f.test.pairs()) seen.insert(p.pair_id);
      CHECK(f.train.size() + f.test.size() == c.size());
      for (const auto& p : f.test.pairs()) CHECK_FALSE(f.train.find(p.pair_id));
    }
    CHECK(seen.size() == c.size());
    CHECK(std::set<std::string>(seen.begin(), seen.end()) == ids(c));
  }
}

TEST_CASE("kfold sizes") {
  std::vector<double> means;
  for (int i = 0; i < 200; ++i) means.push_back(1.0 + (i % 4));
  const auto folds = kfold(corpus_with_means(means), 10, 5, Condition::OutOfContext);
  for (const auto& f : folds) CHECK(f.test.size() == 20);

  const auto loo = kfold(corpus_with_means({1.0, 2.0, 3.0, 4.0, 1.5}), 5, 1, Condition::OutOfContext);
  for (const auto& f : loo) CHECK(f.test.size() == 1);

  CHECK_THROWS_AS(kfold(corpus_with_means({1.0, 2.0}), 3, 1, Condition::OutOfContext), std::invalid_argument);
  CHECK_THROWS_AS(kfold(corpus_with_means({1.0, 2.0}), 1, 1, Condition::OutOfContext), std::invalid_argument);
}

TEST_CASE("save then load reproduces the corpus in both formats") {
  TempDir dir;
  auto c = mpat::testing::separable_corpus(23, 4);
  // Mix in contexts, quotes and commas so the CSV escaping is exercised.
  std::vector<PairRecord> pairs = c.pairs();
  pairs[0] = contextualize(pairs[0], "He said, \"look\".", "");
  pairs[1].candidate_text = "line one\nline two, with \"quotes\"";
  pairs[2].context_after = "Only after.";
  std::map<std::string, double> ooc = c.means(Condition::OutOfContext);
  std::map<std::string, double> ic = c.means(Condition::InContext);
  ooc.erase("p3");
  ic["p4"] = 2.123456789012345;
  const Corpus mixed(pairs, ooc, ic);

  for (auto fmt : {CorpusFormat::JsonLines, CorpusFormat::Csv}) {
    const auto path = dir / (fmt == CorpusFormat::Csv ? "c.csv" : "c.jsonl");
    save_corpus(mixed, path, fmt);
    CHECK(load_corpus(path, fmt) == mixed);
    CHECK(guess_corpus_format(path) == fmt);
  }
}

TEST_CASE("csv header is required") {
  CHECK_THROWS_AS(parse_corpus("p1,g,a,b,,,2.0,\n", CorpusFormat::Csv), DataError);
}
