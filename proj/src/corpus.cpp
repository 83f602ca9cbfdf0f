#include "mpat/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mpat/annotations.hpp"
#include "mpat/csv.hpp"

namespace mpat {

using nlohmann::json;

namespace {

std::string join_context(const std::optional<std::string>& before, const std::string& target,
                         const std::optional<std::string>& after) {
  std::string out;
  if (before && !before->empty()) out += *before + " ";
  out += target;
  if (after && !after->empty()) out += " " + *after;
  return out;
}

void check_mean(const std::string& pair_id, double m) {
  if (!std::isfinite(m) || m < 1.0 || m > 4.0) {
    std::ostringstream os;
    os << "rating out of range for pair '" << pair_id << "': " << m << " (expected [1, 4])";
    throw DataError(os.str());
  }
}

const std::vector<std::string> kCsvHeader = {"pair_id",        "group_id",      "metaphor", "candidate",
                                             "context_before", "context_after", "mean_ooc", "mean_ic"};

std::optional<std::string> optional_text(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string or null");
  return it->get<std::string>();
}

std::optional<double> optional_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw DataError(std::string("field '") + key + "' must be a number or null");
  return it->get<double>();
}

std::string required_text(const json& j, const char* key) {
  auto v = optional_text(j, key);
  if (!v) throw DataError(std::string("missing field '") + key + "'");
  return *v;
}

struct Builder {
  std::vector<PairRecord> pairs;
  std::map<std::string, double> ooc;
  std::map<std::string, double> ic;

  void add(PairRecord p, std::optional<double> mean_ooc, std::optional<double> mean_ic) {
    if (mean_ooc) ooc[p.pair_id] = *mean_ooc;
    if (mean_ic) ic[p.pair_id] = *mean_ic;
    pairs.push_back(std::move(p));
  }
};

Corpus parse_jsonl(std::string_view text) {
  Builder b;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw DataError("expected a JSON object");
      PairRecord p;
      p.pair_id = required_text(j, "pair_id");
      p.group_id = optional_text(j, "group_id").value_or("");
      p.metaphor_text = required_text(j, "metaphor");
      p.candidate_text = required_text(j, "candidate");
      p.context_before = optional_text(j, "context_before");
      p.context_after = optional_text(j, "context_after");
      auto mean_ooc = optional_number(j, "mean_ooc");
      auto mean_ic = optional_number(j, "mean_ic");
      // A bare "mean" belongs to the row's own condition.
      if (const auto mean = optional_number(j, "mean")) {
        auto& slot = p.condition() == Condition::InContext ? mean_ic : mean_ooc;
        if (slot) throw DataError("both 'mean' and a condition-specific mean are set");
        slot = mean;
      }
      b.add(std::move(p), mean_ooc, mean_ic);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed row: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Corpus(std::move(b.pairs), std::move(b.ooc), std::move(b.ic));
}

std::optional<double> csv_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw DataError("not a number: '" + s + "'");
  return v;
}

Corpus parse_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) return Corpus();
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) col[rows[0].fields[i]] = i;
  for (const auto& name : kCsvHeader) {
    if (!col.contains(name)) throw DataError("line 1: CSV header lacks column '" + name + "'");
  }
  Builder b;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    try {
      if (row.fields.size() != rows[0].fields.size()) {
        throw DataError("expected " + std::to_string(rows[0].fields.size()) + " fields, found " +
                        std::to_string(row.fields.size()));
      }
      auto field = [&](const char* name) -> const std::string& { return row.fields[col.at(name)]; };
      auto opt = [&](const char* name) -> std::optional<std::string> {
        const auto& s = field(name);
        return s.empty() ? std::nullopt : std::optional<std::string>(s);
      };
      PairRecord p;
      p.pair_id = field("pair_id");
      p.group_id = field("group_id");
      p.metaphor_text = field("metaphor");
      p.candidate_text = field("candidate");
      p.context_before = opt("context_before");
      p.context_after = opt("context_after");
      b.add(std::move(p), csv_number(field("mean_ooc")), csv_number(field("mean_ic")));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(row.line) + ": " + e.what());
    }
  }
  return Corpus(std::move(b.pairs), std::move(b.ooc), std::move(b.ic));
}

std::string format_mean(const std::map<std::string, double>& m, const std::string& id) {
  auto it = m.find(id);
  if (it == m.end()) return "";
  std::ostringstream os;
  os.precision(17);
  os << it->second;
  return os.str();
}

}  // namespace

std::string PairRecord::rendered_metaphor() const {
  return join_context(context_before, metaphor_text, context_after);
}

std::string PairRecord::rendered_candidate() const {
  return join_context(context_before, candidate_text, context_after);
}

Corpus::Corpus(std::vector<PairRecord> pairs, std::map<std::string, double> mean_ooc,
               std::map<std::string, double> mean_ic)
    : pairs_(std::move(pairs)), mean_ooc_(std::move(mean_ooc)), mean_ic_(std::move(mean_ic)) {
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& p = pairs_[i];
    if (p.pair_id.empty()) throw DataError("pair " + std::to_string(i) + " has an empty pair_id");
    if (p.metaphor_text.empty() || p.candidate_text.empty()) {
      throw DataError("pair '" + p.pair_id + "' has an empty metaphor or candidate text");
    }
    if (!index_.emplace(p.pair_id, i).second) throw DataError("duplicate pair_id '" + p.pair_id + "'");
  }
  for (const auto* m : {&mean_ooc_, &mean_ic_}) {
    for (const auto& [id, v] : *m) {
      if (!index_.contains(id)) throw DataError("mean rating for unknown pair '" + id + "'");
      check_mean(id, v);
    }
  }
}

std::optional<double> Corpus::mean(const std::string& pair_id, Condition c) const {
  const auto& m = means(c);
  auto it = m.find(pair_id);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

const PairRecord* Corpus::find(const std::string& pair_id) const {
  auto it = index_.find(pair_id);
  return it == index_.end() ? nullptr : &pairs_[it->second];
}

Corpus Corpus::subset(const std::vector<std::size_t>& indices) const {
  std::vector<PairRecord> pairs;
  std::map<std::string, double> ooc, ic;
  pairs.reserve(indices.size());
  for (auto i : indices) {
    const auto& p = pairs_.at(i);
    if (auto it = mean_ooc_.find(p.pair_id); it != mean_ooc_.end()) ooc.insert(*it);
    if (auto it = mean_ic_.find(p.pair_id); it != mean_ic_.end()) ic.insert(*it);
    pairs.push_back(p);
  }
  return Corpus(std::move(pairs), std::move(ooc), std::move(ic));
}

CorpusFormat parse_corpus_format(std::string_view s) {
  if (s == "jsonl" || s == "json") return CorpusFormat::JsonLines;
  if (s == "csv") return CorpusFormat::Csv;
  throw DataError("unknown corpus format '" + std::string(s) + "' (expected jsonl or csv)");
}

CorpusFormat guess_corpus_format(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CorpusFormat::Csv : CorpusFormat::JsonLines;
}

Corpus parse_corpus(std::string_view text, CorpusFormat format) {
  return format == CorpusFormat::Csv ? parse_csv(text) : parse_jsonl(text);
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  try {
    return parse_corpus(read_file(path), format);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_corpus(const Corpus& corpus, CorpusFormat format) {
  std::string out;
  const auto& ooc = corpus.means(Condition::OutOfContext);
  const auto& ic = corpus.means(Condition::InContext);
  if (format == CorpusFormat::Csv) {
    out += csv::format_row(kCsvHeader);
    for (const auto& p : corpus.pairs()) {
      out += csv::format_row({p.pair_id, p.group_id, p.metaphor_text, p.candidate_text,
                              p.context_before.value_or(""), p.context_after.value_or(""),
                              format_mean(ooc, p.pair_id), format_mean(ic, p.pair_id)});
    }
    return out;
  }
  for (const auto& p : corpus.pairs()) {
    json j;
    j["pair_id"] = p.pair_id;
    j["group_id"] = p.group_id;
    j["metaphor"] = p.metaphor_text;
    j["candidate"] = p.candidate_text;
    j["context_before"] = p.context_before ? json(*p.context_before) : json(nullptr);
    j["context_after"] = p.context_after ? json(*p.context_after) : json(nullptr);
    auto a = corpus.mean(p.pair_id, Condition::OutOfContext);
    auto b = corpus.mean(p.pair_id, Condition::InContext);
    j["mean_ooc"] = a ? json(*a) : json(nullptr);
    j["mean_ic"] = b ? json(*b) : json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  write_file_atomic(path, serialize_corpus(corpus, format));
}

PairRecord contextualize(const PairRecord& pair, const std::string& before, const std::string& after) {
  if (pair.condition() == Condition::InContext) {
    throw std::invalid_argument("pair '" + pair.pair_id + "' already has a context");
  }
  if (before.empty() && after.empty()) {
    throw std::invalid_argument("contextualize needs a non-empty context on at least one side");
  }
  PairRecord out = pair;
  if (!before.empty()) out.context_before = before;
  if (!after.empty()) out.context_after = after;
  return out;
}

ClassCounts class_distribution(const Corpus& corpus, Condition c) {
  ClassCounts counts{};
  for (const auto& p : corpus.pairs()) {
    auto m = corpus.mean(p.pair_id, c);
    if (!m) throw DataError("missing " + std::string(to_string(c)) + " mean rating for pair '" + p.pair_id + "'");
    ++counts[static_cast<std::size_t>(round_to_class(*m).value() - 1)];
  }
  return counts;
}

namespace {

std::array<std::vector<std::size_t>, 4> strata(const Corpus& corpus, Condition c) {
  std::array<std::vector<std::size_t>, 4> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& id = corpus.pairs()[i].pair_id;
    auto m = corpus.mean(id, c);
    if (!m) throw DataError("missing " + std::string(to_string(c)) + " mean rating for pair '" + id + "'");
    by_class[static_cast<std::size_t>(round_to_class(*m).value() - 1)].push_back(i);
  }
  return by_class;
}

}  // namespace

Split split(const Corpus& corpus, double test_fraction, std::uint64_t seed, Condition c) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must lie in (0, 1)");
  if (corpus.empty()) throw std::invalid_argument("cannot split an empty corpus");
  auto by_class = strata(corpus, c);

  const auto n = corpus.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n_test == 0 || n_test >= n) {
    throw std::invalid_argument("test fraction " + std::to_string(test_fraction) + " on " + std::to_string(n) +
                                " pairs leaves one side empty");
  }

  // Largest-remainder apportionment of n_test across classes.
  std::array<std::size_t, 4> quota{};
  std::array<double, 4> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double exact = static_cast<double>(by_class[k].size()) * static_cast<double>(n_test) / static_cast<double>(n);
    quota[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - static_cast<double>(quota[k]);
    assigned += quota[k];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n_test; i = (i + 1) % 4) {
    const auto k = order[i];
    if (quota[k] < by_class[k].size()) {
      ++quota[k];
      ++assigned;
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t k = 0; k < 4; ++k) {
    auto members = by_class[k];
    rng.shuffle(members);
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[k]));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(quota[k]), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {corpus.subset(train_idx), corpus.subset(test_idx)};
}

std::vector<Split> kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed, Condition c) {
  if (k < 2) throw std::invalid_argument("kfold needs k >= 2");
  if (k > corpus.size()) {
    throw std::invalid_argument("kfold: k = " + std::to_string(k) + " exceeds corpus size " +
                                std::to_string(corpus.size()));
  }
  auto by_class = strata(corpus, c);
  Rng rng(seed);
  std::vector<std::size_t> fold_of(corpus.size());
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (auto i : members) {
      fold_of[i] = next;
      next = (next + 1) % k;
    }
  }
  std::vector<Split> folds;
  folds.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < corpus.size(); ++i) (fold_of[i] == f ? test_idx : train_idx).push_back(i);
    folds.push_back({corpus.subset(train_idx), corpus.subset(test_idx)});
  }
  return folds;
}

}  // namespace mpat
