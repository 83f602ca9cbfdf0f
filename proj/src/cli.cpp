#include "mpat/cli.hpp"

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpat/analysis.hpp"
#include "mpat/annotations.hpp"
#include "mpat/config.hpp"
#include "mpat/corpus.hpp"
#include "mpat/embeddings.hpp"
#include "mpat/experiments.hpp"
#include "mpat/metrics.hpp"
#include "mpat/model.hpp"

namespace mpat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGradCheckTolerance = 1e-4;

fs::path require_existing(const std::string& path, const char* what) {
  if (path.empty()) throw DataError(std::string("missing ") + what);
  if (!fs::exists(path)) throw DataError(std::string(what) + " not found: " + path);
  return path;
}

/// --out, falling back to $MPAT_OUT_DIR.
fs::path output_dir(const std::string& flag) {
  fs::path dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv("MPAT_OUT_DIR");
    if (!env || !*env) throw DataError("no output directory: pass --out or set MPAT_OUT_DIR");
    dir = env;
  }
  fs::create_directories(dir);
  return dir;
}

/// --out naming a file, falling back to $MPAT_OUT_DIR/<default_name>.
fs::path output_file(const std::string& flag, const std::string& default_name) {
  fs::path file;
  if (!flag.empty()) {
    file = flag;
  } else {
    const char* env = std::getenv("MPAT_OUT_DIR");
    if (!env || !*env) throw DataError("no output path: pass --out or set MPAT_OUT_DIR");
    file = fs::path(env) / default_name;
  }
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  return file;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

Corpus read_corpus(const std::string& path, const std::string& format) {
  const auto p = require_existing(path, "corpus file");
  return load_corpus(p, format.empty() ? guess_corpus_format(p) : parse_corpus_format(format));
}

void collect_tokens(const Corpus& c, std::unordered_set<std::string>& keep) {
  for (const auto& p : c.pairs()) {
    for (const auto& text : {p.rendered_metaphor(), p.rendered_candidate()}) {
      for (auto& t : tokenize(text)) keep.insert(std::move(t));
    }
  }
}

struct LoadedEmbeddings {
  EmbeddingTable table;
  std::string hash;
};

LoadedEmbeddings read_embeddings(const std::string& path, const std::string& format,
                                 const std::unordered_set<std::string>* keep) {
  const auto p = require_existing(path, "embeddings file");
  const auto fmt = format.empty() ? guess_embedding_format(p) : parse_embedding_format(format);
  return {load_word2vec(p, fmt, keep), sha256_file(p)};
}

json class_counts_json(const ClassCounts& c) {
  return json{{"1", c[0]}, {"2", c[1]}, {"3", c[2]}, {"4", c[3]}};
}

// Model and training settings from a config file, then command-line overrides.
struct ModelFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, patience, max_len;
  std::optional<double> learning_rate;
  std::string input_mode;
  std::string embeddings, embedding_format;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "Config file of key = value lines");
    app->add_option("--seed", seed, "Random seed (required here or in the config)");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--batch-size", batch_size, "Mini-batch size");
    app->add_option("--patience", patience, "Early-stopping patience; 0 disables it");
    app->add_option("--learning-rate", learning_rate, "Adam learning rate");
    app->add_option("--max-len", max_len, "Tokens per encoded sentence (0: by input mode)");
    app->add_option("--input-mode", input_mode, "How in-context pairs are read: with_context or target_only");
    app->add_option("--embeddings", embeddings, "word2vec embeddings file")->required();
    app->add_option("--embedding-format", embedding_format, "binary or text (default: by extension)");
  }
};

struct ResolvedSettings {
  RunSettings settings;
  bool embedding_dim_set = false;
  std::optional<std::string> regimen;
};

ResolvedSettings resolve_settings(const ModelFlags& f) {
  ResolvedSettings r;
  if (!f.config.empty()) {
    for (const auto& [key, value] : config::load(require_existing(f.config, "config file"))) {
      std::string k = key;
      if (k.starts_with("model.")) k = k.substr(6);
      if (k.starts_with("train.")) {
        apply_train_key(r.settings.train, k.substr(6), value);
      } else if (k == "input_mode" || k == "run.input_mode") {
        r.settings.context_mode = parse_input_mode(value);
      } else if (k == "regimen" || k == "run.regimen") {
        r.regimen = value;
      } else if (k == "epochs" || k == "batch_size" || k == "seed" || k == "patience" || k == "learning_rate" ||
                 k == "validation_fraction" || k == "test_fraction") {
        apply_train_key(r.settings.train, k, value);
      } else {
        apply_encoder_key(r.settings.encoder, k, value);
        if (k == "embedding_dim") r.embedding_dim_set = true;
      }
    }
  }
  auto& t = r.settings.train;
  if (f.seed) t.seed = f.seed;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.batch_size) t.batch_size = *f.batch_size;
  if (f.patience) t.patience = *f.patience;
  if (f.learning_rate) t.learning_rate = *f.learning_rate;
  if (f.max_len) r.settings.encoder.max_len = *f.max_len;
  if (!f.input_mode.empty()) r.settings.context_mode = parse_input_mode(f.input_mode);
  t.require_seed();
  return r;
}

void fit_embedding_dim(ResolvedSettings& r, const EmbeddingTable& table) {
  if (!r.embedding_dim_set) r.settings.encoder.embedding_dim = table.dimension();
  r.settings.encoder.validate();
}

// ---- corpus ---------------------------------------------------------------

struct CorpusFlags {
  std::string corpus, format, condition = "ooc", out;
};

json corpus_summary(const Corpus& c) {
  std::size_t with_context = 0;
  std::set<std::string> groups;
  for (const auto& p : c.pairs()) {
    if (p.condition() == Condition::InContext) ++with_context;
    groups.insert(p.group_id);
  }
  return json{{"pairs", c.size()},
              {"groups", groups.size()},
              {"pairs_with_context", with_context},
              {"ooc_means", c.means(Condition::OutOfContext).size()},
              {"ic_means", c.means(Condition::InContext).size()}};
}

void emit(const json& j, const std::string& out_flag, std::ostream& out) {
  if (out_flag.empty()) {
    out << dump(j);
  } else {
    const fs::path p = out_flag;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file_atomic(p, dump(j));
  }
}

int corpus_validate(const CorpusFlags& f, std::ostream& out) {
  const Corpus c = read_corpus(f.corpus, f.format);
  json j = corpus_summary(c);
  j["valid"] = true;
  emit(j, f.out, out);
  return kExitOk;
}

int corpus_stats(const CorpusFlags& f, std::ostream& out) {
  const Corpus c = read_corpus(f.corpus, f.format);
  const Condition cond = parse_condition(f.condition);
  if (!c.has_all_means(cond)) {
    throw DataError("corpus lacks " + std::string(to_string(cond)) + " means for some pairs");
  }
  json j = corpus_summary(c);
  j["condition"] = to_string(cond);
  j["class_distribution"] = class_counts_json(class_distribution(c, cond));
  std::size_t positives = 0;
  for (const auto& [id, m] : c.means(cond)) positives += binarize(m) ? 1 : 0;
  j["paraphrases"] = positives;
  j["non_paraphrases"] = c.size() - positives;
  emit(j, f.out, out);
  return kExitOk;
}

// ---- annotations ----------------------------------------------------------

struct AggregateFlags {
  std::string ratings, traps, condition, out;
  double extreme_fraction = 0.8;
  std::size_t min_ratings = 10;
};

int annotations_aggregate(const AggregateFlags& f, std::ostream& out) {
  const auto records = load_ratings(require_existing(f.ratings, "ratings file"));
  const std::vector<TrapSpec> traps =
      f.traps.empty() ? std::vector<TrapSpec>{} : load_traps(require_existing(f.traps, "traps file"));
  const Condition cond = parse_condition(f.condition);
  const RoguePolicy policy{f.extreme_fraction, f.min_ratings};
  const auto filtered = filter_rogues(records, traps, policy);

  std::set<std::string> trap_ids;
  for (const auto& t : traps) trap_ids.insert(t.pair_id);
  std::vector<RatingRecord> kept;
  for (const auto& r : filtered.kept) {
    if (!trap_ids.count(r.pair_id)) kept.push_back(r);
  }
  const auto means = aggregate_means(kept, cond);

  std::ostringstream lines;
  for (const auto& [id, m] : means) {
    lines << json{{"pair_id", id}, {"condition", to_string(cond)}, {"mean", m.mean}, {"annotators", m.annotators}}
                 .dump()
          << "\n";
  }
  const fs::path means_path = output_file(f.out, "means_" + std::string(to_string(cond)) + ".jsonl");
  write_file_atomic(means_path, lines.str());

  json flagged = json::array();
  for (const auto& a : filtered.flagged) flagged.push_back({{"annotator_id", a.annotator_id}, {"reason", a.reason}});
  std::set<std::string> annotators;
  for (const auto& r : records) annotators.insert(r.annotator_id);
  const json report{{"condition", to_string(cond)},
                    {"annotators", annotators.size()},
                    {"flagged", flagged},
                    {"ratings_in", records.size()},
                    {"ratings_kept", kept.size()},
                    {"pairs", means.size()},
                    {"policy",
                     {{"extreme_fraction_threshold", policy.extreme_fraction_threshold},
                      {"min_ratings_for_extreme_rule", policy.min_ratings_for_extreme_rule}}}};
  fs::path report_path = means_path;
  report_path.replace_extension(".rogues.json");
  write_file_atomic(report_path, dump(report));
  out << "wrote " << means.size() << " pair means to " << means_path.string() << " (" << filtered.flagged.size()
      << " annotators flagged; report " << report_path.string() << ")\n";
  return kExitOk;
}

struct CompareFlags {
  std::string ooc_means, ic_means, out;
};

int annotations_compare(const CompareFlags& f, std::ostream& out) {
  const auto ooc = load_score_map(require_existing(f.ooc_means, "out-of-context means"));
  const auto ic = load_score_map(require_existing(f.ic_means, "in-context means"));
  std::vector<double> xs, ys;
  for (const auto& [id, x] : ooc) {
    const auto it = ic.find(id);
    if (it == ic.end()) throw DataError("pair '" + id + "' has no in-context mean");
    xs.push_back(x);
    ys.push_back(it->second);
  }
  if (xs.size() != ic.size()) throw DataError("in-context means include pairs without an out-of-context mean");
  const auto r = pearson(xs, ys);
  const auto tm = transition_matrix(ooc, ic);
  json counts = json::array(), props = json::array();
  for (int i = 1; i <= 4; ++i) {
    json crow = json::array(), prow = json::array();
    for (int j = 1; j <= 4; ++j) {
      crow.push_back(tm.count(i, j));
      prow.push_back(tm.proportion(i, j));
    }
    counts.push_back(crow);
    props.push_back(prow);
  }
  ClassCounts ooc_classes{}, ic_classes{};
  for (double m : xs) ++ooc_classes[round_to_class(m).value() - 1];
  for (double m : ys) ++ic_classes[round_to_class(m).value() - 1];
  const json j{{"pairs", xs.size()},
               {"pearson", r ? json(*r) : json(nullptr)},
               {"ooc_class_distribution", class_counts_json(ooc_classes)},
               {"ic_class_distribution", class_counts_json(ic_classes)},
               {"transition_counts", counts},
               {"transition_proportions", props}};
  emit(j, f.out, out);
  return kExitOk;
}

// ---- embeddings -----------------------------------------------------------

struct InspectFlags {
  std::string embeddings, format, out;
  std::size_t show = 5;
};

int embeddings_inspect(const InspectFlags& f, std::ostream& out) {
  const auto e = read_embeddings(f.embeddings, f.format, nullptr);
  json sample = json::array();
  for (std::size_t i = 0; i < std::min(f.show, e.table.size()); ++i) sample.push_back(e.table.tokens()[i]);
  const json j{{"dimension", e.table.dimension()},
               {"vocabulary", e.table.size()},
               {"duplicates_skipped", e.table.duplicates_skipped},
               {"sha256", e.hash},
               {"first_tokens", sample}};
  emit(j, f.out, out);
  return kExitOk;
}

// ---- train / eval / crossval ----------------------------------------------

struct TrainFlags {
  ModelFlags model;
  std::string regimen, ooc, ic, corpus_format, out;
};

int train_cmd(const TrainFlags& f, std::ostream& out) {
  ResolvedSettings r = resolve_settings(f.model);
  const std::string regimen_text = !f.regimen.empty() ? f.regimen : r.regimen.value_or("");
  if (regimen_text.empty()) throw DataError("missing --regimen");
  const Regimen regimen = parse_regimen(regimen_text);

  std::optional<Corpus> ooc, ic;
  const bool needs_ooc = regimen.train_set == Condition::OutOfContext || regimen.test_set == Condition::OutOfContext;
  const bool needs_ic = regimen.train_set == Condition::InContext || regimen.test_set == Condition::InContext;
  if (needs_ooc) ooc = read_corpus(f.ooc, f.corpus_format);
  if (needs_ic) ic = read_corpus(f.ic, f.corpus_format);
  std::unordered_set<std::string> keep;
  if (ooc) collect_tokens(*ooc, keep);
  if (ic) collect_tokens(*ic, keep);
  const auto emb = read_embeddings(f.model.embeddings, f.model.embedding_format, &keep);
  fit_embedding_dim(r, emb.table);
  r.settings.embedding_hash = emb.hash;

  const fs::path dir = output_dir(f.out);
  auto result = run_regimen(regimen, ooc ? &*ooc : nullptr, ic ? &*ic : nullptr, emb.table, r.settings);

  const std::string run_text = "run.regimen = " + regimen.name() + "\nrun.context_mode = " +
                               std::string(to_string(r.settings.context_mode)) + "\n" +
                               train_config_to_text(r.settings.train);
  const auto ckpt = make_checkpoint(result.training.model, &result.training.adam, r.settings.train.require_seed(),
                                    run_text);
  nn::save_checkpoint(ckpt, dir / "checkpoint.bin");
  write_file_atomic(dir / "report.json", dump(report_to_json(result.report)));
  write_file_atomic(dir / "train_log.csv", training_log_csv(result.training.log));

  out << "regimen " << result.report.regimen << ": F=" << result.report.f_score << " pearson="
      << (result.report.pearson ? std::to_string(*result.report.pearson) : "undefined") << " (train "
      << result.report.train_size << ", test " << result.report.test_size << ", best epoch "
      << result.training.best_epoch << ")\n";
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint, corpus, corpus_format, condition, input_mode, embeddings, embedding_format, out;
  std::optional<std::size_t> max_len;
};

int eval_cmd(const EvalFlags& f, std::ostream& out) {
  const auto ckpt = nn::load_checkpoint(require_existing(f.checkpoint, "checkpoint"));
  const MpatModel model = model_from_checkpoint(ckpt);
  const Corpus corpus = read_corpus(f.corpus, f.corpus_format);
  const Condition cond = parse_condition(f.condition);
  if (!corpus.has_all_means(cond)) {
    throw DataError("corpus lacks " + std::string(to_string(cond)) + " means for some pairs");
  }
  InputMode mode = InputMode::TargetOnly;
  if (cond == Condition::InContext) {
    mode = f.input_mode.empty() ? InputMode::WithContext : parse_input_mode(f.input_mode);
  }
  std::unordered_set<std::string> keep;
  collect_tokens(corpus, keep);
  const auto emb = read_embeddings(f.embeddings, f.embedding_format, &keep);
  if (emb.table.dimension() != model.config().embedding_dim) {
    throw DataError("embedding dimension " + std::to_string(emb.table.dimension()) +
                    " does not match the checkpoint's " + std::to_string(model.config().embedding_dim));
  }
  const std::size_t max_len = f.max_len.value_or(model.max_len());

  const auto examples = prepare_examples(corpus, cond, mode, emb.table, max_len);
  EvalReport report = evaluate(model, examples);
  report.regimen = "eval-" + std::string(to_string(cond));
  report.seed = ckpt.seed;
  report.embedding_hash = emb.hash;
  report.config_snapshot = ckpt.config_text;

  ScoreMap scores;
  for (const auto& [id, p] : report.per_pair) scores[id] = p.score;

  const fs::path dir = output_dir(f.out);
  write_file_atomic(dir / "report.json", dump(report_to_json(report)));
  write_file_atomic(dir / ("scores_" + std::string(to_string(cond)) + ".json"), score_map_json(scores));
  out << report.regimen << ": F=" << report.f_score
      << " pearson=" << (report.pearson ? std::to_string(*report.pearson) : "undefined") << " on "
      << report.test_size << " pairs\n";
  return kExitOk;
}

struct CrossvalFlags {
  ModelFlags model;
  std::string corpus, corpus_format, condition = "ooc", out;
  std::size_t k = 10;
};

int crossval_cmd(const CrossvalFlags& f, std::ostream& out) {
  ResolvedSettings r = resolve_settings(f.model);
  const Corpus corpus = read_corpus(f.corpus, f.corpus_format);
  const Condition cond = parse_condition(f.condition);
  std::unordered_set<std::string> keep;
  collect_tokens(corpus, keep);
  const auto emb = read_embeddings(f.model.embeddings, f.model.embedding_format, &keep);
  fit_embedding_dim(r, emb.table);
  r.settings.embedding_hash = emb.hash;

  const fs::path dir = output_dir(f.out);
  const auto result = crossval(corpus, cond, f.k, emb.table, r.settings);
  write_file_atomic(dir / "crossval.json", dump(crossval_to_json(result)));
  out << f.k << "-fold " << to_string(cond) << ": F=" << result.f_mean << " ± " << result.f_std << "\n";
  return kExitOk;
}

// ---- analysis ---------------------------------------------------------------

struct AnalyzeFlags {
  std::string ooc_scores, ic_scores, scale = "0,1", out, title;
  std::optional<double> boundary;
  bool deterministic = false;
};

struct LoadedScores {
  ScoreMap ooc, ic;
  Scale scale;
};

LoadedScores load_scores(const AnalyzeFlags& f) {
  return {load_score_map(require_existing(f.ooc_scores, "out-of-context scores")),
          load_score_map(require_existing(f.ic_scores, "in-context scores")), parse_scale(f.scale)};
}

int analyze_compression(const AnalyzeFlags& f, std::ostream& out) {
  const auto s = load_scores(f);
  const auto fit = linreg(s.ooc, s.ic);
  const double boundary = f.boundary.value_or((s.scale.lo + s.scale.hi) / 2.0);
  const auto bins = bin_stats(s.ooc, s.ic, boundary);
  const auto shifts = shift_counts(s.ooc, s.ic);
  const auto verdict = compression_verdict(fit, s.scale);
  json summary = analysis_summary(fit, bins, shifts, verdict, s.scale);
  summary["boundary"] = boundary;

  const fs::path dir = output_dir(f.out);
  write_file_atomic(dir / "summary.json", dump(summary));
  render_scatter(s.ooc, s.ic, s.scale, fit, dir / "scatter.svg",
                 {.title = f.title, .deterministic = f.deterministic});
  out << "slope " << fit.slope << ", intercept " << fit.intercept << ", r " << fit.r << ": "
      << (verdict.compressive ? "compressive" : "not compressive") << "\n";
  return kExitOk;
}

int plot_cmd(const AnalyzeFlags& f, std::ostream& out) {
  const auto s = load_scores(f);
  const auto fit = linreg(s.ooc, s.ic);
  const fs::path path = output_file(f.out, "scatter.svg");
  render_scatter(s.ooc, s.ic, s.scale, fit, path, {.title = f.title, .deterministic = f.deterministic});
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

// ---- gradcheck --------------------------------------------------------------

struct GradcheckFlags {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t instances = 20;
  double h = 1e-5;
  std::string out;
};

int gradcheck_cmd(const GradcheckFlags& f, std::ostream& out) {
  const auto kinds = gradcheck_suite(f.seed, f.instances, f.h);
  bool ok = true;
  json j = json::array();
  for (const auto& k : kinds) {
    const bool pass = k.max_relative_error < kGradCheckTolerance;
    ok = ok && pass;
    out << k.name << ": max relative error " << k.max_relative_error << " over " << k.instances << " instances ("
        << k.entries_checked << " entries) " << (pass ? "ok" : "FAILED") << "\n";
    j.push_back({{"kind", k.name},
                 {"instances", k.instances},
                 {"entries_checked", k.entries_checked},
                 {"max_relative_error", k.max_relative_error},
                 {"pass", pass}});
  }
  if (!f.out.empty()) {
    const fs::path dir = output_dir(f.out);
    write_file_atomic(dir / "gradcheck.json",
                      dump({{"seed", f.seed}, {"h", f.h}, {"tolerance", kGradCheckTolerance}, {"kinds", j}}));
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metaphor paraphrase aptness: ratings, models and the context compression effect", "mpat"};
  app.require_subcommand(1);
  app.footer(
      "Command grammar:\n"
      "  corpus {validate, stats}\n"
      "  annotations {aggregate, compare}\n"
      "  embeddings {inspect}\n"
      "  train, eval, crossval\n"
      "  analyze {compression}\n"
      "  plot, gradcheck\n"
      "Outputs go under --out (default: $MPAT_OUT_DIR).");

  std::vector<std::pair<CLI::App*, std::function<int()>>> handlers;

  CorpusFlags corpus_flags;
  auto* corpus = app.add_subcommand("corpus", "Corpus files: validate, stats");
  corpus->require_subcommand(1);
  auto add_corpus_opts = [&](CLI::App* c) {
    c->add_option("--corpus", corpus_flags.corpus, "Corpus file (.jsonl or .csv)")->required();
    c->add_option("--format", corpus_flags.format, "jsonl or csv (default: by extension)");
    c->add_option("--out", corpus_flags.out, "Write the JSON summary here instead of stdout");
  };
  auto* corpus_validate_cmd = corpus->add_subcommand("validate", "Check a corpus file and summarize it");
  add_corpus_opts(corpus_validate_cmd);
  auto* corpus_stats_cmd = corpus->add_subcommand("stats", "Class distribution of the mean ratings");
  add_corpus_opts(corpus_stats_cmd);
  corpus_stats_cmd->add_option("--condition", corpus_flags.condition, "ooc or ic");
  handlers.emplace_back(corpus_validate_cmd, [&] { return corpus_validate(corpus_flags, out); });
  handlers.emplace_back(corpus_stats_cmd, [&] { return corpus_stats(corpus_flags, out); });

  auto* annotations = app.add_subcommand("annotations", "Crowd ratings: aggregate, compare");
  annotations->require_subcommand(1);
  AggregateFlags agg;
  auto* aggregate = annotations->add_subcommand("aggregate", "Filter rogue annotators and average ratings per pair");
  aggregate->add_option("--ratings", agg.ratings, "Ratings CSV")->required();
  aggregate->add_option("--traps", agg.traps, "Trap pair JSON");
  aggregate->add_option("--condition", agg.condition, "ooc or ic")->required();
  aggregate->add_option("--out", agg.out, "Means file (JSON lines); the rogue report is written beside it");
  aggregate->add_option("--extreme-fraction", agg.extreme_fraction, "Share of 1/4 ratings that flags an annotator");
  aggregate->add_option("--min-ratings", agg.min_ratings, "Ratings needed before the extreme rule applies");
  handlers.emplace_back(aggregate, [&] { return annotations_aggregate(agg, out); });
  CompareFlags cmp;
  auto* compare = annotations->add_subcommand("compare", "Correlation and class transitions between conditions");
  compare->add_option("--ooc-means", cmp.ooc_means, "Out-of-context means")->required();
  compare->add_option("--ic-means", cmp.ic_means, "In-context means")->required();
  compare->add_option("--out", cmp.out, "Write the JSON summary here instead of stdout");
  handlers.emplace_back(compare, [&] { return annotations_compare(cmp, out); });

  auto* embeddings = app.add_subcommand("embeddings", "Embedding files: inspect");
  embeddings->require_subcommand(1);
  InspectFlags insp;
  auto* inspect = embeddings->add_subcommand("inspect", "Dimension, vocabulary size and hash of a word2vec file");
  inspect->add_option("--embeddings", insp.embeddings, "word2vec file")->required();
  inspect->add_option("--format", insp.format, "binary or text (default: by extension)");
  inspect->add_option("--show", insp.show, "Number of leading tokens to list");
  inspect->add_option("--out", insp.out, "Write the JSON summary here instead of stdout");
  handlers.emplace_back(inspect, [&] { return embeddings_inspect(insp, out); });

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Train and test one regimen; writes checkpoint, report and log");
  train->add_option("--regimen", tf.regimen, "ooc-ooc, ooc-ic, ic-ooc or ic-ic");
  train->add_option("--ooc", tf.ooc, "Out-of-context corpus");
  train->add_option("--ic", tf.ic, "In-context corpus");
  train->add_option("--corpus-format", tf.corpus_format, "jsonl or csv (default: by extension)");
  train->add_option("--out", tf.out, "Output directory");
  tf.model.add_to(train);
  handlers.emplace_back(train, [&] { return train_cmd(tf, out); });

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Score a corpus with a trained checkpoint");
  eval->add_option("--checkpoint", ef.checkpoint, "checkpoint.bin from train")->required();
  eval->add_option("--corpus", ef.corpus, "Corpus to score")->required();
  eval->add_option("--corpus-format", ef.corpus_format, "jsonl or csv (default: by extension)");
  eval->add_option("--condition", ef.condition, "Which means are gold: ooc or ic")->required();
  eval->add_option("--input-mode", ef.input_mode, "For ic: with_context (default) or target_only");
  eval->add_option("--max-len", ef.max_len, "Tokens per encoded sentence (default: the checkpoint's)");
  eval->add_option("--embeddings", ef.embeddings, "word2vec file")->required();
  eval->add_option("--embedding-format", ef.embedding_format, "binary or text (default: by extension)");
  eval->add_option("--out", ef.out, "Output directory");
  handlers.emplace_back(eval, [&] { return eval_cmd(ef, out); });

  CrossvalFlags cf;
  auto* cv = app.add_subcommand("crossval", "Stratified k-fold cross-validation on one corpus");
  cv->add_option("--corpus", cf.corpus, "Corpus file")->required();
  cv->add_option("--corpus-format", cf.corpus_format, "jsonl or csv (default: by extension)");
  cv->add_option("--condition", cf.condition, "ooc or ic");
  cv->add_option("--k", cf.k, "Number of folds")->check(CLI::Range(2, 1000));
  cv->add_option("--out", cf.out, "Output directory");
  cf.model.add_to(cv);
  handlers.emplace_back(cv, [&] { return crossval_cmd(cf, out); });

  AnalyzeFlags af;
  auto add_score_opts = [&](CLI::App* c, const char* out_help) {
    c->add_option("--ooc-scores", af.ooc_scores, "Out-of-context scores or means")->required();
    c->add_option("--ic-scores", af.ic_scores, "In-context scores or means")->required();
    c->add_option("--scale", af.scale, "Rating scale as lo,hi (0,1 for model scores; 1,4 for human means)");
    c->add_option("--title", af.title, "Chart title");
    c->add_option("--out", af.out, out_help);
    c->add_flag("--deterministic", af.deterministic, "Omit the timestamp comment from charts");
  };
  auto* analyze = app.add_subcommand("analyze", "Rating analyses: compression");
  analyze->require_subcommand(1);
  auto* compression = analyze->add_subcommand("compression", "Regression, bins, shifts and verdict, plus a chart");
  add_score_opts(compression, "Output directory");
  compression->add_option("--boundary", af.boundary, "Bin boundary (default: middle of the scale)");
  handlers.emplace_back(compression, [&] { return analyze_compression(af, out); });
  auto* plot = app.add_subcommand("plot", "In-context vs out-of-context scatter chart");
  add_score_opts(plot, "Chart file");
  handlers.emplace_back(plot, [&] { return plot_cmd(af, out); });

  GradcheckFlags gf;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every layer kind and the full model");
  gradcheck->add_option("--seed", gf.seed, "Random seed")->required();
  gradcheck->add_option("--instances", gf.instances, "Random instances per kind")->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", gf.h, "Finite-difference step h");
  gradcheck->add_option("--out", gf.out, "Also write gradcheck.json to this directory");
  handlers.emplace_back(gradcheck, [&] { return gradcheck_cmd(gf, out); });

  if (!args.empty() && !args[0].starts_with("-") && !app.get_subcommand_no_throw(args[0])) {
    err << "error: unknown subcommand '" << args[0] << "'\nRun with --help for more information.\n";
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (auto& [cmd, handler] : handlers) {
      if (cmd->parsed()) return handler();
    }
    err << "error: no subcommand given\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace mpat::cli
