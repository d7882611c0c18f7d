/*
 *  Copyright 2026 The GapLab Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */


#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "gaplab/client/client.hpp"
#include "gaplab/corpus/corpus.hpp"
#include "gaplab/corpus/vocab.hpp"
#include "gaplab/pipeline/pipeline.hpp"
#include "gaplab/stimgen/stimgen.hpp"

namespace gaplab::pipeline {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 7> kStageNames = {{{Stage::gen, "gen"},
                                                                            {Stage::corpus, "synth-corpus"},
                                                                            {Stage::augment, "augment"},
                                                                            {Stage::train, "train"},
                                                                            {Stage::score, "score"},
                                                                            {Stage::analyze, "analyze"},
                                                                            {Stage::report, "report"}}};

}  // namespace

std::string_view to_string(Stage s) {
  for (const auto& [stage, name] : kStageNames) {
    if (stage == s) return name;
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  std::string valid;
  for (const auto& [stage, n] : kStageNames) {
    if (n == name) return stage;
    valid += (valid.empty() ? "" : ", ") + std::string(n);
  }
  throw ConfigError("unknown stage '" + std::string(name) + "' (valid: " + valid + ")");
}

StageError::StageError(Stage stage, const std::string& what)
    : Error("stage " + std::string(to_string(stage)) + ": " + what), stage_(stage) {}

namespace {

// Run directory layout, relative to the output directory.
struct Layout {
  fs::path root;

  fs::path config() const { return root / "config.json"; }
  fs::path paradigm(Construction c) const { return root / "paradigms" / (std::string(to_string(c)) + ".jsonl"); }
  fs::path base_corpus() const { return root / "corpus/base"; }
  fs::path aug_corpus() const { return root / "corpus/aug"; }
  fs::path augmentation() const { return root / "corpus/augmentation.txt"; }
  fs::path vocab() const { return root / "corpus/vocab.txt"; }
  fs::path model(const std::string& id) const { return root / ("model_" + id + ".bin"); }
  fs::path train_log(const std::string& id) const { return root / "logs" / ("train_" + id + ".json"); }
  fs::path scores(const std::string& id) const { return root / "scores" / (id + ".csv"); }
  fs::path report_dir() const { return root / "report"; }
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path timings() const { return root / "timings.json"; }
};

bool split_exists(const fs::path& dir) {
  return fs::exists(dir / "train.txt") && fs::exists(dir / "valid.txt") && fs::exists(dir / "test.txt");
}

std::vector<std::string> model_ids(const ExperimentConfig& c) {
  std::vector<std::string> ids = {"base"};
  if (c.augmentation) ids.push_back("aug");
  if (c.remote) ids.push_back(c.remote->model_id);
  return ids;
}

std::vector<std::string> trained_ids(const ExperimentConfig& c) {
  std::vector<std::string> ids = {"base"};
  if (c.augmentation) ids.push_back("aug");
  return ids;
}

stimgen::ConstructionTemplate load_template(const ExperimentConfig& c, Construction cons) {
  const auto path = c.paradigms.templates_dir / (std::string(to_string(cons)) + ".json");
  for (auto& t : stimgen::load_templates(path)) {
    if (t.construction == cons) return t;
  }
  throw ConfigError(path.string() + ": holds no " + std::string(to_string(cons)) + " template");
}


class Runner {
 public:
  Runner(const ExperimentConfig& config, const RunOptions& options)
      : c_(config), opts_(options), dir_{config.output_dir} {}

  json run();

 private:
  void log(const std::string& msg) const {
    if (opts_.log) opts_.log(msg);
  }
  void check_config();
  void stage(Stage s, const std::function<bool()>& done, const std::function<void()>& body);

  void gen();
  void synth_corpus();
  void augment();
  void train(const std::string& id);
  void score(const std::string& id);
  void analyze();
  void report();
  json manifest() const;

  const ExperimentConfig& c_;
  const RunOptions& opts_;
  Layout dir_;
  json timings_ = json::object();
};

void Runner::check_config() {
  json mine = config_to_json(c_, true);
  mine.erase("output_dir");
  if (fs::exists(dir_.config())) {
    json theirs = read_json_file(dir_.config());
    theirs.erase("output_dir");
    if (theirs != mine) {
      throw ConfigError(dir_.root.string() + " holds a run with a different config; choose another output directory");
    }
    return;
  }
  std::error_code ec;
  fs::create_directories(dir_.root, ec);
  if (ec) throw IoError("cannot create " + dir_.root.string() + ": " + ec.message());
  write_file_atomic(dir_.config(), config_to_json(c_, true).dump(2) + "\n");
}

void Runner::stage(Stage s, const std::function<bool()>& done, const std::function<void()>& body) {
  const std::string name(to_string(s));
  if (done()) {
    log(name + ": artifacts present, skipped");
    timings_["stages"][name] = "skipped";
    return;
  }
  log(name + ": running");
  const auto start = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw StageError(s, e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  timings_["stages"][name] = secs;
  log(name + ": done in " + format_double(std::round(secs * 100) / 100) + " s");
}

void Runner::gen() {
  const auto lexicon = stimgen::load_lexicon(c_.paradigms.lexicon);
  for (Construction cons : c_.constructions) {
    const auto path = dir_.paradigm(cons);
    if (fs::exists(path)) continue;
    const auto items = stimgen::bind_lexicon(load_template(c_, cons), lexicon, c_.paradigms.items.at(cons),
                                             c_.paradigms.seed);
    fs::create_directories(path.parent_path());
    stimgen::save_items(path, items);
  }
}

void Runner::synth_corpus() {
  corpus::CorpusSplit split;
  if (c_.corpus.source == "text") {
    split = corpus::load_split(c_.corpus.text_dir);
  } else {
    auto grammar = corpus::load_grammar(c_.corpus.grammar);
    for (const auto& [name, o] : c_.corpus.overrides) {
      auto* g = grammar.find(name);
      if (!g) throw ConfigError("corpus.constructions." + name + ": the grammar has no such construction");
      if (o.include) g->include = *o.include;
      if (o.weight) g->weight = *o.weight;
      if (o.enforce_dependency) g->enforce_dependency = *o.enforce_dependency;
    }
    grammar.validate();
    split = corpus::synth_corpus(grammar, c_.corpus.tokens, c_.corpus.seed);
  }
  corpus::save_split(split, dir_.base_corpus());
}

void Runner::augment() {
  const auto base = corpus::load_split(dir_.base_corpus());
  std::vector<Tokens> extra;
  if (c_.augmentation) {
    const auto& a = *c_.augmentation;
    extra = stimgen::generate_training_sentences(load_template(c_, a.construction), a.n,
                                                 stimgen::load_lexicon(a.lexicon),
                                                 stimgen::load_lexicon(c_.paradigms.lexicon), a.seed);
    corpus::write_sentences(dir_.augmentation(), extra);
    corpus::save_split(corpus::augment_corpus(base, extra, a.seed), dir_.aug_corpus());
  }
  std::vector<Tokens> vocab_source = base.train;
  vocab_source.insert(vocab_source.end(), extra.begin(), extra.end());
  const auto vocab = corpus::build_vocab(vocab_source, c_.corpus.vocab_size);

  std::ostringstream missing;
  for (Construction cons : c_.constructions) {
    const auto report = stimgen::validate_lexicon(stimgen::load_items(dir_.paradigm(cons)), vocab);
    for (const auto& [word, items] : report.missing) {
      missing << (missing.tellp() > 0 ? ", " : "") << '\'' << word << "' (" << to_string(cons) << ", "
              << items.size() << " items)";
    }
  }
  if (missing.tellp() > 0) throw ConfigError("paradigm words missing from the vocabulary: " + missing.str());
  vocab.save(dir_.vocab());
}

void Runner::train(const std::string& id) {
  const auto vocab = corpus::Vocab::load(dir_.vocab());
  const auto split = corpus::load_split(id == "base" ? dir_.base_corpus() : dir_.aug_corpus());
  const auto train_ids = corpus::encode_stream(split.train, vocab);
  const auto valid_ids = corpus::encode_stream(split.valid, vocab);
  const auto test_ids = corpus::encode_stream(split.test, vocab);
  auto config = c_.lm;
  config.vocab_size = vocab.size();
  lm::TrainOptions topts;
  topts.max_batches_per_epoch = c_.max_batches_per_epoch;
  json wall = json::array();
  topts.on_epoch = [&](const lm::EpochLog& e) {
    wall.push_back(e.wall_seconds);
    char line[160];
    std::snprintf(line, sizeof line, "  %s epoch %zu: train ppl %.2f, valid ppl %.2f, lr %g, %.1f s", id.c_str(),
                  e.epoch, std::exp(e.train_loss), std::exp(e.valid_loss), e.learning_rate, e.wall_seconds);
    log(line);
  };
  const auto result = lm::train(config, train_ids, valid_ids, topts);
  timings_["training"][id] = wall;

  json epochs = json::array();
  for (const auto& e : result.log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"valid_loss", e.valid_loss},
                      {"learning_rate", e.learning_rate}});
  }
  const json record = {{"model_id", id},
                       {"train_tokens", train_ids.size()},
                       {"epochs", epochs},
                       {"best_epoch", result.log.best_epoch},
                       {"valid_perplexity", lm::evaluate_perplexity(result.params, valid_ids)},
                       {"test_perplexity", lm::evaluate_perplexity(result.params, test_ids)},
                       {"unigram_valid_perplexity", lm::unigram_perplexity(train_ids, valid_ids, vocab.size())}};
  fs::create_directories(dir_.train_log(id).parent_path());
  lm::save_checkpoint(dir_.model(id), result.params);
  write_file_atomic(dir_.train_log(id), record.dump(2) + "\n");
}

void Runner::score(const std::string& id) {
  std::vector<stimgen::ParadigmItem> items;
  for (Construction cons : c_.constructions) {
    auto own = stimgen::load_items(dir_.paradigm(cons));
    items.insert(items.end(), std::make_move_iterator(own.begin()), std::make_move_iterator(own.end()));
  }
  std::vector<scoring::RegionScore> scores;
  if (c_.remote && id == c_.remote->model_id) {
    scores = scoring::score_items(items, client::remote_scorer(c_.remote->endpoint));
  } else {
    const auto vocab = corpus::Vocab::load(dir_.vocab());
    const auto params = lm::load_checkpoint(dir_.model(id));
    scores = scoring::score_items(items, scoring::model_scorer(params, vocab));
  }
  fs::create_directories(dir_.scores(id).parent_path());
  scoring::save_scores(dir_.scores(id), scores);
}

void Runner::analyze() {
  report::ReportBundle bundle;
  for (const auto& id : model_ids(c_)) {
    auto a = analyze_scores(id, scoring::load_scores(dir_.scores(id)), c_.constructions, c_.thresholds);
    const auto append = [](auto& to, auto& from) { to.insert(to.end(), from.begin(), from.end()); };
    append(bundle.effects, a.effects);
    append(bundle.summaries, a.summaries);
    append(bundle.fits, a.fits);
    append(bundle.verdicts, a.verdicts);
  }
  report::emit_tables(bundle, dir_.root);
}

void Runner::report() {
  auto bundle = report::read_tables(dir_.root);
  bundle.model_ids = model_ids(c_);
  bundle.constructions = c_.constructions;
  json meta = {{"name", c_.name}, {"seed", c_.seed}, {"lm_preset", c_.lm_preset}};
  if (c_.augmentation) {
    meta["augmentation"] = {{"construction", to_string(c_.augmentation->construction)}, {"n", c_.augmentation->n}};
  }
  for (const auto& id : trained_ids(c_)) {
    const auto log = read_json_file(dir_.train_log(id));
    meta["perplexity"][id] = {{"valid", log.at("valid_perplexity")},
                              {"test", log.at("test_perplexity")},
                              {"unigram_valid", log.at("unigram_valid_perplexity")}};
  }
  bundle.metadata = meta;
  fs::create_directories(dir_.report_dir());
  write_file_atomic(dir_.report_dir() / "effects.svg",
                    report::render_effect_chart(bundle.summaries, bundle.model_ids, bundle.constructions));
  write_file_atomic(dir_.report_dir() / "report.md", report::render_report(bundle, {"effects.svg"}));
}

json Runner::manifest() const {
  json inputs = json::object();
  if (c_.corpus.source == "synthetic") {
    inputs["grammar"] = sha256_file(c_.corpus.grammar);
  } else {
    for (const char* f : {"train.txt", "valid.txt", "test.txt"}) {
      inputs[std::string("corpus/") + f] = sha256_file(c_.corpus.text_dir / f);
    }
  }
  inputs["lexicon"] = sha256_file(c_.paradigms.lexicon);
  auto templates = c_.constructions;
  if (c_.augmentation) {
    inputs["augment_lexicon"] = sha256_file(c_.augmentation->lexicon);
    templates.push_back(c_.augmentation->construction);
  }
  for (Construction cons : templates) {
    const std::string name(to_string(cons));
    inputs["templates/" + name] = sha256_file(c_.paradigms.templates_dir / (name + ".json"));
  }

  json artifacts = json::object();
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir_.root)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir_.root).generic_string();
    if (rel == "manifest.json" || rel == "timings.json" || rel == "config.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  for (const auto& rel : files) artifacts[rel] = sha256_file(dir_.root / rel);

  json metrics = json::object();
  for (const auto& id : trained_ids(c_)) {
    const auto log = read_json_file(dir_.train_log(id));
    metrics[id] = {{"valid_perplexity", log.at("valid_perplexity")},
                   {"test_perplexity", log.at("test_perplexity")},
                   {"unigram_valid_perplexity", log.at("unigram_valid_perplexity")}};
  }
  return {{"tool", "gaplab"},
          {"version", kToolVersion},
          {"config", config_to_json(c_, false)},
          {"inputs", inputs},
          {"artifacts", artifacts},
          {"metrics", metrics}};
}

json Runner::run() {
  check_config();
  const auto at_most = [&](Stage s) { return static_cast<int>(s) <= static_cast<int>(opts_.until); };
  const auto wall_start = std::chrono::system_clock::now();

  stage(Stage::gen,
        [&] {
          return std::all_of(c_.constructions.begin(), c_.constructions.end(),
                             [&](Construction cons) { return fs::exists(dir_.paradigm(cons)); });
        },
        [&] { gen(); });
  if (at_most(Stage::corpus)) {
    stage(Stage::corpus, [&] { return split_exists(dir_.base_corpus()); }, [&] { synth_corpus(); });
  }
  if (at_most(Stage::augment)) {
    stage(Stage::augment,
          [&] { return fs::exists(dir_.vocab()) && (!c_.augmentation || split_exists(dir_.aug_corpus())); },
          [&] { augment(); });
  }
  if (at_most(Stage::train)) {
    for (const auto& id : trained_ids(c_)) {
      stage(Stage::train, [&] { return fs::exists(dir_.model(id)) && fs::exists(dir_.train_log(id)); },
            [&] { train(id); });
    }
  }
  if (at_most(Stage::score)) {
    for (const auto& id : model_ids(c_)) {
      stage(Stage::score, [&] { return fs::exists(dir_.scores(id)); }, [&] { score(id); });
    }
  }
  if (at_most(Stage::analyze)) {
    stage(Stage::analyze,
          [&] {
            for (const char* f : {"effects.csv", "summaries.csv", "fits.csv", "verdicts.csv"}) {
              if (!fs::exists(dir_.root / f)) return false;
            }
            return true;
          },
          [&] { analyze(); });
  }
  if (at_most(Stage::report)) {
    stage(Stage::report,
          [&] { return fs::exists(dir_.report_dir() / "report.md") && fs::exists(dir_.report_dir() / "effects.svg"); },
          [&] { report(); });
  }

  const std::time_t started = std::chrono::system_clock::to_time_t(wall_start);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started));
  timings_["started"] = stamp;
  write_file_atomic(dir_.timings(), timings_.dump(2) + "\n");

  if (opts_.until != Stage::report) return nullptr;
  const json m = manifest();
  write_file_atomic(dir_.manifest(), m.dump(2) + "\n");
  return m;
}

}  // namespace

json run_pipeline(const ExperimentConfig& config, const RunOptions& options) {
  return Runner(config, options).run();
}

std::vector<std::string> verify_manifest(const fs::path& run_dir) {
  const auto m = read_json_file(run_dir / "manifest.json");
  std::vector<std::string> stale;
  for (const auto& [rel, hash] : m.at("artifacts").items()) {
    const auto path = run_dir / rel;
    if (!fs::exists(path) || sha256_file(path) != hash.get<std::string>()) stale.push_back(rel);
  }
  return stale;
}

}  // namespace gaplab::pipeline
