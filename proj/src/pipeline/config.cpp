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


#include <set>

#include "gaplab/pipeline/pipeline.hpp"

namespace gaplab::pipeline {

using nlohmann::json;

fs::path default_data_dir() { return GAPLAB_DATA_DIR; }

std::size_t default_item_count(Construction c) {
  switch (c) {
    case Construction::clefting: return 486;
    case Construction::topicalization_intro: return 486;
    case Construction::topicalization_no_intro: return 161;
    case Construction::tough_movement: return 243;
    case Construction::wh_movement: return 243;
  }
  return 0;
}

namespace {

// Field accessors that report the full field path on error.
class Fields {
 public:
  Fields(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    return it == doc_.end() || it->is_null() ? nullptr : &*it;
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  std::optional<std::string> string(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
    return v->get<std::string>();
  }
  std::optional<std::uint64_t> uint(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      throw ConfigError(field(key) + ": expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }
  std::optional<double> number(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
    return v->get<double>();
  }
  std::optional<bool> boolean(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    return v->get<bool>();
  }

  /// Throws on keys that were never asked for.
  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) throw ConfigError(field(key) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

Construction construction_at(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field + ": expected a construction name");
  const auto c = try_parse_construction(v.get<std::string>());
  if (!c) {
    throw ConfigError(field + ": unknown construction '" + v.get<std::string>() + "' (valid: " +
                      valid_construction_names() + ")");
  }
  return *c;
}

fs::path resolve(const fs::path& base, const std::optional<std::string>& given, const fs::path& fallback) {
  if (!given) return fallback;
  const fs::path p(*given);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

fs::path template_file(const ParadigmConfig& p, Construction c) {
  return p.templates_dir / (std::string(to_string(c)) + ".json");
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir, std::optional<std::uint64_t> seed_override) {
  ExperimentConfig c;
  const fs::path data = default_data_dir();
  Fields top(doc, "");
  if (auto v = top.string("name")) {
    if (v->empty()) throw ConfigError("name: must not be empty");
    c.name = *v;
  }
  if (auto v = top.uint("seed")) c.seed = *v;
  if (seed_override) c.seed = *seed_override;

  // corpus
  {
    const json empty = json::object();
    const json* node = top.get("corpus");
    Fields f(node ? *node : empty, "corpus");
    if (auto v = f.string("source")) c.corpus.source = *v;
    if (c.corpus.source != "synthetic" && c.corpus.source != "text") {
      throw ConfigError("corpus.source: expected \"synthetic\" or \"text\"");
    }
    c.corpus.grammar = resolve(base_dir, f.string("grammar"), data / "grammar/synthetic.json");
    if (auto v = f.string("dir")) c.corpus.text_dir = resolve(base_dir, v, {});
    if (c.corpus.source == "text" && c.corpus.text_dir.empty()) {
      throw ConfigError("corpus.dir: required when corpus.source is \"text\"");
    }
    if (auto v = f.uint("tokens")) c.corpus.tokens = *v;
    if (c.corpus.tokens < 1) throw ConfigError("corpus.tokens: must be >= 1");
    if (auto v = f.uint("vocab_size")) c.corpus.vocab_size = *v;
    if (c.corpus.vocab_size < 3) throw ConfigError("corpus.vocab_size: must be >= 3");
    c.corpus.seed = f.uint("seed").value_or(c.seed);
    if (const json* o = f.get("constructions")) {
      if (!o->is_object()) throw ConfigError("corpus.constructions: expected an object");
      for (const auto& [name, spec] : o->items()) {
        Fields g(spec, "corpus.constructions." + name);
        GrammarOverride ov{g.boolean("include"), g.number("weight"), g.boolean("enforce_dependency")};
        if (ov.weight && !(*ov.weight > 0.0)) throw ConfigError(g.field("weight") + ": must be > 0");
        g.finish();
        c.corpus.overrides[name] = ov;
      }
    }
    f.finish();
  }

  // lm
  {
    json lm = json::object();
    if (const json* node = top.get("lm")) {
      if (!node->is_object()) throw ConfigError("lm: expected an object");
      lm = *node;
    }
    if (lm.contains("preset")) {
      if (!lm["preset"].is_string()) throw ConfigError("lm.preset: expected a string");
      c.lm_preset = lm["preset"].get<std::string>();
      lm.erase("preset");
    }
    if (lm.contains("vocab_size")) throw ConfigError("lm.vocab_size: set from the run vocabulary, not configurable");
    auto base = lm::preset(c.lm_preset);
    base.seed = c.seed;
    c.lm = lm::config_from_json(lm, base);
    c.lm.validate(false);
  }

  if (const json* node = top.get("training")) {
    Fields f(*node, "training");
    c.max_batches_per_epoch = f.uint("max_batches_per_epoch").value_or(0);
    f.finish();
  }

  // constructions
  if (const json* node = top.get("constructions")) {
    if (!node->is_array() || node->empty()) throw ConfigError("constructions: expected a non-empty array");
    for (std::size_t i = 0; i < node->size(); ++i) {
      const auto cons = construction_at((*node)[i], "constructions[" + std::to_string(i) + "]");
      if (std::find(c.constructions.begin(), c.constructions.end(), cons) != c.constructions.end()) {
        throw ConfigError("constructions[" + std::to_string(i) + "]: duplicate '" + std::string(to_string(cons)) + "'");
      }
      c.constructions.push_back(cons);
    }
  } else {
    c.constructions.assign(kAllConstructions.begin(), kAllConstructions.end());
  }

  // paradigms
  {
    const json empty = json::object();
    const json* node = top.get("paradigms");
    Fields f(node ? *node : empty, "paradigms");
    c.paradigms.templates_dir = resolve(base_dir, f.string("templates"), data / "templates");
    c.paradigms.lexicon = resolve(base_dir, f.string("lexicon"), data / "lexicons/test.json");
    c.paradigms.seed = f.uint("seed").value_or(c.seed);
    for (Construction cons : c.constructions) c.paradigms.items[cons] = default_item_count(cons);
    if (const json* items = f.get("items")) {
      if (!items->is_object()) throw ConfigError("paradigms.items: expected an object");
      for (const auto& [name, count] : items->items()) {
        const std::string field = "paradigms.items." + name;
        const auto cons = construction_at(json(name), field);
        if (!count.is_number_integer() || count.get<std::int64_t>() < 1) {
          throw ConfigError(field + ": expected a positive integer");
        }
        if (!c.paradigms.items.contains(cons)) throw ConfigError(field + ": construction is not tested");
        c.paradigms.items[cons] = count.get<std::size_t>();
      }
    }
    f.finish();
  }

  // augmentation
  if (const json* node = top.get("augmentation")) {
    Fields f(*node, "augmentation");
    AugmentationConfig a;
    const json* cons = f.get("construction");
    if (!cons) throw ConfigError("augmentation.construction: required");
    a.construction = construction_at(*cons, "augmentation.construction");
    if (auto n = f.uint("n")) a.n = *n;
    if (a.n % 2 != 0) throw ConfigError("augmentation.n: must be even (half with a gap, half without), got " +
                                        std::to_string(a.n));
    a.lexicon = resolve(base_dir, f.string("lexicon"), data / "lexicons/augment.json");
    a.seed = f.uint("seed").value_or(c.seed);
    f.finish();
    c.augmentation = a;
  }

  if (const json* node = top.get("thresholds")) {
    Fields f(*node, "thresholds");
    for (auto [key, field] : {std::pair{"licensing_alpha", &c.thresholds.licensing_alpha},
                              std::pair{"island_alpha", &c.thresholds.island_alpha}}) {
      if (auto v = f.number(key)) {
        if (!(*v > 0.0 && *v < 1.0)) throw ConfigError(f.field(key) + ": must be in (0, 1)");
        *field = *v;
      }
    }
    f.finish();
  }

  if (const json* node = top.get("remote")) {
    Fields f(*node, "remote");
    RemoteConfig r;
    auto endpoint = f.string("endpoint");
    if (!endpoint || endpoint->empty()) throw ConfigError("remote.endpoint: required");
    r.endpoint = *endpoint;
    if (auto id = f.string("model_id")) r.model_id = *id;
    if (r.model_id == "base" || r.model_id == "aug" || r.model_id.empty()) {
      throw ConfigError("remote.model_id: must be non-empty and differ from \"base\" and \"aug\"");
    }
    f.finish();
    c.remote = r;
  }

  if (auto v = top.string("output_dir")) {
    c.output_dir = *v;
  } else {
    c.output_dir = fs::path("runs") / c.name;
  }
  top.finish();

  // Every construction used needs a template file.
  auto needed = c.constructions;
  if (c.augmentation) needed.push_back(c.augmentation->construction);
  for (Construction cons : needed) {
    const auto path = template_file(c.paradigms, cons);
    if (!fs::exists(path)) {
      throw ConfigError("paradigms.templates: no template for " + std::string(to_string(cons)) + " (looked for " +
                        path.string() + ")");
    }
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  const json doc = read_json_file(path);
  return parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path(), seed_override);
}

json config_to_json(const ExperimentConfig& c, bool with_paths) {
  json corpus = {{"source", c.corpus.source},
                 {"tokens", c.corpus.tokens},
                 {"vocab_size", c.corpus.vocab_size},
                 {"seed", c.corpus.seed}};
  json overrides = json::object();
  for (const auto& [name, o] : c.corpus.overrides) {
    json e = json::object();
    if (o.include) e["include"] = *o.include;
    if (o.weight) e["weight"] = *o.weight;
    if (o.enforce_dependency) e["enforce_dependency"] = *o.enforce_dependency;
    overrides[name] = e;
  }
  corpus["constructions"] = overrides;
  if (with_paths) {
    if (c.corpus.source == "synthetic") corpus["grammar"] = c.corpus.grammar.string();
    else corpus["dir"] = c.corpus.text_dir.string();
  }

  json lm = lm::config_to_json(c.lm);
  lm.erase("vocab_size");
  lm["preset"] = c.lm_preset;

  json constructions = json::array();
  for (Construction cons : c.constructions) constructions.push_back(to_string(cons));
  json items = json::object();
  for (const auto& [cons, n] : c.paradigms.items) items[std::string(to_string(cons))] = n;
  json paradigms = {{"items", items}, {"seed", c.paradigms.seed}};
  if (with_paths) {
    paradigms["templates"] = c.paradigms.templates_dir.string();
    paradigms["lexicon"] = c.paradigms.lexicon.string();
  }

  json out = {{"name", c.name},
              {"seed", c.seed},
              {"corpus", corpus},
              {"lm", lm},
              {"training", {{"max_batches_per_epoch", c.max_batches_per_epoch}}},
              {"constructions", constructions},
              {"paradigms", paradigms},
              {"thresholds",
               {{"licensing_alpha", c.thresholds.licensing_alpha}, {"island_alpha", c.thresholds.island_alpha}}}};
  if (c.augmentation) {
    json a = {{"construction", to_string(c.augmentation->construction)},
              {"n", c.augmentation->n},
              {"seed", c.augmentation->seed}};
    if (with_paths) a["lexicon"] = c.augmentation->lexicon.string();
    out["augmentation"] = a;
  }
  if (c.remote) {
    out["remote"] = {{"model_id", c.remote->model_id}};
    if (with_paths) out["remote"]["endpoint"] = c.remote->endpoint;
  }
  if (with_paths) out["output_dir"] = c.output_dir.string();
  return out;
}

}  // namespace gaplab::pipeline
