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

#include <cctype>

#include "gaplab/common/error.hpp"
#include "gaplab/common/random.hpp"
#include "gaplab/corpus/corpus.hpp"

namespace gaplab::corpus {

namespace {

using nlohmann::json;

GrammarSymbol parse_symbol(const std::string& text, const std::string& where) {
  GrammarSymbol sym;
  if (text.empty()) throw ConfigError(where + ": empty symbol");
  if (text[0] == '$' || text[0] == '@') {
    sym.kind = text[0] == '$' ? GrammarSymbol::Kind::slot : GrammarSymbol::Kind::nonterminal;
    std::size_t pos = 1;
    if (pos < text.size() && text[pos] == '^') {
      sym.capitalize = true;
      ++pos;
    }
    sym.name = text.substr(pos);
    if (sym.name.empty()) throw ConfigError(where + ": symbol '" + text + "' has no name");
    return sym;
  }
  sym.kind = GrammarSymbol::Kind::literal;
  sym.literal = tokenize(text);
  if (sym.literal.empty()) throw ConfigError(where + ": literal '" + text + "' has no tokens");
  return sym;
}

std::optional<bool> optional_bool(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  if (!obj.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected boolean");
  return obj.at(key).get<bool>();
}

GrammarRule parse_rule(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  GrammarRule rule;
  if (obj.contains("weight")) {
    if (!obj.at("weight").is_number()) throw ConfigError(where + ".weight: expected number");
    rule.weight = obj.at("weight").get<double>();
  }
  if (!obj.contains("rhs") || !obj.at("rhs").is_array()) {
    throw ConfigError(where + ".rhs: expected an array of symbols");
  }
  const auto& rhs = obj.at("rhs");
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    const std::string sw = where + ".rhs[" + std::to_string(i) + "]";
    if (!rhs[i].is_string()) throw ConfigError(sw + ": expected string");
    rule.rhs.push_back(parse_symbol(rhs[i].get<std::string>(), sw));
  }
  rule.filler = optional_bool(obj, "filler", where);
  rule.gap = optional_bool(obj, "gap", where);
  return rule;
}

void capitalize_first(Tokens& tokens, std::size_t from) {
  if (from < tokens.size() && !tokens[from].empty()) {
    auto& ch = tokens[from][0];
    ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
}

class Sampler {
 public:
  Sampler(const GrammarConfig& g, Rng& rng) : g_(g), rng_(rng) {}

  void expand_rule(const GrammarRule& rule, Tokens& out, int depth) {
    for (const auto& sym : rule.rhs) {
      const std::size_t start = out.size();
      switch (sym.kind) {
        case GrammarSymbol::Kind::literal:
          out.insert(out.end(), sym.literal.begin(), sym.literal.end());
          break;
        case GrammarSymbol::Kind::slot: {
          const auto& entries = g_.lexicon.at(sym.name);
          const auto& pick = entries[uniform_index(rng_, entries.size())];
          out.insert(out.end(), pick.begin(), pick.end());
          break;
        }
        case GrammarSymbol::Kind::nonterminal: {
          if (depth >= g_.max_depth) {
            throw ConfigError("grammar recursion deeper than max_depth at @" + sym.name);
          }
          const auto& rules = g_.nonterminals.at(sym.name);
          expand_rule(rules[pick(rules)], out, depth + 1);
          break;
        }
      }
      if (sym.capitalize) capitalize_first(out, start);
    }
  }

  std::size_t pick(const std::vector<GrammarRule>& rules) {
    weights_.clear();
    for (const auto& r : rules) weights_.push_back(r.weight);
    return weighted_index(rng_, weights_);
  }

 private:
  const GrammarConfig& g_;
  Rng& rng_;
  std::vector<double> weights_;
};

bool frame_eligible(const GrammarConstruction& c, const GrammarRule& frame) {
  if (!c.enforce_dependency) return true;
  if (!frame.filler || !frame.gap) return true;
  return *frame.filler == *frame.gap;
}

}  // namespace

GrammarConstruction* GrammarConfig::find(std::string_view name) {
  for (auto& c : constructions) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void GrammarConfig::validate() const {
  auto check_rule = [&](const GrammarRule& rule, const std::string& where) {
    if (!(rule.weight > 0.0)) throw ConfigError(where + ".weight: must be > 0");
    if (rule.rhs.empty()) throw ConfigError(where + ".rhs: must not be empty");
    for (const auto& sym : rule.rhs) {
      if (sym.kind == GrammarSymbol::Kind::slot && !lexicon.contains(sym.name)) {
        throw ConfigError(where + ": unknown lexicon slot $" + sym.name);
      }
      if (sym.kind == GrammarSymbol::Kind::nonterminal && !nonterminals.contains(sym.name)) {
        throw ConfigError(where + ": unknown nonterminal @" + sym.name);
      }
    }
  };
  for (const auto& [name, entries] : lexicon) {
    if (entries.empty()) throw ConfigError("lexicon." + name + ": no entries");
    for (const auto& e : entries) {
      if (e.empty()) throw ConfigError("lexicon." + name + ": empty entry");
    }
  }
  for (const auto& [name, rules] : nonterminals) {
    if (rules.empty()) throw ConfigError("nonterminals." + name + ": no rules");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      check_rule(rules[i], "nonterminals." + name + "[" + std::to_string(i) + "]");
    }
  }
  bool any_included = false;
  for (const auto& c : constructions) {
    const std::string where = "constructions." + c.name;
    if (!(c.weight > 0.0)) throw ConfigError(where + ".weight: must be > 0");
    if (c.frames.empty()) throw ConfigError(where + ".frames: must not be empty");
    bool any_eligible = false;
    for (std::size_t i = 0; i < c.frames.size(); ++i) {
      check_rule(c.frames[i], where + ".frames[" + std::to_string(i) + "]");
      any_eligible = any_eligible || frame_eligible(c, c.frames[i]);
    }
    if (!any_eligible) throw ConfigError(where + ": no frame is eligible");
    any_included = any_included || c.include;
  }
  if (!any_included) throw ConfigError("constructions: no construction is included");
  if (max_depth < 1) throw ConfigError("max_depth: must be >= 1");
}

GrammarConfig parse_grammar(const json& doc) {
  if (!doc.is_object()) throw ConfigError("grammar: expected a JSON object");
  GrammarConfig g;
  if (!doc.contains("lexicon") || !doc.at("lexicon").is_object()) {
    throw ConfigError("lexicon: expected an object mapping slot -> entries");
  }
  for (const auto& [name, entries] : doc.at("lexicon").items()) {
    if (!entries.is_array()) throw ConfigError("lexicon." + name + ": expected an array");
    auto& list = g.lexicon[name];
    for (const auto& e : entries) {
      if (!e.is_string()) throw ConfigError("lexicon." + name + ": expected strings");
      list.push_back(tokenize(e.get<std::string>()));
    }
  }
  if (doc.contains("nonterminals")) {
    if (!doc.at("nonterminals").is_object()) throw ConfigError("nonterminals: expected object");
    for (const auto& [name, rules] : doc.at("nonterminals").items()) {
      if (!rules.is_array()) throw ConfigError("nonterminals." + name + ": expected an array");
      auto& list = g.nonterminals[name];
      for (std::size_t i = 0; i < rules.size(); ++i) {
        list.push_back(parse_rule(rules[i], "nonterminals." + name + "[" + std::to_string(i) + "]"));
      }
    }
  }
  if (!doc.contains("constructions") || !doc.at("constructions").is_array()) {
    throw ConfigError("constructions: expected an array");
  }
  const auto& cons = doc.at("constructions");
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const std::string where = "constructions[" + std::to_string(i) + "]";
    const auto& obj = cons[i];
    if (!obj.is_object() || !obj.contains("name") || !obj.at("name").is_string()) {
      throw ConfigError(where + ".name: expected string");
    }
    GrammarConstruction c;
    c.name = obj.at("name").get<std::string>();
    if (g.find(c.name)) throw ConfigError(where + ": duplicate construction '" + c.name + "'");
    if (obj.contains("weight")) c.weight = obj.at("weight").get<double>();
    if (auto v = optional_bool(obj, "include", where)) c.include = *v;
    if (auto v = optional_bool(obj, "enforce_dependency", where)) c.enforce_dependency = *v;
    if (!obj.contains("frames") || !obj.at("frames").is_array()) {
      throw ConfigError(where + ".frames: expected an array");
    }
    for (std::size_t k = 0; k < obj.at("frames").size(); ++k) {
      c.frames.push_back(parse_rule(obj.at("frames")[k], where + ".frames[" + std::to_string(k) + "]"));
    }
    g.constructions.push_back(std::move(c));
  }
  if (doc.contains("max_depth")) g.max_depth = doc.at("max_depth").get<int>();
  g.validate();
  return g;
}

GrammarConfig load_grammar(const fs::path& path) {
  try {
    return parse_grammar(read_json_file(path));
  } catch (const ParseError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

CorpusSplit synth_corpus(const GrammarConfig& grammar, std::size_t n_tokens,
                         std::uint64_t seed) {
  grammar.validate();
  if (n_tokens == 0) throw ConfigError("n_tokens must be > 0");

  std::vector<const GrammarConstruction*> included;
  std::vector<double> weights;
  std::vector<std::vector<const GrammarRule*>> frames;
  std::vector<std::vector<double>> frame_weights;
  for (const auto& c : grammar.constructions) {
    if (!c.include) continue;
    included.push_back(&c);
    weights.push_back(c.weight);
    auto& fs = frames.emplace_back();
    auto& fw = frame_weights.emplace_back();
    for (const auto& f : c.frames) {
      if (frame_eligible(c, f)) {
        fs.push_back(&f);
        fw.push_back(f.weight);
      }
    }
  }

  Rng rng(seed);
  Sampler sampler(grammar, rng);
  CorpusSplit split;
  std::size_t produced = 0;
  for (std::size_t i = 0; produced < n_tokens; ++i) {
    const std::size_t ci = weighted_index(rng, weights);
    const std::size_t fi = weighted_index(rng, frame_weights[ci]);
    Tokens sentence;
    sampler.expand_rule(*frames[ci][fi], sentence, 0);
    produced += sentence.size() + 1;
    switch (i % 20) {
      case 18: split.valid.push_back(std::move(sentence)); break;
      case 19: split.test.push_back(std::move(sentence)); break;
      default: split.train.push_back(std::move(sentence));
    }
  }
  if (split.train.empty() || split.valid.empty() || split.test.empty()) {
    throw ConfigError("n_tokens=" + std::to_string(n_tokens) +
                      " is too small: at least one split would be empty");
  }
  return split;
}

}  // namespace gaplab::corpus
