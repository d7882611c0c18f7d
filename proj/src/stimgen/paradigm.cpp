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
#include <fstream>
#include <limits>
#include <sstream>

#include "gaplab/common/random.hpp"
#include "gaplab/stimgen/stimgen.hpp"

namespace gaplab::stimgen {

namespace {

using nlohmann::json;
using Binding = std::map<std::string, std::string>;

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::vector<const LexiconSlot*> resolve_slots(const std::vector<std::string>& names,
                                              const Lexicon& lexicon, Construction c) {
  std::vector<const LexiconSlot*> out;
  for (const auto& name : names) {
    const LexiconSlot* slot = find_slot(lexicon, name);
    if (!slot) {
      throw ConfigError("slot '" + name + "' referenced by the " + std::string(to_string(c)) +
                        " template is not in the lexicon");
    }
    out.push_back(slot);
  }
  return out;
}

std::uint64_t product_size(const std::vector<const LexiconSlot*>& slots) {
  std::uint64_t total = 1;
  for (const auto* s : slots) {
    const std::uint64_t n = s->candidates.size();
    if (total > kSaturated / n) return kSaturated;
    total *= n;
  }
  return total;
}

/// `count` distinct mixed-radix digit tuples, one digit per slot.
std::vector<std::vector<std::size_t>> sample_distinct(const std::vector<const LexiconSlot*>& slots,
                                                      std::size_t count, std::uint64_t seed) {
  const std::uint64_t total = product_size(slots);
  if (total < count) throw InsufficientLexiconError(count, static_cast<std::size_t>(total));

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(count);
  auto digits_of = [&](std::uint64_t index) {
    std::vector<std::size_t> digits(slots.size());
    for (std::size_t k = slots.size(); k-- > 0;) {
      const std::uint64_t n = slots[k]->candidates.size();
      digits[k] = static_cast<std::size_t>(index % n);
      index /= n;
    }
    return digits;
  };

  if (total <= 2 * static_cast<std::uint64_t>(count)) {
    std::vector<std::uint64_t> all(static_cast<std::size_t>(total));
    for (std::uint64_t i = 0; i < total; ++i) all[static_cast<std::size_t>(i)] = i;
    shuffle(all.begin(), all.end(), rng);
    for (std::size_t i = 0; i < count; ++i) out.push_back(digits_of(all[i]));
    return out;
  }
  // Sparse case: rejection sampling terminates quickly since at least half
  // of the space is always unused.
  std::set<std::vector<std::size_t>> seen;
  while (out.size() < count) {
    std::vector<std::size_t> digits(slots.size());
    for (std::size_t k = 0; k < slots.size(); ++k) {
      digits[k] = static_cast<std::size_t>(uniform_index(rng, slots[k]->candidates.size()));
    }
    if (seen.insert(digits).second) out.push_back(std::move(digits));
  }
  return out;
}

Binding make_binding(const std::vector<const LexiconSlot*>& slots,
                     const std::vector<std::size_t>& digits) {
  Binding b;
  for (std::size_t k = 0; k < slots.size(); ++k) b[slots[k]->name] = slots[k]->candidates[digits[k]];
  return b;
}

ConditionSentence expand(const Variant& v, const Binding& binding) {
  ConditionSentence s;
  s.condition = v.condition;
  s.grammatical = v.grammatical;
  std::vector<std::size_t> offsets;
  offsets.reserve(v.segments.size() + 1);
  for (const auto& seg : v.segments) {
    offsets.push_back(s.tokens.size());
    if (seg.kind == Segment::Kind::literal) {
      s.tokens.insert(s.tokens.end(), seg.literal.begin(), seg.literal.end());
      continue;
    }
    auto it = binding.find(seg.text);
    if (it == binding.end()) throw InvariantError("binding has no value for slot '" + seg.text + "'");
    Tokens toks = corpus::tokenize(it->second);
    if (seg.capitalize && !toks.empty() && !toks[0].empty()) {
      toks[0][0] = static_cast<char>(std::toupper(static_cast<unsigned char>(toks[0][0])));
    }
    s.tokens.insert(s.tokens.end(), toks.begin(), toks.end());
  }
  offsets.push_back(s.tokens.size());
  s.critical_region = {offsets[v.critical_region.begin], offsets[v.critical_region.end]};
  s.filler_region = {offsets[v.filler_region.begin], offsets[v.filler_region.end]};
  if (s.critical_region.empty()) throw InvariantError("critical region expanded to zero tokens");
  return s;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::set<std::string> content_tokens(const Lexicon& lexicon, const std::vector<std::string>* only,
                                     const std::set<std::string>& function_words) {
  std::set<std::string> out;
  for (const auto& slot : lexicon) {
    if (slot.role == kIntroRole) continue;
    if (only && std::find(only->begin(), only->end(), slot.name) == only->end()) continue;
    for (const auto& cand : slot.candidates) {
      for (const auto& tok : corpus::tokenize(cand)) {
        if (!function_words.contains(tok)) out.insert(tok);
      }
    }
  }
  return out;
}

}  // namespace

InsufficientLexiconError::InsufficientLexiconError(std::size_t requested, std::size_t attainable)
    : ConfigError("lexicon supports at most " + std::to_string(attainable) +
                  " distinct bindings, " + std::to_string(requested) + " requested"),
      attainable_(attainable) {}

LexiconOverlapError::LexiconOverlapError(std::set<std::string> shared)
    : ConfigError([&] {
        std::string msg = "augmentation lexicon shares words with the test lexicon:";
        for (const auto& w : shared) msg += " " + w;
        return msg;
      }()),
      shared_(std::move(shared)) {}

const ConditionSentence& ParadigmItem::sentence(Condition c) const {
  for (const auto& s : sentences) {
    if (s.condition == c) return s;
  }
  throw InvariantError("item " + std::to_string(item_id) + " has no sentence for (" + to_string(c) + ")");
}

std::vector<ConditionSentence> generate_paradigm(const ConstructionTemplate& tmpl,
                                                 const ParadigmItem& item) {
  std::vector<ConditionSentence> out;
  out.reserve(tmpl.variants.size());
  for (Condition cond : all_conditions(tmpl.has_islands())) {
    out.push_back(expand(tmpl.variant(cond), item.binding));
  }
  return out;
}

std::vector<ParadigmItem> bind_lexicon(const ConstructionTemplate& tmpl, const Lexicon& slots,
                                       std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("item count must be >= 1");
  const auto resolved = resolve_slots(tmpl.slot_names(), slots, tmpl.construction);
  const auto picks = sample_distinct(resolved, count, seed);

  std::vector<ParadigmItem> items;
  items.reserve(count);
  for (std::size_t i = 0; i < picks.size(); ++i) {
    ParadigmItem item;
    item.item_id = static_cast<int>(i + 1);
    item.construction = tmpl.construction;
    item.binding = make_binding(resolved, picks[i]);
    item.sentences = generate_paradigm(tmpl, item);
    items.push_back(std::move(item));
  }
  return items;
}

const std::set<std::string>& default_function_words() {
  static const std::set<std::string> words = {
      "a",   "an",  "the",  "this", "that", "these", "those", "some", "any",
      "at",  "on",  "in",   "of",   "to",   "for",   "from",  "with", "by",
      "who", "which", "and", "or", ",", "."};
  return words;
}

std::vector<Tokens> generate_training_sentences(const ConstructionTemplate& tmpl, std::size_t n,
                                                const Lexicon& slots, const Lexicon& test_slots,
                                                std::uint64_t seed,
                                                const std::set<std::string>& function_words) {
  if (n % 2 != 0) throw ConfigError("augmentation size must be even, got " + std::to_string(n));

  const Variant& gapped = tmpl.variant({true, true, false});
  const Variant& gapless = tmpl.variant({false, false, false});

  std::set<std::string> names;
  for (const auto* v : {&gapped, &gapless}) {
    for (const auto& seg : v->segments) {
      if (seg.kind == Segment::Kind::slot) names.insert(seg.text);
    }
  }
  const std::vector<std::string> used(names.begin(), names.end());
  resolve_slots(used, slots, tmpl.construction);

  const auto train_words = content_tokens(slots, &used, function_words);
  const auto test_words = content_tokens(test_slots, nullptr, function_words);
  std::set<std::string> shared;
  std::set_intersection(train_words.begin(), train_words.end(), test_words.begin(),
                        test_words.end(), std::inserter(shared, shared.end()));
  if (!shared.empty()) throw LexiconOverlapError(std::move(shared));

  std::vector<Tokens> out;
  out.reserve(n);
  std::uint64_t stream = 0;
  for (const auto* v : {&gapped, &gapless}) {
    std::vector<std::string> vnames;
    for (const auto& seg : v->segments) {
      if (seg.kind == Segment::Kind::slot &&
          std::find(vnames.begin(), vnames.end(), seg.text) == vnames.end()) {
        vnames.push_back(seg.text);
      }
    }
    std::sort(vnames.begin(), vnames.end());
    const auto resolved = resolve_slots(vnames, slots, tmpl.construction);
    for (const auto& digits : sample_distinct(resolved, n / 2, mix_seed(seed, stream++))) {
      out.push_back(expand(*v, make_binding(resolved, digits)).tokens);
    }
  }
  return out;
}

LexiconReport validate_lexicon(const std::vector<ParadigmItem>& items, const corpus::Vocab& vocab) {
  LexiconReport report;
  for (const auto& item : items) {
    for (const auto& s : item.sentences) {
      for (const auto& tok : s.tokens) {
        if (!vocab.contains(tok)) report.missing[tok].insert(item.item_id);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

json item_to_json(const ParadigmItem& item) {
  json sentences = json::array();
  for (const auto& s : item.sentences) {
    sentences.push_back({{"filler", s.condition.filler},
                         {"gap", s.condition.gap},
                         {"island", s.condition.island},
                         {"tokens", s.tokens},
                         {"critical_region", {s.critical_region.begin, s.critical_region.end}},
                         {"filler_region", {s.filler_region.begin, s.filler_region.end}},
                         {"grammatical", s.grammatical}});
  }
  return {{"item_id", item.item_id},
          {"construction", std::string(to_string(item.construction))},
          {"binding", item.binding},
          {"sentences", std::move(sentences)}};
}

ParadigmItem item_from_json(const json& doc) {
  try {
    ParadigmItem item;
    item.item_id = doc.at("item_id").get<int>();
    item.construction = parse_construction(doc.at("construction").get<std::string>());
    item.binding = doc.at("binding").get<Binding>();
    for (const auto& s : doc.at("sentences")) {
      ConditionSentence cs;
      cs.condition = {s.at("filler").get<bool>(), s.at("gap").get<bool>(), s.at("island").get<bool>()};
      cs.tokens = s.at("tokens").get<Tokens>();
      cs.critical_region = {s.at("critical_region")[0].get<std::size_t>(),
                            s.at("critical_region")[1].get<std::size_t>()};
      cs.filler_region = {s.at("filler_region")[0].get<std::size_t>(),
                          s.at("filler_region")[1].get<std::size_t>()};
      cs.grammatical = s.at("grammatical").get<bool>();
      if (cs.critical_region.end > cs.tokens.size() || cs.critical_region.empty()) {
        throw ParseError("critical_region out of bounds");
      }
      item.sentences.push_back(std::move(cs));
    }
    return item;
  } catch (const json::exception& e) {
    throw ParseError(std::string("item record: ") + e.what());
  }
}

void write_items_jsonl(std::ostream& out, const std::vector<ParadigmItem>& items) {
  for (const auto& item : items) out << item_to_json(item).dump() << '\n';
}

std::vector<ParadigmItem> read_items_jsonl(std::istream& in) {
  std::vector<ParadigmItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      items.push_back(item_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

void save_items(const fs::path& path, const std::vector<ParadigmItem>& items) {
  std::ostringstream out;
  write_items_jsonl(out, items);
  write_file_atomic(path, out.str());
}

std::vector<ParadigmItem> load_items(const fs::path& path) {
  std::istringstream in(read_file(path));
  try {
    return read_items_jsonl(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace gaplab::stimgen
