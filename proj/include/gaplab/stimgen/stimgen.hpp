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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/error.hpp"
#include "gaplab/common/io.hpp"
#include "gaplab/corpus/vocab.hpp"

namespace gaplab::stimgen {

// ---------------------------------------------------------------------------
// Lexicons

struct LexiconSlot {
  std::string name;
  /// Grammatical role label (subject, verb, filler-NP, object-NP, adverbial,
  /// island-NP, intro-phrase).
  std::string role;
  std::vector<std::string> candidates;
};

using Lexicon = std::vector<LexiconSlot>;

inline constexpr std::string_view kIntroRole = "intro-phrase";

/// JSON object mapping slot name to either an array of candidates or
/// {"role": ..., "candidates": [...]}.
Lexicon parse_lexicon(const nlohmann::json& doc);
Lexicon load_lexicon(const fs::path& path);
const LexiconSlot* find_slot(const Lexicon& lexicon, std::string_view name);

// ---------------------------------------------------------------------------
// Templates

/// "$name" references a lexicon slot ("$^name" capitalizes its first
/// letter); any other string is literal text.
struct Segment {
  enum class Kind { literal, slot };
  Kind kind = Kind::literal;
  std::string text;  // slot name, or the literal as written
  bool capitalize = false;
  Tokens literal;

  bool operator==(const Segment& o) const {
    return kind == o.kind && text == o.text && capitalize == o.capitalize;
  }
};

struct Variant {
  Condition condition;
  std::vector<Segment> segments;
  /// Segment-index ranges; resolved to token ranges per binding.
  Span filler_region;
  Span critical_region;
  bool grammatical = false;
};

struct ConstructionTemplate {
  Construction construction = Construction::clefting;
  std::vector<Variant> variants;

  bool has_islands() const;
  const Variant& variant(Condition c) const;
  /// Sorted, de-duplicated slot names referenced by any variant.
  std::vector<std::string> slot_names() const;
};

/// Thrown when a template breaks a structural rule; the message names the
/// variant and the rule.
class TemplateError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

ConstructionTemplate parse_template(const nlohmann::json& doc);
/// A file holds one template object or an array of them.
std::vector<ConstructionTemplate> load_templates(const fs::path& path);
void validate_template(const ConstructionTemplate& tmpl);

// ---------------------------------------------------------------------------
// Items

struct ConditionSentence {
  Condition condition;
  Tokens tokens;
  Span critical_region;
  /// Token range holding the filler (or its -filler counterpart, possibly empty).
  Span filler_region;
  bool grammatical = false;
};

struct ParadigmItem {
  int item_id = 0;
  Construction construction = Construction::clefting;
  std::map<std::string, std::string> binding;
  std::vector<ConditionSentence> sentences;

  const ConditionSentence& sentence(Condition c) const;
};

class InsufficientLexiconError : public ConfigError {
 public:
  InsufficientLexiconError(std::size_t requested, std::size_t attainable);
  std::size_t attainable() const { return attainable_; }

 private:
  std::size_t attainable_;
};

class LexiconOverlapError : public ConfigError {
 public:
  explicit LexiconOverlapError(std::set<std::string> shared);
  const std::set<std::string>& shared() const { return shared_; }

 private:
  std::set<std::string> shared_;
};

/// Draws `count` distinct bindings (deterministic under seed) and expands
/// each into its condition sentences. Item ids run from 1.
std::vector<ParadigmItem> bind_lexicon(const ConstructionTemplate& tmpl, const Lexicon& slots,
                                       std::size_t count, std::uint64_t seed);

std::vector<ConditionSentence> generate_paradigm(const ConstructionTemplate& tmpl,
                                                 const ParadigmItem& item);

/// Closed-class words exempt from the augmentation/test disjointness check.
const std::set<std::string>& default_function_words();

/// Returns n grammatical simple sentences: the first n/2 are (+filler,+gap),
/// the rest (-filler,-gap). Content words of `slots` must not occur in
/// `test_slots` (intro-phrase slots and function words excepted).
std::vector<Tokens> generate_training_sentences(
    const ConstructionTemplate& tmpl, std::size_t n, const Lexicon& slots,
    const Lexicon& test_slots, std::uint64_t seed,
    const std::set<std::string>& function_words = default_function_words());

struct LexiconReport {
  /// Out-of-vocabulary word -> ids of the items using it.
  std::map<std::string, std::set<int>> missing;
  bool passed() const { return missing.empty(); }
};

LexiconReport validate_lexicon(const std::vector<ParadigmItem>& items, const corpus::Vocab& vocab);

// Line-delimited JSON, one item per line.
nlohmann::json item_to_json(const ParadigmItem& item);
ParadigmItem item_from_json(const nlohmann::json& doc);
void write_items_jsonl(std::ostream& out, const std::vector<ParadigmItem>& items);
std::vector<ParadigmItem> read_items_jsonl(std::istream& in);
void save_items(const fs::path& path, const std::vector<ParadigmItem>& items);
std::vector<ParadigmItem> load_items(const fs::path& path);

}  // namespace gaplab::stimgen
