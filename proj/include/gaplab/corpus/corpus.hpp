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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/io.hpp"
#include "gaplab/corpus/vocab.hpp"

namespace gaplab::corpus {

/// Train/valid/test sentences. Sentence boundaries become <eos> on encoding.
struct CorpusSplit {
  std::vector<Tokens> train;
  std::vector<Tokens> valid;
  std::vector<Tokens> test;
};

/// Writes train.txt, valid.txt and test.txt, one sentence per line.
void save_split(const CorpusSplit& split, const fs::path& dir);
CorpusSplit load_split(const fs::path& dir);
void write_sentences(const fs::path& path, const std::vector<Tokens>& sentences);
std::vector<Tokens> read_sentences(const fs::path& path);

// ---------------------------------------------------------------------------
// Synthetic corpus grammar

/// Right-hand-side element: "$slot" draws a lexicon entry, "@NAME" expands a
/// nonterminal, a leading '^' after the sigil capitalizes the first token,
/// anything else is literal text.
struct GrammarSymbol {
  enum class Kind { literal, slot, nonterminal };
  Kind kind = Kind::literal;
  std::string name;
  bool capitalize = false;
  Tokens literal;
};

struct GrammarRule {
  double weight = 1.0;
  std::vector<GrammarSymbol> rhs;
  /// Filler/gap tags; untagged frames are always eligible.
  std::optional<bool> filler;
  std::optional<bool> gap;
};

struct GrammarConstruction {
  std::string name;
  double weight = 1.0;
  bool include = true;
  /// When set, frames whose filler and gap tags disagree are never sampled.
  bool enforce_dependency = true;
  std::vector<GrammarRule> frames;
};

struct GrammarConfig {
  std::map<std::string, std::vector<Tokens>> lexicon;
  std::map<std::string, std::vector<GrammarRule>> nonterminals;
  std::vector<GrammarConstruction> constructions;
  int max_depth = 8;

  GrammarConstruction* find(std::string_view name);
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

GrammarConfig parse_grammar(const nlohmann::json& doc);
GrammarConfig load_grammar(const fs::path& path);

/// Samples whole sentences until the token count (including one <eos> per
/// sentence) reaches n_tokens; sentence i goes to valid when i % 20 == 18, to
/// test when i % 20 == 19, and to train otherwise.
CorpusSplit synth_corpus(const GrammarConfig& grammar, std::size_t n_tokens,
                         std::uint64_t seed);

/// Inserts `sentences` into the train split at seed-determined positions.
/// Base sentences keep their relative order; valid/test are untouched.
CorpusSplit augment_corpus(const CorpusSplit& base, const std::vector<Tokens>& sentences,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Batching

struct BatchPlan {
  std::size_t batch_size = 32;
  std::size_t bptt_len = 35;
};

/// One truncated-BPTT window; element (t, b) lives at t * batch_size + b.
struct Batch {
  std::size_t seq_len = 0;
  std::size_t batch_size = 0;
  std::vector<std::int32_t> inputs;
  std::vector<std::int32_t> targets;
};

/// Folds the stream into batch_size contiguous rows (the remainder is
/// dropped) and cuts windows of up to bptt_len steps; targets are the inputs
/// shifted by one within each row.
std::vector<Batch> batchify(std::span<const std::int32_t> stream, BatchPlan plan);

}  // namespace gaplab::corpus
