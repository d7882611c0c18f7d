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

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/error.hpp"
#include "gaplab/common/io.hpp"
#include "gaplab/corpus/vocab.hpp"
#include "gaplab/lm/lstm_lm.hpp"
#include "gaplab/stimgen/stimgen.hpp"

namespace gaplab::scoring {

/// Surprisal of the critical region of one condition sentence.
struct RegionScore {
  int item_id = 0;
  Construction construction = Construction::clefting;
  Condition condition;
  double bits = 0.0;
  /// Region tokens when known; empty for scores read back from CSV.
  Tokens region_tokens;
};

/// Sum of bits over [region.begin, region.end). Throws InvariantError when the
/// range is out of bounds or a value is negative or non-finite.
double region_sum(std::span<const double> bits, Span region);

/// Region score for one profile. |profile.bits| must equal |profile.tokens|.
RegionScore region_surprisal(const lm::SurprisalProfile& profile, Span region, int item_id,
                             Construction construction, Condition condition);

/// Per-token surprisal (bits) for a batch of sentences, in order.
using BatchScorer = std::function<std::vector<std::vector<double>>(const std::vector<Tokens>&)>;

/// In-process scorer over a trained model; out-of-vocabulary tokens throw
/// lm::OovError.
BatchScorer model_scorer(const lm::LmParameters& params, const corpus::Vocab& vocab,
                         std::size_t batch = 64);

/// Scores every condition sentence of every item at its critical region.
std::vector<RegionScore> score_items(const std::vector<stimgen::ParadigmItem>& items,
                                     const BatchScorer& scorer);

// ---------------------------------------------------------------------------

struct EffectRecord {
  int item_id = 0;
  Construction construction = Construction::clefting;
  bool gap = false;
  bool island = false;
  double bits = 0.0;  // surprisal(+filler) - surprisal(-filler)
};

class MismatchedPairError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

/// plus.bits - minus.bits for a +filler/-filler pair sharing item,
/// construction, gap, island and (when both are known) region tokens.
EffectRecord filler_effect(const RegionScore& plus, const RegionScore& minus);

/// Pairs every +filler score with its -filler counterpart. Output is sorted
/// by (construction, item, gap, island); an unpaired score is an error.
std::vector<EffectRecord> compute_effects(const std::vector<RegionScore>& scores);

struct EffectSummary {
  Construction construction = Construction::clefting;
  bool gap = false;
  bool island = false;
  double mean = 0.0;
  double half_width = 0.0;  // 95% t-interval over items
  std::size_t n = 0;

  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
};

class GroupTooSmallError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

/// Two-sided 95% critical value of Student's t with `df` degrees of freedom.
double t_critical_95(std::size_t df);

/// One summary per (construction, gap, island) group, sorted by that key.
std::vector<EffectSummary> effect_summary(const std::vector<EffectRecord>& records);

// ---------------------------------------------------------------------------

struct IslandCell {
  bool gap = false;
  double mean = 0.0;
  double half_width = 0.0;
  bool stringent = false;  // CI overlaps zero
  bool relative = false;   // |island mean| < |simple mean| at the same gap value
};

struct IslandVerdict {
  IslandCell plus_gap;
  IslandCell minus_gap;
  bool stringent() const { return plus_gap.stringent && minus_gap.stringent; }
  bool relative() const { return plus_gap.relative && minus_gap.relative; }
};

struct PatternVerdict {
  Construction construction = Construction::clefting;
  double plus_gap_mean = 0.0;   // (+gap, -island)
  double minus_gap_mean = 0.0;  // (-gap, -island)
  bool plus_gap_negative = false;
  bool minus_gap_positive = false;
  /// Absent when the construction has no island cells ("not tested").
  std::optional<IslandVerdict> islands;

  bool simple_learned() const { return plus_gap_negative && minus_gap_positive; }
};

class MissingCellError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

/// One verdict per construction present, in construction order. Both simple
/// cells are required; island cells must be both present or both absent.
std::vector<PatternVerdict> classify_pattern(const std::vector<EffectSummary>& summaries);

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kScoresHeader = "construction,item_id,filler,gap,island,region_surprisal_bits";
inline constexpr const char* kEffectsHeader = "construction,item_id,gap,island,filler_effect_bits";

void write_scores_csv(std::ostream& out, const std::vector<RegionScore>& scores);
std::vector<RegionScore> parse_scores_csv(std::string_view text);
void save_scores(const fs::path& path, const std::vector<RegionScore>& scores);
std::vector<RegionScore> load_scores(const fs::path& path);

void write_effects_csv(std::ostream& out, const std::vector<EffectRecord>& effects);
std::vector<EffectRecord> parse_effects_csv(std::string_view text);

}  // namespace gaplab::scoring
