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

#include <string>
#include <vector>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/error.hpp"
#include "gaplab/common/io.hpp"
#include "gaplab/scoring/scoring.hpp"
#include "gaplab/stats/stats.hpp"

namespace gaplab::report {

// Criterion labels used in verdicts.csv and the report.
inline constexpr const char* kSimplePattern = "simple_pattern";
inline constexpr const char* kLicensing = "licensing";
inline constexpr const char* kIslandStringent = "island_stringent";
inline constexpr const char* kIslandRelative = "island_relative";
inline constexpr const char* kIslandThreeWay = "island_3way";
inline constexpr const char* kFge = "fge";
inline constexpr const char* kUge = "uge";
const std::vector<std::string>& criteria();

inline constexpr const char* kPass = "pass";
inline constexpr const char* kFail = "fail";
inline constexpr const char* kNotTested = "not tested";

struct ModelEffect {
  std::string model_id;
  scoring::EffectRecord effect;
};

struct ModelSummary {
  std::string model_id;
  scoring::EffectSummary summary;
};

struct VerdictRow {
  std::string model_id;
  Construction construction = Construction::clefting;
  std::string criterion;
  std::string verdict;  // pass, fail or "not tested"
  bool operator==(const VerdictRow&) const = default;
};

struct ReportBundle {
  std::vector<std::string> model_ids;
  std::vector<Construction> constructions;
  std::vector<ModelEffect> effects;
  std::vector<ModelSummary> summaries;
  std::vector<stats::FitRecord> fits;
  std::vector<VerdictRow> verdicts;
  /// Free-form run metadata (configs, seeds), echoed into the report.
  nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr const char* kEffectsTableHeader = "model_id,construction,item_id,gap,island,filler_effect_bits";
inline constexpr const char* kSummariesHeader = "model_id,construction,gap,island,mean_bits,ci_half_width,n";
inline constexpr const char* kVerdictsHeader = "model_id,construction,criterion,verdict";

/// Writes effects.csv, summaries.csv, fits.csv and verdicts.csv into out_dir
/// and returns their paths in that order.
std::vector<fs::path> emit_tables(const ReportBundle& bundle, const fs::path& out_dir);

/// Reads the tables written by emit_tables (metadata, model and construction
/// lists are not stored there and come back empty).
ReportBundle read_tables(const fs::path& dir);

std::string effects_table(const std::vector<ModelEffect>& effects);
std::vector<ModelEffect> parse_effects_table(std::string_view text);
std::string summaries_table(const std::vector<ModelSummary>& summaries);
std::vector<ModelSummary> parse_summaries_table(std::string_view text);
std::string verdicts_table(const std::vector<VerdictRow>& verdicts);
std::vector<VerdictRow> parse_verdicts_table(std::string_view text);

class MissingSummaryError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

struct ChartStyle {
  int panel_width = 0;  // 0: sized from the number of groups
  int panel_height = 320;
  int margin = 50;
  int bar_width = 22;
};

/// Grouped bar chart of mean filler effects with 95% CI whiskers: one panel
/// per model, one group per (construction, island) cell, bars for +gap and
/// -gap. Island groups appear only for constructions with island summaries.
/// Bars, whiskers and the zero line carry class and data-* attributes.
std::string render_effect_chart(const std::vector<ModelSummary>& summaries, const std::vector<std::string>& models,
                                const std::vector<Construction>& constructions, const ChartStyle& style = {});

/// Markdown document: metadata, verdict matrix (one row per model and
/// construction), effect summaries, fits and links to `chart_files`.
std::string render_report(const ReportBundle& bundle, const std::vector<std::string>& chart_files = {});

}  // namespace gaplab::report
