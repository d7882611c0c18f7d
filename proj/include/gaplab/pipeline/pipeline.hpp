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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/error.hpp"
#include "gaplab/common/io.hpp"
#include "gaplab/lm/lstm_lm.hpp"
#include "gaplab/report/report.hpp"
#include "gaplab/scoring/scoring.hpp"
#include "gaplab/stats/stats.hpp"

namespace gaplab::pipeline {

inline constexpr const char* kToolVersion = GAPLAB_VERSION;

/// Built-in data directory (templates, lexicons, grammar).
fs::path default_data_dir();

// ---------------------------------------------------------------------------
// Configuration

struct GrammarOverride {
  std::optional<bool> include;
  std::optional<double> weight;
  std::optional<bool> enforce_dependency;
};

struct CorpusConfig {
  std::string source = "synthetic";  // "synthetic" or "text"
  fs::path grammar;                  // synthetic: grammar file
  fs::path text_dir;                 // text: directory with train/valid/test.txt
  std::size_t tokens = 1'000'000;
  std::size_t vocab_size = 10'000;
  std::uint64_t seed = 1;
  std::map<std::string, GrammarOverride> overrides;  // by grammar construction name
};

struct ParadigmConfig {
  fs::path templates_dir;  // holds <construction>.json
  fs::path lexicon;
  std::map<Construction, std::size_t> items;
  std::uint64_t seed = 1;
};

struct AugmentationConfig {
  Construction construction = Construction::clefting;
  std::size_t n = 864;
  fs::path lexicon;
  std::uint64_t seed = 1;
};

struct RemoteConfig {
  std::string endpoint;
  std::string model_id = "remote";
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  CorpusConfig corpus;
  std::string lm_preset = "desk";
  lm::LmConfig lm;  // vocab_size is filled in from the run vocabulary
  std::size_t max_batches_per_epoch = 0;
  std::vector<Construction> constructions;
  ParadigmConfig paradigms;
  std::optional<AugmentationConfig> augmentation;
  stats::Thresholds thresholds;
  std::optional<RemoteConfig> remote;
  fs::path output_dir;
};

/// Parses a config document. Relative paths resolve against `base_dir`;
/// absent paths default to the built-in data files. Absent seeds take the
/// top-level seed, which `seed_override` replaces. Errors are ConfigError
/// carrying the field path.
ExperimentConfig parse_config(const nlohmann::json& doc, const fs::path& base_dir,
                              std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// Fully resolved config. With `with_paths` false, file locations (inputs and
/// the output directory) are left out so the result does not depend on where
/// the run lives.
nlohmann::json config_to_json(const ExperimentConfig& config, bool with_paths = true);

/// Default item counts per construction.
std::size_t default_item_count(Construction c);

// ---------------------------------------------------------------------------
// Analysis

struct ModelAnalysis {
  std::vector<report::ModelEffect> effects;
  std::vector<report::ModelSummary> summaries;
  std::vector<stats::FitRecord> fits;
  std::vector<report::VerdictRow> verdicts;
};

/// Effects, summaries, regression fits and one verdict per criterion for each
/// construction. Island criteria are "not tested" for constructions without
/// island conditions.
ModelAnalysis analyze_scores(const std::string& model_id, const std::vector<scoring::RegionScore>& scores,
                             const std::vector<Construction>& constructions, const stats::Thresholds& thresholds);

// ---------------------------------------------------------------------------
// Pipeline

enum class Stage { gen, corpus, augment, train, score, analyze, report };

std::string_view to_string(Stage s);
/// Accepts the CLI names (gen, synth-corpus, augment, train, score, analyze,
/// report).
Stage parse_stage(std::string_view name);

/// A stage failed; the message starts with the stage name.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what);
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct RunOptions {
  /// Last stage to run; the manifest is written only after `report`.
  Stage until = Stage::report;
  std::function<void(const std::string&)> log;
};

/// Runs the stages in order, skipping those whose artifacts already exist in
/// config.output_dir, and returns the manifest (null when stopping early).
/// A run directory holding a different config is rejected.
nlohmann::json run_pipeline(const ExperimentConfig& config, const RunOptions& options = {});

/// Recomputes the artifact hashes listed in a manifest; returns the paths
/// whose content no longer matches.
std::vector<std::string> verify_manifest(const fs::path& run_dir);

}  // namespace gaplab::pipeline
