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


#include <algorithm>

#include "gaplab/pipeline/pipeline.hpp"

namespace gaplab::pipeline {

namespace {

std::string verdict(bool pass) { return pass ? report::kPass : report::kFail; }

}  // namespace

ModelAnalysis analyze_scores(const std::string& model_id, const std::vector<scoring::RegionScore>& scores,
                             const std::vector<Construction>& constructions, const stats::Thresholds& thresholds) {
  ModelAnalysis out;
  for (Construction c : constructions) {
    std::vector<scoring::RegionScore> own;
    std::copy_if(scores.begin(), scores.end(), std::back_inserter(own),
                 [c](const scoring::RegionScore& s) { return s.construction == c; });
    if (own.empty()) throw InvariantError("model '" + model_id + "' has no scores for " + std::string(to_string(c)));

    const auto effects = scoring::compute_effects(own);
    for (const auto& e : effects) out.effects.push_back({model_id, e});
    const auto summaries = scoring::effect_summary(effects);
    for (const auto& s : summaries) out.summaries.push_back({model_id, s});

    std::map<std::string, std::string> v;
    for (const auto& crit : report::criteria()) v[crit] = report::kNotTested;
    const auto pattern = scoring::classify_pattern(summaries).at(0);
    v[report::kSimplePattern] = verdict(pattern.simple_learned());
    if (pattern.islands) {
      v[report::kIslandStringent] = verdict(pattern.islands->stringent());
      v[report::kIslandRelative] = verdict(pattern.islands->relative());
    }

    const auto licensing = stats::basic_licensing_test(own, c, thresholds.licensing_alpha);
    out.fits.push_back({model_id, c, "licensing", licensing.fit});
    v[report::kLicensing] = verdict(licensing.learned);
    if (stats::has_island_data(own, c)) {
      const auto three = stats::island_three_way_test(own, c, thresholds.island_alpha);
      out.fits.push_back({model_id, c, "island_3way", three.fit});
      v[report::kIslandThreeWay] = verdict(three.pass);
      const auto dir = stats::directional_island_tests(own, c, thresholds.island_alpha);
      out.fits.push_back({model_id, c, "fge", dir.fge});
      out.fits.push_back({model_id, c, "uge", dir.uge});
      v[report::kFge] = verdict(dir.fge_pass);
      v[report::kUge] = verdict(dir.uge_pass);
    }
    for (const auto& crit : report::criteria()) out.verdicts.push_back({model_id, c, crit, v[crit]});
  }
  return out;
}

}  // namespace gaplab::pipeline
