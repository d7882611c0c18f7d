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


#include "gaplab/scoring/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>

namespace gaplab::scoring {

double region_sum(std::span<const double> bits, Span region) {
  if (region.begin > region.end || region.end > bits.size()) {
    throw InvariantError("region [" + std::to_string(region.begin) + ", " + std::to_string(region.end) +
                         ") out of bounds for " + std::to_string(bits.size()) + " tokens");
  }
  double total = 0.0;
  for (std::size_t k = region.begin; k < region.end; ++k) {
    if (!std::isfinite(bits[k]) || bits[k] < 0.0) {
      throw InvariantError("surprisal at token " + std::to_string(k) + " is " + format_double(bits[k]) +
                           "; expected a finite value >= 0");
    }
    total += bits[k];
  }
  return total;
}

RegionScore region_surprisal(const lm::SurprisalProfile& profile, Span region, int item_id,
                             Construction construction, Condition condition) {
  if (profile.bits.size() != profile.tokens.size()) {
    throw InvariantError("surprisal profile has " + std::to_string(profile.bits.size()) + " values for " +
                         std::to_string(profile.tokens.size()) + " tokens");
  }
  RegionScore s;
  s.item_id = item_id;
  s.construction = construction;
  s.condition = condition;
  s.bits = region_sum(profile.bits, region);
  s.region_tokens.assign(profile.tokens.begin() + static_cast<std::ptrdiff_t>(region.begin),
                         profile.tokens.begin() + static_cast<std::ptrdiff_t>(region.end));
  return s;
}

BatchScorer model_scorer(const lm::LmParameters& params, const corpus::Vocab& vocab, std::size_t batch) {
  return [&params, &vocab, batch](const std::vector<Tokens>& sentences) {
    std::vector<std::vector<std::int32_t>> ids;
    ids.reserve(sentences.size());
    for (const auto& s : sentences) {
      auto& row = ids.emplace_back();
      for (const auto& tok : s) {
        const auto id = vocab.find(tok);
        if (!id) throw lm::OovError("token '" + tok + "' is not in the vocabulary");
        row.push_back(*id);
      }
    }
    return lm::batch_surprisal(params, ids, batch);
  };
}

std::vector<RegionScore> score_items(const std::vector<stimgen::ParadigmItem>& items,
                                     const BatchScorer& scorer) {
  std::vector<Tokens> sentences;
  for (const auto& item : items) {
    for (const auto& s : item.sentences) sentences.push_back(s.tokens);
  }
  const auto bits = scorer(sentences);
  if (bits.size() != sentences.size()) {
    throw InvariantError("scorer returned " + std::to_string(bits.size()) + " profiles for " +
                         std::to_string(sentences.size()) + " sentences");
  }
  std::vector<RegionScore> out;
  out.reserve(sentences.size());
  std::size_t k = 0;
  for (const auto& item : items) {
    for (const auto& s : item.sentences) {
      lm::SurprisalProfile profile{s.tokens, bits[k++]};
      out.push_back(region_surprisal(profile, s.critical_region, item.item_id, item.construction, s.condition));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string describe(const RegionScore& s) {
  return std::string(to_string(s.construction)) + " item " + std::to_string(s.item_id) + " (" +
         to_string(s.condition) + ")";
}

}  // namespace

EffectRecord filler_effect(const RegionScore& plus, const RegionScore& minus) {
  const auto mismatch = [&](const std::string& why) {
    return MismatchedPairError("cannot pair " + describe(plus) + " with " + describe(minus) + ": " + why);
  };
  if (!plus.condition.filler || minus.condition.filler) throw mismatch("need a +filler and a -filler score");
  if (plus.item_id != minus.item_id) throw mismatch("item ids differ");
  if (plus.construction != minus.construction) throw mismatch("constructions differ");
  if (plus.condition.gap != minus.condition.gap || plus.condition.island != minus.condition.island) {
    throw mismatch("gap/island cells differ");
  }
  if (!plus.region_tokens.empty() && !minus.region_tokens.empty() && plus.region_tokens != minus.region_tokens) {
    throw mismatch("critical-region tokens differ");
  }
  return {plus.item_id, plus.construction, plus.condition.gap, plus.condition.island, plus.bits - minus.bits};
}

std::vector<EffectRecord> compute_effects(const std::vector<RegionScore>& scores) {
  using Key = std::tuple<Construction, int, bool, bool>;
  std::map<Key, std::pair<const RegionScore*, const RegionScore*>> pairs;
  for (const auto& s : scores) {
    auto& slot = pairs[{s.construction, s.item_id, s.condition.gap, s.condition.island}];
    auto& dst = s.condition.filler ? slot.first : slot.second;
    if (dst) throw InvariantError("duplicate score for " + describe(s));
    dst = &s;
  }
  std::vector<EffectRecord> out;
  out.reserve(pairs.size());
  for (const auto& [key, pair] : pairs) {
    if (!pair.first || !pair.second) {
      const RegionScore& have = pair.first ? *pair.first : *pair.second;
      throw MismatchedPairError("no " + std::string(pair.first ? "-filler" : "+filler") + " counterpart for " +
                                describe(have));
    }
    out.push_back(filler_effect(*pair.first, *pair.second));
  }
  return out;
}

double t_critical_95(std::size_t df) {
  if (df == 0) throw GroupTooSmallError("t interval needs at least one degree of freedom");
  const boost::math::students_t dist(static_cast<double>(df));
  return boost::math::quantile(dist, 0.975);
}

std::vector<EffectSummary> effect_summary(const std::vector<EffectRecord>& records) {
  using Key = std::tuple<Construction, bool, bool>;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : records) groups[{r.construction, r.gap, r.island}].push_back(r.bits);
  std::vector<EffectSummary> out;
  for (const auto& [key, values] : groups) {
    const auto [construction, gap, island] = key;
    const std::size_t n = values.size();
    if (n < 2) {
      throw GroupTooSmallError(std::string(to_string(construction)) + " (" + sign_char(gap) + "gap," +
                               sign_char(island) + "island): a confidence interval needs n >= 2, got " +
                               std::to_string(n));
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    EffectSummary s;
    s.construction = construction;
    s.gap = gap;
    s.island = island;
    s.mean = mean;
    s.half_width = t_critical_95(n - 1) * sd / std::sqrt(static_cast<double>(n));
    s.n = n;
    out.push_back(s);
  }
  return out;
}

std::vector<PatternVerdict> classify_pattern(const std::vector<EffectSummary>& summaries) {
  std::map<Construction, std::map<std::pair<bool, bool>, const EffectSummary*>> cells;
  for (const auto& s : summaries) {
    auto& slot = cells[s.construction][{s.gap, s.island}];
    if (slot) {
      throw InvariantError(std::string(to_string(s.construction)) + ": duplicate summary for (" + sign_char(s.gap) +
                           "gap," + sign_char(s.island) + "island)");
    }
    slot = &s;
  }
  std::vector<PatternVerdict> out;
  for (const auto& [construction, byCell] : cells) {
    const auto find = [&](bool gap, bool island) -> const EffectSummary* {
      const auto it = byCell.find({gap, island});
      return it == byCell.end() ? nullptr : it->second;
    };
    const auto missing = [c = construction](bool gap, bool island) {
      return MissingCellError(std::string(to_string(c)) + ": no summary for (" + sign_char(gap) + "gap," +
                              sign_char(island) + "island)");
    };
    const EffectSummary* simple_plus = find(true, false);
    const EffectSummary* simple_minus = find(false, false);
    if (!simple_plus) throw missing(true, false);
    if (!simple_minus) throw missing(false, false);

    PatternVerdict v;
    v.construction = construction;
    v.plus_gap_mean = simple_plus->mean;
    v.minus_gap_mean = simple_minus->mean;
    v.plus_gap_negative = simple_plus->mean < 0.0;
    v.minus_gap_positive = simple_minus->mean > 0.0;

    const EffectSummary* island_plus = find(true, true);
    const EffectSummary* island_minus = find(false, true);
    if (island_plus || island_minus) {
      if (!island_plus) throw missing(true, true);
      if (!island_minus) throw missing(false, true);
      const auto cell = [](const EffectSummary& isl, const EffectSummary& simple) {
        IslandCell c;
        c.gap = isl.gap;
        c.mean = isl.mean;
        c.half_width = isl.half_width;
        c.stringent = isl.lower() <= 0.0 && 0.0 <= isl.upper();
        c.relative = std::fabs(isl.mean) < std::fabs(simple.mean);
        return c;
      };
      v.islands = IslandVerdict{cell(*island_plus, *simple_plus), cell(*island_minus, *simple_minus)};
    }
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string sign(bool b) { return std::string(1, sign_char(b)); }

void check_header(const std::vector<std::vector<std::string>>& rows, const char* header, const char* what) {
  std::string got;
  if (!rows.empty()) {
    for (std::size_t i = 0; i < rows[0].size(); ++i) got += (i ? "," : "") + rows[0][i];
  }
  if (got != header) throw ParseError(std::string(what) + ": expected header '" + header + "'");
}

int parse_item_id(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": item_id '" + text + "' is not an integer");
  }
}

Construction parse_construction_field(const std::string& text, const std::string& where) {
  try {
    return parse_construction(text);
  } catch (const ConfigError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

}  // namespace

void write_scores_csv(std::ostream& out, const std::vector<RegionScore>& scores) {
  out << kScoresHeader << '\n';
  for (const auto& s : scores) {
    write_csv_row(out, {std::string(to_string(s.construction)), std::to_string(s.item_id), sign(s.condition.filler),
                        sign(s.condition.gap), sign(s.condition.island), format_double(s.bits)});
  }
}

std::vector<RegionScore> parse_scores_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  check_header(rows, kScoresHeader, "scores.csv");
  std::vector<RegionScore> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = "scores.csv line " + std::to_string(i + 1);
    const auto& r = rows[i];
    if (r.size() != 6) throw ParseError(where + ": expected 6 fields, got " + std::to_string(r.size()));
    RegionScore s;
    s.construction = parse_construction_field(r[0], where);
    s.item_id = parse_item_id(r[1], where);
    s.condition = {parse_sign(r[2]), parse_sign(r[3]), parse_sign(r[4])};
    s.bits = parse_double(r[5]);
    out.push_back(std::move(s));
  }
  return out;
}

void save_scores(const fs::path& path, const std::vector<RegionScore>& scores) {
  std::ostringstream out;
  write_scores_csv(out, scores);
  write_file_atomic(path, out.str());
}

std::vector<RegionScore> load_scores(const fs::path& path) {
  try {
    return parse_scores_csv(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_effects_csv(std::ostream& out, const std::vector<EffectRecord>& effects) {
  out << kEffectsHeader << '\n';
  for (const auto& e : effects) {
    write_csv_row(out, {std::string(to_string(e.construction)), std::to_string(e.item_id), sign(e.gap), sign(e.island),
                        format_double(e.bits)});
  }
}

std::vector<EffectRecord> parse_effects_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  check_header(rows, kEffectsHeader, "effects.csv");
  std::vector<EffectRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = "effects.csv line " + std::to_string(i + 1);
    const auto& r = rows[i];
    if (r.size() != 5) throw ParseError(where + ": expected 5 fields, got " + std::to_string(r.size()));
    out.push_back({parse_item_id(r[1], where), parse_construction_field(r[0], where), parse_sign(r[2]),
                   parse_sign(r[3]), parse_double(r[4])});
  }
  return out;
}

}  // namespace gaplab::scoring
