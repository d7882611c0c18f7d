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
#include <cctype>
#include <set>

#include "gaplab/stimgen/stimgen.hpp"

namespace gaplab::stimgen {

namespace {

using nlohmann::json;

bool parse_flag(const json& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    try {
      return parse_sign(v.get<std::string>());
    } catch (const ParseError&) {
    }
  }
  throw ParseError(where + ": expected true/false or \"+\"/\"-\"");
}

Span parse_span(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned()) {
    throw ParseError(where + ": expected [start, end)");
  }
  return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
}

Segment parse_segment(const std::string& text, const std::string& where) {
  Segment seg;
  seg.text = text;
  if (!text.empty() && text[0] == '$') {
    seg.kind = Segment::Kind::slot;
    std::size_t pos = 1;
    if (pos < text.size() && text[pos] == '^') {
      seg.capitalize = true;
      ++pos;
    }
    seg.text = text.substr(pos);
    if (seg.text.empty()) throw ParseError(where + ": slot reference without a name");
    return seg;
  }
  seg.literal = corpus::tokenize(text);
  if (seg.literal.empty()) throw ParseError(where + ": empty literal segment");
  return seg;
}

std::string describe(Construction c, Condition cond) {
  return std::string(to_string(c)) + " variant (" + to_string(cond) + ")";
}

std::vector<Segment> slice(const std::vector<Segment>& segs, std::size_t begin, std::size_t end) {
  return {segs.begin() + static_cast<std::ptrdiff_t>(begin),
          segs.begin() + static_cast<std::ptrdiff_t>(end)};
}

}  // namespace

bool ConstructionTemplate::has_islands() const {
  return std::any_of(variants.begin(), variants.end(),
                     [](const Variant& v) { return v.condition.island; });
}

const Variant& ConstructionTemplate::variant(Condition c) const {
  for (const auto& v : variants) {
    if (v.condition == c) return v;
  }
  throw TemplateError(describe(construction, c) + " not present");
}

std::vector<std::string> ConstructionTemplate::slot_names() const {
  std::set<std::string> names;
  for (const auto& v : variants) {
    for (const auto& s : v.segments) {
      if (s.kind == Segment::Kind::slot) names.insert(s.text);
    }
  }
  return {names.begin(), names.end()};
}

void validate_template(const ConstructionTemplate& tmpl) {
  const auto c = tmpl.construction;

  std::set<Condition> seen;
  for (const auto& v : tmpl.variants) {
    if (!seen.insert(v.condition).second) {
      throw TemplateError(describe(c, v.condition) + " appears twice");
    }
  }
  const bool islands = tmpl.has_islands();
  for (Condition cond : all_conditions(true)) {
    if (cond.island && !islands) continue;
    if (!seen.contains(cond)) {
      throw TemplateError(describe(c, cond) + " is missing: " +
                          (islands ? "island-bearing templates need all 8 conditions"
                                   : "simple templates need all 4 non-island conditions"));
    }
  }

  for (const auto& v : tmpl.variants) {
    const std::string name = describe(c, v.condition);
    const std::size_t n = v.segments.size();
    if (n == 0) throw TemplateError(name + " has no segments");
    if (v.critical_region.begin >= v.critical_region.end || v.critical_region.end > n) {
      throw TemplateError(name + ": critical_region must be a non-empty range within the segments");
    }
    if (v.filler_region.begin > v.filler_region.end || v.filler_region.end > n) {
      throw TemplateError(name + ": filler_region out of bounds");
    }
    if (v.condition.filler && v.filler_region.empty()) {
      throw TemplateError(name + ": +filler variants need a non-empty filler_region");
    }
    const bool overlaps = v.critical_region.begin < v.filler_region.end &&
                          v.filler_region.begin < v.critical_region.end;
    if (overlaps) throw TemplateError(name + ": critical_region overlaps filler_region");
    if (v.grammatical != expected_grammatical(v.condition)) {
      throw TemplateError(name + ": grammatical flag must be " +
                          (expected_grammatical(v.condition) ? "true" : "false"));
    }
  }

  for (const auto& plus : tmpl.variants) {
    if (!plus.condition.filler) continue;
    const Condition minus_cond{false, plus.condition.gap, plus.condition.island};
    const Variant& minus = tmpl.variant(minus_cond);
    const std::string pair = std::string(to_string(c)) + " pair (" + sign_char(plus.condition.gap) +
                             "gap," + sign_char(plus.condition.island) + "island)";

    if (slice(plus.segments, plus.critical_region.begin, plus.critical_region.end) !=
        slice(minus.segments, minus.critical_region.begin, minus.critical_region.end)) {
      throw TemplateError(pair + ": critical-region tokens differ between +filler and -filler");
    }
    const auto plus_prefix = slice(plus.segments, 0, plus.filler_region.begin);
    const auto minus_prefix = slice(minus.segments, 0, minus.filler_region.begin);
    const auto plus_suffix = slice(plus.segments, plus.filler_region.end, plus.segments.size());
    const auto minus_suffix = slice(minus.segments, minus.filler_region.end, minus.segments.size());
    if (plus_prefix != minus_prefix || plus_suffix != minus_suffix) {
      throw TemplateError(pair + ": +filler and -filler differ outside the filler region");
    }
    // The critical region must sit at the same place in the shared suffix so
    // region tokens line up between the two sentences.
    const bool plus_after = plus.critical_region.begin >= plus.filler_region.end;
    const bool minus_after = minus.critical_region.begin >= minus.filler_region.end;
    const std::size_t plus_off = plus_after ? plus.critical_region.begin - plus.filler_region.end
                                            : plus.critical_region.begin;
    const std::size_t minus_off = minus_after ? minus.critical_region.begin - minus.filler_region.end
                                              : minus.critical_region.begin;
    if (plus_after != minus_after || plus_off != minus_off) {
      throw TemplateError(pair + ": critical regions are not aligned outside the filler region");
    }
  }
}

ConstructionTemplate parse_template(const json& doc) {
  if (!doc.is_object()) throw ParseError("template: expected a JSON object");
  ConstructionTemplate tmpl;
  if (!doc.contains("construction") || !doc.at("construction").is_string()) {
    throw ParseError("construction: expected a string");
  }
  try {
    tmpl.construction = parse_construction(doc.at("construction").get<std::string>());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("construction: ") + e.what());
  }
  if (!doc.contains("variants") || !doc.at("variants").is_array()) {
    throw ParseError("variants: expected an array");
  }
  const auto& variants = doc.at("variants");
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::string where = "variants[" + std::to_string(i) + "]";
    const auto& obj = variants[i];
    if (!obj.is_object()) throw ParseError(where + ": expected an object");
    for (const char* key : {"filler", "gap", "island", "segments", "critical_region", "grammatical"}) {
      if (!obj.contains(key)) throw ParseError(where + "." + key + ": missing");
    }
    Variant v;
    v.condition.filler = parse_flag(obj.at("filler"), where + ".filler");
    v.condition.gap = parse_flag(obj.at("gap"), where + ".gap");
    v.condition.island = parse_flag(obj.at("island"), where + ".island");
    if (!obj.at("segments").is_array()) throw ParseError(where + ".segments: expected an array");
    const auto& segs = obj.at("segments");
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const std::string sw = where + ".segments[" + std::to_string(k) + "]";
      if (!segs[k].is_string()) throw ParseError(sw + ": expected a string");
      v.segments.push_back(parse_segment(segs[k].get<std::string>(), sw));
    }
    v.critical_region = parse_span(obj.at("critical_region"), where + ".critical_region");
    if (obj.contains("filler_region")) {
      v.filler_region = parse_span(obj.at("filler_region"), where + ".filler_region");
    }
    if (!obj.at("grammatical").is_boolean()) throw ParseError(where + ".grammatical: expected boolean");
    v.grammatical = obj.at("grammatical").get<bool>();
    tmpl.variants.push_back(std::move(v));
  }
  validate_template(tmpl);
  return tmpl;
}

std::vector<ConstructionTemplate> load_templates(const fs::path& path) {
  const json doc = read_json_file(path);
  std::vector<ConstructionTemplate> out;
  auto parse_one = [&](const json& obj, const std::string& prefix) {
    try {
      out.push_back(parse_template(obj));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + prefix + e.what());
    } catch (const TemplateError& e) {
      throw TemplateError(path.string() + ": " + prefix + e.what());
    }
  };
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) parse_one(doc[i], "[" + std::to_string(i) + "] ");
  } else {
    parse_one(doc, "");
  }
  return out;
}

// ---------------------------------------------------------------------------

Lexicon parse_lexicon(const json& doc) {
  if (!doc.is_object()) throw ParseError("lexicon: expected an object mapping slot -> candidates");
  Lexicon lexicon;
  for (const auto& [name, value] : doc.items()) {
    LexiconSlot slot;
    slot.name = name;
    slot.role = name;
    const json* list = &value;
    if (value.is_object()) {
      if (value.contains("role")) slot.role = value.at("role").get<std::string>();
      if (!value.contains("candidates")) throw ParseError(name + ".candidates: missing");
      list = &value.at("candidates");
    }
    if (!list->is_array()) throw ParseError(name + ": expected an array of candidates");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string where = name + "[" + std::to_string(i) + "]";
      if (!(*list)[i].is_string()) throw ParseError(where + ": expected a string");
      std::string cand = (*list)[i].get<std::string>();
      if (cand.empty() || corpus::tokenize(cand).empty()) {
        throw ParseError(where + ": candidate must be a non-empty token sequence");
      }
      if (std::isspace(static_cast<unsigned char>(cand.front())) ||
          std::isspace(static_cast<unsigned char>(cand.back()))) {
        throw ParseError(where + ": candidate has leading or trailing whitespace");
      }
      if (!seen.insert(cand).second) throw ParseError(where + ": duplicate candidate '" + cand + "'");
      slot.candidates.push_back(std::move(cand));
    }
    if (slot.candidates.empty()) throw ParseError(name + ": no candidates");
    lexicon.push_back(std::move(slot));
  }
  return lexicon;
}

Lexicon load_lexicon(const fs::path& path) {
  try {
    return parse_lexicon(read_json_file(path));
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ParseError(path.string() + ": " + msg);
  }
}

const LexiconSlot* find_slot(const Lexicon& lexicon, std::string_view name) {
  for (const auto& s : lexicon) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

}  // namespace gaplab::stimgen
