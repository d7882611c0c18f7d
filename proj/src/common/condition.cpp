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

#include "gaplab/common/condition.hpp"

#include "gaplab/common/error.hpp"

namespace gaplab {

std::string_view to_string(Construction c) {
  switch (c) {
    case Construction::clefting: return "clefting";
    case Construction::wh_movement: return "wh_movement";
    case Construction::topicalization_intro: return "topicalization_intro";
    case Construction::topicalization_no_intro: return "topicalization_no_intro";
    case Construction::tough_movement: return "tough_movement";
  }
  return "unknown";
}

std::optional<Construction> try_parse_construction(std::string_view name) {
  for (Construction c : kAllConstructions) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::string valid_construction_names() {
  std::string out;
  for (Construction c : kAllConstructions) {
    if (!out.empty()) out += ", ";
    out += to_string(c);
  }
  return out;
}

Construction parse_construction(std::string_view name) {
  if (auto c = try_parse_construction(name)) return *c;
  throw ConfigError("unknown construction '" + std::string(name) +
                    "' (valid: " + valid_construction_names() + ")");
}

std::string to_string(Condition c) {
  std::string out;
  out += sign_char(c.filler);
  out += "filler,";
  out += sign_char(c.gap);
  out += "gap,";
  out += sign_char(c.island);
  out += "island";
  return out;
}

bool parse_sign(std::string_view text) {
  if (text == "+" || text == "1" || text == "true") return true;
  if (text == "-" || text == "0" || text == "false") return false;
  throw ParseError("expected '+' or '-', got '" + std::string(text) + "'");
}

std::vector<Condition> all_conditions(bool with_islands) {
  std::vector<Condition> out;
  for (bool filler : {true, false}) {
    for (bool gap : {true, false}) {
      for (bool island : {false, true}) {
        if (island && !with_islands) continue;
        out.push_back({filler, gap, island});
      }
    }
  }
  return out;
}

}  // namespace gaplab
