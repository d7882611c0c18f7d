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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gaplab {

using Tokens = std::vector<std::string>;

enum class Construction : std::uint8_t {
  clefting,
  wh_movement,
  topicalization_intro,
  topicalization_no_intro,
  tough_movement,
};

inline constexpr std::array<Construction, 5> kAllConstructions = {
    Construction::clefting, Construction::wh_movement,
    Construction::topicalization_intro, Construction::topicalization_no_intro,
    Construction::tough_movement};

std::string_view to_string(Construction c);
std::optional<Construction> try_parse_construction(std::string_view name);
/// Throws ConfigError listing the valid names.
Construction parse_construction(std::string_view name);
std::string valid_construction_names();

/// One cell of the filler x gap x island design.
struct Condition {
  bool filler = false;
  bool gap = false;
  bool island = false;

  auto operator<=>(const Condition&) const = default;
};

/// Only (+filler,+gap,-island) and (-filler,-gap,any) are well formed.
constexpr bool expected_grammatical(Condition c) {
  return (c.filler && c.gap && !c.island) || (!c.filler && !c.gap);
}

/// "+filler,-gap,+island" style label.
std::string to_string(Condition c);

constexpr char sign_char(bool present) { return present ? '+' : '-'; }
/// Accepts "+"/"-" (and "1"/"0", "true"/"false"); throws ParseError otherwise.
bool parse_sign(std::string_view text);

/// All eight cells in a fixed order (filler major, then gap, then island).
std::vector<Condition> all_conditions(bool with_islands = true);

/// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
  bool operator==(const Span&) const = default;
};

}  // namespace gaplab
