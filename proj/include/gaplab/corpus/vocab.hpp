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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/io.hpp"

namespace gaplab::corpus {

/// Splits on whitespace and peels punctuation off word edges into separate
/// tokens. Case is preserved.
Tokens tokenize(std::string_view text);

/// Inverse of tokenize for token lists it produced: single-space join.
std::string detokenize(const Tokens& tokens);

/// Dense token <-> id map. Ids 0 and 1 are reserved for <unk> and <eos>.
class Vocab {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::int32_t kUnkId = 0;
  static constexpr std::int32_t kEosId = 1;

  /// Vocabulary holding only the two reserved tokens.
  Vocab();
  /// `tokens` must start with <unk>, <eos> and contain no duplicates.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::int32_t unk_id() const { return kUnkId; }
  std::int32_t eos_id() const { return kEosId; }

  std::optional<std::int32_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  /// Id of `token`, or unk_id() when out of vocabulary.
  std::int32_t encode(std::string_view token) const;
  const std::string& decode(std::int32_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line, ordered by id.
  void save(const fs::path& path) const;
  static Vocab load(const fs::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Keeps the max_size - 2 most frequent tokens (ties broken
/// lexicographically); reserved tokens in the stream are not counted.
Vocab build_vocab(std::span<const std::string> stream, std::size_t max_size);
Vocab build_vocab(const std::vector<Tokens>& sentences, std::size_t max_size);

/// Concatenates sentences into one id stream with <eos> after each sentence.
std::vector<std::int32_t> encode_stream(const std::vector<Tokens>& sentences,
                                        const Vocab& vocab);

}  // namespace gaplab::corpus
