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

#include "gaplab/corpus/vocab.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "gaplab/common/error.hpp"

namespace gaplab::corpus {

namespace {

constexpr std::string_view kPunctuation = ".,!?;:\"()[]";

bool is_punct(char ch) { return kPunctuation.find(ch) != std::string_view::npos; }

bool is_space(char ch) {
  return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::string_view chunk = text.substr(i, j - i);
    i = j;
    if (chunk.empty()) continue;

    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(chunk[lead])) {
      out.emplace_back(1, chunk[lead]);
      ++lead;
    }
    if (lead == chunk.size()) continue;
    std::size_t trail = chunk.size();
    while (trail > lead && is_punct(chunk[trail - 1])) --trail;
    out.emplace_back(chunk.substr(lead, trail - lead));
    for (std::size_t k = trail; k < chunk.size(); ++k) out.emplace_back(1, chunk[k]);
  }
  return out;
}

std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{std::string(kUnk), std::string(kEos)}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2 || tokens_[0] != kUnk || tokens_[1] != kEos) {
    throw InvariantError("vocabulary must start with <unk> and <eos>");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw InvariantError("empty token in vocabulary");
    if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw InvariantError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

std::optional<std::int32_t> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocab::encode(std::string_view token) const {
  return find(token).value_or(kUnkId);
}

const std::string& Vocab::decode(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InvariantError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const fs::path& path) const {
  std::string text;
  for (const auto& tok : tokens_) {
    text += tok;
    text += '\n';
  }
  write_file_atomic(path, text);
}

Vocab Vocab::load(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  try {
    return Vocab(std::move(tokens));
  } catch (const InvariantError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Vocab build_vocab(std::span<const std::string> stream, std::size_t max_size) {
  if (max_size < 2) throw ConfigError("vocabulary max_size must be >= 2");
  std::map<std::string, std::size_t> counts;
  for (const auto& tok : stream) {
    if (tok == Vocab::kUnk || tok == Vocab::kEos) continue;
    ++counts[tok];
  }
  if (counts.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is already lexicographic, so a stable sort by count
  // leaves ties in lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens{std::string(Vocab::kUnk), std::string(Vocab::kEos)};
  const std::size_t keep = std::min(ranked.size(), max_size - 2);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocab(std::move(tokens));
}

Vocab build_vocab(const std::vector<Tokens>& sentences, std::size_t max_size) {
  std::vector<std::string> stream;
  for (const auto& s : sentences) stream.insert(stream.end(), s.begin(), s.end());
  return build_vocab(stream, max_size);
}

std::vector<std::int32_t> encode_stream(const std::vector<Tokens>& sentences,
                                        const Vocab& vocab) {
  std::vector<std::int32_t> out;
  for (const auto& s : sentences) {
    for (const auto& tok : s) out.push_back(vocab.encode(tok));
    out.push_back(vocab.eos_id());
  }
  return out;
}

}  // namespace gaplab::corpus
