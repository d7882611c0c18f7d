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

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/error.hpp"
#include "gaplab/common/io.hpp"
#include "gaplab/scoring/scoring.hpp"

// Client for an external scoring service.
//
// Wire protocol: POST /v1/score with header X-GapLab-Proto: 1 and body
//   {"sentences": ["...", ...], "per_token": true}
// answered by
//   {"model": "...", "results": [{"tokens": [...], "logprobs": [...]}, ...]}
// with the same header. Log-probabilities are natural logs; the first entry
// of a result may be null (undefined). Tokens are decoded text pieces whose
// concatenation is the sentence; a piece may carry the space that precedes
// its word.

namespace gaplab::client {

inline constexpr const char* kProtoHeader = "X-GapLab-Proto";
inline constexpr const char* kProtoVersion = "1";
inline constexpr const char* kScorePath = "/v1/score";

struct ScoreResponse {
  std::string model;
  std::vector<std::string> tokens;
  /// Nats; nullopt where the service marks the value undefined.
  std::vector<std::optional<double>> logprobs;
};

class ConnectionError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class MalformedResponseError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public InvariantError {
 public:
  AlignmentError(const std::string& what, std::size_t offset) : InvariantError(what), offset_(offset) {}
  /// Character offset into the sentence where alignment failed.
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct ClientOptions {
  std::size_t attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds max_backoff{2000};
  std::size_t sentences_per_request = 32;
  std::size_t max_in_flight = 4;
  std::chrono::seconds timeout{60};
};

/// Request body for a batch of sentences.
nlohmann::json make_request(const std::vector<std::string>& sentences);

/// Validates and splits a response body into one ScoreResponse per sentence.
/// Throws MalformedResponseError quoting an excerpt of the payload.
std::vector<ScoreResponse> parse_response(std::string_view body, std::size_t expected);

/// Scores `sentences` at `endpoint` (e.g. "http://127.0.0.1:8080"). Sentences
/// are sent in chunks, up to max_in_flight at a time; results come back in
/// input order. Connection failures and 5xx answers are retried with
/// exponential backoff up to `attempts` times.
std::vector<ScoreResponse> score_remote(const std::string& endpoint, const std::vector<std::string>& sentences,
                                        const ClientOptions& options = {});

/// Subword-index range [begin, end) of each word.
struct WordAlignment {
  std::vector<Span> ranges;
};

/// Maps each word of detokenize(words) to the pieces covering it. Throws
/// AlignmentError naming the first character offset that does not match or a
/// piece that straddles two words.
WordAlignment align(const Tokens& words, const std::vector<std::string>& pieces);

/// Per-word surprisal in bits: the sum of its pieces' -logprob over ln 2.
/// A word with an undefined piece gets NaN.
std::vector<double> align_subwords(const Tokens& words, const ScoreResponse& response);

/// BatchScorer backed by a remote service.
scoring::BatchScorer remote_scorer(const std::string& endpoint, const ClientOptions& options = {});

// ---------------------------------------------------------------------------

/// In-process stand-in for a scoring service, for tests and offline runs.
/// Words are split into pieces by `split`, the first piece of every word but
/// the first carrying the leading space; each word's log-probability from
/// `word_logprobs` (nats, one per word) is shared across its pieces by
/// `split` weights. The first piece of the sentence is reported as null.
class MockScoreServer {
 public:
  /// Word-level log-probabilities (nats) for a tokenized sentence.
  using WordLogprobs = std::function<std::vector<double>(const Tokens&)>;

  struct Faults {
    std::size_t fail_first = 0;      // answer the first n requests with 503
    bool wrong_version = false;      // send X-GapLab-Proto: 2
    bool malformed = false;          // send a body that is not valid JSON
    bool reverse_results = false;    // misorder results within a response
  };

  explicit MockScoreServer(WordLogprobs word_logprobs, std::string model = "mock");
  ~MockScoreServer();
  MockScoreServer(const MockScoreServer&) = delete;
  MockScoreServer& operator=(const MockScoreServer&) = delete;

  /// Pieces of `word` (default: words longer than four characters are split
  /// after their third character) and the share of the word's log-probability
  /// each piece receives.
  static std::vector<std::pair<std::string, double>> split(const std::string& word);

  void set_faults(const Faults& faults);
  std::string endpoint() const;
  std::size_t requests() const;
  std::size_t max_concurrent() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gaplab::client
