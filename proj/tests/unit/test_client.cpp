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


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gaplab/client/client.hpp"
#include "gaplab/corpus/vocab.hpp"
#include "gaplab/lm/lstm_lm.hpp"
#include "gaplab/stimgen/stimgen.hpp"
#include "test_util.hpp"

namespace gaplab::client {
namespace {

constexpr double kLn2 = std::numbers::ln2;

// Word w of every sentence gets log-probability -(w + 1) / 10 nats.
std::vector<double> ramp(const Tokens& words) {
  std::vector<double> out;
  for (std::size_t w = 0; w < words.size(); ++w) out.push_back(-0.1 * static_cast<double>(w + 1));
  return out;
}

ClientOptions fast() {
  ClientOptions o;
  o.initial_backoff = std::chrono::milliseconds(10);
  o.timeout = std::chrono::seconds(5);
  return o;
}

TEST(Align, OneToOneIsIdentityInBits) {
  ScoreResponse r{"m", {"It", " is", " here"}, {std::nullopt, -1.0, -2.0}};
  const auto bits = align_subwords({"It", "is", "here"}, r);
  ASSERT_EQ(bits.size(), 3u);
  EXPECT_TRUE(std::isnan(bits[0]));
  EXPECT_DOUBLE_EQ(bits[1], 1.0 / kLn2);
  EXPECT_DOUBLE_EQ(bits[2], 2.0 / kLn2);
}

TEST(Align, SubwordsOfOneWordAreSummed) {
  ScoreResponse r{"m", {"these", " sn", "acks"}, {std::nullopt, -1.0, -0.5}};
  const auto bits = align_subwords({"these", "snacks"}, r);
  EXPECT_DOUBLE_EQ(bits[1], 1.5 / kLn2);
  const auto a = align({"these", "snacks"}, r.tokens);
  EXPECT_EQ(a.ranges[0], (Span{0, 1}));
  EXPECT_EQ(a.ranges[1], (Span{1, 3}));
}

TEST(Align, SeparatorPiecesJoinTheNextWord) {
  const auto a = align({"a", "bc"}, {"a", " ", "b", "c"});
  EXPECT_EQ(a.ranges[0], (Span{0, 1}));
  EXPECT_EQ(a.ranges[1], (Span{1, 4}));
}

TEST(Align, MismatchNamesTheOffset) {
  try {
    align({"these", "snacks"}, {"these", " sn", "ax"});
    FAIL();
  } catch (const AlignmentError& e) {
    EXPECT_EQ(e.offset(), 9u);
    EXPECT_NE(std::string(e.what()).find("offset 9"), std::string::npos);
  }
  try {
    align({"ab", "cd"}, {"ab c", "d"});
    FAIL();
  } catch (const AlignmentError& e) {
    EXPECT_EQ(e.offset(), 3u);
  }
  EXPECT_THROW(align({"ab", "cd"}, {"ab", " c"}), AlignmentError);
  EXPECT_THROW(align({"ab"}, {"ab", " "}), AlignmentError);
}

TEST(Align, AggregationPreservesTotal) {
  Tokens words = {"It", "is", "these", "snacks", "that", "Mary", "bought", "yesterday", "."};
  std::vector<std::string> pieces;
  std::vector<std::optional<double>> lp;
  double total = 0.0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (const auto& [piece, share] : MockScoreServer::split(words[w])) {
      pieces.push_back((w > 0 && pieces.size() > 0 && piece == words[w].substr(0, piece.size()) ? " " : "") + piece);
      const double v = -0.37 * static_cast<double>(pieces.size()) * share;
      lp.emplace_back(v);
      total += -v;
    }
  }
  const auto bits = align_subwords(words, {"m", pieces, lp});
  double sum = 0.0;
  for (double b : bits) sum += b;
  EXPECT_NEAR(sum, total / kLn2, 1e-9);
}

TEST(Client, PreservesOrderAcrossChunks) {
  MockScoreServer server(ramp);
  std::vector<std::string> sentences;
  for (int i = 0; i < 23; ++i) sentences.push_back("w" + std::to_string(i) + std::string(static_cast<std::size_t>(i % 4), 'x') + " ends .");
  auto opts = fast();
  opts.sentences_per_request = 2;
  opts.max_in_flight = 3;
  const auto out = score_remote(server.endpoint(), sentences, opts);
  ASSERT_EQ(out.size(), sentences.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::string joined;
    for (const auto& t : out[i].tokens) joined += t;
    EXPECT_EQ(joined, sentences[i]);
    EXPECT_EQ(out[i].model, "mock");
  }
  EXPECT_EQ(server.requests(), 12u);
  EXPECT_LE(server.max_concurrent(), 3u);
}

TEST(Client, TwoSentencesTwoResponses) {
  MockScoreServer server(ramp);
  const auto out = score_remote(server.endpoint(), {"a b", "c d e"}, fast());
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].tokens.size(), 2u);
  EXPECT_EQ(out[1].tokens.size(), 3u);
  EXPECT_FALSE(out[1].logprobs[0].has_value());
  EXPECT_DOUBLE_EQ(*out[1].logprobs[2], -0.3);
}

TEST(Client, UnreachableEndpointFailsAfterThreeAttempts) {
  std::string endpoint;
  {
    MockScoreServer gone(ramp);
    endpoint = gone.endpoint();
  }
  try {
    score_remote(endpoint, {"a b"}, fast());
    FAIL();
  } catch (const ConnectionError& e) {
    EXPECT_NE(std::string(e.what()).find("after 3 attempts"), std::string::npos);
  }
}

TEST(Client, RetriesTransientFailures) {
  MockScoreServer server(ramp);
  server.set_faults({.fail_first = 2});
  EXPECT_EQ(score_remote(server.endpoint(), {"a b"}, fast()).size(), 1u);
  EXPECT_EQ(server.requests(), 3u);
  server.set_faults({.fail_first = 3});
  EXPECT_THROW(score_remote(server.endpoint(), {"a b"}, fast()), ConnectionError);
  EXPECT_EQ(server.requests(), 3u);
}

TEST(Client, ProtocolAndPayloadErrors) {
  MockScoreServer server(ramp);
  server.set_faults({.wrong_version = true});
  EXPECT_THROW(score_remote(server.endpoint(), {"a b"}, fast()), ProtocolError);
  server.set_faults({.malformed = true});
  try {
    score_remote(server.endpoint(), {"a b"}, fast());
    FAIL();
  } catch (const MalformedResponseError& e) {
    EXPECT_NE(std::string(e.what()).find("{\"results\": ["), std::string::npos);
  }
  server.set_faults({.reverse_results = true});
  EXPECT_THROW(score_remote(server.endpoint(), {"a b", "c d"}, fast()), MalformedResponseError);
  EXPECT_EQ(score_remote(server.endpoint(), {"a b"}, fast()).size(), 1u);
}

TEST(ParseResponse, RejectsBadShapes) {
  EXPECT_THROW(parse_response(R"({"results": [{"tokens": ["a"], "logprobs": []}]})", 1), MalformedResponseError);
  EXPECT_THROW(parse_response(R"({"results": [{"tokens": ["a"], "logprobs": [0.5]}]})", 1), MalformedResponseError);
  EXPECT_THROW(parse_response(R"({"results": []})", 1), MalformedResponseError);
  const auto ok = parse_response(R"({"model": "x", "results": [{"tokens": ["a", " b"], "logprobs": [null, -1]}]})", 1);
  EXPECT_EQ(ok[0].model, "x");
  EXPECT_EQ(make_request({"a"}).dump(), R"({"per_token":true,"sentences":["a"]})");
}

TEST(RemoteScorer, RegionSurprisalEqualsHandSum) {
  MockScoreServer server(ramp);
  const auto tmpl = stimgen::load_templates(testing::data_dir() / "templates/clefting.json").at(0);
  const auto lex = stimgen::load_lexicon(testing::data_dir() / "lexicons/test.json");
  const auto items = stimgen::bind_lexicon(tmpl, lex, 3, 4);
  const auto scores = scoring::score_items(items, remote_scorer(server.endpoint(), fast()));
  std::size_t k = 0;
  for (const auto& item : items) {
    for (const auto& s : item.sentences) {
      double expected = 0.0;
      for (std::size_t t = s.critical_region.begin; t < s.critical_region.end; ++t) {
        expected += 0.1 * static_cast<double>(t + 1) / kLn2;
      }
      EXPECT_NEAR(scores.at(k++).bits, expected, 1e-12);
    }
  }
}

TEST(RemoteScorer, MatchesInProcessScoringOfTheSameModel) {
  const auto tmpl = stimgen::load_templates(testing::data_dir() / "templates/wh_movement.json").at(0);
  const auto lex = stimgen::load_lexicon(testing::data_dir() / "lexicons/test.json");
  const auto items = stimgen::bind_lexicon(tmpl, lex, 6, 2);
  std::vector<Tokens> sentences;
  for (const auto& item : items) {
    for (const auto& s : item.sentences) sentences.push_back(s.tokens);
  }
  const auto vocab = corpus::build_vocab(sentences, 1000);
  auto config = lm::preset("desk");
  config.vocab_size = vocab.size();
  config.embed_dim = 8;
  config.hidden_dim = 8;
  config.seed = 3;
  const auto params = lm::init_params(config);

  MockScoreServer server([&](const Tokens& words) {
    const auto prof = lm::sequence_surprisal(params, vocab, words);
    std::vector<double> lp;
    for (double b : prof.bits) lp.push_back(-b * kLn2);
    return lp;
  });
  const auto remote = scoring::score_items(items, remote_scorer(server.endpoint(), fast()));
  const auto local = scoring::score_items(items, scoring::model_scorer(params, vocab));
  ASSERT_EQ(remote.size(), local.size());
  for (std::size_t i = 0; i < local.size(); ++i) {
    // float32 model evaluated in different batch layouts on the two sides
    EXPECT_NEAR(remote[i].bits, local[i].bits, 1e-6);
    EXPECT_EQ(remote[i].region_tokens, local[i].region_tokens);
  }
}

}  // namespace
}  // namespace gaplab::client
