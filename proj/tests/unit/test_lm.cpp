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

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include "gaplab/corpus/vocab.hpp"
#include "gaplab/lm/lstm_lm.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gaplab::lm {
namespace {

LmConfig tiny(std::size_t vocab, std::size_t embed, std::size_t hidden, std::size_t layers) {
  LmConfig c;
  c.vocab_size = vocab;
  c.embed_dim = embed;
  c.hidden_dim = hidden;
  c.num_layers = layers;
  c.dropout = 0.0;
  return c;
}

corpus::Vocab letters(std::size_t n) {
  std::vector<std::string> toks = {"<unk>", "<eos>"};
  for (std::size_t i = 0; toks.size() < n; ++i) toks.push_back(std::string(1, static_cast<char>('a' + i)));
  return corpus::Vocab(toks);
}

std::vector<std::int32_t> random_stream(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::int32_t> out(n);
  for (auto& id : out) id = static_cast<std::int32_t>(uniform_index(rng, vocab));
  return out;
}

TEST(LmConfig, ValidateNamesField) {
  LmConfig c = preset("desk");
  c.vocab_size = 10;
  c.validate();
  c.hidden_dim = 0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("hidden_dim"), std::string::npos);
  }
  EXPECT_THROW(preset("desk").validate(true), ConfigError);
  EXPECT_NO_THROW(preset("desk").validate(false));
  EXPECT_THROW(preset("laptop"), ConfigError);
}

TEST(LmConfig, Presets) {
  const LmConfig desk = preset("desk");
  EXPECT_EQ(desk.embed_dim, 64u);
  EXPECT_EQ(desk.hidden_dim, 128u);
  EXPECT_EQ(desk.num_layers, 2u);
  const LmConfig big = preset("paper");
  EXPECT_EQ(big.embed_dim, 650u);
  EXPECT_EQ(big.hidden_dim, 650u);
  EXPECT_EQ(big.batch_size, 128u);
  EXPECT_EQ(big.max_epochs, 40u);
}

TEST(LmConfig, JsonRoundTripAndUnknownKey) {
  LmConfig c = tiny(11, 3, 4, 1);
  c.learning_rate = 5.5;
  c.seed = 77;
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  EXPECT_THROW(config_from_json(nlohmann::json{{"hiden_dim", 3}}), ConfigError);
  const LmConfig partial = config_from_json(nlohmann::json{{"hidden_dim", 9}}, c);
  EXPECT_EQ(partial.hidden_dim, 9u);
  EXPECT_EQ(partial.embed_dim, 3u);
}

TEST(LmInit, BoundsBiasesAndSeed) {
  LmConfig c = tiny(10, 4, 5, 2);
  const LmParameters a = init_params(c);
  const LmParameters b = init_params(c);
  c.seed = 2;
  const LmParameters other = init_params(c);
  EXPECT_EQ(a.parameter_count(), 10u * 4 + (20 * 4 + 20 * 5 + 20) + (20 * 5 + 20 * 5 + 20) + 10 * 5 + 10);
  a.for_each([&](const std::string& name, const auto& t) {
    if (name.ends_with("bias")) {
      EXPECT_TRUE(t.isZero()) << name;
    } else {
      EXPECT_LE(t.cwiseAbs().maxCoeff(), 0.1f) << name;
      EXPECT_GT(t.cwiseAbs().maxCoeff(), 0.0f) << name;
    }
  });
  EXPECT_EQ(a.embedding, b.embedding);
  EXPECT_EQ(a.decoder, b.decoder);
  EXPECT_NE(a.embedding, other.embedding);
}

TEST(LmScore, ZeroModelIsUniform) {
  const auto vocab = letters(8);
  const LmParameters p = zero_params<float>(tiny(8, 3, 4, 2));
  const auto prof = sequence_surprisal(p, vocab, {"a", "b", "c"});
  ASSERT_EQ(prof.bits.size(), 3u);
  for (double b : prof.bits) EXPECT_NEAR(b, 3.0, 1e-6);
  EXPECT_NEAR(prof.total_bits(), 9.0, 1e-6);

  const LmParameters wide = zero_params<float>(tiny(256, 2, 2, 1));
  EXPECT_NEAR(evaluate_perplexity(wide, random_stream(500, 256, 3)), 256.0, 1e-3);
}

TEST(LmScore, OovStrictAndLenient) {
  const auto vocab = letters(8);
  const LmParameters p = zero_params<float>(tiny(8, 3, 4, 1));
  EXPECT_THROW(sequence_surprisal(p, vocab, {"a", "zzz"}), OovError);
  EXPECT_EQ(sequence_surprisal(p, vocab, {"a", "zzz"}, false).bits.size(), 2u);
}

TEST(LmScore, NextTokenDistributionSumsToOne) {
  LmConfig c = tiny(9, 4, 6, 2);
  const LmParameters p = init_params(c);
  for (std::int32_t ctx : {2, 5}) {
    double total = 0.0;
    for (std::int32_t w = 0; w < 9; ++w) {
      const std::vector<std::int32_t> ids = {ctx, 3, w};
      total += std::exp(-stream_nll(p, ids)[2]);
    }
    EXPECT_NEAR(total, 1.0, 1e-5);
  }
}

TEST(LmScore, ChunkedStreamMatchesStepwise) {
  LmConfig c = tiny(12, 5, 7, 2);
  c.seed = 9;
  const LmParameters p = init_params(c);
  const auto ids = random_stream(600, 12, 4);
  const auto chunked = stream_nll(p, ids);
  ASSERT_EQ(chunked.size(), ids.size());

  LmState state = zero_state<float>(c, 1);
  std::int32_t prev = corpus::Vocab::kEosId;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const std::int32_t in[1] = {prev};
    const MatT<float> logits = forward_step(p, in, state, false);
    const VecT<double> z = logits.col(0).cast<double>();
    const double lse = z.maxCoeff() + std::log((z.array() - z.maxCoeff()).exp().sum());
    EXPECT_NEAR(chunked[t], lse - z(ids[t]), 2e-5) << "t=" << t;
    prev = ids[t];
  }
}

TEST(LmScore, DeterministicAcrossCalls) {
  const LmParameters p = init_params(tiny(10, 4, 4, 2));
  const auto ids = random_stream(300, 10, 5);
  EXPECT_EQ(stream_nll(p, ids), stream_nll(p, ids));
}

TEST(LmScore, BatchedMatchesSingle) {
  const LmParameters p = init_params(tiny(10, 4, 5, 2));
  std::vector<std::vector<std::int32_t>> sents = {{2, 3, 4}, {5}, {6, 7, 8, 9, 2, 3}, {4, 4}};
  const auto batched = batch_surprisal(p, sents, 3);
  ASSERT_EQ(batched.size(), sents.size());
  for (std::size_t i = 0; i < sents.size(); ++i) {
    const auto single = stream_nll(p, sents[i]);
    ASSERT_EQ(batched[i].size(), single.size());
    for (std::size_t t = 0; t < single.size(); ++t) {
      EXPECT_NEAR(batched[i][t], single[t] / std::numbers::ln2, 1e-5);
    }
  }
}

TEST(LmScore, PerplexityEqualsTwoToMeanBits) {
  const auto vocab = letters(10);
  const LmParameters p = init_params(tiny(10, 4, 5, 2));
  const Tokens toks = {"a", "b", "c", "d", "e", "f", "g", "a"};
  const auto prof = sequence_surprisal(p, vocab, toks);
  const double mean = prof.total_bits() / static_cast<double>(toks.size());
  std::vector<std::int32_t> ids;
  for (const auto& t : toks) ids.push_back(vocab.encode(t));
  EXPECT_NEAR(std::pow(2.0, mean), evaluate_perplexity(p, ids), 1e-9);
  EXPECT_NEAR(prof.total_bits() * std::numbers::ln2, sequence_nll(p, vocab, toks), 1e-9);
}

// Unigram oracle: all weights zero, decoder bias = log p.
TEST(LmOracle, UnigramFromDecoderBias) {
  const std::size_t V = 6;
  LmParameters p = zero_params<float>(tiny(V, 2, 3, 1));
  const std::vector<double> prob = {0.05, 0.15, 0.3, 0.2, 0.1, 0.2};
  for (std::size_t k = 0; k < V; ++k) p.decoder_bias(static_cast<Eigen::Index>(k)) = static_cast<float>(std::log(prob[k]));
  const auto ids = random_stream(200, V, 8);
  double expected = 0.0;
  for (auto id : ids) expected -= std::log(prob[static_cast<std::size_t>(id)]);
  const auto nll = stream_nll(p, ids);
  double got = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    EXPECT_NEAR(nll[t], -std::log(prob[static_cast<std::size_t>(ids[t])]), 1e-5);
    got += nll[t];
  }
  EXPECT_NEAR(std::log(evaluate_perplexity(p, ids)), expected / static_cast<double>(ids.size()), 1e-6);
}

TEST(LmOracle, BigramFromSaturatedGates) {
  const Eigen::Index V = 5;
  Rng rng(21);
  MatT<double> logp(V, V);  // logp(next, prev)
  for (Eigen::Index w = 0; w < V; ++w) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < V; ++k) total += logp(k, w) = 0.1 + uniform01(rng);
    for (Eigen::Index k = 0; k < V; ++k) logp(k, w) = std::log(logp(k, w) / total);
  }
  const LmParameters p = testing::bigram_model(logp);

  const auto ids = random_stream(400, V, 22);
  const auto nll = stream_nll(p, ids);
  std::int32_t prev = corpus::Vocab::kEosId;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    EXPECT_NEAR(nll[t], -logp(ids[t], prev), 1e-5) << "t=" << t;
    prev = ids[t];
  }
}

TEST(LmCheckpoint, RoundTripIsExact) {
  testing::TempDir dir("ckpt");
  LmConfig c = tiny(7, 3, 4, 2);
  c.learning_rate = 3.25;
  const LmParameters p = init_params(c);
  save_checkpoint(dir / "m.bin", p);
  const LmParameters q = load_checkpoint(dir / "m.bin");
  EXPECT_EQ(q.config, p.config);
  std::vector<std::string> names;
  p.for_each([&](const std::string& n, const auto&) { names.push_back(n); });
  std::size_t k = 0;
  q.for_each([&](const std::string& n, const auto&) { EXPECT_EQ(n, names[k++]); });
  EXPECT_EQ(q.embedding, p.embedding);
  EXPECT_EQ(q.layers[1].w_h, p.layers[1].w_h);
  EXPECT_EQ(q.layers[0].bias, p.layers[0].bias);
  EXPECT_EQ(q.decoder, p.decoder);
  EXPECT_EQ(q.decoder_bias, p.decoder_bias);
  save_checkpoint(dir / "m2.bin", q);
  EXPECT_EQ(read_file(dir / "m.bin"), read_file(dir / "m2.bin"));
}

TEST(LmCheckpoint, CorruptFilesReportByteOffset) {
  testing::TempDir dir("ckpt");
  save_checkpoint(dir / "m.bin", init_params(tiny(7, 3, 4, 1)));
  const std::string good = read_file(dir / "m.bin");

  auto expect_parse_error = [&](const std::string& bytes, const std::string& needle) {
    write_file_atomic(dir / "bad.bin", bytes);
    try {
      load_checkpoint(dir / "bad.bin");
      ADD_FAILURE() << "expected ParseError for " << needle;
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find(needle), std::string::npos) << msg;
      EXPECT_NE(msg.find("at byte"), std::string::npos) << msg;
    }
  };
  expect_parse_error("NOPE!" + good.substr(5), "not a GAPLM checkpoint");
  expect_parse_error(good.substr(0, good.size() - 3), "truncated");
  expect_parse_error(good + "x", "trailing");
  std::string version = good;
  version[5] = 9;
  expect_parse_error(version, "version");
}

TEST(LmTrain, LearningRateSchedule) {
  EXPECT_EQ(next_learning_rate(20.0, true, 4.0), 20.0);
  EXPECT_EQ(next_learning_rate(20.0, false, 4.0), 5.0);
}

// Deterministic cycle a b c d ... is learnable; the trained model must beat
// the add-one unigram baseline by a wide margin.
TEST(LmTrain, LearnsACycleAndIsDeterministic) {
  const std::size_t V = 8;
  std::vector<std::int32_t> train_ids, valid_ids;
  for (int k = 0; k < 3000; ++k) train_ids.push_back(2 + k % 6);
  for (int k = 0; k < 300; ++k) valid_ids.push_back(2 + k % 6);
  LmConfig c = tiny(V, 8, 16, 1);
  c.batch_size = 8;
  c.bptt_len = 10;
  c.max_epochs = 3;
  c.learning_rate = 5.0;
  std::vector<EpochLog> seen;
  TrainOptions opts;
  opts.on_epoch = [&](const EpochLog& e) { seen.push_back(e); };
  const TrainResult a = train(c, train_ids, valid_ids, opts);
  const TrainResult b = train(c, train_ids, valid_ids);
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(a.log.epochs.size(), 3u);
  EXPECT_EQ(a.params.decoder, b.params.decoder);
  EXPECT_EQ(a.log.best_valid_loss, b.log.best_valid_loss);
  const double ppl = evaluate_perplexity(a.params, valid_ids);
  EXPECT_NEAR(std::log(ppl), a.log.best_valid_loss, 1e-12);
  EXPECT_LT(ppl, 1.5);
  EXPECT_GT(unigram_perplexity(train_ids, valid_ids, V), 5.0);
}

TEST(LmTrain, DropoutTrainingRuns) {
  std::vector<std::int32_t> ids = random_stream(2000, 6, 10);
  LmConfig c = tiny(6, 4, 4, 2);
  c.dropout = 0.5;
  c.batch_size = 4;
  c.max_epochs = 1;
  const TrainResult r = train(c, ids, std::vector<std::int32_t>(ids.begin(), ids.begin() + 100));
  EXPECT_TRUE(std::isfinite(r.log.epochs[0].train_loss));
  LmState st = zero_state<float>(c, 1);
  const std::int32_t in[1] = {2};
  EXPECT_THROW(forward_step(r.params, in, st, true), InvariantError);
}

TEST(LmTrain, DivergenceIsReported) {
  std::vector<std::int32_t> ids = random_stream(2000, 6, 11);
  LmConfig c = tiny(6, 4, 4, 1);
  c.batch_size = 4;
  c.max_epochs = 1;
  c.learning_rate = 1e30;
  c.grad_clip = 1e30;
  EXPECT_THROW(train(c, ids, ids), DivergenceError);
}

TEST(LmGradient, MatchesFiniteDifferences) {
  LmConfig c = tiny(8, 5, 6, 2);
  c.seed = 3;
  const auto started = std::chrono::steady_clock::now();
  const auto r = gradient_check(c, random_gradient_sample(c, 5, 3, 17));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_tensor;
  EXPECT_EQ(r.checked, init_params(c).parameter_count());
  EXPECT_LT(secs, 10.0);
}

// One step from a zero state: the recurrent weights get no gradient and the
// check degenerates to a feed-forward network.
TEST(LmGradient, SingleStepIsTight) {
  LmConfig c = tiny(6, 4, 4, 1);
  const auto r = gradient_check(c, random_gradient_sample(c, 1, 2, 5));
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_tensor;
}

TEST(LmGradient, RejectsUnsupportedConfigs) {
  LmConfig c = tiny(8, 5, 6, 1);
  c.dropout = 0.1;
  EXPECT_THROW(gradient_check(c, random_gradient_sample(c, 2, 2, 1)), ConfigError);
  c = tiny(9, 5, 6, 1);
  EXPECT_THROW(gradient_check(c, random_gradient_sample(c, 2, 2, 1)), ConfigError);
  c = tiny(8, 5, 6, 1);
  GradientSample bad = random_gradient_sample(c, 2, 2, 1);
  bad.targets.pop_back();
  EXPECT_THROW(gradient_check(c, bad), ConfigError);
}

}  // namespace
}  // namespace gaplab::lm
