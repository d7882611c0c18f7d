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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/error.hpp"
#include "gaplab/common/io.hpp"
#include "gaplab/common/random.hpp"
#include "gaplab/corpus/vocab.hpp"

namespace gaplab::lm {

struct LmConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t num_layers = 2;
  double dropout = 0.2;
  std::size_t batch_size = 32;
  double learning_rate = 20.0;
  std::size_t max_epochs = 10;
  std::size_t bptt_len = 35;
  double grad_clip = 0.25;
  double anneal_factor = 4.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field. vocab_size is only
  /// checked when `need_vocab` is set.
  void validate(bool need_vocab = true) const;
  bool operator==(const LmConfig&) const = default;
};

/// "desk" (64/128/2, batch 32) or "paper" (650/650/2, batch 128, 40 epochs).
LmConfig preset(std::string_view name);
std::vector<std::string> preset_names();

nlohmann::json config_to_json(const LmConfig& config);
/// Starts from `base` and applies the keys present in `doc`; unknown keys are
/// a ConfigError.
LmConfig config_from_json(const nlohmann::json& doc, LmConfig base = {});

// ---------------------------------------------------------------------------

template <typename S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Gate rows are stacked input, forget, cell, output.
template <typename S>
struct LayerParams {
  MatT<S> w_x;  // 4H x in
  MatT<S> w_h;  // 4H x H
  VecT<S> bias;  // 4H
};

template <typename S>
struct ParamsT {
  LmConfig config;
  MatT<S> embedding;  // E x V, one column per token
  std::vector<LayerParams<S>> layers;
  MatT<S> decoder;  // V x H
  VecT<S> decoder_bias;

  /// Calls f(name, tensor) for every tensor in checkpoint order.
  template <typename F>
  void for_each(F&& f) {
    f(std::string("embedding"), embedding);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "lstm." + std::to_string(l) + ".";
      f(p + "w_x", layers[l].w_x);
      f(p + "w_h", layers[l].w_h);
      f(p + "bias", layers[l].bias);
    }
    f(std::string("decoder.weight"), decoder);
    f(std::string("decoder.bias"), decoder_bias);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<ParamsT*>(this)->for_each([&](const std::string& n, auto& t) { f(n, std::as_const(t)); });
  }

  template <typename T>
  ParamsT<T> cast() const {
    ParamsT<T> out;
    out.config = config;
    out.embedding = embedding.template cast<T>();
    for (const auto& l : layers) out.layers.push_back({l.w_x.template cast<T>(), l.w_h.template cast<T>(), l.bias.template cast<T>()});
    out.decoder = decoder.template cast<T>();
    out.decoder_bias = decoder_bias.template cast<T>();
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }
};

using LmParameters = ParamsT<float>;

/// Per-layer hidden and cell states, each hidden_dim x batch.
template <typename S>
struct StateT {
  std::vector<MatT<S>> h;
  std::vector<MatT<S>> c;
};
using LmState = StateT<float>;

/// Weights uniform in [-0.1, 0.1] from a generator seeded with config.seed;
/// biases zero. Tensors are filled in checkpoint order, row-major.
LmParameters init_params(const LmConfig& config);

/// Zero-filled parameters of the configured shapes.
template <typename S>
ParamsT<S> zero_params(const LmConfig& config);

template <typename S>
StateT<S> zero_state(const LmConfig& config, std::size_t batch);

/// One time step for a batch of token ids. Returns vocab x batch logits and
/// advances `state`. Dropout is applied only in train mode and then needs
/// `rng`.
MatT<float> forward_step(const LmParameters& params, std::span<const std::int32_t> ids, LmState& state,
                         bool train_mode, Rng* rng = nullptr);

// ---------------------------------------------------------------------------
// Scoring

/// Per-token negative log-likelihood (nats) of `ids`, each token conditioned
/// on <eos> followed by the preceding ids, from a fresh state.
std::vector<double> stream_nll(const LmParameters& params, std::span<const std::int32_t> ids);

/// As stream_nll but starting from (and updating) `state`, with `context` as
/// the id preceding ids[0].
std::vector<double> stream_nll(const LmParameters& params, std::span<const std::int32_t> ids,
                               LmState& state, std::int32_t context);

/// exp(mean nats) over the stream, which is 2^(mean surprisal in bits).
double evaluate_perplexity(const LmParameters& params, std::span<const std::int32_t> ids);

struct SurprisalProfile {
  Tokens tokens;
  std::vector<double> bits;

  double total_bits() const;
};

/// Thrown in strict mode when a token is not in the vocabulary.
class OovError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Per-token surprisal in bits, s_t = -log2 p(w_t | <eos>, w_<t).
SurprisalProfile sequence_surprisal(const LmParameters& params, const corpus::Vocab& vocab,
                                    const Tokens& tokens, bool strict = true);
/// Total negative log-likelihood in nats of the same quantity.
double sequence_nll(const LmParameters& params, const corpus::Vocab& vocab, const Tokens& tokens,
                    bool strict = true);

/// Surprisal (bits) for many independent sentences, scored in padded batches.
std::vector<std::vector<double>> batch_surprisal(const LmParameters& params,
                                                 const std::vector<std::vector<std::int32_t>>& sentences,
                                                 std::size_t batch = 64);

/// Add-one unigram perplexity of `eval` under counts from `train`.
double unigram_perplexity(std::span<const std::int32_t> train, std::span<const std::int32_t> eval,
                          std::size_t vocab_size);

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // nats/token
  double valid_loss = 0.0;
  double learning_rate = 0.0;
  double wall_seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_valid_loss = 0.0;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct TrainOptions {
  /// Called after every epoch.
  std::function<void(const EpochLog&)> on_epoch;
  /// Stop each epoch after this many windows (0 = all); for smoke tests.
  std::size_t max_batches_per_epoch = 0;
};

struct TrainResult {
  LmParameters params;
  TrainingLog log;
};

/// Learning rate for the next epoch: divided by anneal_factor when the
/// validation loss did not improve on the best so far.
double next_learning_rate(double lr, bool improved, double anneal_factor);

TrainResult train(const LmConfig& config, std::span<const std::int32_t> train_stream,
                  std::span<const std::int32_t> valid_stream, const TrainOptions& options = {});

/// Loss accumulator: double, or the scalar itself when it is wider.
template <typename S>
using LossT = std::conditional_t<(sizeof(S) > sizeof(double)), S, double>;

/// Mean cross-entropy (nats) of one window and, when `grad` is non-null, its
/// gradient. `state` is read as the initial state and replaced by the final
/// one. Exposed for gradient checking.
template <typename S>
LossT<S> window_loss(const ParamsT<S>& params, std::span<const std::int32_t> inputs,
                   std::span<const std::int32_t> targets, std::size_t batch, StateT<S>& state,
                   ParamsT<S>* grad, Rng* dropout_rng);

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const fs::path& path, const LmParameters& params);
LmParameters load_checkpoint(const fs::path& path);

// ---------------------------------------------------------------------------
// Gradient check

struct GradientSample {
  std::size_t seq_len = 4;
  std::size_t batch = 2;
  std::vector<std::int32_t> inputs;   // seq_len * batch, element (t, b) at t * batch + b
  std::vector<std::int32_t> targets;
};

GradientSample random_gradient_sample(const LmConfig& config, std::size_t seq_len, std::size_t batch,
                                      std::uint64_t seed);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

/// Compares analytic gradients with central differences (step 1e-3) in
/// extended precision. Requires dropout == 0 and every dimension <= 8.
GradientCheckResult gradient_check(const LmConfig& config, const GradientSample& sample,
                                   double step = 1e-3);

}  // namespace gaplab::lm
