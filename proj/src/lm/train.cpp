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


#include <chrono>
#include <cmath>
#include <limits>

#include "gaplab/corpus/corpus.hpp"
#include "gaplab/lm/lstm_lm.hpp"

namespace gaplab::lm {

namespace {

template <typename F>
void zip(LmParameters& a, const LmParameters& b, F&& f) {
  f(a.embedding, b.embedding);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    f(a.layers[l].w_x, b.layers[l].w_x);
    f(a.layers[l].w_h, b.layers[l].w_h);
    f(a.layers[l].bias, b.layers[l].bias);
  }
  f(a.decoder, b.decoder);
  f(a.decoder_bias, b.decoder_bias);
}

double squared_norm(const LmParameters& g) {
  double total = 0.0;
  g.for_each([&](const std::string&, const auto& t) { total += static_cast<double>(t.squaredNorm()); });
  return total;
}

void set_zero(LmParameters& g) {
  g.for_each([](const std::string&, auto& t) { t.setZero(); });
}

}  // namespace

double next_learning_rate(double lr, bool improved, double anneal_factor) {
  return improved ? lr : lr / anneal_factor;
}

TrainResult train(const LmConfig& config, std::span<const std::int32_t> train_stream,
                  std::span<const std::int32_t> valid_stream, const TrainOptions& options) {
  config.validate(true);
  if (valid_stream.empty()) throw ConfigError("train: validation split is empty");
  const auto batches = corpus::batchify(train_stream, {config.batch_size, config.bptt_len});

  LmParameters params = init_params(config);
  LmParameters grad = zero_params<float>(config);
  Rng dropout_rng(config.seed ^ 0x5deece66dULL);

  TrainResult result;
  result.params = params;
  result.log.best_valid_loss = std::numeric_limits<double>::infinity();
  double lr = config.learning_rate;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    LmState state = zero_state<float>(config, config.batch_size);
    double loss_sum = 0.0;
    std::size_t tokens = 0;
    std::size_t done = 0;
    for (const auto& batch : batches) {
      if (options.max_batches_per_epoch && done++ >= options.max_batches_per_epoch) break;
      set_zero(grad);
      const double loss = window_loss<float>(params, batch.inputs, batch.targets, batch.batch_size,
                                             state, &grad, &dropout_rng);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) +
                              " (non-finite loss at learning rate " + format_double(lr) + ")");
      }
      const double norm = std::sqrt(squared_norm(grad));
      const double coef = config.grad_clip / (norm + 1e-6);
      const float step = static_cast<float>(coef < 1.0 ? lr * coef : lr);
      zip(params, grad, [&](auto& p, const auto& g) { p -= step * g; });
      loss_sum += loss * static_cast<double>(batch.inputs.size());
      tokens += batch.inputs.size();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = tokens ? loss_sum / static_cast<double>(tokens) : 0.0;
    entry.valid_loss = std::log(evaluate_perplexity(params, valid_stream));
    entry.learning_rate = lr;
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!std::isfinite(entry.valid_loss)) {
      throw DivergenceError("training diverged in epoch " + std::to_string(epoch) +
                            " (non-finite validation loss)");
    }
    const bool improved = entry.valid_loss < result.log.best_valid_loss;
    if (improved) {
      result.log.best_valid_loss = entry.valid_loss;
      result.log.best_epoch = epoch;
      result.params = params;
    }
    result.log.epochs.push_back(entry);
    if (options.on_epoch) options.on_epoch(entry);
    lr = next_learning_rate(lr, improved, config.anneal_factor);
  }
  return result;
}

}  // namespace gaplab::lm
