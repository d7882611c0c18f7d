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
#include <cmath>

#include "gaplab/lm/lstm_lm.hpp"

namespace gaplab::lm {

namespace {

using LD = long double;

// Relative error uses max(|analytic|, |numeric|) as the denominator, floored
// so that parameters with (near-)zero gradient compare on absolute error.
constexpr LD kDenominatorFloor = 1e-7L;

struct TensorRef {
  std::string name;
  LD* value;
  const LD* grad;
  Eigen::Index size;
};

}  // namespace

GradientSample random_gradient_sample(const LmConfig& config, std::size_t seq_len, std::size_t batch,
                                      std::uint64_t seed) {
  GradientSample s;
  s.seq_len = seq_len;
  s.batch = batch;
  Rng rng(seed);
  for (std::size_t k = 0; k < seq_len * batch; ++k) {
    s.inputs.push_back(static_cast<std::int32_t>(uniform_index(rng, config.vocab_size)));
    s.targets.push_back(static_cast<std::int32_t>(uniform_index(rng, config.vocab_size)));
  }
  return s;
}

GradientCheckResult gradient_check(const LmConfig& config, const GradientSample& sample, double step) {
  config.validate(true);
  if (config.dropout > 0.0) throw ConfigError("gradient_check requires dropout == 0");
  for (auto [dim, name] : {std::pair{config.vocab_size, "vocab_size"}, std::pair{config.embed_dim, "embed_dim"},
                           std::pair{config.hidden_dim, "hidden_dim"}, std::pair{config.num_layers, "num_layers"}}) {
    if (dim > 8) throw ConfigError(std::string("gradient_check: ") + name + " must be <= 8");
  }
  if (sample.batch == 0 || sample.seq_len == 0 || sample.inputs.size() != sample.seq_len * sample.batch ||
      sample.targets.size() != sample.inputs.size()) {
    throw ConfigError("gradient_check: sample size does not match seq_len x batch");
  }

  ParamsT<LD> params = init_params(config).cast<LD>();
  ParamsT<LD> grad = zero_params<LD>(config);
  auto loss = [&](ParamsT<LD>* g) {
    StateT<LD> state = zero_state<LD>(config, sample.batch);
    return window_loss<LD>(params, sample.inputs, sample.targets, sample.batch, state, g, nullptr);
  };
  loss(&grad);

  std::vector<TensorRef> refs;
  params.for_each([&](const std::string& name, auto& t) { refs.push_back({name, t.data(), nullptr, t.size()}); });
  std::size_t k = 0;
  grad.for_each([&](const std::string&, const auto& t) { refs[k++].grad = t.data(); });

  const LD h = step;
  GradientCheckResult result;
  for (const auto& ref : refs) {
    for (Eigen::Index i = 0; i < ref.size; ++i) {
      const LD orig = ref.value[i];
      ref.value[i] = orig + h;
      const LD up = loss(nullptr);
      ref.value[i] = orig - h;
      const LD down = loss(nullptr);
      ref.value[i] = orig;
      const LD numeric = (up - down) / (2 * h);
      const LD analytic = ref.grad[i];
      const LD denom = std::max({std::fabs(analytic), std::fabs(numeric), kDenominatorFloor});
      const double rel = static_cast<double>(std::fabs(analytic - numeric) / denom);
      ++result.checked;
      if (rel > result.max_relative_error || result.worst_tensor.empty()) {
        result.max_relative_error = rel;
        result.worst_tensor = ref.name;
      }
    }
  }
  return result;
}

}  // namespace gaplab::lm
