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

#include <cmath>
#include <limits>
#include <numbers>
#include <type_traits>

#include "gaplab/lm/lstm_lm.hpp"
#include "lm_internal.hpp"

namespace gaplab::lm {

namespace detail {

template <typename S>
void activate(Eigen::Ref<MatT<S>> g, Eigen::Index hidden) {
  auto sig = [](auto x) { return ((-x).exp() + S(1)).inverse(); };
  g.topRows(2 * hidden).array() = sig(g.topRows(2 * hidden).array());
  g.middleRows(2 * hidden, hidden).array() = g.middleRows(2 * hidden, hidden).array().tanh();
  g.bottomRows(hidden).array() = sig(g.bottomRows(hidden).array());
}

template <typename S>
void check_ids(std::span<const std::int32_t> ids, std::size_t vocab) {
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw ConfigError("token id " + std::to_string(id) + " out of range [0, " +
                        std::to_string(vocab) + ")");
    }
  }
}

template <typename S>
MatT<S> run_layers(const ParamsT<S>& p, std::span<const std::int32_t> ids, std::size_t batch,
                   StateT<S>& state, Rng* dropout_rng, std::vector<LayerCache<S>>* caches) {
  using Eigen::Index;
  const auto& cfg = p.config;
  check_ids<S>(ids, cfg.vocab_size);
  const Index H = static_cast<Index>(cfg.hidden_dim);
  const Index B = static_cast<Index>(batch);
  const Index TB = static_cast<Index>(ids.size());
  const Index T = TB / B;
  const bool dropout = dropout_rng && cfg.dropout > 0.0;

  MatT<S> x(p.embedding.rows(), TB);
  for (Index j = 0; j < TB; ++j) x.col(j) = p.embedding.col(ids[static_cast<std::size_t>(j)]);
  if (caches) caches->assign(p.layers.size(), {});

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    MatT<S> mask;
    if (dropout) {
      mask.resize(x.rows(), x.cols());
      const S keep_scale = S(1) / S(1.0 - cfg.dropout);
      S* m = mask.data();
      for (Index i = 0; i < mask.size(); ++i) m[i] = uniform01(*dropout_rng) < cfg.dropout ? S(0) : keep_scale;
      x.array() *= mask.array();
    }
    MatT<S> gates = L.w_x * x;
    gates.colwise() += L.bias;
    MatT<S> hs(H, TB), cs(H, TB), tcs;
    if (caches) tcs.resize(H, TB);
    MatT<S> h = state.h[l];
    MatT<S> c = state.c[l];
    if (caches) {
      (*caches)[l].h0 = h;
      (*caches)[l].c0 = c;
    }
    for (Index t = 0; t < T; ++t) {
      auto g = gates.middleCols(t * B, B);
      g.noalias() += L.w_h * h;
      activate<S>(g, H);
      c.array() = g.middleRows(H, H).array() * c.array() +
                  g.topRows(H).array() * g.middleRows(2 * H, H).array();
      if (caches) {
        tcs.middleCols(t * B, B).array() = c.array().tanh();
        h.array() = g.bottomRows(H).array() * tcs.middleCols(t * B, B).array();
      } else {
        h.array() = g.bottomRows(H).array() * c.array().tanh();
      }
      hs.middleCols(t * B, B) = h;
      cs.middleCols(t * B, B) = c;
    }
    state.h[l] = h;
    state.c[l] = c;
    if (caches) {
      auto& cache = (*caches)[l];
      cache.input = std::move(x);
      cache.mask = std::move(mask);
      cache.gates = std::move(gates);
      cache.c = std::move(cs);
      cache.tanh_c = std::move(tcs);
      cache.h = hs;
    }
    x = std::move(hs);
  }
  return x;
}

template <typename S>
void backward(const ParamsT<S>& p, std::span<const std::int32_t> ids, std::size_t batch,
              const std::vector<LayerCache<S>>& caches, const MatT<S>& top, const MatT<S>& dlogits,
              ParamsT<S>& g) {
  using Eigen::Index;
  const Index H = static_cast<Index>(p.config.hidden_dim);
  const Index B = static_cast<Index>(batch);
  const Index TB = static_cast<Index>(ids.size());
  const Index T = TB / B;

  g.decoder.noalias() += dlogits * top.transpose();
  g.decoder_bias += dlogits.rowwise().sum();
  MatT<S> dh_in = p.decoder.transpose() * dlogits;

  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& C = caches[l];
    const auto& W = p.layers[l];
    MatT<S> dG(4 * H, TB);
    MatT<S> dh_next = MatT<S>::Zero(H, B);
    MatT<S> dc_next = MatT<S>::Zero(H, B);
    MatT<S> dh(H, B), dc(H, B);
    for (Index t = T; t-- > 0;) {
      const auto gates = C.gates.middleCols(t * B, B);
      const auto i = gates.topRows(H).array();
      const auto f = gates.middleRows(H, H).array();
      const auto gg = gates.middleRows(2 * H, H).array();
      const auto o = gates.bottomRows(H).array();
      const auto tc = C.tanh_c.middleCols(t * B, B).array();
      const auto c_prev = (t > 0 ? C.c.middleCols((t - 1) * B, B) : C.c0.middleCols(0, B)).array();

      dh = dh_in.middleCols(t * B, B) + dh_next;
      dc.array() = dc_next.array() + dh.array() * o * (S(1) - tc * tc);
      auto dg = dG.middleCols(t * B, B);
      dg.topRows(H).array() = dc.array() * gg * i * (S(1) - i);
      dg.middleRows(H, H).array() = dc.array() * c_prev * f * (S(1) - f);
      dg.middleRows(2 * H, H).array() = dc.array() * i * (S(1) - gg * gg);
      dg.bottomRows(H).array() = dh.array() * tc * o * (S(1) - o);
      dc_next.array() = dc.array() * f;
      dh_next.noalias() = W.w_h.transpose() * dg;
    }

    MatT<S> h_prev(H, TB);
    h_prev.leftCols(B) = C.h0;
    if (T > 1) h_prev.rightCols(TB - B) = C.h.leftCols(TB - B);
    auto& gl = g.layers[l];
    gl.w_h.noalias() += dG * h_prev.transpose();
    gl.w_x.noalias() += dG * C.input.transpose();
    gl.bias += dG.rowwise().sum();

    MatT<S> dx = W.w_x.transpose() * dG;
    if (C.mask.size() > 0) dx.array() *= C.mask.array();
    if (l > 0) {
      dh_in = std::move(dx);
    } else {
      for (Index j = 0; j < TB; ++j) g.embedding.col(ids[static_cast<std::size_t>(j)]) += dx.col(j);
    }
  }
}

template <typename S>
using Acc = LossT<S>;

/// Log-sum-exp of one logit column, accumulated in at least double.
template <typename S>
Acc<S> log_sum_exp(const S* z, Eigen::Index n) {
  S m = z[0];
  for (Eigen::Index k = 1; k < n; ++k) m = std::max(m, z[k]);
  Acc<S> sum = 0;
  for (Eigen::Index k = 0; k < n; ++k) sum += std::exp(static_cast<Acc<S>>(z[k]) - m);
  return static_cast<Acc<S>>(m) + std::log(sum);
}

template <typename S>
MatT<S> logits_of(const ParamsT<S>& p, const MatT<S>& top) {
  MatT<S> logits = p.decoder * top;
  logits.colwise() += p.decoder_bias;
  return logits;
}

template <typename S>
std::vector<double> column_nll(const MatT<S>& logits, std::span<const std::int32_t> targets) {
  std::vector<double> out(targets.size());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const S* z = logits.col(j).data();
    const auto lse = log_sum_exp<S>(z, logits.rows());
    out[static_cast<std::size_t>(j)] = static_cast<double>(lse - static_cast<Acc<S>>(z[targets[static_cast<std::size_t>(j)]]));
  }
  return out;
}

}  // namespace detail

using detail::Acc;

template <typename S>
ParamsT<S> zero_params(const LmConfig& config) {
  config.validate(true);
  const auto V = static_cast<Eigen::Index>(config.vocab_size);
  const auto E = static_cast<Eigen::Index>(config.embed_dim);
  const auto H = static_cast<Eigen::Index>(config.hidden_dim);
  ParamsT<S> p;
  p.config = config;
  p.embedding = MatT<S>::Zero(E, V);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const Eigen::Index in = l == 0 ? E : H;
    p.layers.push_back({MatT<S>::Zero(4 * H, in), MatT<S>::Zero(4 * H, H), VecT<S>::Zero(4 * H)});
  }
  p.decoder = MatT<S>::Zero(V, H);
  p.decoder_bias = VecT<S>::Zero(V);
  return p;
}

template <typename S>
StateT<S> zero_state(const LmConfig& config, std::size_t batch) {
  StateT<S> s;
  const auto H = static_cast<Eigen::Index>(config.hidden_dim);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    s.h.push_back(MatT<S>::Zero(H, static_cast<Eigen::Index>(batch)));
    s.c.push_back(MatT<S>::Zero(H, static_cast<Eigen::Index>(batch)));
  }
  return s;
}

LmParameters init_params(const LmConfig& config) {
  LmParameters p = zero_params<float>(config);
  Rng rng(config.seed);
  p.for_each([&](const std::string& name, auto& t) {
    if (name.ends_with("bias")) return;
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = static_cast<float>(uniform(rng, -0.1, 0.1));
    }
  });
  return p;
}

MatT<float> forward_step(const LmParameters& params, std::span<const std::int32_t> ids, LmState& state,
                         bool train_mode, Rng* rng) {
  if (train_mode && params.config.dropout > 0.0 && !rng) {
    throw InvariantError("forward_step in train mode needs a dropout generator");
  }
  if (ids.empty()) throw ConfigError("forward_step: empty batch");
  if (state.h.size() != params.layers.size() ||
      (!state.h.empty() && static_cast<std::size_t>(state.h[0].cols()) != ids.size())) {
    throw InvariantError("forward_step: state does not match the batch");
  }
  const MatT<float> top = detail::run_layers<float>(params, ids, ids.size(), state, train_mode ? rng : nullptr, nullptr);
  return detail::logits_of(params, top);
}

template <typename S>
LossT<S> window_loss(const ParamsT<S>& params, std::span<const std::int32_t> inputs,
                   std::span<const std::int32_t> targets, std::size_t batch, StateT<S>& state,
                   ParamsT<S>* grad, Rng* dropout_rng) {
  if (inputs.size() != targets.size() || inputs.empty() || batch == 0 || inputs.size() % batch != 0) {
    throw InvariantError("window_loss: inputs/targets must be non-empty multiples of the batch size");
  }
  detail::check_ids<S>(targets, params.config.vocab_size);
  std::vector<detail::LayerCache<S>> caches;
  const MatT<S> top = detail::run_layers(params, inputs, batch, state, dropout_rng, grad ? &caches : nullptr);
  MatT<S> logits = detail::logits_of(params, top);

  const auto n = static_cast<Eigen::Index>(targets.size());
  Acc<S> total = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    S* z = logits.col(j).data();
    const auto target = targets[static_cast<std::size_t>(j)];
    const auto lse = detail::log_sum_exp<S>(z, logits.rows());
    total += lse - static_cast<Acc<S>>(z[target]);
    if (grad) {
      // Overwrite the column with d(mean loss)/d(logits).
      for (Eigen::Index k = 0; k < logits.rows(); ++k) {
        z[k] = static_cast<S>(std::exp(static_cast<Acc<S>>(z[k]) - lse) / static_cast<Acc<S>>(n));
      }
      z[target] -= static_cast<S>(Acc<S>(1) / static_cast<Acc<S>>(n));
    }
  }
  if (grad) detail::backward(params, inputs, batch, caches, top, logits, *grad);
  return total / static_cast<Acc<S>>(n);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kChunk = 256;

}  // namespace

std::vector<double> stream_nll(const LmParameters& params, std::span<const std::int32_t> ids,
                               LmState& state, std::int32_t context) {
  std::vector<double> out;
  out.reserve(ids.size());
  std::vector<std::int32_t> inputs;
  std::int32_t prev = context;
  for (std::size_t start = 0; start < ids.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, ids.size() - start);
    inputs.resize(len);
    inputs[0] = prev;
    for (std::size_t k = 1; k < len; ++k) inputs[k] = ids[start + k - 1];
    const auto targets = ids.subspan(start, len);
    detail::check_ids<float>(targets, params.config.vocab_size);
    const MatT<float> top = detail::run_layers<float>(params, std::span<const std::int32_t>(inputs), 1, state, nullptr, nullptr);
    const auto nll = detail::column_nll(detail::logits_of(params, top), targets);
    out.insert(out.end(), nll.begin(), nll.end());
    prev = ids[start + len - 1];
  }
  return out;
}

std::vector<double> stream_nll(const LmParameters& params, std::span<const std::int32_t> ids) {
  LmState state = zero_state<float>(params.config, 1);
  return stream_nll(params, ids, state, corpus::Vocab::kEosId);
}

double evaluate_perplexity(const LmParameters& params, std::span<const std::int32_t> ids) {
  if (ids.empty()) throw ConfigError("evaluate_perplexity: empty split");
  const auto nll = stream_nll(params, ids);
  double total = 0.0;
  for (double v : nll) total += v;
  return std::exp(total / static_cast<double>(nll.size()));
}

double SurprisalProfile::total_bits() const {
  double total = 0.0;
  for (double b : bits) total += b;
  return total;
}

namespace {

std::vector<std::int32_t> encode_tokens(const corpus::Vocab& vocab, const Tokens& tokens, bool strict) {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const auto id = vocab.find(tok);
    if (!id && strict) throw OovError("token '" + tok + "' is not in the vocabulary");
    ids.push_back(id.value_or(corpus::Vocab::kUnkId));
  }
  return ids;
}

}  // namespace

SurprisalProfile sequence_surprisal(const LmParameters& params, const corpus::Vocab& vocab,
                                    const Tokens& tokens, bool strict) {
  SurprisalProfile profile;
  profile.tokens = tokens;
  const auto nll = stream_nll(params, encode_tokens(vocab, tokens, strict));
  profile.bits.reserve(nll.size());
  for (double v : nll) profile.bits.push_back(v / std::numbers::ln2);
  return profile;
}

double sequence_nll(const LmParameters& params, const corpus::Vocab& vocab, const Tokens& tokens,
                    bool strict) {
  double total = 0.0;
  for (double v : stream_nll(params, encode_tokens(vocab, tokens, strict))) total += v;
  return total;
}

std::vector<std::vector<double>> batch_surprisal(const LmParameters& params,
                                                 const std::vector<std::vector<std::int32_t>>& sentences,
                                                 std::size_t batch) {
  if (batch == 0) throw ConfigError("batch_surprisal: batch must be >= 1");
  std::vector<std::vector<double>> out(sentences.size());
  for (std::size_t first = 0; first < sentences.size(); first += batch) {
    const std::size_t B = std::min(batch, sentences.size() - first);
    std::size_t T = 0;
    for (std::size_t b = 0; b < B; ++b) T = std::max(T, sentences[first + b].size());
    if (T == 0) continue;
    std::vector<std::int32_t> inputs(T * B, corpus::Vocab::kEosId);
    std::vector<std::int32_t> targets(T * B, corpus::Vocab::kEosId);
    for (std::size_t b = 0; b < B; ++b) {
      const auto& s = sentences[first + b];
      for (std::size_t t = 0; t < s.size(); ++t) {
        if (t > 0) inputs[t * B + b] = s[t - 1];
        targets[t * B + b] = s[t];
      }
    }
    detail::check_ids<float>(targets, params.config.vocab_size);
    LmState state = zero_state<float>(params.config, B);
    const MatT<float> top = detail::run_layers<float>(params, std::span<const std::int32_t>(inputs), B, state, nullptr, nullptr);
    const auto nll = detail::column_nll(detail::logits_of(params, top), targets);
    for (std::size_t b = 0; b < B; ++b) {
      auto& dst = out[first + b];
      dst.resize(sentences[first + b].size());
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = nll[t * B + b] / std::numbers::ln2;
    }
  }
  return out;
}

double unigram_perplexity(std::span<const std::int32_t> train, std::span<const std::int32_t> eval,
                          std::size_t vocab_size) {
  if (eval.empty()) throw ConfigError("unigram_perplexity: empty evaluation stream");
  std::vector<double> counts(vocab_size, 1.0);
  for (std::int32_t id : train) counts.at(static_cast<std::size_t>(id)) += 1.0;
  const double total = static_cast<double>(train.size() + vocab_size);
  double nll = 0.0;
  for (std::int32_t id : eval) nll -= std::log(counts.at(static_cast<std::size_t>(id)) / total);
  return std::exp(nll / static_cast<double>(eval.size()));
}

#define GAPLAB_INSTANTIATE(S)                                                                     \
  template ParamsT<S> zero_params<S>(const LmConfig&);                                           \
  template StateT<S> zero_state<S>(const LmConfig&, std::size_t);                                \
  template LossT<S> window_loss<S>(const ParamsT<S>&, std::span<const std::int32_t>,             \
                                 std::span<const std::int32_t>, std::size_t, StateT<S>&,         \
                                 ParamsT<S>*, Rng*);

GAPLAB_INSTANTIATE(float)
GAPLAB_INSTANTIATE(double)
GAPLAB_INSTANTIATE(long double)

#undef GAPLAB_INSTANTIATE

}  // namespace gaplab::lm
