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

#include "gaplab/lm/lstm_lm.hpp"

namespace gaplab::lm {

using nlohmann::json;

void LmConfig::validate(bool need_vocab) const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string("lm.") + name + ": must be >= 1");
  };
  if (need_vocab && vocab_size < 2) throw ConfigError("lm.vocab_size: must be >= 2");
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(num_layers, "num_layers");
  positive(batch_size, "batch_size");
  positive(max_epochs, "max_epochs");
  positive(bptt_len, "bptt_len");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("lm.dropout: must be in [0, 1)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("lm.learning_rate: must be > 0");
  }
  if (!(grad_clip > 0.0)) throw ConfigError("lm.grad_clip: must be > 0");
  if (!(anneal_factor >= 1.0)) throw ConfigError("lm.anneal_factor: must be >= 1");
}

LmConfig preset(std::string_view name) {
  LmConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.embed_dim = 650;
    c.hidden_dim = 650;
    c.num_layers = 2;
    c.dropout = 0.2;
    c.batch_size = 128;
    c.learning_rate = 20.0;
    c.max_epochs = 40;
    return c;
  }
  std::string names;
  for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
  throw ConfigError("unknown lm preset '" + std::string(name) + "' (valid: " + names + ")");
}

std::vector<std::string> preset_names() { return {"desk", "paper"}; }

json config_to_json(const LmConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim}, {"num_layers", c.num_layers},
          {"dropout", c.dropout},       {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"max_epochs", c.max_epochs},
          {"bptt_len", c.bptt_len},     {"grad_clip", c.grad_clip},
          {"anneal_factor", c.anneal_factor}, {"seed", c.seed}};
}

namespace {

bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace

LmConfig config_from_json(const json& doc, LmConfig c) {
  if (!doc.is_object()) throw ConfigError("lm: expected an object");
  for (const auto& [key, value] : doc.items()) {
    auto uint = [&](std::size_t& field) {
      if (!non_negative_integer(value)) throw ConfigError("lm." + key + ": expected a non-negative integer");
      field = value.get<std::size_t>();
    };
    auto real = [&](double& field) {
      if (!value.is_number()) throw ConfigError("lm." + key + ": expected a number");
      field = value.get<double>();
    };
    if (key == "vocab_size") uint(c.vocab_size);
    else if (key == "embed_dim") uint(c.embed_dim);
    else if (key == "hidden_dim") uint(c.hidden_dim);
    else if (key == "num_layers") uint(c.num_layers);
    else if (key == "batch_size") uint(c.batch_size);
    else if (key == "max_epochs") uint(c.max_epochs);
    else if (key == "bptt_len") uint(c.bptt_len);
    else if (key == "dropout") real(c.dropout);
    else if (key == "learning_rate") real(c.learning_rate);
    else if (key == "grad_clip") real(c.grad_clip);
    else if (key == "anneal_factor") real(c.anneal_factor);
    else if (key == "seed") {
      if (!non_negative_integer(value)) throw ConfigError("lm.seed: expected a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("lm." + key + ": unknown field");
    }
  }
  return c;
}

}  // namespace gaplab::lm
