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

#include "gaplab/corpus/corpus.hpp"

#include <sstream>

#include "gaplab/common/error.hpp"
#include "gaplab/common/random.hpp"

namespace gaplab::corpus {

void write_sentences(const fs::path& path, const std::vector<Tokens>& sentences) {
  std::string text;
  for (const auto& s : sentences) {
    text += detokenize(s);
    text += '\n';
  }
  write_file_atomic(path, text);
}

std::vector<Tokens> read_sentences(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Tokens> out;
  std::string line;
  while (std::getline(in, line)) {
    Tokens toks = tokenize(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

void save_split(const CorpusSplit& split, const fs::path& dir) {
  fs::create_directories(dir);
  write_sentences(dir / "train.txt", split.train);
  write_sentences(dir / "valid.txt", split.valid);
  write_sentences(dir / "test.txt", split.test);
}

CorpusSplit load_split(const fs::path& dir) {
  CorpusSplit split;
  split.train = read_sentences(dir / "train.txt");
  split.valid = read_sentences(dir / "valid.txt");
  split.test = read_sentences(dir / "test.txt");
  return split;
}

CorpusSplit augment_corpus(const CorpusSplit& base, const std::vector<Tokens>& sentences,
                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<const Tokens*> additions;
  additions.reserve(sentences.size());
  for (const auto& s : sentences) additions.push_back(&s);
  shuffle(additions.begin(), additions.end(), rng);

  // Choose which of the N + M slots hold additions, then fill in order.
  std::vector<char> is_addition(base.train.size() + additions.size(), 0);
  std::fill(is_addition.begin(), is_addition.begin() + static_cast<std::ptrdiff_t>(additions.size()), 1);
  shuffle(is_addition.begin(), is_addition.end(), rng);

  CorpusSplit out;
  out.valid = base.valid;
  out.test = base.test;
  out.train.reserve(is_addition.size());
  std::size_t next_base = 0, next_add = 0;
  for (char flag : is_addition) {
    if (flag) {
      out.train.push_back(*additions[next_add++]);
    } else {
      out.train.push_back(base.train[next_base++]);
    }
  }
  return out;
}

std::vector<Batch> batchify(std::span<const std::int32_t> stream, BatchPlan plan) {
  if (plan.batch_size < 1 || plan.bptt_len < 1) {
    throw ConfigError("batch_size and bptt_len must be >= 1");
  }
  if (stream.size() < plan.batch_size * 2) {
    throw ConfigError("token stream of length " + std::to_string(stream.size()) +
                      " is too short for batch size " + std::to_string(plan.batch_size));
  }
  const std::size_t rows = plan.batch_size;
  const std::size_t cols = stream.size() / rows;

  std::vector<Batch> batches;
  for (std::size_t start = 0; start + 1 < cols; start += plan.bptt_len) {
    Batch batch;
    batch.batch_size = rows;
    batch.seq_len = std::min(plan.bptt_len, cols - 1 - start);
    batch.inputs.resize(batch.seq_len * rows);
    batch.targets.resize(batch.seq_len * rows);
    for (std::size_t t = 0; t < batch.seq_len; ++t) {
      for (std::size_t b = 0; b < rows; ++b) {
        const std::size_t pos = b * cols + start + t;
        batch.inputs[t * rows + b] = stream[pos];
        batch.targets[t * rows + b] = stream[pos + 1];
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace gaplab::corpus
