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


#include <bit>
#include <cmath>
#include <cstring>

#include "gaplab/lm/lstm_lm.hpp"

// Layout (all integers little-endian):
//   "GAPLM" | u8 version | u32 n | n bytes of config JSON | u32 tensor count
//   per tensor: u32 n | n bytes of name | u32 ndim | ndim x u64 dims |
//               float32 values, row-major

namespace gaplab::lm {

namespace {

constexpr char kMagic[5] = {'G', 'A', 'P', 'L', 'M'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

class Reader {
 public:
  Reader(std::string_view data, std::string where) : data_(data), where_(std::move(where)) {}

  std::string_view bytes(std::size_t n) {
    if (data_.size() - pos_ < n) fail("truncated file");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t uint(int width) {
    const auto b = bytes(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = width; i-- > 0;) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  bool done() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(where_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  std::string_view data_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const fs::path& path, const LmParameters& params) {
  std::string out(kMagic, sizeof(kMagic));
  out += static_cast<char>(kVersion);
  const std::string cfg = config_to_json(params.config).dump();
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  std::uint32_t count = 0;
  params.for_each([&](const std::string&, const auto&) { ++count; });
  put_u32(out, count);
  params.for_each([&](const std::string& name, const auto& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const bool vector = t.cols() == 1 && name.ends_with("bias");
    put_u32(out, vector ? 1 : 2);
    put_u64(out, static_cast<std::uint64_t>(t.rows()));
    if (!vector) put_u64(out, static_cast<std::uint64_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(t(i, j))));
    }
  });
  write_file_atomic(path, out);
}

LmParameters load_checkpoint(const fs::path& path) {
  const std::string data = read_file(path);
  Reader in(data, path.string());
  if (in.bytes(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) in.fail("not a GAPLM checkpoint");
  const auto version = in.uint(1);
  if (version != kVersion) in.fail("unsupported format version " + std::to_string(version));
  const auto cfg_len = in.uint(4);
  LmConfig config;
  try {
    config = config_from_json(nlohmann::json::parse(in.bytes(cfg_len)));
    config.validate(true);
  } catch (const std::exception& e) {
    in.fail(std::string("bad config record: ") + e.what());
  }
  LmParameters params = zero_params<float>(config);
  std::uint32_t expected = 0;
  params.for_each([&](const std::string&, const auto&) { ++expected; });
  if (in.uint(4) != expected) in.fail("tensor count does not match the config");
  params.for_each([&](const std::string& name, auto& t) {
    const auto name_len = in.uint(4);
    if (in.bytes(name_len) != name) in.fail("expected tensor '" + name + "'");
    const auto ndim = in.uint(4);
    const bool vector = t.cols() == 1 && name.ends_with("bias");
    if (ndim != (vector ? 1u : 2u)) in.fail("tensor '" + name + "' has the wrong rank");
    const auto rows = in.uint(8);
    const auto cols = vector ? 1 : in.uint(8);
    if (rows != static_cast<std::uint64_t>(t.rows()) || cols != static_cast<std::uint64_t>(t.cols())) {
      in.fail("tensor '" + name + "' has the wrong shape");
    }
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        const float v = std::bit_cast<float>(static_cast<std::uint32_t>(in.uint(4)));
        if (!std::isfinite(v)) in.fail("tensor '" + name + "' holds a non-finite value");
        t(i, j) = v;
      }
    }
  });
  if (!in.done()) in.fail("trailing bytes");
  return params;
}

}  // namespace gaplab::lm
