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


#include "gaplab/client/client.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <httplib.h>

#include "gaplab/corpus/vocab.hpp"

namespace gaplab::client {

using nlohmann::json;

namespace {

std::string excerpt(std::string_view body) {
  constexpr std::size_t kMax = 200;
  std::string out(body.substr(0, kMax));
  if (body.size() > kMax) out += "...";
  return out;
}

std::string join(const std::vector<std::string>& pieces) {
  std::string s;
  for (const auto& p : pieces) s += p;
  return s;
}

}  // namespace

json make_request(const std::vector<std::string>& sentences) {
  return {{"sentences", sentences}, {"per_token", true}};
}

std::vector<ScoreResponse> parse_response(std::string_view body, std::size_t expected) {
  const auto bad = [&](const std::string& what) -> MalformedResponseError {
    return MalformedResponseError("malformed score response (" + what + "): " + excerpt(body));
  };
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    throw bad("not JSON");
  }
  if (!doc.is_object() || !doc.contains("results") || !doc["results"].is_array()) throw bad("no results array");
  std::string model;
  if (doc.contains("model")) {
    if (!doc["model"].is_string()) throw bad("model is not a string");
    model = doc["model"].get<std::string>();
  }
  const auto& results = doc["results"];
  if (results.size() != expected) {
    throw bad("expected " + std::to_string(expected) + " results, got " + std::to_string(results.size()));
  }
  std::vector<ScoreResponse> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const std::string where = "result " + std::to_string(i);
    if (!r.is_object() || !r.contains("tokens") || !r.contains("logprobs") || !r["tokens"].is_array() ||
        !r["logprobs"].is_array()) {
      throw bad(where + " lacks tokens/logprobs arrays");
    }
    if (r["tokens"].size() != r["logprobs"].size()) throw bad(where + " has unequal tokens/logprobs lengths");
    ScoreResponse resp;
    resp.model = model;
    for (std::size_t k = 0; k < r["tokens"].size(); ++k) {
      const auto& t = r["tokens"][k];
      const auto& lp = r["logprobs"][k];
      if (!t.is_string()) throw bad(where + " token " + std::to_string(k) + " is not a string");
      resp.tokens.push_back(t.get<std::string>());
      if (lp.is_null()) {
        resp.logprobs.emplace_back();
      } else if (lp.is_number() && std::isfinite(lp.get<double>()) && lp.get<double>() <= 0.0) {
        resp.logprobs.emplace_back(lp.get<double>());
      } else {
        throw bad(where + " logprob " + std::to_string(k) + " is not a number <= 0 or null");
      }
    }
    out.push_back(std::move(resp));
  }
  return out;
}

namespace {

std::vector<ScoreResponse> post_chunk(const std::string& endpoint, const std::vector<std::string>& sentences,
                                      const ClientOptions& options) {
  const std::string body = make_request(sentences).dump();
  const httplib::Headers headers = {{kProtoHeader, kProtoVersion}};
  auto backoff = options.initial_backoff;
  std::string last_error;
  for (std::size_t attempt = 1; attempt <= options.attempts; ++attempt) {
    httplib::Client cli(endpoint);
    cli.set_connection_timeout(options.timeout);
    cli.set_read_timeout(options.timeout);
    cli.set_write_timeout(options.timeout);
    const auto res = cli.Post(kScorePath, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      const auto version = res->get_header_value(kProtoHeader);
      if (version != kProtoVersion) {
        throw ProtocolError("score service at " + endpoint + " speaks protocol '" + version + "', expected '" +
                            kProtoVersion + "'");
      }
      if (res->status != 200) {
        throw ProtocolError("score service at " + endpoint + " answered HTTP " + std::to_string(res->status) +
                            ": " + excerpt(res->body));
      }
      auto out = parse_response(res->body, sentences.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (join(out[i].tokens) != sentences[i]) {
          throw MalformedResponseError("result " + std::to_string(i) + " does not reconstruct its sentence '" +
                                       sentences[i] + "': " + excerpt(res->body));
        }
      }
      return out;
    }
    if (attempt < options.attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, options.max_backoff);
    }
  }
  throw ConnectionError("score service at " + endpoint + " failed after " + std::to_string(options.attempts) +
                        " attempts: " + last_error);
}

}  // namespace

std::vector<ScoreResponse> score_remote(const std::string& endpoint, const std::vector<std::string>& sentences,
                                        const ClientOptions& options) {
  if (options.attempts < 1 || options.sentences_per_request < 1 || options.max_in_flight < 1) {
    throw ConfigError("client options: attempts, sentences_per_request and max_in_flight must be >= 1");
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].empty()) throw ConfigError("sentence " + std::to_string(i) + " is empty");
  }
  const std::size_t per = options.sentences_per_request;
  const std::size_t chunks = (sentences.size() + per - 1) / per;
  std::vector<std::vector<ScoreResponse>> results(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t c; (c = next++) < chunks;) {
      const auto first = sentences.begin() + static_cast<std::ptrdiff_t>(c * per);
      const auto last = sentences.begin() + static_cast<std::ptrdiff_t>(std::min(sentences.size(), (c + 1) * per));
      try {
        results[c] = post_chunk(endpoint, {first, last}, options);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t threads = std::min(options.max_in_flight, chunks);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<ScoreResponse> out;
  out.reserve(sentences.size());
  for (auto& chunk : results) {
    for (auto& r : chunk) out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

WordAlignment align(const Tokens& words, const std::vector<std::string>& pieces) {
  const std::string sentence = corpus::detokenize(words);
  // word_of[c] is the word holding character c, or -1 for a separator.
  std::vector<long> word_of(sentence.size(), -1);
  {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words.size(); ++w) {
      for (std::size_t k = 0; k < words[w].size(); ++k) word_of[c++] = static_cast<long>(w);
      ++c;
    }
  }
  WordAlignment out;
  out.ranges.assign(words.size(), Span{});
  std::vector<bool> seen(words.size(), false);
  std::size_t pos = 0;
  long current = -1;
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    const auto& piece = pieces[p];
    for (std::size_t k = 0; k < piece.size(); ++k) {
      if (pos + k >= sentence.size() || sentence[pos + k] != piece[k]) {
        throw AlignmentError("piece " + std::to_string(p) + " '" + piece +
                                 "' does not match the sentence at character offset " + std::to_string(pos + k),
                             pos + k);
      }
    }
    long word = -1;
    for (std::size_t k = 0; k < piece.size(); ++k) {
      const long w = word_of[pos + k];
      if (w < 0) continue;
      if (word >= 0 && w != word) {
        throw AlignmentError("piece " + std::to_string(p) + " '" + piece +
                                 "' straddles two words at character offset " + std::to_string(pos + k),
                             pos + k);
      }
      word = w;
    }
    // A separator-only piece belongs to the word that follows it.
    if (word < 0) word = current + 1;
    if (word < current || word >= static_cast<long>(words.size())) {
      throw AlignmentError("piece " + std::to_string(p) + " lies outside the words at character offset " +
                               std::to_string(pos),
                           pos);
    }
    const auto w = static_cast<std::size_t>(word);
    if (!seen[w]) {
      if (word != current + 1) {
        throw AlignmentError("word " + std::to_string(current + 1) + " has no piece (character offset " +
                                 std::to_string(pos) + ")",
                             pos);
      }
      seen[w] = true;
      out.ranges[w].begin = p;
    }
    out.ranges[w].end = p + 1;
    current = word;
    pos += piece.size();
  }
  if (pos != sentence.size() || current + 1 != static_cast<long>(words.size())) {
    throw AlignmentError("pieces end at character offset " + std::to_string(pos) + " of " +
                             std::to_string(sentence.size()),
                         pos);
  }
  return out;
}

std::vector<double> align_subwords(const Tokens& words, const ScoreResponse& response) {
  if (response.tokens.size() != response.logprobs.size()) {
    throw MalformedResponseError("response has " + std::to_string(response.tokens.size()) + " tokens but " +
                                 std::to_string(response.logprobs.size()) + " logprobs");
  }
  const auto alignment = align(words, response.tokens);
  std::vector<double> bits;
  bits.reserve(words.size());
  for (const auto& r : alignment.ranges) {
    double nats = 0.0;
    for (std::size_t p = r.begin; p < r.end; ++p) {
      nats += response.logprobs[p] ? -*response.logprobs[p] : std::nan("");
    }
    bits.push_back(nats / std::numbers::ln2);
  }
  return bits;
}

scoring::BatchScorer remote_scorer(const std::string& endpoint, const ClientOptions& options) {
  return [endpoint, options](const std::vector<Tokens>& sentences) {
    std::vector<std::string> text;
    text.reserve(sentences.size());
    for (const auto& s : sentences) text.push_back(corpus::detokenize(s));
    const auto responses = score_remote(endpoint, text, options);
    std::vector<std::vector<double>> out;
    out.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) out.push_back(align_subwords(sentences[i], responses[i]));
    return out;
  };
}

// ---------------------------------------------------------------------------

struct MockScoreServer::Impl {
  WordLogprobs word_logprobs;
  std::string model;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mutex;
  Faults faults;
  std::size_t requests = 0;
  std::atomic<std::size_t> in_flight{0};
  std::atomic<std::size_t> max_in_flight{0};

  void handle(const httplib::Request& req, httplib::Response& res);
};

void MockScoreServer::Impl::handle(const httplib::Request& req, httplib::Response& res) {
  const std::size_t now = ++in_flight;
  for (std::size_t seen = max_in_flight; now > seen && !max_in_flight.compare_exchange_weak(seen, now);) {
  }
  // Hold the request briefly so concurrent clients overlap.
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  Faults f;
  std::size_t index;
  {
    std::lock_guard lock(mutex);
    f = faults;
    index = requests++;
  }
  const auto finish = [&] { --in_flight; };
  res.set_header(kProtoHeader, f.wrong_version ? "2" : kProtoVersion);
  if (index < f.fail_first) {
    res.status = 503;
    res.set_content(R"({"error":"loading"})", "application/json");
    return finish();
  }
  if (req.get_header_value(kProtoHeader) != kProtoVersion) {
    res.status = 400;
    res.set_content(R"({"error":"protocol version"})", "application/json");
    return finish();
  }
  if (f.malformed) {
    res.set_content("{\"results\": [", "application/json");
    return finish();
  }
  json doc;
  try {
    doc = json::parse(req.body);
    if (!doc.at("sentences").is_array()) throw std::runtime_error("sentences");
  } catch (const std::exception&) {
    res.status = 400;
    res.set_content(R"({"error":"malformed request"})", "application/json");
    return finish();
  }
  json results = json::array();
  for (const auto& s : doc["sentences"]) {
    Tokens words;
    const auto text = s.get<std::string>();
    for (std::size_t a = 0; a <= text.size();) {
      const auto b = std::min(text.find(' ', a), text.size());
      words.push_back(text.substr(a, b - a));
      a = b + 1;
    }
    const auto lp = word_logprobs(words);
    json tokens = json::array(), logprobs = json::array();
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto pieces = split(words[w]);
      for (std::size_t k = 0; k < pieces.size(); ++k) {
        tokens.push_back((w > 0 && k == 0 ? " " : "") + pieces[k].first);
        if (w == 0 && k == 0) {
          logprobs.push_back(nullptr);
        } else {
          logprobs.push_back(lp.at(w) * pieces[k].second);
        }
      }
    }
    results.push_back({{"tokens", tokens}, {"logprobs", logprobs}});
  }
  if (f.reverse_results) std::reverse(results.begin(), results.end());
  res.set_content(json{{"model", model}, {"results", results}}.dump(), "application/json");
  finish();
}

MockScoreServer::MockScoreServer(WordLogprobs word_logprobs, std::string model) : impl_(std::make_unique<Impl>()) {
  impl_->word_logprobs = std::move(word_logprobs);
  impl_->model = std::move(model);
  impl_->server.new_task_queue = [] { return new httplib::ThreadPool(8); };
  impl_->server.Post(kScorePath, [this](const httplib::Request& req, httplib::Response& res) { impl_->handle(req, res); });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw IoError("mock score server: cannot bind a local port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockScoreServer::~MockScoreServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::vector<std::pair<std::string, double>> MockScoreServer::split(const std::string& word) {
  if (word.size() <= 4) return {{word, 1.0}};
  return {{word.substr(0, 3), 0.25}, {word.substr(3), 0.75}};
}

void MockScoreServer::set_faults(const Faults& faults) {
  std::lock_guard lock(impl_->mutex);
  impl_->faults = faults;
  impl_->requests = 0;
}

std::string MockScoreServer::endpoint() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

std::size_t MockScoreServer::requests() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->requests;
}

std::size_t MockScoreServer::max_concurrent() const { return impl_->max_in_flight; }

}  // namespace gaplab::client
