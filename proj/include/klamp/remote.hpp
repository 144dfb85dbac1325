// Copyright 2026 The klamp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KLAMP_REMOTE_HPP
#define KLAMP_REMOTE_HPP

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "klamp/embedder.hpp"
#include "klamp/suggester.hpp"

namespace klamp {

// "http://host:port/path" split into what httplib needs.
struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;

  static Endpoint parse(const std::string &url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) {
      throw InvalidInput("endpoint needs a scheme: " + url);
    }
    if (url.compare(0, scheme, "http") != 0) {
      throw InvalidInput("only http endpoints are supported: " + url);
    }
    auto slash = url.find('/', scheme + 3);
    Endpoint e;
    e.origin = url.substr(0, slash);
    e.path = slash == std::string::npos ? "/" : url.substr(slash);
    return e;
  }
};

// POSTs JSON with bounded concurrency and exponential backoff between
// attempts. Throws BackendUnavailable once every attempt failed.
class JsonHttpClient {
 public:
  JsonHttpClient(const std::string &url, int timeout_ms, int max_retries,
                 int max_in_flight)
      : endpoint_(Endpoint::parse(url)),
        timeout_ms_(timeout_ms),
        max_retries_(std::max(0, max_retries)),
        slots_(std::make_shared<std::counting_semaphore<>>(
            std::max(1, max_in_flight))) {}

  Json post(const Json &body) const {
    slots_->acquire();
    struct Release {
      std::counting_semaphore<> *s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    const std::string payload = body.dump();
    std::string last_error;
    int backoff_ms = kBaseBackoffMs;
    const int attempts = max_retries_ + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      httplib::Client client(endpoint_.origin);
      auto timeout = std::chrono::milliseconds(timeout_ms_);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      auto res = client.Post(endpoint_.path, payload, "application/json");
      if (res && res->status == 200) {
        try {
          return Json::parse(res->body);
        } catch (const Json::exception &e) {
          throw BackendUnavailable(
              "backend returned invalid JSON: " + std::string(e.what()),
              attempt, 0);
        }
      }
      last_error = res ? "HTTP " + std::to_string(res->status)
                       : httplib::to_string(res.error());
      // Client errors will not improve on retry.
      if (res && res->status >= 400 && res->status < 500) {
        throw BackendUnavailable(endpoint_.origin + endpoint_.path + ": " +
                                     last_error,
                                 attempt, 0);
      }
      if (attempt < attempts) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
      }
    }
    throw BackendUnavailable(
        endpoint_.origin + endpoint_.path + ": " + last_error, attempts,
        backoff_ms);
  }

 private:
  static constexpr int kBaseBackoffMs = 100;

  Endpoint endpoint_;
  int timeout_ms_;
  int max_retries_;
  std::shared_ptr<std::counting_semaphore<>> slots_;
};

// Remote embedding service: POST {"texts": [...]} returning
// {"embeddings": [[...], ...]}. Vectors are re-normalized on receipt.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(const EmbedderConfig &cfg)
      : dim_(cfg.dim),
        client_((cfg.validate(), *cfg.endpoint), cfg.timeout_ms,
                cfg.max_retries, cfg.max_in_flight) {}

  size_t dim() const override { return dim_; }

  Embedding embed(std::string_view text) const override {
    return embed_batch({std::string(text)}).front();
  }

  std::vector<Embedding> embed_batch(
      const std::vector<std::string> &texts) const override {
    Json reply = client_.post(Json{{"texts", texts}});
    auto it = reply.find("embeddings");
    if (it == reply.end() || !it->is_array() || it->size() != texts.size()) {
      throw BackendUnavailable("embedding reply has wrong shape", 1, 0);
    }
    std::vector<Embedding> out;
    for (const auto &row : *it) {
      Embedding e;
      e.values = row.get<std::vector<double>>();
      if (e.dim() != dim_) {
        throw BackendUnavailable("embedding dimension " +
                                     std::to_string(e.dim()) + " != " +
                                     std::to_string(dim_),
                                 1, 0);
      }
      out.push_back(normalized(std::move(e)));
    }
    return out;
  }

 private:
  size_t dim_;
  JsonHttpClient client_;
};

inline std::unique_ptr<Embedder> make_embedder(const EmbedderConfig &cfg) {
  cfg.validate();
  if (cfg.backend == EmbedderBackend::kRemote) {
    return std::make_unique<RemoteEmbedder>(cfg);
  }
  return std::make_unique<HashingEmbedder>(cfg.dim);
}

enum class GeneratorBackend { kMock, kRemoteChat };

struct GeneratorConfig {
  GeneratorBackend backend = GeneratorBackend::kMock;
  std::optional<std::string> endpoint;
  int timeout_ms = 60000;
  int max_retries = 2;
  int max_in_flight = 4;

  void validate() const {
    if (backend == GeneratorBackend::kRemoteChat &&
        (!endpoint || endpoint->empty())) {
      throw InvalidInput("remote chat backend requires an endpoint");
    }
  }
};

// Remote chat service: POST {"system", "user", "temperature", "top_p"}
// (plus "max_tokens" when a limit is set) returning {"text": string}.
class RemoteChatGenerator final : public Generator {
 public:
  explicit RemoteChatGenerator(const GeneratorConfig &cfg)
      : client_((cfg.validate(), *cfg.endpoint), cfg.timeout_ms,
                cfg.max_retries, cfg.max_in_flight) {}

  static Json request_body(const ChatRequest &req) {
    Json body{{"system", req.system},
              {"user", req.user},
              {"temperature", req.params.temperature},
              {"top_p", req.params.top_p}};
    if (req.params.max_output_tokens > 0) {
      body["max_tokens"] = req.params.max_output_tokens;
    }
    return body;
  }

  std::string complete(const ChatRequest &req) const override {
    Json reply = client_.post(request_body(req));
    auto it = reply.find("text");
    if (it == reply.end() || !it->is_string()) {
      throw BackendUnavailable("chat reply has no 'text' field", 1, 0);
    }
    return it->get<std::string>();
  }

 private:
  JsonHttpClient client_;
};

inline std::unique_ptr<Generator> make_generator(const GeneratorConfig &cfg) {
  cfg.validate();
  if (cfg.backend == GeneratorBackend::kRemoteChat) {
    return std::make_unique<RemoteChatGenerator>(cfg);
  }
  return std::make_unique<MockGenerator>();
}

}  // namespace klamp

#endif  // KLAMP_REMOTE_HPP
