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


#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "klamp/remote.hpp"

namespace klamp {
namespace {

// Local HTTP server on an ephemeral port, stopped on destruction.
class MockServer {
 public:
  MockServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server &server() { return server_; }
  std::string url(const std::string &path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

int closed_port() {
  httplib::Server s;
  int port = s.bind_to_any_port("127.0.0.1");
  return port;  // socket closes with s
}

TEST(Endpoint, Parse) {
  auto e = Endpoint::parse("http://h:8080/v1/chat");
  EXPECT_EQ(e.origin, "http://h:8080");
  EXPECT_EQ(e.path, "/v1/chat");
  EXPECT_EQ(Endpoint::parse("http://h").path, "/");
  EXPECT_THROW(Endpoint::parse("h:80/x"), InvalidInput);
  EXPECT_THROW(Endpoint::parse("ftp://h/x"), InvalidInput);
}

TEST(RemoteEmbedder, PostsTextsAndNormalizes) {
  MockServer m;
  Json seen;
  m.server().Post("/embed", [&](const httplib::Request &req, httplib::Response &res) {
    seen = Json::parse(req.body);
    Json rows = Json::array();
    for (size_t i = 0; i < seen["texts"].size(); ++i) rows.push_back({3.0, 4.0});
    res.set_content(Json{{"embeddings", rows}}.dump(), "application/json");
  });
  EmbedderConfig cfg;
  cfg.backend = EmbedderBackend::kRemote;
  cfg.endpoint = m.url("/embed");
  cfg.dim = 2;
  auto emb = make_embedder(cfg);
  auto out = emb->embed_batch({"a", "b"});
  EXPECT_EQ(seen, Json::parse(R"({"texts":["a","b"]})"));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[0].values[0], 0.6, 1e-12);
  EXPECT_NEAR(out[0].values[1], 0.8, 1e-12);
  EXPECT_NEAR(emb->embed("x").norm(), 1.0, 1e-12);

  cfg.dim = 3;
  EXPECT_THROW(make_embedder(cfg)->embed("x"), BackendUnavailable);
}

TEST(RemoteChat, RequestBodyAndReply) {
  MockServer m;
  Json seen;
  m.server().Post("/chat", [&](const httplib::Request &req, httplib::Response &res) {
    seen = Json::parse(req.body);
    res.set_content(R"({"text":"Query Suggestion: Tim Cook's impact on Apple's product line\nRationale: r"})",
                    "application/json");
  });
  GeneratorConfig cfg;
  cfg.backend = GeneratorBackend::kRemoteChat;
  cfg.endpoint = m.url("/chat");
  auto gen = make_generator(cfg);
  ChatRequest req;
  req.system = "sys";
  req.user = "usr";
  auto text = gen->complete(req);
  EXPECT_EQ(seen, Json::parse(R"({"system":"sys","user":"usr","temperature":0.7,"top_p":0.95})"));
  EXPECT_EQ(parse_suggestion(text).query, "Tim Cook's impact on Apple's product line");

  req.params.max_output_tokens = 32;
  EXPECT_EQ(RemoteChatGenerator::request_body(req)["max_tokens"], 32);
}

TEST(RemoteChat, MissingTextField) {
  MockServer m;
  m.server().Post("/chat", [](const httplib::Request &, httplib::Response &res) {
    res.set_content(R"({"other":1})", "application/json");
  });
  GeneratorConfig cfg;
  cfg.backend = GeneratorBackend::kRemoteChat;
  cfg.endpoint = m.url("/chat");
  EXPECT_THROW(make_generator(cfg)->complete(ChatRequest{}), BackendUnavailable);
}

TEST(JsonHttpClient, RetriesServerErrors) {
  MockServer m;
  std::atomic<int> calls{0};
  m.server().Post("/x", [&](const httplib::Request &, httplib::Response &res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"ok":true})", "application/json");
  });
  JsonHttpClient client(m.url("/x"), 2000, 2, 1);
  EXPECT_EQ(client.post(Json::object())["ok"], true);
  EXPECT_EQ(calls.load(), 3);
}

TEST(JsonHttpClient, GivesUpWithMetadata) {
  MockServer m;
  std::atomic<int> calls{0};
  m.server().Post("/x", [&](const httplib::Request &, httplib::Response &res) {
    ++calls;
    res.status = 500;
  });
  JsonHttpClient client(m.url("/x"), 2000, 1, 1);
  try {
    client.post(Json::object());
    FAIL();
  } catch (const BackendUnavailable &e) {
    EXPECT_EQ(e.attempts(), 2);
    EXPECT_GT(e.retry_after_ms(), 0);
  }
  EXPECT_EQ(calls.load(), 2);
}

TEST(JsonHttpClient, ClientErrorsNotRetried) {
  MockServer m;
  std::atomic<int> calls{0};
  m.server().Post("/x", [&](const httplib::Request &, httplib::Response &res) {
    ++calls;
    res.status = 400;
  });
  JsonHttpClient client(m.url("/x"), 2000, 3, 1);
  EXPECT_THROW(client.post(Json::object()), BackendUnavailable);
  EXPECT_EQ(calls.load(), 1);
}

TEST(JsonHttpClient, ClosedPort) {
  JsonHttpClient client("http://127.0.0.1:" + std::to_string(closed_port()) + "/x", 500, 1, 1);
  try {
    client.post(Json::object());
    FAIL();
  } catch (const BackendUnavailable &e) {
    EXPECT_EQ(e.attempts(), 2);
    EXPECT_EQ(e.code(), ErrorCode::kBackendUnavailable);
  }
}

TEST(JsonHttpClient, BoundsInFlightRequests) {
  MockServer m;
  std::atomic<int> active{0}, peak{0};
  m.server().new_task_queue = [] { return new httplib::ThreadPool(8); };
  m.server().Post("/x", [&](const httplib::Request &, httplib::Response &res) {
    int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    --active;
    res.set_content("{}", "application/json");
  });
  JsonHttpClient client(m.url("/x"), 5000, 0, 2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&] { client.post(Json::object()); });
  }
  for (auto &t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(Factories, RequireEndpoints) {
  GeneratorConfig g;
  g.backend = GeneratorBackend::kRemoteChat;
  EXPECT_THROW(make_generator(g), InvalidInput);
  EXPECT_NE(dynamic_cast<MockGenerator *>(make_generator(GeneratorConfig{}).get()), nullptr);
  EmbedderConfig e;
  e.backend = EmbedderBackend::kRemote;
  EXPECT_THROW(make_embedder(e), InvalidInput);
}

}  // namespace
}  // namespace klamp
