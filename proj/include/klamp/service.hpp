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

#ifndef KLAMP_SERVICE_HPP
#define KLAMP_SERVICE_HPP

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "httplib.h"
#include "klamp/config.hpp"
#include "klamp/core.hpp"
#include "klamp/embedder.hpp"
#include "klamp/linker.hpp"
#include "klamp/retrieval.hpp"
#include "klamp/store.hpp"
#include "klamp/suggester.hpp"

namespace klamp {

struct HttpRequest {
  std::string method;
  std::string path;  // already percent-decoded
  std::map<std::string, std::string> params;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  Json body;
};

inline HttpResponse error_response(int status, std::string_view code,
                                   std::string_view message,
                                   Json detail = Json::object()) {
  return {status, Json{{"code", code},
                       {"message", message},
                       {"detail", std::move(detail)}}};
}

struct SuggestRequest {
  UserId user;
  std::string query;
  std::optional<WebPage> page;
  std::vector<std::string> session_history;
  Variant variant = Variant::kKlamp;
  Strategy strategy = Strategy::kCombined;
  std::optional<std::uint64_t> seed;
  std::optional<Timestamp> now;
};

// Reads the request body; the user comes from the path.
inline SuggestRequest parse_suggest_request(const UserId &user,
                                            const Json &j) {
  if (!j.is_object()) throw InvalidInput("request body must be an object");
  SuggestRequest r;
  r.user = user;
  r.query = j.at("query").get<std::string>();
  if (trim(r.query).empty()) throw InvalidInput("query must be non-empty");
  if (auto it = j.find("page"); it != j.end() && !it->is_null()) {
    r.page = it->get<WebPage>();
  }
  if (auto it = j.find("session_history"); it != j.end()) {
    r.session_history = it->get<std::vector<std::string>>();
  }
  if (auto it = j.find("variant"); it != j.end()) {
    r.variant = parse_variant(it->get<std::string>());
  }
  if (auto it = j.find("strategy"); it != j.end()) {
    r.strategy = parse_strategy(it->get<std::string>());
  }
  if (auto it = j.find("seed"); it != j.end()) r.seed = it->get<std::uint64_t>();
  if (auto it = j.find("now"); it != j.end()) r.now = it->get<Timestamp>();
  return r;
}

struct PipelineBackends {
  std::shared_ptr<const EntityLinker> linker;
  std::shared_ptr<const Embedder> embedder;
  std::shared_ptr<const Generator> generator;
  PromptTemplates templates = PromptTemplates::defaults();
};

struct SuggestResult {
  Suggestion suggestion;
  std::optional<RetrievedKnowledge> knowledge;
};

// One suggestion end to end: link the context, retrieve knowledge for the
// variant, build the prompt, generate and parse. `default_now` is used when
// the request carries no time.
inline SuggestResult suggest_from_stores(const SuggestRequest &req,
                                         const EntityKnowledgeStore &store,
                                         const MemoryStream &stream,
                                         const AppConfig &cfg,
                                         const PipelineBackends &be,
                                         Timestamp default_now) {
  if (variant_needs_page(req.variant) && !req.page) {
    throw InvalidInput(std::string("variant ") + variant_name(req.variant) +
                       " requires a page");
  }
  SearchContext ctx;
  ctx.current_query = req.query;
  ctx.session_history = req.session_history;
  ctx.current_page = req.page;
  RetrievalConfig rcfg = cfg.retrieval;
  if (req.seed) rcfg.rng_seed = *req.seed;
  const Timestamp now = req.now.value_or(default_now);

  SuggestResult out;
  if (req.variant == Variant::kKlamp) {
    if (req.strategy == Strategy::kHistory) {
      throw InvalidInput("variant klamp needs an entity strategy");
    }
    auto ctx_entities = link_context(ctx, *be.linker, cfg.link);
    out.knowledge =
        retrieve_entities(req.strategy, ctx_entities, store, rcfg, now);
  } else if (req.variant == Variant::kCqsKs) {
    RetrievedKnowledge k;
    k.strategy = Strategy::kHistory;
    rcfg.history_top_k = 1;
    k.pages = retrieve_history(ctx, stream, *be.embedder, rcfg,
                               cfg.embedder.max_body_chars);
    out.knowledge = std::move(k);
  }
  auto bundle = build_prompt(req.variant, ctx,
                             out.knowledge ? &*out.knowledge : nullptr,
                             be.templates, cfg.prompt);
  out.suggestion = generate(bundle, cfg.generation, *be.generator);
  return out;
}

inline void to_json(Json &j, const SuggestResult &r) {
  j = Json{{"suggestion", r.suggestion},
           {"knowledge", r.knowledge ? Json(*r.knowledge) : Json(nullptr)}};
}

// Live pipeline behind the HTTP API. Each user has an append-only event log
// (records and entity removals, one JSON object per line) in the store
// directory, plus a periodic snapshot of the entity store tagged with the
// number of log lines it covers. Startup loads the snapshot and replays the
// rest of the log. Writes to one user are serialized by a per-user mutex;
// an event is fsynced before it is acknowledged.
class Service {
 public:
  using Backends = PipelineBackends;

  Service(AppConfig cfg, Backends backends)
      : cfg_(std::move(cfg)), be_(std::move(backends)) {
    std::error_code ec;
    fs::create_directories(cfg_.store_dir, ec);
    if (ec || !fs::is_directory(cfg_.store_dir)) {
      throw StorageFailure("store directory not usable: " +
                           cfg_.store_dir.string());
    }
    if (cfg_.pages) pages_ = load_pages(*cfg_.pages);
    recover();
  }

  ~Service() {
    try {
      snapshot_all();
    } catch (...) {
    }
  }

  Service(const Service &) = delete;
  Service &operator=(const Service &) = delete;

  // --- Direct API -------------------------------------------------------

  void post_event(const SearchRecord &record) {
    auto &state = user_state(record.user, true);
    std::lock_guard lock(state.mu);
    append_log(record.user, Json(record).dump());
    apply_record(state, record);
    ++state.log_lines;
    maybe_snapshot(state);
  }

  // Returns true if the entity was present.
  bool remove_entity(const UserId &user, const EntityId &entity) {
    auto *state = find_user(user);
    if (state == nullptr) return false;
    std::lock_guard lock(state->mu);
    if (state->store.find(entity) == nullptr) return false;
    append_log(user, Json{{"op", "remove"}, {"entity", entity}}.dump());
    state->store.remove(entity);
    ++state->log_lines;
    maybe_snapshot(*state);
    return true;
  }

  bool has_user(const UserId &user) const { return find_user(user) != nullptr; }

  EntityKnowledgeStore store_of(const UserId &user) const {
    auto *state = find_user(user);
    if (state == nullptr) return EntityKnowledgeStore(user);
    std::lock_guard lock(state->mu);
    return state->store;
  }

  MemoryStream stream_of(const UserId &user) const {
    auto *state = find_user(user);
    if (state == nullptr) return MemoryStream{user, {}};
    std::lock_guard lock(state->mu);
    return state->stream;
  }

  std::vector<UserId> users() const {
    std::lock_guard lock(users_mu_);
    std::vector<UserId> out;
    for (const auto &[u, s] : users_) out.push_back(u);
    return out;
  }

  SuggestResult suggest(const SuggestRequest &req) const {
    return suggest_from_stores(req, store_of(req.user), stream_of(req.user),
                               cfg_, be_, wall_clock());
  }

  UserSummary summary(const UserId &user) const {
    return summarize_user(store_of(user), *be_.generator, cfg_.generation,
                          be_.templates);
  }

  void snapshot_all() {
    std::vector<UserState *> states;
    {
      std::lock_guard lock(users_mu_);
      for (auto &[u, s] : users_) states.push_back(s.get());
    }
    for (auto *s : states) {
      std::lock_guard lock(s->mu);
      write_snapshot(*s);
    }
  }

  // --- HTTP -------------------------------------------------------------

  HttpResponse handle(const HttpRequest &req) {
    try {
      return route(req);
    } catch (const ParseFailure &e) {
      return error_response(424, "ParseFailure", e.what(),
                            Json{{"raw_output", e.raw_output()}});
    } catch (const BackendUnavailable &e) {
      return error_response(502, "BackendUnavailable", e.what(),
                            Json{{"attempts", e.attempts()},
                                 {"retry_after_ms", e.retry_after_ms()}});
    } catch (const MissingKnowledge &e) {
      return error_response(422, "MissingKnowledge", e.what());
    } catch (const EmptyStore &e) {
      return error_response(409, "EmptyStore", e.what());
    } catch (const StorageFailure &e) {
      return error_response(500, "StorageFailure", e.what());
    } catch (const Error &e) {
      return error_response(400, error_code_name(e.code()), e.what());
    } catch (const Json::exception &e) {
      return error_response(400, "InvalidInput", e.what());
    } catch (const std::exception &e) {
      return error_response(500, "Internal", e.what());
    }
  }

  // Routes every endpoint on an httplib server.
  void bind(httplib::Server &server) {
    auto forward = [this](const httplib::Request &in, httplib::Response &res) {
      HttpRequest req;
      req.method = in.method;
      req.path = in.path;
      req.body = in.body;
      for (const auto &[k, v] : in.params) req.params[k] = v;
      auto out = handle(req);
      res.status = out.status;
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_content(out.body.dump(), "application/json");
    };
    server.Get(R"(/.*)", forward);
    server.Post(R"(/.*)", forward);
    server.Delete(R"(/.*)", forward);
    server.Options(R"(/.*)", [](const httplib::Request &, httplib::Response &res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
  }

  const AppConfig &config() const { return cfg_; }

 private:
  struct UserState {
    explicit UserState(const UserId &u) : stream{u, {}}, store(u) {}
    mutable std::mutex mu;
    MemoryStream stream;
    EntityKnowledgeStore store;
    size_t log_lines = 0;
    size_t snapshot_lines = 0;
  };

  static Timestamp wall_clock() {
    return static_cast<Timestamp>(std::time(nullptr));
  }

  static std::vector<WebPage> load_pages(const fs::path &path) {
    std::vector<WebPage> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (!trim(line).empty()) out.push_back(Json::parse(line).get<WebPage>());
    }
    return out;
  }

  fs::path log_path(const UserId &u) const {
    return cfg_.store_dir / (encode_file_key(u.str()) + ".events.jsonl");
  }
  fs::path snapshot_path(const UserId &u) const {
    return cfg_.store_dir / (encode_file_key(u.str()) + ".snapshot.json");
  }
  fs::path store_path(const UserId &u) const {
    return cfg_.store_dir / (encode_file_key(u.str()) + ".store.json");
  }

  UserState *find_user(const UserId &u) const {
    std::lock_guard lock(users_mu_);
    auto it = users_.find(u);
    return it == users_.end() ? nullptr : it->second.get();
  }

  UserState &user_state(const UserId &u, bool create) {
    std::lock_guard lock(users_mu_);
    auto it = users_.find(u);
    if (it != users_.end()) return *it->second;
    if (!create) throw NotFound("unknown user " + u.str());
    return *users_.emplace(u, std::make_unique<UserState>(u)).first->second;
  }

  void apply_record(UserState &state, const SearchRecord &record) {
    state.stream.append(record);
    state.store.observe(record, *be_.linker, cfg_.link);
  }

  void append_log(const UserId &u, const std::string &line) {
    const std::string path = log_path(u).string();
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw StorageFailure("cannot open event log " + path);
    std::string data = line + "\n";
    const char *p = data.data();
    size_t left = data.size();
    bool ok = true;
    while (left > 0) {
      ssize_t n = ::write(fd, p, left);
      if (n <= 0) {
        ok = false;
        break;
      }
      p += n;
      left -= static_cast<size_t>(n);
    }
    ok = ok && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw StorageFailure("cannot append to event log " + path);
  }

  void maybe_snapshot(UserState &state) {
    if (cfg_.snapshot_every > 0 &&
        state.log_lines - state.snapshot_lines >= cfg_.snapshot_every) {
      write_snapshot(state);
    }
  }

  void write_snapshot(UserState &state) {
    if (state.snapshot_lines == state.log_lines && state.log_lines > 0 &&
        fs::exists(snapshot_path(state.store.user()))) {
      return;
    }
    const auto &user = state.store.user();
    Json snap{{"log_lines", state.log_lines}, {"store", state.store}};
    write_file_atomic(snapshot_path(user), snap.dump());
    write_file_atomic(store_path(user), Json(state.store).dump(2));
    state.snapshot_lines = state.log_lines;
  }

  void recover() {
    for (const auto &entry : fs::directory_iterator(cfg_.store_dir)) {
      const std::string name = entry.path().filename().string();
      static constexpr std::string_view kSuffix = ".events.jsonl";
      if (!name.ends_with(kSuffix)) continue;
      UserId user(decode_file_key(
          std::string_view(name).substr(0, name.size() - kSuffix.size())));
      auto &state = user_state(user, true);
      size_t covered = 0;
      if (fs::exists(snapshot_path(user))) {
        auto snap = Json::parse(read_file(snapshot_path(user)));
        covered = snap.at("log_lines").get<size_t>();
        state.store = snap.at("store").get<EntityKnowledgeStore>();
      }
      std::istringstream in(read_file(entry.path()));
      std::string line;
      size_t lineno = 0;
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        Json j;
        try {
          j = Json::parse(line);
        } catch (const Json::exception &) {
          // A torn final write from a crash was never acknowledged.
          break;
        }
        ++lineno;
        if (j.contains("op")) {
          if (lineno > covered) state.store.remove(j.at("entity").get<EntityId>());
          continue;
        }
        auto record = j.get<SearchRecord>();
        state.stream.append(record);
        if (lineno > covered) state.store.observe(record, *be_.linker, cfg_.link);
      }
      state.log_lines = lineno;
      state.snapshot_lines = covered;
    }
  }

  static std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < path.size()) {
      while (i < path.size() && path[i] == '/') ++i;
      size_t start = i;
      while (i < path.size() && path[i] != '/') ++i;
      if (i > start) out.emplace_back(path.substr(start, i - start));
    }
    return out;
  }

  HttpResponse route(const HttpRequest &req) {
    auto parts = split_path(req.path);
    const std::string &m = req.method;

    if (m == "GET" && parts.size() == 1 && parts[0] == "health") {
      return {200, Json{{"status", "ok"}}};
    }
    if (m == "POST" && parts.size() == 1 && parts[0] == "events") {
      SearchRecord record;
      try {
        record = Json::parse(req.body).get<SearchRecord>();
      } catch (const std::exception &e) {
        return error_response(400, "InvalidInput", e.what());
      }
      post_event(record);
      return {200, Json{{"accepted", true}}};
    }
    if (m == "GET" && parts.size() == 1 && parts[0] == "pages") {
      return {200, Json{{"pages", matching_pages(req)}}};
    }
    if (parts.size() >= 3 && parts[0] == "users") {
      const UserId user(parts[1]);
      if (m == "POST" && parts.size() == 3 && parts[2] == "suggest") {
        Json body;
        try {
          body = Json::parse(req.body);
        } catch (const Json::exception &e) {
          return error_response(400, "InvalidInput", e.what());
        }
        SuggestRequest sr;
        try {
          sr = parse_suggest_request(user, body);
        } catch (const std::exception &e) {
          return error_response(400, "InvalidInput", e.what());
        }
        SuggestResult result;
        try {
          result = suggest(sr);
        } catch (const InvalidInput &e) {
          return error_response(422, "InvalidInput", e.what());
        }
        return {200, Json(result)};
      }
      if (m == "GET" && parts.size() == 3 && parts[2] == "entities") {
        if (!has_user(user)) return unknown_user(user);
        size_t k = kSummaryEntities;
        if (auto it = req.params.find("k"); it != req.params.end()) {
          k = std::stoul(it->second);
        }
        Json list = Json::array();
        for (const auto &e : top_k_entities(store_of(user), k)) {
          list.push_back(e);
        }
        return {200, Json{{"user", user}, {"entities", std::move(list)}}};
      }
      if (m == "GET" && parts.size() == 3 && parts[2] == "summary") {
        if (!has_user(user)) return unknown_user(user);
        return {200, Json(summary(user))};
      }
      if (m == "DELETE" && parts.size() >= 4 && parts[2] == "entities") {
        std::vector<std::string> rest(parts.begin() + 3, parts.end());
        const EntityId entity(join(rest, "/"));
        bool removed = remove_entity(user, entity);
        return {200, Json{{"removed", removed}, {"entity", entity}}};
      }
    }
    return error_response(404, "NotFound", "no route for " + m + " " + req.path);
  }

  static HttpResponse unknown_user(const UserId &u) {
    return error_response(404, "NotFound", "unknown user " + u.str());
  }

  Json matching_pages(const HttpRequest &req) const {
    std::string q;
    if (auto it = req.params.find("q"); it != req.params.end()) {
      q = to_lower(trim(it->second));
    }
    Json out = Json::array();
    for (const auto &p : pages_) {
      if (q.empty() || to_lower(p.title + " " + p.body_text).find(q) !=
                           std::string::npos) {
        out.push_back(p);
      }
    }
    return out;
  }

  AppConfig cfg_;
  Backends be_;
  std::vector<WebPage> pages_;
  mutable std::mutex users_mu_;
  std::map<UserId, std::unique_ptr<UserState>> users_;
};

}  // namespace klamp

#endif  // KLAMP_SERVICE_HPP
