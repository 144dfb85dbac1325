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

#ifndef KLAMP_CONFIG_HPP
#define KLAMP_CONFIG_HPP

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "klamp/core.hpp"
#include "klamp/evaluator.hpp"
#include "klamp/ingest.hpp"
#include "klamp/linker.hpp"
#include "klamp/remote.hpp"
#include "klamp/retrieval.hpp"
#include "klamp/suggester.hpp"

namespace klamp {

namespace fs = std::filesystem;

// Everything the CLI and the service read from the JSON config file. Paths
// are resolved against the directory holding the config file.
struct AppConfig {
  fs::path base_dir;
  fs::path gazetteer;
  std::optional<fs::path> allowlist;
  std::optional<fs::path> events;
  std::optional<fs::path> search_corpus;
  std::optional<fs::path> pages;
  std::optional<fs::path> prompts_dir;
  fs::path work_dir = "out";
  fs::path store_dir = "out/stores";
  std::string listen = "127.0.0.1:8080";
  size_t snapshot_every = 100;

  IngestConfig ingest;
  RetrievalConfig retrieval;
  GenerationParams generation;
  EmbedderConfig embedder;
  GeneratorConfig generator;
  LinkOptions link;
  PromptOptions prompt;

  fs::path datasets_path() const { return work_dir / "datasets.json"; }
};

// Parses "90", "45s", "30m", "12h" or "7d" into seconds.
inline Seconds parse_duration(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw InvalidInput("empty duration");
  Seconds unit = 1;
  switch (text.back()) {
    case 's': unit = 1; text.remove_suffix(1); break;
    case 'm': unit = 60; text.remove_suffix(1); break;
    case 'h': unit = 3600; text.remove_suffix(1); break;
    case 'd': unit = kDay; text.remove_suffix(1); break;
    case 'w': unit = 7 * kDay; text.remove_suffix(1); break;
    default: break;
  }
  if (text.empty() ||
      !std::all_of(text.begin(), text.end(),
                   [](char c) { return c >= '0' && c <= '9'; })) {
    throw InvalidInput("bad duration: " + std::string(text));
  }
  return std::stoll(std::string(text)) * unit;
}

namespace detail {

template <typename T>
void read_opt(const Json &j, const char *key, T &out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    out = it->get<T>();
  }
}

inline void read_duration(const Json &j, const char *key, Seconds &out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  out = it->is_string() ? parse_duration(it->get<std::string>())
                        : it->get<Seconds>();
}

}  // namespace detail

inline AppConfig parse_app_config(const Json &j, const fs::path &base_dir) {
  AppConfig c;
  c.base_dir = base_dir;
  auto path = [&](const char *key) -> std::optional<fs::path> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    fs::path p = it->get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  auto gaz = path("gazetteer");
  if (!gaz) throw InvalidInput("config: 'gazetteer' is required");
  c.gazetteer = *gaz;
  c.allowlist = path("allowlist");
  c.events = path("events");
  c.search_corpus = path("search_corpus");
  c.pages = path("pages");
  c.prompts_dir = path("prompts_dir");
  c.work_dir = path("work_dir").value_or(base_dir / "out");
  c.store_dir = path("store_dir").value_or(c.work_dir / "stores");
  detail::read_opt(j, "listen", c.listen);

  if (auto it = j.find("ingest"); it != j.end()) {
    detail::read_duration(*it, "session_gap_seconds",
                          c.ingest.session_gap_seconds);
    detail::read_opt(*it, "min_visitations", c.ingest.min_visitations);
    detail::read_opt(*it, "k_anonymity_threshold",
                     c.ingest.k_anonymity_threshold);
    detail::read_opt(*it, "holdout_sessions", c.ingest.holdout_sessions);
    detail::read_opt(*it, "strict", c.ingest.strict);
  }
  if (c.allowlist) c.ingest.domain_allowlist = load_allowlist(*c.allowlist);

  if (auto it = j.find("retrieval"); it != j.end()) {
    detail::read_opt(*it, "sample_size", c.retrieval.sample_size);
    detail::read_duration(*it, "lapse_window_seconds",
                          c.retrieval.lapse_window_seconds);
    detail::read_opt(*it, "history_top_k", c.retrieval.history_top_k);
    detail::read_opt(*it, "rng_seed", c.retrieval.rng_seed);
  }
  if (auto it = j.find("generation"); it != j.end()) {
    detail::read_opt(*it, "temperature", c.generation.temperature);
    detail::read_opt(*it, "top_p", c.generation.top_p);
    detail::read_opt(*it, "max_output_tokens", c.generation.max_output_tokens);
  }
  if (auto it = j.find("embedder"); it != j.end()) {
    std::string backend = it->value("backend", std::string("fallback"));
    if (backend == "fallback") {
      c.embedder.backend = EmbedderBackend::kFallback;
    } else if (backend == "remote") {
      c.embedder.backend = EmbedderBackend::kRemote;
    } else {
      throw InvalidInput("config: unknown embedder backend " + backend);
    }
    detail::read_opt(*it, "dim", c.embedder.dim);
    if (it->contains("endpoint")) {
      c.embedder.endpoint = it->at("endpoint").get<std::string>();
    }
    detail::read_opt(*it, "timeout_ms", c.embedder.timeout_ms);
    detail::read_opt(*it, "max_retries", c.embedder.max_retries);
    detail::read_opt(*it, "max_in_flight", c.embedder.max_in_flight);
    detail::read_opt(*it, "max_body_chars", c.embedder.max_body_chars);
  }
  if (auto it = j.find("generator"); it != j.end()) {
    std::string backend = it->value("backend", std::string("mock"));
    if (backend == "mock") {
      c.generator.backend = GeneratorBackend::kMock;
    } else if (backend == "remote" || backend == "remote-chat") {
      c.generator.backend = GeneratorBackend::kRemoteChat;
    } else {
      throw InvalidInput("config: unknown generator backend " + backend);
    }
    if (it->contains("endpoint")) {
      c.generator.endpoint = it->at("endpoint").get<std::string>();
    }
    detail::read_opt(*it, "timeout_ms", c.generator.timeout_ms);
    detail::read_opt(*it, "max_retries", c.generator.max_retries);
    detail::read_opt(*it, "max_in_flight", c.generator.max_in_flight);
  }
  if (auto it = j.find("linker"); it != j.end()) {
    detail::read_opt(*it, "max_page_chars", c.link.max_page_chars);
  }
  if (auto it = j.find("prompt"); it != j.end()) {
    detail::read_opt(*it, "max_article_chars", c.prompt.max_article_chars);
  }
  if (auto it = j.find("service"); it != j.end()) {
    detail::read_opt(*it, "snapshot_every", c.snapshot_every);
  }
  return c;
}

// KLAMP_EMBED_ENDPOINT, KLAMP_CHAT_ENDPOINT and KLAMP_SEED override the
// file values.
inline void apply_env_overrides(AppConfig &c) {
  if (const char *v = std::getenv("KLAMP_EMBED_ENDPOINT"); v && *v) {
    c.embedder.endpoint = v;
  }
  if (const char *v = std::getenv("KLAMP_CHAT_ENDPOINT"); v && *v) {
    c.generator.endpoint = v;
  }
  if (const char *v = std::getenv("KLAMP_SEED"); v && *v) {
    c.retrieval.rng_seed = std::stoull(v);
  }
}

inline AppConfig load_app_config(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config: " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception &e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  auto c = parse_app_config(j, fs::absolute(path).parent_path());
  apply_env_overrides(c);
  return c;
}

inline PromptTemplates load_templates(const AppConfig &c) {
  return c.prompts_dir ? PromptTemplates::load(*c.prompts_dir)
                       : PromptTemplates::defaults();
}

inline std::shared_ptr<const EntityLinker> load_linker(const AppConfig &c) {
  auto gaz = std::make_shared<const Gazetteer>(Gazetteer::load(c.gazetteer));
  return std::make_shared<GazetteerLinker>(std::move(gaz));
}

// ---------------------------------------------------------------------------
// Files.

// File-name-safe form of a user id: bytes outside [A-Za-z0-9_.-] become
// %XX. A leading '.' is escaped too.
inline std::string encode_file_key(std::string_view id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (size_t i = 0; i < id.size(); ++i) {
    auto u = static_cast<unsigned char>(id[i]);
    bool plain = (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') ||
                 (u >= '0' && u <= '9') || u == '_' || u == '-' ||
                 (u == '.' && i > 0);
    if (plain) {
      out.push_back(static_cast<char>(u));
    } else {
      out.push_back('%');
      out.push_back(kHex[u >> 4]);
      out.push_back(kHex[u & 15]);
    }
  }
  return out;
}

inline std::string decode_file_key(std::string_view key) {
  std::string out;
  for (size_t i = 0; i < key.size(); ++i) {
    if (key[i] == '%' && i + 2 < key.size()) {
      out.push_back(static_cast<char>(
          std::stoi(std::string(key.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(key[i]);
    }
  }
  return out;
}

inline std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes through a temporary file and renames it into place.
inline void write_file_atomic(const fs::path &path, std::string_view data) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageFailure("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw StorageFailure("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StorageFailure("rename failed: " + path.string());
}

}  // namespace klamp

#endif  // KLAMP_CONFIG_HPP
