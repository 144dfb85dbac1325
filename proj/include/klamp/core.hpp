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

#ifndef KLAMP_CORE_HPP
#define KLAMP_CORE_HPP

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "klamp/error.hpp"

namespace klamp {

using Json = nlohmann::json;

// Epoch seconds, UTC.
using Timestamp = std::int64_t;
using Seconds = std::int64_t;

inline constexpr Seconds kDay = 86400;

// ---------------------------------------------------------------------------
// Text helpers shared by the linker, embedder and prompt builder.

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Bytes of multi-byte UTF-8 sequences count as word characters so that
// non-ASCII letters never split a token.
inline bool is_word_byte(char c) {
  auto u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') ||
         (u >= 'A' && u <= 'Z') || u >= 0x80;
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char &c : out) c = ascii_lower(c);
  return out;
}

inline std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

// Trims and collapses every internal whitespace run to one space.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// Returns the prefix holding at most `max_chars` UTF-8 code points.
inline std::string_view truncate_utf8(std::string_view s, size_t max_chars) {
  size_t chars = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    auto u = static_cast<unsigned char>(s[i]);
    if ((u & 0xC0) != 0x80) {
      if (chars == max_chars) return s.substr(0, i);
      ++chars;
    }
  }
  return s;
}

inline std::string join(const std::vector<std::string> &parts,
                        std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

// Joins context parts with newlines, skipping empty parts.
inline std::string concat_context(const std::vector<std::string> &parts) {
  std::string out;
  for (const auto &p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out.push_back('\n');
    out.append(p);
  }
  return out;
}

// Lowercased host component of a URL ("https://www.X.com:80/a" ->
// "www.x.com"). A URL without a scheme is read as host[/path].
inline std::string url_host(std::string_view url) {
  auto scheme = url.find("://");
  std::string_view rest = scheme == std::string_view::npos
                              ? url
                              : url.substr(scheme + 3);
  rest = rest.substr(0, rest.find_first_of("/?#"));
  if (auto at = rest.rfind('@'); at != std::string_view::npos) {
    rest = rest.substr(at + 1);
  }
  if (!rest.empty() && rest.front() == '[') {
    auto close = rest.find(']');
    rest = rest.substr(0, close == std::string_view::npos ? rest.size()
                                                          : close + 1);
  } else if (auto colon = rest.find(':'); colon != std::string_view::npos) {
    rest = rest.substr(0, colon);
  }
  return to_lower(rest);
}

// ---------------------------------------------------------------------------
// Identifiers.

class UserId {
 public:
  UserId() = default;
  explicit UserId(std::string value) : value_(std::move(value)) {
    if (value_.empty()) throw InvalidInput("user id must be non-empty");
  }

  const std::string &str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend auto operator<=>(const UserId &, const UserId &) = default;
  friend bool operator==(const UserId &, const UserId &) = default;

 private:
  std::string value_;
};

// Canonical knowledge-base identifier: trimmed with whitespace runs
// collapsed. Case is preserved as given by the gazetteer.
class EntityId {
 public:
  EntityId() = default;
  explicit EntityId(std::string_view raw) : value_(collapse_whitespace(raw)) {
    if (value_.empty()) {
      throw InvalidEntity("entity id is empty after trimming");
    }
  }

  const std::string &str() const { return value_; }

  friend auto operator<=>(const EntityId &, const EntityId &) = default;
  friend bool operator==(const EntityId &, const EntityId &) = default;

 private:
  std::string value_;
};

inline EntityId canonicalize_entity(std::string_view raw) {
  return EntityId(raw);
}

// ---------------------------------------------------------------------------
// Records.

struct WebPage {
  std::string url;
  std::string title;
  std::string body_text;
  std::string source_domain;

  static WebPage make(std::string url, std::string title,
                      std::string body_text) {
    if (url.empty()) throw InvalidInput("page url must be non-empty");
    WebPage page;
    page.source_domain = url_host(url);
    page.url = std::move(url);
    page.title = std::move(title);
    page.body_text = std::move(body_text);
    return page;
  }

  friend bool operator==(const WebPage &, const WebPage &) = default;
};

struct SearchRecord {
  UserId user;
  Timestamp timestamp = 0;
  std::string query_text;
  std::optional<WebPage> clicked_page;
  std::string session_id;

  bool has_click() const { return clicked_page.has_value(); }

  friend bool operator==(const SearchRecord &, const SearchRecord &) = default;
};

struct Session {
  std::string id;
  UserId user;
  std::vector<SearchRecord> records;

  Timestamp first_timestamp() const {
    return records.empty() ? 0 : records.front().timestamp;
  }
  size_t click_count() const {
    return static_cast<size_t>(std::count_if(
        records.begin(), records.end(),
        [](const SearchRecord &r) { return r.has_click(); }));
  }

  friend bool operator==(const Session &, const Session &) = default;
};

// The search context c: current query q_j, in-session history q_h and the
// page w being read. The page is optional because plain query suggestion
// needs none.
struct SearchContext {
  std::string current_query;
  std::vector<std::string> session_history;
  std::optional<WebPage> current_page;
};

// ---------------------------------------------------------------------------
// JSON. Records use the ingest wire format; the session id is written only
// when assigned.

inline void to_json(Json &j, const UserId &u) { j = u.str(); }
inline void from_json(const Json &j, UserId &u) {
  u = UserId(j.get<std::string>());
}
inline void to_json(Json &j, const EntityId &e) { j = e.str(); }
inline void from_json(const Json &j, EntityId &e) {
  e = EntityId(j.get<std::string>());
}

inline void to_json(Json &j, const WebPage &p) {
  j = Json{{"url", p.url}, {"title", p.title}, {"text", p.body_text}};
}
inline void from_json(const Json &j, WebPage &p) {
  if (!j.is_object()) throw InvalidInput("click must be an object");
  auto url = j.find("url");
  if (url == j.end() || !url->is_string()) {
    throw InvalidInput("click.url must be a string");
  }
  auto title = j.value("title", std::string());
  auto text = j.value("text", std::string());
  p = WebPage::make(url->get<std::string>(), std::move(title),
                    std::move(text));
}

inline void to_json(Json &j, const SearchRecord &r) {
  j = Json{{"user", r.user}, {"ts", r.timestamp}, {"query", r.query_text}};
  if (r.clicked_page) j["click"] = *r.clicked_page;
  if (!r.session_id.empty()) j["session"] = r.session_id;
}

inline void from_json(const Json &j, SearchRecord &r) {
  if (!j.is_object()) throw InvalidInput("record must be a JSON object");
  auto user = j.find("user");
  if (user == j.end() || !user->is_string()) {
    throw InvalidInput("field 'user' must be a string");
  }
  auto ts = j.find("ts");
  if (ts == j.end() || !ts->is_number_integer()) {
    throw InvalidInput("field 'ts' must be an integer");
  }
  auto query = j.find("query");
  if (query == j.end() || !query->is_string()) {
    throw InvalidInput("field 'query' must be a string");
  }
  SearchRecord out;
  out.user = UserId(user->get<std::string>());
  out.timestamp = ts->get<Timestamp>();
  if (out.timestamp <= 0) throw InvalidInput("field 'ts' must be positive");
  out.query_text = query->get<std::string>();
  if (out.query_text.empty()) {
    throw InvalidInput("field 'query' must be non-empty");
  }
  if (auto click = j.find("click"); click != j.end() && !click->is_null()) {
    out.clicked_page = click->get<WebPage>();
  }
  if (auto sid = j.find("session"); sid != j.end()) {
    out.session_id = sid->get<std::string>();
  }
  r = std::move(out);
}

inline void to_json(Json &j, const Session &s) {
  j = Json{{"id", s.id}, {"user", s.user}, {"records", s.records}};
}
inline void from_json(const Json &j, Session &s) {
  s.id = j.at("id").get<std::string>();
  s.user = j.at("user").get<UserId>();
  s.records = j.at("records").get<std::vector<SearchRecord>>();
}

inline void to_json(Json &j, const SearchContext &c) {
  j = Json{{"query", c.current_query}, {"session", c.session_history}};
  if (c.current_page) j["page"] = *c.current_page;
}

}  // namespace klamp

template <>
struct std::hash<klamp::EntityId> {
  size_t operator()(const klamp::EntityId &e) const noexcept {
    return std::hash<std::string>()(e.str());
  }
};

template <>
struct std::hash<klamp::UserId> {
  size_t operator()(const klamp::UserId &u) const noexcept {
    return std::hash<std::string>()(u.str());
  }
};

#endif  // KLAMP_CORE_HPP
