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

#ifndef KLAMP_INGEST_HPP
#define KLAMP_INGEST_HPP

#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "klamp/core.hpp"

namespace klamp {

inline std::string normalize_domain(std::string_view domain) {
  std::string d = to_lower(trim(domain));
  if (d.starts_with("www.")) d.erase(0, 4);
  return d;
}

struct IngestConfig {
  Seconds session_gap_seconds = 1800;
  size_t min_visitations = 100;
  size_t k_anonymity_threshold = 50;
  // Normalized domains (lowercase, no "www."). Empty means no restriction.
  std::set<std::string> domain_allowlist;
  size_t holdout_sessions = 10;
  bool strict = false;

  void validate() const {
    if (session_gap_seconds <= 0) {
      throw InvalidInput("session_gap_seconds must be positive");
    }
    if (min_visitations < 1 || k_anonymity_threshold < 1 ||
        holdout_sessions < 1) {
      throw InvalidInput("ingest counts must be at least 1");
    }
  }

  bool domain_allowed(std::string_view domain) const {
    return domain_allowlist.empty() ||
           domain_allowlist.count(normalize_domain(domain)) > 0;
  }
};

// One domain per line; blank lines and '#' comments are ignored.
inline std::set<std::string> read_allowlist(std::istream &in) {
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto d = normalize_domain(line);
    if (!d.empty()) out.insert(std::move(d));
  }
  return out;
}

inline std::set<std::string> load_allowlist(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open allowlist: " + path);
  return read_allowlist(in);
}

// ---------------------------------------------------------------------------
// Log parsing.

struct ParseError {
  size_t line = 0;
  std::string message;
};

struct ParsedLog {
  std::vector<SearchRecord> records;
  std::vector<ParseError> errors;
};

// Reads one JSON record per line. Blank lines are skipped. In strict mode
// the first malformed line throws InvalidInput naming the line number;
// otherwise it is reported and skipped.
inline ParsedLog parse_log(std::istream &in, bool strict = false) {
  ParsedLog out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = Json::parse(line);
      out.records.push_back(j.get<SearchRecord>());
    } catch (const std::exception &e) {
      std::string msg = e.what();
      if (strict) {
        throw InvalidInput("line " + std::to_string(lineno) + ": " + msg);
      }
      out.errors.push_back({lineno, std::move(msg)});
    }
  }
  return out;
}

inline std::map<UserId, std::vector<SearchRecord>> group_by_user(
    std::vector<SearchRecord> records) {
  std::map<UserId, std::vector<SearchRecord>> out;
  for (auto &r : records) out[r.user].push_back(std::move(r));
  return out;
}

inline std::string session_id_for(const UserId &user, size_t index) {
  return user.str() + ":" + std::to_string(index);
}

// Splits one user's records into sessions at inactivity gaps longer than
// `gap`. Records are sorted by time (stable for equal timestamps).
inline std::vector<Session> sessionize(std::vector<SearchRecord> records,
                                       Seconds gap) {
  if (gap <= 0) throw InvalidInput("session gap must be positive");
  std::vector<Session> out;
  if (records.empty()) return out;
  const UserId user = records.front().user;
  for (const auto &r : records) {
    if (r.user != user) throw InvalidInput("sessionize: records mix users");
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const SearchRecord &a, const SearchRecord &b) {
                     return a.timestamp < b.timestamp;
                   });
  for (auto &r : records) {
    if (out.empty() ||
        r.timestamp - out.back().records.back().timestamp > gap) {
      Session s;
      s.id = session_id_for(user, out.size());
      s.user = user;
      out.push_back(std::move(s));
    }
    r.session_id = out.back().id;
    out.back().records.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quality and privacy filters.

struct FilterReport {
  size_t input_sessions = 0;
  size_t input_users = 0;
  size_t clicks_off_allowlist = 0;
  size_t no_click_sessions = 0;
  size_t users_below_min_visitations = 0;
  size_t k_anonymity_records_removed = 0;
  size_t k_anonymity_queries_removed = 0;
  size_t empty_sessions_pruned = 0;
  size_t sessions_split = 0;
  size_t output_sessions = 0;
  size_t output_users = 0;

  size_t removals() const {
    return clicks_off_allowlist + no_click_sessions +
           users_below_min_visitations + k_anonymity_records_removed +
           empty_sessions_pruned + sessions_split;
  }

  friend bool operator==(const FilterReport &, const FilterReport &) = default;
};

inline void to_json(Json &j, const FilterReport &r) {
  j = Json{{"input_sessions", r.input_sessions},
           {"input_users", r.input_users},
           {"clicks_off_allowlist", r.clicks_off_allowlist},
           {"no_click_sessions", r.no_click_sessions},
           {"users_below_min_visitations", r.users_below_min_visitations},
           {"k_anonymity_records_removed", r.k_anonymity_records_removed},
           {"k_anonymity_queries_removed", r.k_anonymity_queries_removed},
           {"empty_sessions_pruned", r.empty_sessions_pruned},
           {"sessions_split", r.sessions_split},
           {"output_sessions", r.output_sessions},
           {"output_users", r.output_users}};
}

struct FilterResult {
  std::vector<Session> sessions;
  FilterReport report;
};

namespace detail {

inline size_t distinct_users(const std::vector<Session> &sessions) {
  std::set<UserId> users;
  for (const auto &s : sessions) users.insert(s.user);
  return users.size();
}

// Splits a session wherever record removal left a gap longer than `gap`.
inline std::vector<Session> resplit(Session s, Seconds gap) {
  std::vector<Session> out;
  for (auto &r : s.records) {
    if (out.empty() ||
        r.timestamp - out.back().records.back().timestamp > gap) {
      Session piece;
      piece.id = s.id;
      piece.user = s.user;
      out.push_back(std::move(piece));
    }
    out.back().records.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

// Applies, in order: the domain allowlist to clicks, the no-click session
// filter, the minimum-visitation user filter and k-anonymity over query
// text. The last three repeat until nothing changes, so the result is a
// fixed point and the filter is idempotent. Session ids are renumbered per
// user at the end.
inline FilterResult apply_filters(std::vector<Session> sessions,
                                  const IngestConfig &cfg) {
  cfg.validate();
  FilterResult out;
  FilterReport &report = out.report;
  report.input_sessions = sessions.size();
  report.input_users = detail::distinct_users(sessions);

  for (auto &s : sessions) {
    for (auto &r : s.records) {
      if (r.clicked_page && !cfg.domain_allowed(r.clicked_page->source_domain)) {
        r.clicked_page.reset();
        ++report.clicks_off_allowlist;
      }
    }
  }

  std::set<std::string> removed_queries;
  bool changed = true;
  while (changed) {
    changed = false;

    std::vector<Session> kept;
    for (auto &s : sessions) {
      if (s.click_count() == 0) {
        ++report.no_click_sessions;
        changed = true;
      } else {
        kept.push_back(std::move(s));
      }
    }
    sessions = std::move(kept);

    std::map<UserId, size_t> visits;
    for (const auto &s : sessions) visits[s.user] += s.click_count();
    std::set<UserId> dropped_users;
    for (const auto &[user, n] : visits) {
      if (n < cfg.min_visitations) dropped_users.insert(user);
    }
    if (!dropped_users.empty()) {
      report.users_below_min_visitations += dropped_users.size();
      changed = true;
      std::erase_if(sessions, [&](const Session &s) {
        return dropped_users.count(s.user) > 0;
      });
    }

    std::unordered_map<std::string, std::unordered_set<std::string>> issuers;
    for (const auto &s : sessions) {
      for (const auto &r : s.records) {
        issuers[to_lower(r.query_text)].insert(r.user.str());
      }
    }
    kept.clear();
    for (auto &s : sessions) {
      size_t before = s.records.size();
      std::erase_if(s.records, [&](const SearchRecord &r) {
        auto key = to_lower(r.query_text);
        if (issuers[key].size() >= cfg.k_anonymity_threshold) return false;
        removed_queries.insert(std::move(key));
        return true;
      });
      size_t removed = before - s.records.size();
      if (removed == 0) {
        kept.push_back(std::move(s));
        continue;
      }
      changed = true;
      report.k_anonymity_records_removed += removed;
      if (s.records.empty()) {
        ++report.empty_sessions_pruned;
        continue;
      }
      auto pieces = detail::resplit(std::move(s), cfg.session_gap_seconds);
      report.sessions_split += pieces.size() - 1;
      for (auto &p : pieces) kept.push_back(std::move(p));
    }
    sessions = std::move(kept);
  }
  report.k_anonymity_queries_removed = removed_queries.size();

  std::stable_sort(sessions.begin(), sessions.end(),
                   [](const Session &a, const Session &b) {
                     if (a.user != b.user) return a.user < b.user;
                     return a.first_timestamp() < b.first_timestamp();
                   });
  size_t index = 0;
  for (size_t i = 0; i < sessions.size(); ++i) {
    if (i == 0 || sessions[i].user != sessions[i - 1].user) index = 0;
    sessions[i].id = session_id_for(sessions[i].user, index++);
    for (auto &r : sessions[i].records) r.session_id = sessions[i].id;
  }

  report.output_sessions = sessions.size();
  report.output_users = detail::distinct_users(sessions);
  out.sessions = std::move(sessions);
  return out;
}

// ---------------------------------------------------------------------------
// History / holdout split.

struct UserDataset {
  UserId user;
  std::vector<Session> history_sessions;
  std::vector<Session> holdout_sessions;

  friend bool operator==(const UserDataset &, const UserDataset &) = default;
};

inline void to_json(Json &j, const UserDataset &d) {
  j = Json{{"user", d.user},
           {"history", d.history_sessions},
           {"holdout", d.holdout_sessions}};
}
inline void from_json(const Json &j, UserDataset &d) {
  d.user = j.at("user").get<UserId>();
  d.history_sessions = j.at("history").get<std::vector<Session>>();
  d.holdout_sessions = j.at("holdout").get<std::vector<Session>>();
}

// The last min(n, size) sessions become holdout; the rest is history.
// Input must be one user's sessions ordered by first timestamp.
inline UserDataset split_holdout(std::vector<Session> sessions, size_t n) {
  UserDataset out;
  if (sessions.empty()) return out;
  out.user = sessions.front().user;
  size_t holdout = std::min(n, sessions.size());
  size_t cut = sessions.size() - holdout;
  out.history_sessions.assign(std::make_move_iterator(sessions.begin()),
                              std::make_move_iterator(sessions.begin() + cut));
  out.holdout_sessions.assign(std::make_move_iterator(sessions.begin() + cut),
                              std::make_move_iterator(sessions.end()));
  return out;
}

struct IngestResult {
  std::vector<UserDataset> datasets;
  FilterReport report;
  std::vector<ParseError> parse_errors;
};

// Full batch pipeline: sessionize per user, filter, split per user.
inline IngestResult ingest_records(std::vector<SearchRecord> records,
                                   const IngestConfig &cfg) {
  cfg.validate();
  std::vector<Session> sessions;
  for (auto &[user, recs] : group_by_user(std::move(records))) {
    for (auto &s : sessionize(std::move(recs), cfg.session_gap_seconds)) {
      sessions.push_back(std::move(s));
    }
  }
  IngestResult out;
  auto filtered = apply_filters(std::move(sessions), cfg);
  out.report = filtered.report;
  std::map<UserId, std::vector<Session>> by_user;
  for (auto &s : filtered.sessions) by_user[s.user].push_back(std::move(s));
  for (auto &[user, list] : by_user) {
    out.datasets.push_back(split_holdout(std::move(list), cfg.holdout_sessions));
  }
  return out;
}

inline IngestResult ingest_log(std::istream &in, const IngestConfig &cfg) {
  auto parsed = parse_log(in, cfg.strict);
  auto out = ingest_records(std::move(parsed.records), cfg);
  out.parse_errors = std::move(parsed.errors);
  return out;
}

}  // namespace klamp

#endif  // KLAMP_INGEST_HPP
