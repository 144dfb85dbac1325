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

#ifndef KLAMP_STORE_HPP
#define KLAMP_STORE_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "klamp/core.hpp"
#include "klamp/ingest.hpp"
#include "klamp/linker.hpp"

namespace klamp {

// K_s: every history record of one user in time order.
struct MemoryStream {
  UserId user;
  std::vector<SearchRecord> records;

  // Inserts keeping time order; equal timestamps keep arrival order.
  void append(SearchRecord record) {
    auto pos = std::upper_bound(
        records.begin(), records.end(), record.timestamp,
        [](Timestamp t, const SearchRecord &r) { return t < r.timestamp; });
    records.insert(pos, std::move(record));
  }

  friend bool operator==(const MemoryStream &, const MemoryStream &) = default;
};

inline MemoryStream build_memory_stream(const UserDataset &dataset) {
  MemoryStream out;
  out.user = dataset.user;
  for (const auto &s : dataset.history_sessions) {
    out.records.insert(out.records.end(), s.records.begin(), s.records.end());
  }
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const SearchRecord &a, const SearchRecord &b) {
                     return a.timestamp < b.timestamp;
                   });
  return out;
}

struct EntityStats {
  size_t count = 0;
  Timestamp first_seen = 0;
  Timestamp last_seen = 0;

  friend bool operator==(const EntityStats &, const EntityStats &) = default;
};

// K_e: per-user entity occurrence counts with first/last-seen times. Every
// mention counts once, so an entity named twice in one page counts twice.
class EntityKnowledgeStore {
 public:
  using Entries = std::map<EntityId, EntityStats>;

  EntityKnowledgeStore() = default;
  explicit EntityKnowledgeStore(UserId user) : user_(std::move(user)) {}

  const UserId &user() const { return user_; }
  const Entries &entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }

  const EntityStats *find(const EntityId &entity) const {
    auto it = entries_.find(entity);
    return it == entries_.end() ? nullptr : &it->second;
  }

  size_t count(const EntityId &entity) const {
    const auto *s = find(entity);
    return s ? s->count : 0;
  }

  void add_mention(const EntityId &entity, Timestamp at) {
    auto [it, inserted] = entries_.try_emplace(entity);
    EntityStats &s = it->second;
    if (inserted) {
      s.first_seen = at;
      s.last_seen = at;
    } else {
      s.first_seen = std::min(s.first_seen, at);
      s.last_seen = std::max(s.last_seen, at);
    }
    ++s.count;
  }

  // Links the record (query and clicked page) and counts every mention.
  void observe(const SearchRecord &record, const EntityLinker &linker,
               const LinkOptions &opts = {}) {
    for (const auto &m : link_record(record, linker, opts)) {
      add_mention(m.entity, record.timestamp);
    }
  }

  // Returns true if an entry was removed.
  bool remove(const EntityId &entity) { return entries_.erase(entity) > 0; }

  size_t total_mentions() const {
    size_t n = 0;
    for (const auto &[e, s] : entries_) n += s.count;
    return n;
  }

  // Direct construction for snapshots; entries with zero count are
  // rejected.
  void set(const EntityId &entity, EntityStats stats) {
    if (stats.count == 0) throw InvalidInput("entity count must be >= 1");
    if (stats.first_seen > stats.last_seen) {
      throw InvalidInput("first_seen after last_seen for " + entity.str());
    }
    entries_[entity] = stats;
  }

  friend bool operator==(const EntityKnowledgeStore &,
                         const EntityKnowledgeStore &) = default;

 private:
  UserId user_;
  Entries entries_;
};

inline EntityKnowledgeStore build_entity_store(const UserDataset &dataset,
                                               const EntityLinker &linker,
                                               const LinkOptions &opts = {}) {
  EntityKnowledgeStore store(dataset.user);
  for (const auto &s : dataset.history_sessions) {
    for (const auto &r : s.records) store.observe(r, linker, opts);
  }
  return store;
}

// Returns a copy without `entity`.
inline EntityKnowledgeStore remove_entity(EntityKnowledgeStore store,
                                          const EntityId &entity) {
  store.remove(entity);
  return store;
}

struct EntityCount {
  EntityId entity;
  size_t count = 0;

  friend bool operator==(const EntityCount &, const EntityCount &) = default;
};

// Most frequent entities; ties broken by entity id.
inline std::vector<EntityCount> top_k_entities(
    const EntityKnowledgeStore &store, size_t k) {
  if (k < 1) throw InvalidInput("k must be at least 1");
  std::vector<EntityCount> all;
  all.reserve(store.size());
  for (const auto &[e, s] : store.entries()) all.push_back({e, s.count});
  auto by_count = [](const EntityCount &a, const EntityCount &b) {
    if (a.count != b.count) return a.count > b.count;
    return a.entity < b.entity;
  };
  size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<ptrdiff_t>(n),
                    all.end(), by_count);
  all.resize(n);
  return all;
}

// ---------------------------------------------------------------------------
// Cross-user trending entities.

inline constexpr size_t kTrendingLimit = 20;

struct TrendingEntry {
  EntityId entity;
  double surge_score = 0.0;
  size_t current_users = 0;
  size_t previous_users = 0;
};

struct TrendingReport {
  Timestamp window_start = 0;
  Timestamp window_end = 0;
  std::vector<TrendingEntry> entries;
};

// Surge score per entity: distinct users mentioning it in the current
// window [now - window, now] over 1 + distinct users in the previous window
// [now - 2 window, now - window). Top `limit` by score, ties by id.
inline TrendingReport trending_entities(const std::vector<MemoryStream> &streams,
                                        const EntityLinker &linker,
                                        Seconds window, Timestamp now,
                                        const LinkOptions &opts = {},
                                        size_t limit = kTrendingLimit) {
  if (window <= 0) throw InvalidInput("trending window must be positive");
  const Timestamp cur_start = now - window;
  const Timestamp prev_start = now - 2 * window;
  std::map<EntityId, std::pair<std::set<UserId>, std::set<UserId>>> users;
  for (const auto &stream : streams) {
    for (const auto &r : stream.records) {
      if (r.timestamp < prev_start || r.timestamp > now) continue;
      bool current = r.timestamp >= cur_start;
      for (const auto &m : link_record(r, linker, opts)) {
        auto &slot = users[m.entity];
        (current ? slot.first : slot.second).insert(r.user);
      }
    }
  }
  TrendingReport report;
  report.window_start = cur_start;
  report.window_end = now;
  for (const auto &[entity, u] : users) {
    TrendingEntry e;
    e.entity = entity;
    e.current_users = u.first.size();
    e.previous_users = u.second.size();
    e.surge_score = static_cast<double>(e.current_users) /
                    (1.0 + static_cast<double>(e.previous_users));
    report.entries.push_back(std::move(e));
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const TrendingEntry &a, const TrendingEntry &b) {
                     if (a.surge_score != b.surge_score) {
                       return a.surge_score > b.surge_score;
                     }
                     return a.entity < b.entity;
                   });
  if (report.entries.size() > limit) report.entries.resize(limit);
  return report;
}

// ---------------------------------------------------------------------------
// Persistence.

inline void to_json(Json &j, const EntityKnowledgeStore &store) {
  Json entries = Json::object();
  for (const auto &[e, s] : store.entries()) {
    entries[e.str()] = Json{{"count", s.count},
                            {"first_seen", s.first_seen},
                            {"last_seen", s.last_seen}};
  }
  j = Json{{"user", store.user()}, {"entries", std::move(entries)}};
}

inline void from_json(const Json &j, EntityKnowledgeStore &store) {
  EntityKnowledgeStore out(j.at("user").get<UserId>());
  for (const auto &[key, value] : j.at("entries").items()) {
    out.set(EntityId(key), EntityStats{value.at("count").get<size_t>(),
                                       value.at("first_seen").get<Timestamp>(),
                                       value.at("last_seen").get<Timestamp>()});
  }
  store = std::move(out);
}

inline void to_json(Json &j, const MemoryStream &stream) {
  j = Json{{"user", stream.user}, {"records", stream.records}};
}

inline void from_json(const Json &j, MemoryStream &stream) {
  stream.user = j.at("user").get<UserId>();
  stream.records = j.at("records").get<std::vector<SearchRecord>>();
}

inline void to_json(Json &j, const TrendingReport &r) {
  Json entries = Json::array();
  for (const auto &e : r.entries) {
    entries.push_back(Json{{"entity", e.entity},
                           {"surge_score", e.surge_score},
                           {"current_users", e.current_users},
                           {"previous_users", e.previous_users}});
  }
  j = Json{{"window", {r.window_start, r.window_end}},
           {"entries", std::move(entries)}};
}

template <typename T>
T read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return Json::parse(in).get<T>();
  } catch (const Json::exception &e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

}  // namespace klamp

#endif  // KLAMP_STORE_HPP
