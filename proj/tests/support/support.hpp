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

// Shared helpers and fixtures for the unit and acceptance suites.

#ifndef KLAMP_TESTS_SUPPORT_HPP
#define KLAMP_TESTS_SUPPORT_HPP

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "klamp/core.hpp"
#include "klamp/ingest.hpp"
#include "klamp/linker.hpp"
#include "klamp/retrieval.hpp"
#include "klamp/store.hpp"
#include "klamp/suggester.hpp"

namespace klamp::testing {

namespace fs = std::filesystem;

// Removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag = "klamp") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" +
             std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const fs::path &path() const { return path_; }

 private:
  fs::path path_;
};

inline SearchRecord rec(const std::string &user, Timestamp ts,
                        const std::string &query,
                        std::optional<WebPage> page = std::nullopt) {
  SearchRecord r;
  r.user = UserId(user);
  r.timestamp = ts;
  r.query_text = query;
  r.clicked_page = std::move(page);
  return r;
}

inline WebPage page(const std::string &url, const std::string &title = "t",
                    const std::string &text = "") {
  return WebPage::make(url, title, text);
}

inline std::shared_ptr<GazetteerLinker> make_linker(
    const std::vector<std::pair<std::string, std::string>> &aliases) {
  auto gaz = std::make_shared<Gazetteer>();
  for (const auto &[alias, entity] : aliases) gaz->add(alias, EntityId(entity));
  return std::make_shared<GazetteerLinker>(gaz);
}

inline std::vector<EntityId> ids(const std::vector<std::string> &names) {
  std::vector<EntityId> out;
  for (const auto &n : names) out.emplace_back(n);
  return out;
}

// ---------------------------------------------------------------------------
// Six-user filter fixture. Allowlist {news.example.com}, gap 1800,
// min_visitations 3, k 2. Expected counts are worked out by hand next to
// each user.

inline IngestConfig six_user_config() {
  IngestConfig c;
  c.session_gap_seconds = 1800;
  c.min_visitations = 3;
  c.k_anonymity_threshold = 2;
  c.holdout_sessions = 1;
  c.domain_allowlist = {"news.example.com"};
  return c;
}

inline std::vector<SearchRecord> six_user_records() {
  const auto ok = [](int i) {
    return page("https://www.news.example.com/" + std::to_string(i));
  };
  const auto bad = [](int i) {
    return page("https://bad.example/" + std::to_string(i));
  };
  return {
      // u1: three sessions. "u1 secret" and "u1 secret2" are unique; the
      // third session holds only the latter and is pruned.
      rec("u1", 1000, "weather", ok(1)),
      rec("u1", 1200, "football", ok(2)),
      rec("u1", 1400, "u1 secret", ok(3)),
      rec("u1", 10000, "weather", ok(4)),
      rec("u1", 50000, "u1 secret2", ok(5)),
      // u2: middle session has no clicks.
      rec("u2", 1000, "weather", ok(6)),
      rec("u2", 1100, "football", ok(7)),
      rec("u2", 20000, "news"),
      rec("u2", 20100, "football"),
      rec("u2", 30000, "weather", ok(8)),
      // u3: two clicks only.
      rec("u3", 1000, "weather", ok(9)),
      rec("u3", 1300, "football", ok(10)),
      // u4: one off-list click.
      rec("u4", 1000, "weather", ok(11)),
      rec("u4", 1100, "football", ok(12)),
      rec("u4", 1200, "weather", bad(1)),
      rec("u4", 50000, "football", ok(13)),
      // u5: first session only off-list clicks, second one click.
      rec("u5", 1000, "weather", bad(2)),
      rec("u5", 1100, "football", bad(3)),
      rec("u5", 40000, "weather", ok(14)),
      // u6: removing the unique middle query leaves a 3000 s gap.
      rec("u6", 1000, "weather", ok(15)),
      rec("u6", 2500, "u6 rare", ok(16)),
      rec("u6", 4000, "football", ok(17)),
      rec("u6", 100000, "weather", ok(18)),
  };
}

inline FilterReport six_user_expected_report() {
  FilterReport r;
  r.input_sessions = 13;            // 3 + 3 + 1 + 2 + 2 + 2
  r.input_users = 6;
  r.clicks_off_allowlist = 3;       // u4 x1, u5 x2
  r.no_click_sessions = 2;          // u2 middle, u5 first
  r.users_below_min_visitations = 2;  // u3 (2 clicks), u5 (1 click)
  r.k_anonymity_records_removed = 3;  // u1 secret, u1 secret2, u6 rare
  r.k_anonymity_queries_removed = 3;
  r.empty_sessions_pruned = 1;      // u1 third session
  r.sessions_split = 1;             // u6 first session
  r.output_sessions = 9;            // u1 2, u2 2, u4 2, u6 3
  r.output_users = 4;
  return r;
}

inline std::vector<Session> sessionize_all(std::vector<SearchRecord> records,
                                           Seconds gap) {
  std::vector<Session> out;
  for (auto &[user, recs] : group_by_user(std::move(records))) {
    for (auto &s : sessionize(std::move(recs), gap)) out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prompt fixture: the worked "Tim Cook" example with an invented related
// page for the history variant.

inline SearchContext tim_cook_context() {
  SearchContext c;
  c.current_query = "Tim Cook";
  c.session_history = {"Apple", "Tim Cook"};
  c.current_page = WebPage::make(
      "https://news.example.com/tim-cook-leadership", "Tim Cook Leadership",
      "A new profile examines how Apple CEO Tim Cook, with \"cautious, "
      "collaborative and tactical\" leadership, honed the Cupertino tech "
      "giant into the world's largest company.");
  return c;
}

inline std::vector<std::string> tim_cook_entities() {
  return {"Macbook",      "macOS",          "Machine Learning",
          "Optimization", "Supervised Learning", "Apple TV",
          "Animation",    "Studio Ghibli",  "DVD",
          "Walt Disney",  "Pixar Animation Studios", "Apple Inc.",
          "Baseball",     "HDTV",           "Major League Baseball",
          "New York Yankees"};
}

inline RetrievedKnowledge tim_cook_entity_knowledge() {
  RetrievedKnowledge k;
  k.strategy = Strategy::kCombined;
  k.entities = ids(tim_cook_entities());
  return k;
}

inline RetrievedKnowledge tim_cook_history_knowledge() {
  RetrievedKnowledge k;
  k.strategy = Strategy::kHistory;
  k.pages.push_back(WebPage::make(
      "https://tech.example.org/macbook-review", "Macbook Pro Review",
      "The latest Macbook Pro pairs a faster chip with longer battery life "
      "and ships with the newest release of macOS."));
  return k;
}

inline const RetrievedKnowledge *knowledge_for(Variant v,
                                               const RetrievedKnowledge &ents,
                                               const RetrievedKnowledge &hist) {
  switch (v) {
    case Variant::kKlamp: return &ents;
    case Variant::kCqsKs: return &hist;
    default: return nullptr;
  }
}

inline std::string golden_dir() { return KLAMP_GOLDEN_DIR; }
inline std::string source_dir() { return KLAMP_SOURCE_DIR; }

}  // namespace klamp::testing

#endif  // KLAMP_TESTS_SUPPORT_HPP
