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

#ifndef KLAMP_RETRIEVAL_HPP
#define KLAMP_RETRIEVAL_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "klamp/core.hpp"
#include "klamp/embedder.hpp"
#include "klamp/rng.hpp"
#include "klamp/store.hpp"

namespace klamp {

enum class Strategy { kFamiliar, kUnfamiliar, kLapsed, kCombined, kHistory };

inline const char *strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kFamiliar: return "familiar";
    case Strategy::kUnfamiliar: return "unfamiliar";
    case Strategy::kLapsed: return "lapsed";
    case Strategy::kCombined: return "combined";
    case Strategy::kHistory: return "history";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::kFamiliar, Strategy::kUnfamiliar, Strategy::kLapsed,
                 Strategy::kCombined, Strategy::kHistory}) {
    if (name == strategy_name(s)) return s;
  }
  throw InvalidInput("unknown retrieval strategy: " + std::string(name));
}

struct RetrievalConfig {
  size_t sample_size = 5;
  Seconds lapse_window_seconds = 14 * kDay;
  size_t history_top_k = 1;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (sample_size < 1) throw InvalidInput("sample_size must be >= 1");
    if (lapse_window_seconds <= 0) {
      throw InvalidInput("lapse window must be positive");
    }
    if (history_top_k < 1) throw InvalidInput("history_top_k must be >= 1");
  }
};

// The knowledge k placed in the prompt: entities for the entity strategies,
// pages for history retrieval.
struct RetrievedKnowledge {
  Strategy strategy = Strategy::kCombined;
  std::vector<EntityId> entities;
  std::vector<WebPage> pages;
};

inline void to_json(Json &j, const RetrievedKnowledge &k) {
  Json pages = Json::array();
  for (const auto &p : k.pages) {
    pages.push_back(Json{{"url", p.url}, {"title", p.title}});
  }
  j = Json{{"strategy", strategy_name(k.strategy)},
           {"entities", k.entities},
           {"pages", std::move(pages)}};
}

namespace detail {

inline std::vector<EntityId> weighted_pick(
    const std::vector<EntityId> &candidates, const std::vector<double> &weights,
    const RetrievalConfig &cfg) {
  CounterRng rng(cfg.rng_seed);
  std::vector<EntityId> out;
  for (size_t i : sample_without_replacement(weights, cfg.sample_size, rng)) {
    out.push_back(candidates[i]);
  }
  return out;
}

}  // namespace detail

// Context entities already in the store, sampled proportionally to their
// store counts.
inline std::vector<EntityId> retrieve_familiar(
    const std::vector<EntityId> &ctx_entities,
    const EntityKnowledgeStore &store, const RetrievalConfig &cfg,
    Timestamp /*now*/) {
  cfg.validate();
  std::vector<EntityId> candidates;
  std::vector<double> weights;
  for (const auto &e : ctx_entities) {
    size_t c = store.count(e);
    if (c == 0) continue;
    candidates.push_back(e);
    weights.push_back(static_cast<double>(c));
  }
  return detail::weighted_pick(candidates, weights, cfg);
}

// All context entities, sampled with weight 1 / (1 + count) so rarely or
// never seen entities dominate.
inline std::vector<EntityId> retrieve_unfamiliar(
    const std::vector<EntityId> &ctx_entities,
    const EntityKnowledgeStore &store, const RetrievalConfig &cfg,
    Timestamp /*now*/) {
  cfg.validate();
  std::vector<double> weights;
  for (const auto &e : ctx_entities) {
    weights.push_back(1.0 / (1.0 + static_cast<double>(store.count(e))));
  }
  return detail::weighted_pick(ctx_entities, weights, cfg);
}

// Context entities in the store whose last mention is strictly older than
// now - lapse window, sampled by count.
inline std::vector<EntityId> retrieve_lapsed(
    const std::vector<EntityId> &ctx_entities,
    const EntityKnowledgeStore &store, const RetrievalConfig &cfg,
    Timestamp now) {
  cfg.validate();
  const Timestamp cutoff = now - cfg.lapse_window_seconds;
  std::vector<EntityId> candidates;
  std::vector<double> weights;
  for (const auto &e : ctx_entities) {
    const auto *s = store.find(e);
    if (s == nullptr || s->count == 0 || !(s->last_seen < cutoff)) continue;
    candidates.push_back(e);
    weights.push_back(static_cast<double>(s->count));
  }
  return detail::weighted_pick(candidates, weights, cfg);
}

// Concatenates lists in order, keeping the first occurrence of each entity.
inline std::vector<EntityId> combine_entities(
    const std::vector<std::vector<EntityId>> &lists) {
  std::vector<EntityId> out;
  std::unordered_set<EntityId> seen;
  for (const auto &list : lists) {
    for (const auto &e : list) {
      if (seen.insert(e).second) out.push_back(e);
    }
  }
  return out;
}

inline RetrievedKnowledge retrieve_combined(
    const std::vector<EntityId> &ctx_entities,
    const EntityKnowledgeStore &store, const RetrievalConfig &cfg,
    Timestamp now) {
  RetrievedKnowledge k;
  k.strategy = Strategy::kCombined;
  k.entities = combine_entities(
      {retrieve_familiar(ctx_entities, store, cfg, now),
       retrieve_unfamiliar(ctx_entities, store, cfg, now),
       retrieve_lapsed(ctx_entities, store, cfg, now)});
  return k;
}

// One of the entity strategies wrapped as knowledge.
inline RetrievedKnowledge retrieve_entities(
    Strategy strategy, const std::vector<EntityId> &ctx_entities,
    const EntityKnowledgeStore &store, const RetrievalConfig &cfg,
    Timestamp now) {
  RetrievedKnowledge k;
  k.strategy = strategy;
  switch (strategy) {
    case Strategy::kFamiliar:
      k.entities = retrieve_familiar(ctx_entities, store, cfg, now);
      break;
    case Strategy::kUnfamiliar:
      k.entities = retrieve_unfamiliar(ctx_entities, store, cfg, now);
      break;
    case Strategy::kLapsed:
      k.entities = retrieve_lapsed(ctx_entities, store, cfg, now);
      break;
    case Strategy::kCombined:
      return retrieve_combined(ctx_entities, store, cfg, now);
    case Strategy::kHistory:
      throw InvalidInput("history retrieval is not an entity strategy");
  }
  return k;
}

// ---------------------------------------------------------------------------
// History retrieval over K_s.

inline std::string page_embedding_text(const WebPage &page,
                                       size_t max_body_chars) {
  std::string text = page.title;
  text.push_back(' ');
  text.append(truncate_utf8(page.body_text, max_body_chars));
  return text;
}

struct ScoredRecord {
  size_t index = 0;  // position in the stream
  double score = 0.0;

  friend bool operator==(const ScoredRecord &, const ScoredRecord &) = default;
};

// Clicked records of the stream ranked by dot product between the page
// embedding and the query embedding. Ties go to the earlier record.
inline std::vector<ScoredRecord> rank_history(std::string_view query,
                                              const MemoryStream &stream,
                                              const Embedder &embedder,
                                              size_t top_k,
                                              size_t max_body_chars = 2000) {
  const Embedding q = embedder.embed(query);
  std::vector<ScoredRecord> scored;
  for (size_t i = 0; i < stream.records.size(); ++i) {
    const auto &r = stream.records[i];
    if (!r.clicked_page) continue;
    auto e = embedder.embed(page_embedding_text(*r.clicked_page, max_body_chars));
    scored.push_back({i, similarity(e, q)});
  }
  auto better = [&](const ScoredRecord &a, const ScoredRecord &b) {
    if (a.score != b.score) return a.score > b.score;
    const auto ta = stream.records[a.index].timestamp;
    const auto tb = stream.records[b.index].timestamp;
    if (ta != tb) return ta < tb;
    return a.index < b.index;
  };
  size_t n = std::min(top_k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<ptrdiff_t>(n),
                    scored.end(), better);
  scored.resize(n);
  return scored;
}

inline std::vector<WebPage> retrieve_history(const SearchContext &ctx,
                                             const MemoryStream &stream,
                                             const Embedder &embedder,
                                             const RetrievalConfig &cfg,
                                             size_t max_body_chars = 2000) {
  cfg.validate();
  std::vector<WebPage> out;
  for (const auto &s : rank_history(ctx.current_query, stream, embedder,
                                    cfg.history_top_k, max_body_chars)) {
    out.push_back(*stream.records[s.index].clicked_page);
  }
  return out;
}

}  // namespace klamp

#endif  // KLAMP_RETRIEVAL_HPP
