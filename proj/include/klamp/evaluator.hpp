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

#ifndef KLAMP_EVALUATOR_HPP
#define KLAMP_EVALUATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "klamp/core.hpp"
#include "klamp/embedder.hpp"
#include "klamp/ingest.hpp"
#include "klamp/linker.hpp"
#include "klamp/retrieval.hpp"
#include "klamp/store.hpp"
#include "klamp/suggester.hpp"

namespace klamp {

// ---------------------------------------------------------------------------
// Agreement statistics.

// Spearman's rho for two strict rankings: 1 - 6 sum d^2 / (n (n^2 - 1)).
// Both inputs must be permutations of 1..n with n >= 2.
inline double spearman(const std::vector<int> &rank_a,
                       const std::vector<int> &rank_b) {
  const size_t n = rank_a.size();
  if (n != rank_b.size()) throw InvalidInput("spearman: length mismatch");
  if (n < 2) throw InvalidInput("spearman: need at least two items");
  auto check = [n](const std::vector<int> &r) {
    std::vector<bool> seen(n + 1, false);
    for (int v : r) {
      if (v < 1 || static_cast<size_t>(v) > n || seen[v]) {
        throw InvalidInput("spearman: input is not a permutation of 1..n");
      }
      seen[v] = true;
    }
  };
  check(rank_a);
  check(rank_b);
  long long d2 = 0;
  for (size_t i = 0; i < n; ++i) {
    long long d = rank_a[i] - rank_b[i];
    d2 += d * d;
  }
  const auto nn = static_cast<long long>(n);
  return 1.0 - static_cast<double>(6 * d2) /
                   static_cast<double>(nn * (nn * nn - 1));
}

template <typename Label>
double exact_match_agreement(const std::vector<Label> &a,
                             const std::vector<Label> &b) {
  if (a.size() != b.size()) throw InvalidInput("agreement: length mismatch");
  if (a.empty()) throw InvalidInput("agreement: empty input");
  size_t same = 0;
  for (size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

// Cohen's kappa with chance agreement from the two marginal label
// distributions. When chance agreement is 1 the result is 1 if observed
// agreement is also 1 and 0 otherwise.
template <typename Label>
double cohens_kappa(const std::vector<Label> &a, const std::vector<Label> &b) {
  const double po = exact_match_agreement(a, b);
  const double n = static_cast<double>(a.size());
  std::map<Label, std::pair<size_t, size_t>> marginals;
  for (size_t i = 0; i < a.size(); ++i) {
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
  }
  double pe = 0.0;
  for (const auto &[label, m] : marginals) {
    pe += (static_cast<double>(m.first) / n) * (static_cast<double>(m.second) / n);
  }
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

// ---------------------------------------------------------------------------
// Search client used by the validity metric.

struct SearchResult {
  std::string title;
  std::string snippet;
};

class SearchClient {
 public:
  virtual ~SearchClient() = default;
  // Top result for the query, or nullopt when nothing matches. Throws on
  // failure.
  virtual std::optional<SearchResult> top_result(std::string_view query) const = 0;
};

// Offline search over a fixed corpus. A document scores one point per
// distinct query token found as a substring of its lowercased title and
// snippet, plus (tokens + 1) when the whole lowercased query occurs in it.
// The highest score wins, earlier documents on ties; zero means no result.
class FixtureSearchClient final : public SearchClient {
 public:
  explicit FixtureSearchClient(std::vector<SearchResult> corpus)
      : corpus_(std::move(corpus)) {
    for (const auto &d : corpus_) {
      haystacks_.push_back(to_lower(d.title + " " + d.snippet));
    }
  }

  std::optional<SearchResult> top_result(std::string_view query) const override {
    const std::string q = to_lower(collapse_whitespace(query));
    std::set<std::string> tokens;
    for (auto t : word_tokens(q)) tokens.emplace(t);
    if (tokens.empty()) return std::nullopt;
    size_t best = 0;
    const SearchResult *hit = nullptr;
    for (size_t i = 0; i < corpus_.size(); ++i) {
      const auto &hay = haystacks_[i];
      size_t score = 0;
      for (const auto &t : tokens) score += hay.find(t) != std::string::npos;
      if (hay.find(q) != std::string::npos) score += tokens.size() + 1;
      if (score > best) {
        best = score;
        hit = &corpus_[i];
      }
    }
    if (hit == nullptr) return std::nullopt;
    return *hit;
  }

  size_t size() const { return corpus_.size(); }

  // One JSON object per line: {"title": string, "snippet": string}.
  static FixtureSearchClient load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open search corpus: " + path);
    std::vector<SearchResult> docs;
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      auto j = Json::parse(line);
      docs.push_back({j.value("title", std::string()),
                      j.value("snippet", std::string())});
    }
    return FixtureSearchClient(std::move(docs));
  }

  // Corpus made of every clicked page in the datasets (title plus the
  // first `snippet_chars` characters of the body), deduplicated by URL.
  static FixtureSearchClient from_datasets(
      const std::vector<UserDataset> &datasets, size_t snippet_chars = 300) {
    std::vector<SearchResult> docs;
    std::set<std::string> urls;
    auto take = [&](const std::vector<Session> &sessions) {
      for (const auto &s : sessions) {
        for (const auto &r : s.records) {
          if (!r.clicked_page || !urls.insert(r.clicked_page->url).second) {
            continue;
          }
          docs.push_back({r.clicked_page->title,
                          std::string(truncate_utf8(r.clicked_page->body_text,
                                                    snippet_chars))});
        }
      }
    };
    for (const auto &d : datasets) {
      take(d.history_sessions);
      take(d.holdout_sessions);
    }
    return FixtureSearchClient(std::move(docs));
  }

 private:
  std::vector<SearchResult> corpus_;
  std::vector<std::string> haystacks_;
};

// ---------------------------------------------------------------------------
// Automatic metrics.

// Similarity between the suggestion and the top search result for it.
// 0 when there is no result, nullopt when the search client fails.
inline std::optional<double> auto_validity(const Suggestion &suggestion,
                                           const SearchClient &search,
                                           const Embedder &embedder) {
  std::optional<SearchResult> top;
  try {
    top = search.top_result(suggestion.query);
  } catch (const std::exception &) {
    return std::nullopt;
  }
  if (!top) return 0.0;
  return similarity(embedder.embed(suggestion.query),
                    embedder.embed(top->title + " " + top->snippet));
}

inline double auto_relatedness(const Suggestion &suggestion,
                               const std::vector<EntityId> &entities,
                               const Embedder &embedder) {
  if (entities.empty()) return 0.0;
  std::vector<std::string> names;
  for (const auto &e : entities) names.push_back(e.str());
  return similarity(embedder.embed(suggestion.query),
                    embedder.embed(join(names, " ")));
}

// Best similarity to any query the user issued next.
inline double auto_usefulness(const Suggestion &suggestion,
                              const std::vector<std::string> &next_queries,
                              const Embedder &embedder) {
  if (next_queries.empty()) return 0.0;
  const Embedding s = embedder.embed(suggestion.query);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto &q : next_queries) {
    best = std::max(best, similarity(s, embedder.embed(q)));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Evaluation contexts.

struct EvalContext {
  UserId user;
  std::string context_id;
  Timestamp timestamp = 0;
  SearchContext context;
  std::vector<std::string> next_queries;
};

// Every clicked record of a holdout session is one context: its query and
// page, the earlier queries of the session, and the later ones as targets.
inline std::vector<EvalContext> extract_contexts(const UserDataset &dataset) {
  std::vector<EvalContext> out;
  for (const auto &s : dataset.holdout_sessions) {
    for (size_t i = 0; i < s.records.size(); ++i) {
      const auto &r = s.records[i];
      if (!r.clicked_page) continue;
      EvalContext c;
      c.user = dataset.user;
      c.context_id = s.id + "#" + std::to_string(i);
      c.timestamp = r.timestamp;
      c.context.current_query = r.query_text;
      c.context.current_page = r.clicked_page;
      for (size_t k = 0; k < i; ++k) {
        c.context.session_history.push_back(s.records[k].query_text);
      }
      for (size_t k = i + 1; k < s.records.size(); ++k) {
        c.next_queries.push_back(s.records[k].query_text);
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison harness.

struct MetricRecord {
  UserId user;
  std::string context_id;
  Variant variant = Variant::kQs;
  std::string query;
  std::optional<double> validity;
  double relatedness = 0.0;
  double usefulness = 0.0;
};

struct VariantSummary {
  Variant variant = Variant::kQs;
  size_t contexts = 0;
  size_t validity_contexts = 0;
  double validity = 0.0;
  double relatedness = 0.0;
  double usefulness = 0.0;
  size_t parse_failures = 0;
  size_t missing_knowledge = 0;
  size_t backend_failures = 0;
};

struct ContextRanking {
  UserId user;
  std::string context_id;
  std::vector<Variant> ranking;
};

struct ComparisonReport {
  std::vector<VariantSummary> variants;
  std::vector<Variant> ranking_by_usefulness;
  std::vector<ContextRanking> context_rankings;
  std::vector<MetricRecord> records;
  size_t contexts_total = 0;
  size_t contexts_evaluated = 0;
  size_t contexts_excluded = 0;
};

struct ComparisonConfig {
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  Strategy klamp_strategy = Strategy::kCombined;
  RetrievalConfig retrieval;
  GenerationParams generation;
  PromptOptions prompt;
  LinkOptions link;
  size_t max_embed_body_chars = 2000;
};

struct ComparisonBackends {
  const EntityLinker &linker;
  const Embedder &embedder;
  const Generator &generator;
  const SearchClient &search;
  const PromptTemplates &templates;
};

inline std::string variant_display_name(Variant v) {
  switch (v) {
    case Variant::kQs: return "Query Suggestion";
    case Variant::kCqs: return "Contextual Query Suggestion";
    case Variant::kCqsKs: return "Contextual Query Suggestion w/ K_s";
    case Variant::kKlamp: return "K-LaMP";
  }
  return "?";
}

// Replays every holdout context through every variant and scores the
// suggestions. Stores are built from history only. A context where any
// variant fails is excluded from all means, so every variant is scored on
// the same context set. Users are processed in id order and every context
// draws from its own seed, so the report does not depend on input order.
inline ComparisonReport run_comparison(std::vector<UserDataset> datasets,
                                       const ComparisonConfig &cfg,
                                       const ComparisonBackends &be) {
  if (cfg.variants.empty()) throw InvalidInput("no variants to compare");
  cfg.retrieval.validate();
  std::sort(datasets.begin(), datasets.end(),
            [](const UserDataset &a, const UserDataset &b) {
              return a.user < b.user;
            });

  ComparisonReport report;
  std::map<Variant, VariantSummary> sums;
  for (auto v : cfg.variants) sums[v].variant = v;

  for (const auto &dataset : datasets) {
    const auto store = build_entity_store(dataset, be.linker, cfg.link);
    const auto stream = build_memory_stream(dataset);
    for (const auto &ec : extract_contexts(dataset)) {
      ++report.contexts_total;
      const std::string key = ec.user.str() + "|" + ec.context_id;
      RetrievalConfig rcfg = cfg.retrieval;
      rcfg.rng_seed =
          mix_seed(cfg.retrieval.rng_seed, fnv1a64(key.data(), key.size()));
      const auto ctx_entities = link_context(ec.context, be.linker, cfg.link);
      const auto entity_knowledge = retrieve_entities(
          cfg.klamp_strategy, ctx_entities, store, rcfg, ec.timestamp);
      RetrievedKnowledge history;
      history.strategy = Strategy::kHistory;
      RetrievalConfig hcfg = rcfg;
      hcfg.history_top_k = 1;
      history.pages = retrieve_history(ec.context, stream, be.embedder, hcfg,
                                       cfg.max_embed_body_chars);

      std::vector<MetricRecord> rows;
      bool failed = false;
      for (auto v : cfg.variants) {
        const RetrievedKnowledge *k = nullptr;
        if (v == Variant::kKlamp) k = &entity_knowledge;
        if (v == Variant::kCqsKs) k = &history;
        try {
          auto bundle = build_prompt(v, ec.context, k, be.templates, cfg.prompt);
          auto s = generate(bundle, cfg.generation, be.generator);
          MetricRecord m;
          m.user = ec.user;
          m.context_id = ec.context_id;
          m.variant = v;
          m.query = s.query;
          m.validity = auto_validity(s, be.search, be.embedder);
          m.relatedness =
              auto_relatedness(s, entity_knowledge.entities, be.embedder);
          m.usefulness = auto_usefulness(s, ec.next_queries, be.embedder);
          rows.push_back(std::move(m));
        } catch (const ParseFailure &) {
          ++sums[v].parse_failures;
          failed = true;
        } catch (const MissingKnowledge &) {
          ++sums[v].missing_knowledge;
          failed = true;
        } catch (const BackendUnavailable &) {
          ++sums[v].backend_failures;
          failed = true;
        }
      }
      if (failed) {
        ++report.contexts_excluded;
        continue;
      }
      ++report.contexts_evaluated;
      const bool all_valid = std::all_of(
          rows.begin(), rows.end(),
          [](const MetricRecord &m) { return m.validity.has_value(); });
      for (const auto &m : rows) {
        auto &s = sums[m.variant];
        ++s.contexts;
        if (all_valid) {
          ++s.validity_contexts;
          s.validity += *m.validity;
        }
        s.relatedness += m.relatedness;
        s.usefulness += m.usefulness;
      }
      ContextRanking cr;
      cr.user = ec.user;
      cr.context_id = ec.context_id;
      std::vector<const MetricRecord *> order;
      for (const auto &m : rows) order.push_back(&m);
      std::stable_sort(order.begin(), order.end(),
                       [](const MetricRecord *a, const MetricRecord *b) {
                         return a->usefulness > b->usefulness;
                       });
      for (const auto *m : order) cr.ranking.push_back(m->variant);
      report.context_rankings.push_back(std::move(cr));
      for (auto &m : rows) report.records.push_back(std::move(m));
    }
  }

  for (auto v : cfg.variants) {
    auto s = sums[v];
    if (s.contexts > 0) {
      s.relatedness /= static_cast<double>(s.contexts);
      s.usefulness /= static_cast<double>(s.contexts);
    }
    if (s.validity_contexts > 0) {
      s.validity /= static_cast<double>(s.validity_contexts);
    }
    report.variants.push_back(s);
  }
  std::vector<VariantSummary> by_use = report.variants;
  std::stable_sort(by_use.begin(), by_use.end(),
                   [](const VariantSummary &a, const VariantSummary &b) {
                     return a.usefulness > b.usefulness;
                   });
  for (const auto &s : by_use) report.ranking_by_usefulness.push_back(s.variant);
  return report;
}

// ---------------------------------------------------------------------------
// Report output.

inline void to_json(Json &j, const ComparisonReport &r) {
  Json variants = Json::array();
  for (const auto &s : r.variants) {
    variants.push_back(Json{{"variant", variant_name(s.variant)},
                            {"contexts", s.contexts},
                            {"validity", s.validity},
                            {"validity_contexts", s.validity_contexts},
                            {"relatedness", s.relatedness},
                            {"usefulness", s.usefulness},
                            {"parse_failures", s.parse_failures},
                            {"missing_knowledge", s.missing_knowledge},
                            {"backend_failures", s.backend_failures}});
  }
  Json ranking = Json::array();
  for (auto v : r.ranking_by_usefulness) ranking.push_back(variant_name(v));
  Json contexts = Json::array();
  for (const auto &c : r.context_rankings) {
    Json order = Json::array();
    for (auto v : c.ranking) order.push_back(variant_name(v));
    contexts.push_back(Json{{"user", c.user},
                            {"context", c.context_id},
                            {"ranking", std::move(order)}});
  }
  Json records = Json::array();
  for (const auto &m : r.records) {
    records.push_back(Json{
        {"user", m.user},
        {"context", m.context_id},
        {"variant", variant_name(m.variant)},
        {"query", m.query},
        {"validity", m.validity ? Json(*m.validity) : Json(nullptr)},
        {"relatedness", m.relatedness},
        {"usefulness", m.usefulness}});
  }
  j = Json{{"contexts_total", r.contexts_total},
           {"contexts_evaluated", r.contexts_evaluated},
           {"contexts_excluded", r.contexts_excluded},
           {"variants", std::move(variants)},
           {"ranking_by_usefulness", std::move(ranking)},
           {"context_rankings", std::move(contexts)},
           {"records", std::move(records)}};
}

// Aligned text table: one row per variant with the three metric means.
inline std::string format_report_table(const ComparisonReport &r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-36s %10s %12s %11s %9s\n", "Types",
                "Validness", "Relatedness", "Usefulness", "Contexts");
  out += line;
  out += std::string(82, '-') + "\n";
  for (const auto &s : r.variants) {
    std::snprintf(line, sizeof line, "%-36s %10.4f %12.4f %11.4f %9zu\n",
                  variant_display_name(s.variant).c_str(), s.validity,
                  s.relatedness, s.usefulness, s.contexts);
    out += line;
  }
  out += std::string(82, '-') + "\n";
  std::snprintf(line, sizeof line,
                "contexts: %zu evaluated, %zu excluded, %zu total\n",
                r.contexts_evaluated, r.contexts_excluded, r.contexts_total);
  out += line;
  std::vector<std::string> names;
  for (auto v : r.ranking_by_usefulness) names.push_back(variant_name(v));
  out += "ranking by usefulness: " + join(names, " > ") + "\n";
  return out;
}

}  // namespace klamp

#endif  // KLAMP_EVALUATOR_HPP
