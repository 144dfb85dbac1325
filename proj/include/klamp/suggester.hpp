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

#ifndef KLAMP_SUGGESTER_HPP
#define KLAMP_SUGGESTER_HPP

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "klamp/core.hpp"
#include "klamp/prompt_defaults.hpp"
#include "klamp/retrieval.hpp"
#include "klamp/store.hpp"

namespace klamp {

enum class Variant { kQs, kCqs, kCqsKs, kKlamp };

inline constexpr std::array<Variant, 4> kAllVariants = {
    Variant::kQs, Variant::kCqs, Variant::kCqsKs, Variant::kKlamp};

inline const char *variant_name(Variant v) {
  switch (v) {
    case Variant::kQs: return "qs";
    case Variant::kCqs: return "cqs";
    case Variant::kCqsKs: return "cqs_ks";
    case Variant::kKlamp: return "klamp";
  }
  return "?";
}

inline Variant parse_variant(std::string_view name) {
  for (auto v : kAllVariants) {
    if (name == variant_name(v)) return v;
  }
  throw InvalidInput("unknown variant: " + std::string(name));
}

inline bool variant_needs_page(Variant v) { return v != Variant::kQs; }

// Section headers each variant's user message must contain, in order.
inline std::vector<std::string> required_sections(Variant v) {
  std::vector<std::string> s = {"Query:", "Session:"};
  if (v != Variant::kQs) {
    s.push_back("Article Title:");
    s.push_back("Article Text:");
  }
  if (v == Variant::kCqsKs) {
    s.push_back("Related Article Title:");
    s.push_back("Related Article Text:");
  }
  if (v == Variant::kKlamp) s.push_back("Personal Entities:");
  return s;
}

// ---------------------------------------------------------------------------
// Templates.

// Replaces {Name} placeholders in one left-to-right pass; substituted text
// is never rescanned. Unknown placeholders are kept verbatim.
inline std::string fill_template(std::string_view tpl,
                                 const std::map<std::string, std::string> &vars) {
  std::string out;
  out.reserve(tpl.size());
  size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      auto close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out.append(it->second);
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tpl[i++]);
  }
  return out;
}

struct PromptTemplates {
  std::string system;
  std::array<std::string, 4> user;  // indexed by Variant
  std::string summary_system;
  std::string summary_user;

  const std::string &for_variant(Variant v) const {
    return user[static_cast<size_t>(v)];
  }

  static PromptTemplates defaults() {
    namespace d = prompt_defaults;
    PromptTemplates t;
    t.system = d::kSystemTemplate;
    t.user = {std::string(d::kQsTemplate), std::string(d::kCqsTemplate),
              std::string(d::kCqsKsTemplate), std::string(d::kKlampTemplate)};
    t.summary_system = d::kSummarySystemTemplate;
    t.summary_user = d::kSummaryTemplate;
    return t;
  }

  // Reads system.txt, {qs,cqs,cqs_ks,klamp}.txt, summary_system.txt and
  // summary.txt from `dir`. Missing files keep the built-in text. One
  // trailing newline is dropped from each file.
  static PromptTemplates load(const std::filesystem::path &dir) {
    auto t = defaults();
    auto read = [&](const char *name, std::string &slot) {
      std::ifstream in(dir / name, std::ios::binary);
      if (!in) return;
      std::ostringstream ss;
      ss << in.rdbuf();
      std::string text = ss.str();
      if (!text.empty() && text.back() == '\n') text.pop_back();
      if (!text.empty() && text.back() == '\r') text.pop_back();
      slot = std::move(text);
    };
    read("system.txt", t.system);
    for (auto v : kAllVariants) {
      read((std::string(variant_name(v)) + ".txt").c_str(),
           t.user[static_cast<size_t>(v)]);
    }
    read("summary_system.txt", t.summary_system);
    read("summary.txt", t.summary_user);
    return t;
  }
};

struct PromptOptions {
  // Article and related-article text characters placed in the prompt.
  size_t max_article_chars = 4000;
};

// Values the user message was filled from. Kept with the bundle so
// backends and tooling can inspect the context without reparsing text.
struct PromptSlots {
  std::string query;
  std::vector<std::string> session;
  std::string article_title;
  std::string article_text;
  std::string related_title;
  std::string related_text;
  std::vector<std::string> entities;
};

struct PromptBundle {
  std::string system_message;
  std::string user_message;
  Variant variant = Variant::kQs;
  PromptSlots slots;
};

inline constexpr std::string_view kListSeparator = " | ";

inline PromptBundle build_prompt(Variant variant, const SearchContext &ctx,
                                 const RetrievedKnowledge *knowledge,
                                 const PromptTemplates &templates,
                                 const PromptOptions &opts = {}) {
  if (ctx.current_query.empty()) {
    throw InvalidInput("current query must be non-empty");
  }
  if (variant_needs_page(variant) && !ctx.current_page) {
    throw InvalidInput(std::string("variant ") + variant_name(variant) +
                       " requires the current page");
  }
  PromptBundle b;
  b.variant = variant;
  b.system_message = templates.system;
  PromptSlots &s = b.slots;
  s.query = ctx.current_query;
  s.session = ctx.session_history;
  if (variant_needs_page(variant)) {
    s.article_title = ctx.current_page->title;
    s.article_text =
        truncate_utf8(ctx.current_page->body_text, opts.max_article_chars);
  }
  if (variant == Variant::kCqsKs) {
    if (knowledge == nullptr || knowledge->pages.size() != 1) {
      throw MissingKnowledge(
          "variant cqs_ks requires exactly one retrieved page");
    }
    s.related_title = knowledge->pages.front().title;
    s.related_text = truncate_utf8(knowledge->pages.front().body_text,
                                   opts.max_article_chars);
  }
  if (variant == Variant::kKlamp) {
    if (knowledge == nullptr || knowledge->strategy == Strategy::kHistory) {
      throw MissingKnowledge("variant klamp requires entity knowledge");
    }
    for (const auto &e : knowledge->entities) s.entities.push_back(e.str());
  }
  std::map<std::string, std::string> vars = {
      {"Query", s.query},
      {"Session", join(s.session, kListSeparator)},
      {"ArticleTitle", s.article_title},
      {"ArticleText", s.article_text},
      {"RelatedArticleTitle", s.related_title},
      {"RelatedArticleText", s.related_text},
      {"Entities", join(s.entities, kListSeparator)},
  };
  b.user_message = fill_template(templates.for_variant(variant), vars);
  return b;
}

// ---------------------------------------------------------------------------
// Generation backends.

struct GenerationParams {
  double temperature = 0.7;
  double top_p = 0.95;
  // 0 leaves the limit to the backend.
  size_t max_output_tokens = 0;

  void validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
      throw InvalidInput("temperature must be in [0, 2]");
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) {
      throw InvalidInput("top_p must be in (0, 1]");
    }
  }
};

enum class RequestKind { kSuggestion, kSummary };

struct ChatRequest {
  RequestKind kind = RequestKind::kSuggestion;
  Variant variant = Variant::kQs;
  std::string system;
  std::string user;
  GenerationParams params;
  const PromptSlots *slots = nullptr;
};

class Generator {
 public:
  virtual ~Generator() = default;
  // Returns the raw completion text. Throws BackendUnavailable on
  // transport or backend errors.
  virtual std::string complete(const ChatRequest &request) const = 0;
};

inline std::string render_suggestion(std::string_view query,
                                     std::string_view rationale) {
  std::string out = "Query Suggestion: ";
  out.append(query);
  out.append("\nRationale: ");
  out.append(rationale);
  return out;
}

// Offline backend. Suggestions are the current query followed by the first
// piece of knowledge the variant adds: the first personal entity (klamp),
// the related article title (cqs_ks), the article title (cqs) or the first
// session query (qs). Summaries list the first five entities.
class MockGenerator final : public Generator {
 public:
  static constexpr std::string_view kRationale =
      "Deterministic mock suggestion built from the prompt context.";

  std::string complete(const ChatRequest &request) const override {
    static const PromptSlots kEmpty;
    const PromptSlots &s = request.slots ? *request.slots : kEmpty;
    if (request.kind == RequestKind::kSummary) {
      std::vector<std::string> first(
          s.entities.begin(),
          s.entities.begin() +
              static_cast<ptrdiff_t>(std::min<size_t>(5, s.entities.size())));
      return "Interested in: " + join(first, ", ");
    }
    std::string lead;
    switch (request.variant) {
      case Variant::kKlamp:
        if (!s.entities.empty()) lead = s.entities.front();
        break;
      case Variant::kCqsKs:
        lead = s.related_title;
        break;
      case Variant::kCqs:
        lead = s.article_title;
        break;
      case Variant::kQs:
        if (!s.session.empty()) lead = s.session.front();
        break;
    }
    std::string query = s.query;
    lead = collapse_whitespace(lead);
    if (!lead.empty()) query += " " + lead;
    return render_suggestion(collapse_whitespace(query), kRationale);
  }
};

// ---------------------------------------------------------------------------
// Output parsing.

struct ParsedSuggestion {
  std::string query;
  std::string rationale;

  friend bool operator==(const ParsedSuggestion &,
                         const ParsedSuggestion &) = default;
};

namespace detail {

inline size_t find_ci(std::string_view haystack, std::string_view needle,
                      size_t from = 0) {
  if (needle.size() > haystack.size()) return std::string_view::npos;
  for (size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    bool match = true;
    for (size_t k = 0; k < needle.size(); ++k) {
      if (ascii_lower(haystack[i + k]) != ascii_lower(needle[k])) {
        match = false;
        break;
      }
    }
    if (match) return i;
  }
  return std::string_view::npos;
}

// Strips surrounding straight or curly quotes and markdown emphasis.
inline std::string_view strip_quotes(std::string_view s) {
  static constexpr std::string_view kMarks[] = {
      "\"", "'", "*", "`", "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98",
      "\xE2\x80\x99"};
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    s = trim(s);
    for (auto m : kMarks) {
      if (s.starts_with(m)) {
        s.remove_prefix(m.size());
        changed = true;
      }
      if (s.ends_with(m)) {
        s.remove_suffix(m.size());
        changed = true;
      }
    }
  }
  return trim(s);
}

}  // namespace detail

// Extracts the text after the first case-insensitive "Query Suggestion:"
// up to the end of that line, and everything after a following
// "Rationale:" marker.
inline ParsedSuggestion parse_suggestion(std::string_view raw) {
  static constexpr std::string_view kQueryMarker = "query suggestion:";
  static constexpr std::string_view kRationaleMarker = "rationale:";
  auto q = detail::find_ci(raw, kQueryMarker);
  if (q == std::string_view::npos) {
    throw ParseFailure("no 'Query Suggestion:' marker in output",
                       std::string(raw));
  }
  size_t start = q + kQueryMarker.size();
  size_t eol = raw.find('\n', start);
  if (eol == std::string_view::npos) eol = raw.size();
  ParsedSuggestion out;
  out.query = std::string(detail::strip_quotes(raw.substr(start, eol - start)));
  if (out.query.empty()) {
    throw ParseFailure("empty query suggestion", std::string(raw));
  }
  auto r = detail::find_ci(raw, kRationaleMarker, eol);
  if (r != std::string_view::npos) {
    out.rationale =
        std::string(trim(raw.substr(r + kRationaleMarker.size())));
  }
  return out;
}

struct Suggestion {
  std::string query;
  std::string rationale;
  Variant variant = Variant::kQs;
  std::string raw_output;

  friend bool operator==(const Suggestion &, const Suggestion &) = default;
};

inline void to_json(Json &j, const Suggestion &s) {
  j = Json{{"query", s.query},
           {"rationale", s.rationale},
           {"variant", variant_name(s.variant)},
           {"raw_output", s.raw_output}};
}

inline Suggestion generate(const PromptBundle &bundle,
                           const GenerationParams &params,
                           const Generator &backend) {
  params.validate();
  ChatRequest req;
  req.kind = RequestKind::kSuggestion;
  req.variant = bundle.variant;
  req.system = bundle.system_message;
  req.user = bundle.user_message;
  req.params = params;
  req.slots = &bundle.slots;
  Suggestion out;
  out.raw_output = backend.complete(req);
  auto parsed = parse_suggestion(out.raw_output);
  out.query = std::move(parsed.query);
  out.rationale = std::move(parsed.rationale);
  out.variant = bundle.variant;
  return out;
}

// ---------------------------------------------------------------------------
// User interest summary.

inline constexpr size_t kSummaryEntities = 30;

struct UserSummary {
  UserId user;
  std::vector<EntityCount> top_entities;
  std::string summary_text;
};

inline void to_json(Json &j, const EntityCount &e) {
  j = Json{{"entity", e.entity}, {"count", e.count}};
}

inline void to_json(Json &j, const UserSummary &s) {
  j = Json{{"user", s.user},
           {"top_entities", s.top_entities},
           {"summary", s.summary_text}};
}

inline UserSummary summarize_user(const EntityKnowledgeStore &store,
                                  const Generator &backend,
                                  const GenerationParams &params,
                                  const PromptTemplates &templates) {
  if (store.empty()) {
    throw EmptyStore("cannot summarize user " + store.user().str() +
                     ": entity store is empty");
  }
  params.validate();
  UserSummary out;
  out.user = store.user();
  out.top_entities = top_k_entities(store, kSummaryEntities);
  PromptSlots slots;
  for (const auto &e : out.top_entities) slots.entities.push_back(e.entity.str());
  ChatRequest req;
  req.kind = RequestKind::kSummary;
  req.system = templates.summary_system;
  req.user = fill_template(templates.summary_user,
                           {{"Entities", join(slots.entities, kListSeparator)}});
  req.params = params;
  req.slots = &slots;
  out.summary_text = backend.complete(req);
  return out;
}

}  // namespace klamp

#endif  // KLAMP_SUGGESTER_HPP
