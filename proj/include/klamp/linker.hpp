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

#ifndef KLAMP_LINKER_HPP
#define KLAMP_LINKER_HPP

#include <fstream>
#include <istream>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "klamp/core.hpp"

namespace klamp {

// Lookup key for an alias: lowercased, whitespace collapsed.
inline std::string alias_key(std::string_view alias) {
  return to_lower(collapse_whitespace(alias));
}

// Alias dictionary. Every canonical id is also an alias of itself; when a
// self alias collides with an alias of another entity the self alias wins.
class Gazetteer {
 public:
  // Adds an alias. Returns false if the alias is already taken by another
  // entity (first registration wins) or normalizes to nothing.
  bool add(std::string_view alias, const EntityId &entity) {
    auto key = alias_key(alias);
    if (key.empty()) return false;
    add_self(entity);
    if (auto it = aliases_.find(key); it != aliases_.end()) {
      return it->second == entity;
    }
    insert(std::move(key), entity);
    return true;
  }

  const EntityId *find(std::string_view normalized_key) const {
    auto it = aliases_.find(std::string(normalized_key));
    return it == aliases_.end() ? nullptr : &it->second;
  }

  size_t size() const { return aliases_.size(); }
  size_t max_alias_length() const { return max_len_; }
  const std::unordered_map<std::string, EntityId> &aliases() const {
    return aliases_;
  }

  // "alias<TAB>canonical_id" per line. A line without a tab declares an
  // entity that is its own only alias. Blank lines and lines starting with
  // '#' are skipped.
  static Gazetteer read(std::istream &in) {
    Gazetteer gaz;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty() || line.front() == '#') continue;
      auto tab = line.find('\t');
      try {
        if (tab == std::string::npos) {
          gaz.add_self(EntityId(line));
        } else {
          gaz.add(std::string_view(line).substr(0, tab),
                  EntityId(std::string_view(line).substr(tab + 1)));
        }
      } catch (const InvalidEntity &e) {
        throw InvalidInput("gazetteer line " + std::to_string(lineno) + ": " +
                           e.what());
      }
    }
    return gaz;
  }

  static Gazetteer load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open gazetteer: " + path);
    return read(in);
  }

 private:
  void add_self(const EntityId &entity) {
    auto key = alias_key(entity.str());
    auto it = aliases_.find(key);
    if (it != aliases_.end() && it->second == entity) return;
    if (it != aliases_.end()) {
      it->second = entity;
      return;
    }
    insert(std::move(key), entity);
  }

  void insert(std::string key, const EntityId &entity) {
    max_len_ = std::max(max_len_, key.size());
    aliases_.emplace(std::move(key), entity);
  }

  std::unordered_map<std::string, EntityId> aliases_;
  size_t max_len_ = 0;
};

struct Mention {
  EntityId entity;
  std::string surface;
  size_t start = 0;
  size_t end = 0;

  friend bool operator==(const Mention &, const Mention &) = default;
};

// Pluggable entity linker. Implementations must be pure functions of the
// input text and safe to call concurrently.
class EntityLinker {
 public:
  virtual ~EntityLinker() = default;
  virtual std::vector<Mention> link(std::string_view text) const = 0;
};

// A position is a token boundary unless it falls between two word bytes.
inline bool is_token_boundary(std::string_view text, size_t pos) {
  if (pos == 0 || pos >= text.size()) return true;
  return !(is_word_byte(text[pos - 1]) && is_word_byte(text[pos]));
}

// Greedy leftmost-longest dictionary matching. Comparison is ASCII
// case-insensitive and a whitespace run in the text matches the single
// space of a normalized alias. Spans start and end on token boundaries and
// never overlap.
inline std::vector<Mention> link(std::string_view text, const Gazetteer &gaz) {
  std::vector<Mention> out;
  const size_t n = text.size();
  const size_t max_len = gaz.max_alias_length();
  size_t i = 0;
  std::string key;
  while (i < n) {
    if (is_space(text[i]) || !is_token_boundary(text, i)) {
      ++i;
      continue;
    }
    key.clear();
    size_t best_end = 0;
    const EntityId *best = nullptr;
    size_t j = i;
    while (j < n && key.size() <= max_len) {
      if (is_space(text[j])) {
        while (j < n && is_space(text[j])) ++j;
        key.push_back(' ');
        continue;
      }
      key.push_back(ascii_lower(text[j]));
      ++j;
      if (key.size() <= max_len && is_token_boundary(text, j)) {
        if (const EntityId *hit = gaz.find(key)) {
          best = hit;
          best_end = j;
        }
      }
    }
    if (best != nullptr) {
      out.push_back(Mention{*best, std::string(text.substr(i, best_end - i)),
                            i, best_end});
      i = best_end;
    } else {
      ++i;
    }
  }
  return out;
}

class GazetteerLinker final : public EntityLinker {
 public:
  explicit GazetteerLinker(std::shared_ptr<const Gazetteer> gaz)
      : gaz_(std::move(gaz)) {}

  std::vector<Mention> link(std::string_view text) const override {
    return klamp::link(text, *gaz_);
  }

  const Gazetteer &gazetteer() const { return *gaz_; }

 private:
  std::shared_ptr<const Gazetteer> gaz_;
};

struct LinkOptions {
  // Page body characters fed to the linker.
  size_t max_page_chars = 20000;
};

// Entities of a page: title first, then the (truncated) body.
inline std::vector<Mention> link_page(const WebPage &page,
                                      const EntityLinker &linker,
                                      const LinkOptions &opts = {}) {
  auto out = linker.link(page.title);
  auto body = linker.link(truncate_utf8(page.body_text, opts.max_page_chars));
  out.insert(out.end(), std::make_move_iterator(body.begin()),
             std::make_move_iterator(body.end()));
  return out;
}

// Every mention in a record: query, then clicked page.
inline std::vector<Mention> link_record(const SearchRecord &record,
                                        const EntityLinker &linker,
                                        const LinkOptions &opts = {}) {
  auto out = linker.link(record.query_text);
  if (record.clicked_page) {
    auto page = link_page(*record.clicked_page, linker, opts);
    out.insert(out.end(), std::make_move_iterator(page.begin()),
               std::make_move_iterator(page.end()));
  }
  return out;
}

// Distinct entities of the context [x . w] in first-occurrence order,
// query entities before page entities.
inline std::vector<EntityId> link_context(const SearchContext &ctx,
                                          const EntityLinker &linker,
                                          const LinkOptions &opts = {}) {
  std::vector<EntityId> out;
  std::unordered_set<EntityId> seen;
  auto take = [&](const std::vector<Mention> &mentions) {
    for (const auto &m : mentions) {
      if (seen.insert(m.entity).second) out.push_back(m.entity);
    }
  };
  take(linker.link(ctx.current_query));
  if (ctx.current_page) take(link_page(*ctx.current_page, linker, opts));
  return out;
}

}  // namespace klamp

#endif  // KLAMP_LINKER_HPP
