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

#ifndef KLAMP_EMBEDDER_HPP
#define KLAMP_EMBEDDER_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "klamp/core.hpp"
#include "klamp/rng.hpp"

namespace klamp {

struct Embedding {
  std::vector<double> values;

  size_t dim() const { return values.size(); }

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  bool is_zero() const {
    for (double v : values) {
      if (v != 0.0) return false;
    }
    return true;
  }

  friend bool operator==(const Embedding &, const Embedding &) = default;
};

// Scales to unit L2 norm; the zero vector is returned unchanged.
inline Embedding normalized(Embedding e) {
  double n = e.norm();
  if (n > 0.0) {
    for (double &v : e.values) v /= n;
  }
  return e;
}

// Dot product.
inline double similarity(const Embedding &a, const Embedding &b) {
  if (a.dim() != b.dim()) {
    throw InvalidInput("embedding dimension mismatch: " +
                       std::to_string(a.dim()) + " vs " +
                       std::to_string(b.dim()));
  }
  double s = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual size_t dim() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;

  virtual std::vector<Embedding> embed_batch(
      const std::vector<std::string> &texts) const {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto &t : texts) out.push_back(embed(t));
    return out;
  }
};

// Lowercased word tokens; any non-alphanumeric ASCII byte separates tokens.
inline std::vector<std::string_view> word_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_byte(text[i])) ++i;
    size_t start = i;
    while (i < text.size() && is_word_byte(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

// Feature-hashed bag of words: each lowercased token adds 1 to bucket
// fnv1a64(token) mod dim, then the vector is L2-normalized. Text without
// tokens maps to the zero vector.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr size_t kDefaultDim = 256;

  explicit HashingEmbedder(size_t dim = kDefaultDim) : dim_(dim) {
    if (dim_ == 0) throw InvalidInput("embedding dim must be positive");
  }

  size_t dim() const override { return dim_; }

  Embedding embed(std::string_view text) const override {
    Embedding e;
    e.values.assign(dim_, 0.0);
    for (auto token : word_tokens(text)) {
      std::string lower = to_lower(token);
      e.values[fnv1a64(lower.data(), lower.size()) % dim_] += 1.0;
    }
    return normalized(std::move(e));
  }

 private:
  size_t dim_;
};

enum class EmbedderBackend { kFallback, kRemote };

struct EmbedderConfig {
  EmbedderBackend backend = EmbedderBackend::kFallback;
  size_t dim = HashingEmbedder::kDefaultDim;
  std::optional<std::string> endpoint;
  int timeout_ms = 10000;
  int max_retries = 2;
  int max_in_flight = 4;
  // Page body characters embedded for history retrieval.
  size_t max_body_chars = 2000;

  void validate() const {
    if (backend == EmbedderBackend::kRemote &&
        (!endpoint || endpoint->empty())) {
      throw InvalidInput("remote embedder requires an endpoint");
    }
    if (dim == 0) throw InvalidInput("embedding dim must be positive");
  }
};

}  // namespace klamp

#endif  // KLAMP_EMBEDDER_HPP
