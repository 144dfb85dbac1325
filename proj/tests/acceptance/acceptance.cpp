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


// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "klamp/config.hpp"
#include "klamp/evaluator.hpp"
#include "klamp/service.hpp"
#include "support.hpp"

namespace {

using namespace klamp;
using klamp::testing::ids;
using klamp::testing::page;
using klamp::testing::rec;

// Pinned tolerances.
constexpr double kProbTol = 0.01;
constexpr double kChi2Df2 = 9.210;  // alpha 0.01
constexpr double kChi2Df1 = 6.635;
constexpr double kSamplingSeconds = 10.0;
constexpr double kEndToEndSeconds = 30.0;
constexpr double kKappaTol = 1e-12;
constexpr double kSelfMatchTol = 1e-6;
constexpr double kSpearmanTol = 1e-12;
constexpr Timestamp kNow = 1'700'000'000;

struct Failure {
  std::string why;
};

void require(bool ok, const std::string &why) {
  if (!ok) throw Failure{why};
}

std::string read(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double chi_squared(const std::vector<int> &obs, const std::vector<double> &p, int n) {
  double x = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    double e = p[i] * n;
    x += (obs[i] - e) * (obs[i] - e) / e;
  }
  return x;
}

RetrievalConfig rcfg(size_t sample, std::uint64_t seed) {
  RetrievalConfig c;
  c.sample_size = sample;
  c.rng_seed = seed;
  return c;
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(6);
  ss << x;
  return ss.str();
}

// ---------------------------------------------------------------------------

std::string check_sampling() {
  auto t0 = std::chrono::steady_clock::now();
  const int n = 100000;
  EntityKnowledgeStore s(UserId("u"));
  s.set(EntityId("A"), {7, kNow, kNow});
  s.set(EntityId("B"), {2, kNow, kNow});
  s.set(EntityId("C"), {1, kNow, kNow});
  std::vector<int> fam(3, 0);
  auto ctx = ids({"A", "B", "C"});
  for (int i = 0; i < n; ++i) {
    auto out = retrieve_familiar(ctx, s, rcfg(1, static_cast<std::uint64_t>(i)), kNow);
    require(out.size() == 1, "familiar returned " + std::to_string(out.size()));
    fam[out[0].str()[0] - 'A']++;
  }
  const std::vector<double> pf = {0.7, 0.2, 0.1};
  for (int k = 0; k < 3; ++k) {
    require(std::abs(fam[k] / double(n) - pf[k]) <= kProbTol,
            "familiar p" + std::to_string(k) + " = " + fmt(fam[k] / double(n)));
  }
  double x2f = chi_squared(fam, pf, n);
  require(x2f < kChi2Df2, "familiar chi2 " + fmt(x2f));

  EntityKnowledgeStore u(UserId("u"));
  u.set(EntityId("B"), {9, kNow, kNow});
  std::vector<int> unf(2, 0);
  auto ctx2 = ids({"A", "B"});
  for (int i = 0; i < n; ++i) {
    auto out = retrieve_unfamiliar(ctx2, u, rcfg(1, static_cast<std::uint64_t>(i)), kNow);
    require(out.size() == 1, "unfamiliar returned " + std::to_string(out.size()));
    unf[out[0].str() == "A" ? 0 : 1]++;
  }
  const std::vector<double> pu = {10.0 / 11.0, 1.0 / 11.0};
  for (int k = 0; k < 2; ++k) {
    require(std::abs(unf[k] / double(n) - pu[k]) <= kProbTol,
            "unfamiliar p" + std::to_string(k) + " = " + fmt(unf[k] / double(n)));
  }
  double x2u = chi_squared(unf, pu, n);
  require(x2u < kChi2Df1, "unfamiliar chi2 " + fmt(x2u));
  double secs = seconds_since(t0);
  require(secs < kSamplingSeconds, "took " + fmt(secs) + " s");
  return "chi2 " + fmt(x2f) + " / " + fmt(x2u) + ", " + fmt(secs) + " s";
}

std::string check_lapse() {
  EntityKnowledgeStore s(UserId("u"));
  s.set(EntityId("D13"), {3, kNow - 30 * kDay, kNow - 13 * kDay});
  s.set(EntityId("D14"), {3, kNow - 30 * kDay, kNow - 14 * kDay});
  s.set(EntityId("D15"), {3, kNow - 30 * kDay, kNow - 15 * kDay});
  RetrievalConfig c = rcfg(10, 1);
  require(c.lapse_window_seconds == 14 * kDay, "default window");
  auto out = retrieve_lapsed(ids({"D13", "D14", "D15"}), s, c, kNow);
  require(out == ids({"D15"}), "got " + std::to_string(out.size()) + " entities");
  return "13d excluded, 14d excluded, 15d included";
}

std::string check_history_oracle() {
  HashingEmbedder emb;
  std::mt19937_64 rng(2024);
  const std::vector<std::string> vocab = {"apple", "tim",   "cook",  "mars", "rover",
                                          "nasa",  "pasta", "olive", "oil",  "league",
                                          "goal",  "solar", "wind",  "chip", "stock"};
  auto words = [&](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += vocab[rng() % vocab.size()] + " ";
    return s;
  };
  MemoryStream stream{UserId("u"), {}};
  for (int i = 0; i < 1000; ++i) {
    stream.append(rec("u", 1 + static_cast<Timestamp>(rng() % 4000), words(2),
                      page("http://h/" + std::to_string(i), words(3), words(12))));
  }
  // Page vectors computed once, ranked by a full sort.
  std::vector<std::vector<double>> vecs;
  for (const auto &r : stream.records) {
    vecs.push_back(emb.embed(r.clicked_page->title + " " +
                             std::string(truncate_utf8(r.clicked_page->body_text, 2000)))
                       .values);
  }
  for (int q = 0; q < 100; ++q) {
    std::string query = words(1 + static_cast<int>(rng() % 3));
    size_t k = 1 + rng() % 5;
    auto qv = emb.embed(query).values;
    std::vector<std::tuple<double, Timestamp, size_t>> all;
    for (size_t i = 0; i < vecs.size(); ++i) {
      double dot = 0.0;
      for (size_t d = 0; d < qv.size(); ++d) dot += vecs[i][d] * qv[d];
      all.emplace_back(-dot, stream.records[i].timestamp, i);
    }
    std::sort(all.begin(), all.end());
    SearchContext ctx;
    ctx.current_query = query;
    RetrievalConfig c;
    c.history_top_k = k;
    auto got = retrieve_history(ctx, stream, emb, c);
    require(got.size() == k, "size mismatch for query '" + query + "'");
    for (size_t i = 0; i < k; ++i) {
      const auto &want = *stream.records[std::get<2>(all[i])].clicked_page;
      require(got[i] == want, "rank " + std::to_string(i) + " differs for '" + query + "'");
    }
  }
  return "100 queries over 1000 records";
}

std::vector<std::string> sections_of(const std::string &msg) {
  static const std::vector<std::string> known = {
      "Query:", "Session:", "Article Title:", "Article Text:", "Related Article Title:",
      "Related Article Text:", "Personal Entities:"};
  std::vector<std::string> out;
  std::istringstream in(msg);
  std::string line;
  while (std::getline(in, line)) {
    for (const auto &k : known) {
      if (line.rfind(k, 0) == 0) out.push_back(k);
    }
  }
  return out;
}

bool superset(const std::vector<std::string> &big, const std::vector<std::string> &small) {
  std::set<std::string> b(big.begin(), big.end());
  return std::all_of(small.begin(), small.end(), [&](const auto &s) { return b.count(s); }) &&
         b.size() > std::set<std::string>(small.begin(), small.end()).size();
}

std::string check_prompts() {
  const auto ctx = klamp::testing::tim_cook_context();
  const auto ents = klamp::testing::tim_cook_entity_knowledge();
  const auto hist = klamp::testing::tim_cook_history_knowledge();
  const auto gdir = klamp::testing::golden_dir();
  std::map<Variant, std::vector<std::string>> secs;
  for (auto v : kAllVariants) {
    auto b = build_prompt(v, ctx, klamp::testing::knowledge_for(v, ents, hist),
                          PromptTemplates::defaults());
    require(b.user_message == read(gdir + "/prompt_" + variant_name(v) + ".txt"),
            std::string("golden mismatch: ") + variant_name(v));
    require(b.system_message == read(gdir + "/system.txt"), "system golden mismatch");
    secs[v] = sections_of(b.user_message);
  }
  require(superset(secs[Variant::kCqs], secs[Variant::kQs]), "cqs does not contain qs");
  require(superset(secs[Variant::kKlamp], secs[Variant::kCqs]), "klamp does not contain cqs");
  return "4 variants byte-identical, klamp > cqs > qs";
}

std::string check_statistics() {
  require(spearman({1, 2, 3, 4}, {2, 1, 4, 3}) == 0.6, "0.6 example");
  require(spearman({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}) == 1.0, "identity");
  require(spearman({1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}) == -1.0, "reversal");
  std::mt19937_64 rng(99);
  for (int t = 0; t < 1000; ++t) {
    int n = 2 + static_cast<int>(rng() % 20);
    std::vector<int> a(n), b(n);
    std::iota(a.begin(), a.end(), 1);
    std::iota(b.begin(), b.end(), 1);
    std::shuffle(a.begin(), a.end(), rng);
    std::shuffle(b.begin(), b.end(), rng);
    // closed form without ties
    double d2 = 0;
    for (int i = 0; i < n; ++i) d2 += double(a[i] - b[i]) * (a[i] - b[i]);
    double oracle = 1.0 - 6.0 * d2 / (double(n) * (double(n) * n - 1));
    require(std::abs(spearman(a, b) - oracle) <= kSpearmanTol,
            "permutation " + std::to_string(t) + " off by " + fmt(spearman(a, b) - oracle));
  }
  double k = cohens_kappa<int>({0, 0, 1, 1}, {0, 1, 0, 1});
  require(std::abs(k) <= kKappaTol, "kappa " + fmt(k));
  return "spearman 1000 permutations, kappa " + fmt(k);
}

std::string check_metrics() {
  HashingEmbedder emb;
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab = {"apple", "tim", "cook", "mars", "rover", "nasa",
                                          "chip", "café", "олимп", "goal"};
  auto words = [&](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += vocab[rng() % vocab.size()] + " ";
    return s;
  };
  std::vector<SearchResult> corpus;
  for (int i = 0; i < 30; ++i) corpus.push_back({words(2), words(6)});
  FixtureSearchClient search(corpus);
  auto in01 = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0 + 1e-12; };
  for (int t = 0; t < 500; ++t) {
    Suggestion s;
    s.query = words(1 + static_cast<int>(rng() % 4));
    auto v = auto_validity(s, search, emb);
    require(v.has_value() && in01(*v), "validity out of range");
    std::vector<EntityId> ents;
    for (int i = static_cast<int>(rng() % 4); i > 0; --i) ents.emplace_back(words(1));
    require(in01(auto_relatedness(s, ents, emb)), "relatedness out of range");
    std::vector<std::string> next;
    for (int i = static_cast<int>(rng() % 4); i > 0; --i) next.push_back(words(2));
    require(in01(auto_usefulness(s, next, emb)), "usefulness out of range");
  }
  Suggestion self;
  self.query = "tim cook leadership";
  FixtureSearchClient exact(std::vector<SearchResult>{{"tim cook", "leadership"}});
  require(std::abs(*auto_validity(self, exact, emb) - 1.0) <= kSelfMatchTol, "validity self");
  Suggestion ent;
  ent.query = "Apple Inc.";
  require(std::abs(auto_relatedness(ent, ids({"Apple Inc."}), emb) - 1.0) <= kSelfMatchTol,
          "relatedness self");
  require(std::abs(auto_usefulness(self, {"weather", "tim cook leadership"}, emb) - 1.0) <=
              kSelfMatchTol,
          "usefulness self");
  require(auto_relatedness(self, {}, emb) == 0.0, "relatedness empty");
  require(auto_usefulness(self, {}, emb) == 0.0, "usefulness empty");
  require(*auto_validity(self, FixtureSearchClient(std::vector<SearchResult>{}), emb) == 0.0, "validity empty");
  return "500 random cases in [0,1], identities hold";
}

std::string check_end_to_end() {
  auto t0 = std::chrono::steady_clock::now();
  auto cfg = load_app_config(klamp::testing::source_dir() + "/data/corpus/config.json");
  auto linker = load_linker(cfg);
  auto embedder = make_embedder(cfg.embedder);
  MockGenerator generator;
  auto templates = load_templates(cfg);
  require(cfg.events && cfg.search_corpus, "corpus config incomplete");

  auto run = [&]() {
    std::ifstream in(*cfg.events);
    auto ingest = ingest_log(in, cfg.ingest);
    auto search = FixtureSearchClient::load(cfg.search_corpus->string());
    ComparisonConfig cc;
    cc.retrieval = cfg.retrieval;
    cc.generation = cfg.generation;
    cc.prompt = cfg.prompt;
    cc.link = cfg.link;
    cc.max_embed_body_chars = cfg.embedder.max_body_chars;
    auto report = run_comparison(ingest.datasets, cc,
                                 {*linker, *embedder, generator, search, templates});
    return std::pair{Json(report).dump(2) + "\n", format_report_table(report)};
  };
  auto a = run();
  auto b = run();
  require(a.first == b.first, "JSON reports differ between runs");
  require(a.second == b.second, "text reports differ between runs");
  require(a.first == read(klamp::testing::golden_dir() + "/corpus_eval.json"),
          "JSON report differs from the checked-in reference");
  double secs = seconds_since(t0);
  require(secs < kEndToEndSeconds, "took " + fmt(secs) + " s");
  auto j = Json::parse(a.first);
  return std::to_string(j["contexts_evaluated"].get<size_t>()) + " contexts, " +
         fmt(secs) + " s";
}

std::string check_filters() {
  auto cfg = klamp::testing::six_user_config();
  auto sessions = klamp::testing::sessionize_all(klamp::testing::six_user_records(),
                                                 cfg.session_gap_seconds);
  auto once = apply_filters(sessions, cfg);
  require(once.report == klamp::testing::six_user_expected_report(),
          "report " + Json(once.report).dump());
  auto twice = apply_filters(once.sessions, cfg);
  require(twice.sessions == once.sessions, "second pass changed sessions");
  require(twice.report.removals() == 0, "second pass removed records");
  return "counts exact, idempotent";
}

std::string check_store() {
  std::mt19937_64 rng(10000);
  const std::vector<std::string> names = {"Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta"};
  std::vector<std::pair<std::string, std::string>> aliases;
  for (const auto &n : names) aliases.emplace_back(n, n);
  auto linker = klamp::testing::make_linker(aliases);
  auto words = [&]() {
    std::string s;
    for (int i = static_cast<int>(rng() % 4); i > 0; --i) s += names[rng() % names.size()] + " x ";
    return s + "y";
  };
  std::vector<SearchRecord> records;
  for (int i = 0; i < 10000; ++i) {
    std::optional<WebPage> p;
    if (rng() % 2) p = page("http://s/" + std::to_string(i), words(), words());
    records.push_back(rec("u", 1 + static_cast<Timestamp>(rng() % 100000), words(), p));
  }
  auto batch_of = [&](const std::vector<SearchRecord> &rs) {
    UserDataset d;
    d.user = UserId("u");
    d.history_sessions.push_back(Session{"u:0", d.user, rs});
    return build_entity_store(d, *linker);
  };
  auto batch = batch_of(records);
  auto shuffled = records;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  require(batch_of(shuffled) == batch, "permutation changed the store");
  EntityKnowledgeStore inc(UserId("u"));
  for (const auto &r : shuffled) inc.observe(r, *linker);
  require(inc == batch, "incremental differs from batch");
  return std::to_string(batch.total_mentions()) + " mentions over 10000 records";
}

// Service checks.

struct ServiceFixture {
  klamp::testing::TempDir dir{"klamp-accept"};
  AppConfig cfg;
  PipelineBackends be;
  ServiceFixture() {
    cfg.work_dir = dir.path();
    cfg.store_dir = dir.path() / "stores";
    cfg.snapshot_every = 4;
    cfg.retrieval.sample_size = 3;
    be.linker = klamp::testing::make_linker(
        {{"tim cook", "Tim_Cook"}, {"apple", "Apple_Inc."}, {"iphone", "IPhone"}});
    be.embedder = std::make_shared<HashingEmbedder>();
    be.generator = std::make_shared<MockGenerator>();
  }
};

HttpResponse call(Service &s, std::string method, std::string path, std::string body = "") {
  return s.handle(HttpRequest{std::move(method), std::move(path), {}, std::move(body)});
}

std::string event(Timestamp ts, const std::string &q) {
  return Json(rec("reader", ts, q)).dump();
}

std::string check_read_your_writes() {
  ServiceFixture f;
  Service s(f.cfg, f.be);
  Json body{{"query", "apple iphone"}, {"variant", "klamp"}, {"strategy", "familiar"},
            {"seed", 1}, {"now", kNow},
            {"page", {{"url", "https://news.example.com/g"}, {"title", "Gadgets"}, {"text", "reviews"}}}};
  auto entities_of = [&]() {
    auto r = call(s, "POST", "/users/reader/suggest", body.dump());
    require(r.status == 200, "suggest status " + std::to_string(r.status) + " " + r.body.dump());
    return r.body["knowledge"]["entities"];
  };
  require(entities_of().empty(), "cold user has familiar entities");
  require(call(s, "POST", "/events", event(kNow - 10, "apple")).status == 200, "post 1");
  require(entities_of() == Json::array({"Apple_Inc."}), "first write not visible");
  require(call(s, "POST", "/events", event(kNow - 5, "iphone")).status == 200, "post 2");
  auto after = entities_of();
  require(after.size() == 2, "second write not visible: " + after.dump());
  auto counts = call(s, "GET", "/users/reader/entities");
  require(counts.body["entities"].size() == 2, "entity list " + counts.body.dump());
  return "each POST visible to the next suggest";
}

std::string check_crash_replay() {
  ServiceFixture f;
  klamp::testing::TempDir crash{"klamp-crash"};
  EntityKnowledgeStore before(UserId("reader"));
  MemoryStream stream_before;
  const char *queries[] = {"apple", "tim cook apple", "iphone", "apple iphone", "tim cook"};
  {
    Service s(f.cfg, f.be);
    for (int i = 0; i < 23; ++i) {
      call(s, "POST", "/events", event(kNow + i, queries[i % 5]));
    }
    call(s, "DELETE", "/users/reader/entities/Tim_Cook");
    call(s, "POST", "/events", event(kNow + 100, "apple"));
    before = s.store_of(UserId("reader"));
    stream_before = s.stream_of(UserId("reader"));
    fs::copy(f.cfg.store_dir, crash.path() / "stores", fs::copy_options::recursive);
  }
  std::ofstream(crash.path() / "stores" / "reader.events.jsonl", std::ios::app)
      << R"({"user":"reader","ts":)";
  AppConfig c2 = f.cfg;
  c2.work_dir = crash.path();
  c2.store_dir = crash.path() / "stores";
  Service replay(c2, f.be);
  require(replay.store_of(UserId("reader")) == before, "store differs after replay");
  require(replay.stream_of(UserId("reader")) == stream_before, "stream differs after replay");
  Service restart(f.cfg, f.be);
  require(restart.store_of(UserId("reader")) == before, "store differs after clean restart");
  return std::to_string(before.size()) + " entities rebuilt from snapshot + log";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> checks = {
      {"sampling_distributions", check_sampling},
      {"lapse_boundary", check_lapse},
      {"history_retrieval_oracle", check_history_oracle},
      {"prompt_fidelity", check_prompts},
      {"statistics", check_statistics},
      {"metric_bounds_and_identities", check_metrics},
      {"end_to_end_determinism", check_end_to_end},
      {"ingestion_filters", check_filters},
      {"store_properties", check_store},
      {"service_read_your_writes", check_read_your_writes},
      {"service_crash_replay", check_crash_replay},
  };
  int failures = 0;
  for (const auto &[name, fn] : checks) {
    try {
      std::string detail = fn();
      std::cout << "PASS " << name << " (" << detail << ")\n";
    } catch (const Failure &f) {
      ++failures;
      std::cout << "FAIL " << name << ": " << f.why << "\n";
    } catch (const std::exception &e) {
      ++failures;
      std::cout << "FAIL " << name << ": exception: " << e.what() << "\n";
    }
  }
  std::cout << (checks.size() - failures) << "/" << checks.size() << " passed\n";
  return failures == 0 ? 0 : 1;
}
