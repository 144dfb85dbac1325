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

// klamp command line: ingest, build-stores, suggest, eval, trending, serve.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "klamp/config.hpp"
#include "klamp/evaluator.hpp"
#include "klamp/ingest.hpp"
#include "klamp/remote.hpp"
#include "klamp/service.hpp"
#include "klamp/store.hpp"

namespace {

using namespace klamp;

constexpr int kExitUsage = 2;

struct CommonOptions {
  std::string config;
  std::string backend;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App *cmd, CommonOptions &o) {
  cmd->add_option("--config", o.config, "Path to the JSON config file");
  cmd->add_option("--backend", o.backend, "Generator backend: mock or remote")
      ->check(CLI::IsMember({"mock", "remote"}));
  cmd->add_option("--seed", o.seed, "Retrieval RNG seed");
}

AppConfig load_config(const CommonOptions &o) {
  auto cfg = load_app_config(o.config);
  if (o.backend == "mock") cfg.generator.backend = GeneratorBackend::kMock;
  if (o.backend == "remote") cfg.generator.backend = GeneratorBackend::kRemoteChat;
  if (o.seed) cfg.retrieval.rng_seed = *o.seed;
  return cfg;
}

void write_output(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw StorageFailure("cannot write " + path);
  out << text;
}

std::vector<UserDataset> read_datasets(const fs::path &path) {
  return read_json_file<std::vector<UserDataset>>(path.string());
}

IngestResult run_ingest(const AppConfig &cfg, const std::string &input) {
  fs::path in_path = input.empty() ? cfg.events.value_or("") : fs::path(input);
  if (in_path.empty()) throw InvalidInput("no input log: pass --input or set 'events'");
  std::ifstream in(in_path);
  if (!in) throw InvalidInput("cannot open " + in_path.string());
  return ingest_log(in, cfg.ingest);
}

// Datasets from --datasets, the configured work dir, or a fresh ingest of
// the configured event log.
std::vector<UserDataset> obtain_datasets(const AppConfig &cfg,
                                         const std::string &datasets) {
  if (!datasets.empty()) return read_datasets(datasets);
  if (fs::exists(cfg.datasets_path())) return read_datasets(cfg.datasets_path());
  return run_ingest(cfg, "").datasets;
}

std::vector<std::string> split_list(const std::string &text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

PipelineBackends make_backends(const AppConfig &cfg) {
  PipelineBackends be;
  be.linker = load_linker(cfg);
  be.embedder = make_embedder(cfg.embedder);
  be.generator = make_generator(cfg.generator);
  be.templates = load_templates(cfg);
  return be;
}

int cmd_ingest(const CommonOptions &o, const std::string &input, bool strict,
               const std::string &out, const std::string &report_path) {
  auto cfg = load_config(o);
  if (strict) cfg.ingest.strict = true;
  auto result = run_ingest(cfg, input);
  fs::path out_path = out.empty() ? cfg.datasets_path() : fs::path(out);
  write_output(out_path.string(), Json(result.datasets).dump() + "\n");
  Json report = result.report;
  Json errors = Json::array();
  for (const auto &e : result.parse_errors) {
    errors.push_back(Json{{"line", e.line}, {"message", e.message}});
  }
  report["parse_errors"] = std::move(errors);
  report["datasets"] = out_path.string();
  write_output(report_path, report.dump(2) + "\n");
  return 0;
}

int cmd_build_stores(const CommonOptions &o, const std::string &datasets) {
  auto cfg = load_config(o);
  auto linker = load_linker(cfg);
  fs::create_directories(cfg.store_dir);
  Json summary = Json::array();
  for (const auto &d : obtain_datasets(cfg, datasets)) {
    auto store = build_entity_store(d, *linker, cfg.link);
    auto stream = build_memory_stream(d);
    const auto key = encode_file_key(d.user.str());
    write_file_atomic(cfg.store_dir / (key + ".store.json"),
                      Json(store).dump(2) + "\n");
    write_file_atomic(cfg.store_dir / (key + ".stream.json"),
                      Json(stream).dump() + "\n");
    summary.push_back(Json{{"user", d.user},
                           {"entities", store.size()},
                           {"mentions", store.total_mentions()},
                           {"records", stream.records.size()}});
  }
  std::cout << Json{{"store_dir", cfg.store_dir.string()}, {"users", summary}}.dump(2)
            << "\n";
  return 0;
}

struct SuggestOptions {
  std::string user;
  std::string query;
  std::string session;
  std::string page_url;
  std::string page_title;
  std::string page_text;
  std::string variant = "klamp";
  std::string strategy = "combined";
  std::optional<Timestamp> now;
};

int cmd_suggest(const CommonOptions &o, const SuggestOptions &s) {
  auto cfg = load_config(o);
  auto be = make_backends(cfg);
  SuggestRequest req;
  req.user = UserId(s.user);
  req.query = s.query;
  req.session_history = split_list(s.session, '|');
  if (!s.page_url.empty()) {
    req.page = WebPage::make(s.page_url, s.page_title, s.page_text);
  }
  req.variant = parse_variant(s.variant);
  req.strategy = parse_strategy(s.strategy);
  req.seed = cfg.retrieval.rng_seed;
  req.now = s.now;

  const auto key = encode_file_key(s.user);
  EntityKnowledgeStore store(req.user);
  MemoryStream stream{req.user, {}};
  if (auto p = cfg.store_dir / (key + ".store.json"); fs::exists(p)) {
    store = read_json_file<EntityKnowledgeStore>(p.string());
  }
  if (auto p = cfg.store_dir / (key + ".stream.json"); fs::exists(p)) {
    stream = read_json_file<MemoryStream>(p.string());
  }
  Timestamp now = stream.records.empty()
                      ? static_cast<Timestamp>(std::time(nullptr))
                      : stream.records.back().timestamp;
  auto result = suggest_from_stores(req, store, stream, cfg, be, now);
  std::cout << Json(result).dump(2) << "\n";
  return 0;
}

int cmd_eval(const CommonOptions &o, const std::string &datasets,
             const std::string &variants, const std::string &strategy,
             const std::string &format, const std::string &out) {
  auto cfg = load_config(o);
  auto be = make_backends(cfg);
  auto data = obtain_datasets(cfg, datasets);
  ComparisonConfig cc;
  cc.variants.clear();
  for (const auto &v : split_list(variants, ',')) {
    cc.variants.push_back(parse_variant(v));
  }
  cc.klamp_strategy = parse_strategy(strategy);
  cc.retrieval = cfg.retrieval;
  cc.generation = cfg.generation;
  cc.prompt = cfg.prompt;
  cc.link = cfg.link;
  cc.max_embed_body_chars = cfg.embedder.max_body_chars;
  auto search = cfg.search_corpus
                    ? FixtureSearchClient::load(cfg.search_corpus->string())
                    : FixtureSearchClient::from_datasets(data);
  ComparisonBackends backends{*be.linker, *be.embedder, *be.generator, search,
                              be.templates};
  auto report = run_comparison(std::move(data), cc, backends);
  std::string text = format == "text" ? format_report_table(report)
                                      : Json(report).dump(2) + "\n";
  write_output(out, text);
  return 0;
}

int cmd_trending(const CommonOptions &o, const std::string &datasets,
                 const std::string &window, std::optional<Timestamp> now) {
  auto cfg = load_config(o);
  auto linker = load_linker(cfg);
  std::vector<MemoryStream> streams;
  Timestamp latest = 0;
  for (const auto &d : obtain_datasets(cfg, datasets)) {
    MemoryStream s{d.user, {}};
    for (const auto *list : {&d.history_sessions, &d.holdout_sessions}) {
      for (const auto &session : *list) {
        for (const auto &r : session.records) {
          s.append(r);
          latest = std::max(latest, r.timestamp);
        }
      }
    }
    streams.push_back(std::move(s));
  }
  auto report = trending_entities(streams, *linker, parse_duration(window),
                                  now.value_or(latest), cfg.link);
  std::cout << Json(report).dump(2) << "\n";
  return 0;
}

int cmd_serve(const CommonOptions &o, const std::string &listen) {
  auto cfg = load_config(o);
  if (!listen.empty()) cfg.listen = listen;
  auto colon = cfg.listen.rfind(':');
  if (colon == std::string::npos) throw InvalidInput("listen must be host:port");
  std::string host = cfg.listen.substr(0, colon);
  int port = std::stoi(cfg.listen.substr(colon + 1));
  Service service(cfg, make_backends(cfg));
  httplib::Server server;
  service.bind(server);
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << cfg.listen << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"klamp: personalized contextual query suggestion"};
  app.require_subcommand(1);
  CommonOptions common;

  auto *ingest = app.add_subcommand("ingest", "Parse, sessionize, filter and split a search log");
  std::string input, out, report, datasets;
  bool strict = false;
  add_common(ingest, common);
  ingest->add_option("--input", input, "Event log (JSON lines)");
  ingest->add_flag("--strict", strict, "Fail on the first malformed line");
  ingest->add_option("--out", out, "Datasets output file");
  ingest->add_option("--report", report, "Filter report file (default stdout)");

  auto *build = app.add_subcommand("build-stores", "Build per-user entity stores and memory streams");
  add_common(build, common);
  build->add_option("--datasets", datasets, "Datasets file from ingest");

  auto *suggest = app.add_subcommand("suggest", "Suggest the next query for one user");
  SuggestOptions so;
  add_common(suggest, common);
  suggest->add_option("--user", so.user)->required();
  suggest->add_option("--query", so.query)->required();
  suggest->add_option("--session", so.session, "Earlier session queries separated by '|'");
  suggest->add_option("--page-url", so.page_url);
  suggest->add_option("--page-title", so.page_title);
  suggest->add_option("--page-text", so.page_text);
  suggest->add_option("--variant", so.variant)
      ->check(CLI::IsMember({"qs", "cqs", "cqs_ks", "klamp"}));
  suggest->add_option("--strategy", so.strategy)
      ->check(CLI::IsMember({"familiar", "unfamiliar", "lapsed", "combined"}));
  suggest->add_option("--now", so.now, "Current time, epoch seconds");

  auto *eval = app.add_subcommand("eval", "Compare variants on holdout sessions");
  std::string variants = "qs,cqs,cqs_ks,klamp", strategy = "combined", format = "json";
  add_common(eval, common);
  eval->add_option("--datasets", datasets);
  eval->add_option("--variants", variants, "Comma-separated variants");
  eval->add_option("--strategy", strategy, "Entity strategy for klamp")
      ->check(CLI::IsMember({"familiar", "unfamiliar", "lapsed", "combined"}));
  eval->add_option("--format", format)->check(CLI::IsMember({"json", "text"}));
  eval->add_option("--out", out, "Report file (default stdout)");

  auto *trending = app.add_subcommand("trending", "Entities surging across users");
  std::string window = "7d";
  std::optional<Timestamp> now;
  add_common(trending, common);
  trending->add_option("--datasets", datasets);
  trending->add_option("--window", window, "Window length, e.g. 7d or 12h");
  trending->add_option("--now", now, "End of the window, epoch seconds");

  auto *serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string listen;
  add_common(serve, common);
  serve->add_option("--listen", listen, "host:port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  CLI::App *cmd = app.get_subcommands().front();
  if (common.config.empty()) {
    std::cerr << "error: --config is required\n\n" << cmd->help();
    return kExitUsage;
  }

  try {
    if (cmd == ingest) return cmd_ingest(common, input, strict, out, report);
    if (cmd == build) return cmd_build_stores(common, datasets);
    if (cmd == suggest) return cmd_suggest(common, so);
    if (cmd == eval) return cmd_eval(common, datasets, variants, strategy, format, out);
    if (cmd == trending) return cmd_trending(common, datasets, window, now);
    if (cmd == serve) return cmd_serve(common, listen);
  } catch (const ParseFailure &e) {
    std::cerr << "error: " << e.what() << "\nraw output:\n" << e.raw_output() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
