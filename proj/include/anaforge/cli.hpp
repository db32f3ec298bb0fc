// Copyright 2026 The Anaforge Authors.
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

// The `anaforge` command line. Results go to stdout or --out, logs to
// stderr. Exit status: 0 success, 1 invalid input, 2 usage error.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "anaforge/bridging.hpp"
#include "anaforge/combiner.hpp"
#include "anaforge/corpus.hpp"
#include "anaforge/dd.hpp"
#include "anaforge/embeddings.hpp"
#include "anaforge/metrics.hpp"
#include "anaforge/nn/checkpoint.hpp"
#include "anaforge/wcs.hpp"

namespace anaforge::cli {

inline constexpr int kOk = 0;
inline constexpr int kInvalid = 1;
inline constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline uint64_t fnv1a(const std::string &s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index writes only
// its own slot, so output order never depends on scheduling.
template <class Fn>
void parallel_for(size_t n, size_t jobs, Fn fn) {
  jobs = std::max<size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      try {
        for (size_t i = w; i < n; i += jobs) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto &t : pool) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

struct Options {
  std::string config;
  size_t jobs = 1;
  std::string out;
  std::string embeddings;
};

class Runner {
 public:
  Runner(std::ostream &out, std::ostream &err) : out_(out), err_(err) {}

  int run(const std::vector<std::string> &args);

 private:
  nlohmann::json config_overrides() const {
    if (opt_.config.empty()) return nlohmann::json::object();
    std::ifstream in(opt_.config);
    if (!in) throw UsageError("cannot open config " + opt_.config);
    try {
      nlohmann::json j = nlohmann::json::parse(in);
      if (!j.is_object()) throw UsageError("config must be a JSON object");
      return j;
    } catch (const nlohmann::json::exception &e) {
      throw UsageError("bad config " + opt_.config + ": " + e.what());
    }
  }

  template <class Config>
  Config load_config() const {
    Config c;
    try {
      c.update(config_overrides());
    } catch (const nlohmann::json::exception &e) {
      throw UsageError(std::string("bad config value: ") + e.what());
    }
    return c;
  }

  void header(const std::string &command, uint64_t seed, const nlohmann::json &config) {
    err_ << "anaforge " << command << " seed=" << seed << " config=" << hex(fnv1a(config.dump())) << '\n';
  }

  // Writes to --out when given, stdout otherwise.
  void emit(const std::string &text) {
    if (opt_.out.empty()) {
      out_ << text;
      return;
    }
    std::ofstream os(opt_.out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + opt_.out);
    os << text;
  }

  std::map<std::string, EmbeddingStore> stores() const {
    if (opt_.embeddings.empty()) throw UsageError("--embeddings is required");
    return load_store_directory(opt_.embeddings);
  }

  static const EmbeddingStore &store_for(const std::map<std::string, EmbeddingStore> &s, const Document &d) {
    auto it = s.find(d.id);
    if (it == s.end())
      throw EmbeddingError(EmbeddingError::Kind::kMalformedManifest, "no embeddings for document " + d.id);
    return it->second;
  }

  void warn(const std::vector<std::string> &warnings) {
    for (const auto &w : warnings) err_ << "warning: " << w << '\n';
  }

  static std::string corpus_text(const std::vector<Document> &docs) {
    std::ostringstream os;
    write_corpus(os, docs);
    return os.str();
  }

  int validate();
  int train_wcs();
  int predict_wcs();
  int train_dd();
  int predict_dd();
  int train_bridging();
  int predict_bridging();
  int combine();
  int score();
  int dd_stats();

  std::ostream &out_;
  std::ostream &err_;
  Options opt_;
  std::string input_, key_, response_, model_, base_, other_, mode_ = "merge-singletons", loss_log_;
  bool no_singletons_ = false, json_ = false;
  double margin_ = 0.1;
  std::string space_ = "bert";
};

inline int Runner::validate() {
  auto docs = read_corpus(input_);
  size_t mentions = 0, links = 0;
  for (const auto &d : docs) {
    mentions += d.mentions.size();
    links += d.bridging.size();
  }
  if (!opt_.embeddings.empty()) {
    auto s = stores();
    for (auto d : docs) store_for(s, d).attach(d);
  }
  std::ostringstream os;
  os << "ok: " << docs.size() << " documents, " << mentions << " mentions, " << links << " bridging links\n";
  emit(os.str());
  return kOk;
}

inline int Runner::train_wcs() {
  auto cfg = load_config<wcs::WcsConfig>();
  header("train-wcs", cfg.seed, cfg.to_json());
  auto docs = read_corpus(input_);
  auto s = stores();
  std::vector<wcs::TrainingExample> examples;
  for (const auto &d : docs) examples.push_back(wcs::make_example(d, store_for(s, d), cfg));
  wcs::WcsModel model(cfg);
  LossLog log = wcs::Trainer(model).train(examples);
  model.save(model_);
  if (!loss_log_.empty()) log.write(loss_log_);
  emit(log.csv());
  return kOk;
}

inline int Runner::predict_wcs() {
  auto model = wcs::WcsModel::load(model_);
  header("predict-wcs", model.config().seed, model.config().to_json());
  auto docs = read_corpus(input_);
  auto s = stores();
  std::vector<Document> out(docs.size());
  parallel_for(docs.size(), opt_.jobs, [&](size_t i) {
    auto mentions = wcs::prepare_mentions(docs[i], store_for(s, docs[i]), model.config());
    out[i] = wcs::apply_entities(docs[i], wcs::predict(model, mentions).entities);
  });
  emit(corpus_text(out));
  return kOk;
}

inline int Runner::train_dd() {
  auto cfg = load_config<dd::DdConfig>();
  header("train-dd", cfg.seed, cfg.to_json());
  auto docs = read_corpus(input_);
  auto s = stores();
  std::vector<dd::Example> examples;
  for (const auto &d : docs) {
    auto p = dd::prepare_document(d, store_for(s, d), cfg, true);
    warn(p.warnings);
    for (auto &e : p.examples) examples.push_back(std::move(e));
  }
  if (cfg.undersample)
    examples = dd::undersample(examples, [](const dd::Example &e) { return e.label.type; }, cfg.seed);
  dd::DdModel model(cfg);
  LossLog log = dd::Trainer(model).train(examples);
  model.save(model_);
  if (!loss_log_.empty()) log.write(loss_log_);
  emit(log.csv());
  return kOk;
}

inline int Runner::predict_dd() {
  auto model = dd::DdModel::load(model_);
  header("predict-dd", model.config().seed, model.config().to_json());
  auto docs = read_corpus(input_);
  auto s = stores();
  std::vector<Document> out(docs.size());
  std::vector<std::vector<std::string>> warnings(docs.size());
  parallel_for(docs.size(), opt_.jobs, [&](size_t i) {
    auto p = dd::prepare_document(docs[i], store_for(s, docs[i]), model.config(), false);
    warnings[i] = std::move(p.warnings);
    std::vector<dd::Prediction> preds;
    for (const auto &e : p.examples) preds.push_back(dd::predict(model, e));
    out[i] = dd::apply_predictions(docs[i], preds);
  });
  for (const auto &w : warnings) warn(w);
  emit(corpus_text(out));
  return kOk;
}

inline int Runner::train_bridging() {
  auto cfg = load_config<bridging::BridgingConfig>();
  header("train-bridging", cfg.seed, cfg.to_json());
  auto docs = read_corpus(input_);
  auto s = stores();
  std::vector<bridging::Example> examples;
  size_t dropped = 0;
  for (const auto &d : docs) {
    auto p = bridging::prepare_document(d, store_for(s, d), cfg, true);
    warn(p.warnings);
    dropped += p.gold_not_in_candidates;
    for (auto &e : p.examples) examples.push_back(std::move(e));
  }
  if (dropped) err_ << "skipped " << dropped << " anaphors whose antecedent follows them\n";
  bridging::BridgingModel model(cfg);
  LossLog log = bridging::Trainer(model).train(examples);
  model.save(model_);
  if (!loss_log_.empty()) log.write(loss_log_);
  emit(log.csv());
  return kOk;
}

inline int Runner::predict_bridging() {
  auto model = bridging::BridgingModel::load(model_);
  header("predict-bridging", model.config().seed, model.config().to_json());
  auto docs = read_corpus(input_);
  auto s = stores();
  std::vector<Document> out(docs.size());
  std::vector<std::vector<std::string>> warnings(docs.size());
  parallel_for(docs.size(), opt_.jobs, [&](size_t i) {
    auto p = bridging::prepare_document(docs[i], store_for(s, docs[i]), model.config(), false);
    warnings[i] = std::move(p.warnings);
    std::vector<BridgingLink> links;
    for (const auto &e : p.examples) links.push_back(bridging::resolve(model, e));
    out[i] = bridging::apply_predictions(docs[i], links);
  });
  for (const auto &w : warnings) warn(w);
  emit(corpus_text(out));
  return kOk;
}

inline int Runner::combine() {
  nlohmann::json cfg = {{"mode", mode_}, {"margin", margin_}, {"space", space_}};
  header("combine", 0, cfg);
  auto base = read_corpus(base_);
  std::vector<Document> other;
  if (mode_ != "filter") {
    if (other_.empty()) throw UsageError("--mode " + mode_ + " needs --singletons");
    other = read_corpus(other_);
    if (other.size() != base.size())
      throw combine::DocumentMismatch("the two systems cover " + std::to_string(base.size()) + " and " +
                                      std::to_string(other.size()) + " documents");
  }
  std::map<std::string, EmbeddingStore> s;
  if (mode_ == "filter") s = stores();
  std::vector<Document> out(base.size());
  std::vector<std::vector<combine::FilterResult>> logs(base.size());
  for (size_t i = 0; i < base.size(); ++i)
    if (mode_ != "filter") combine::check_same_document(base[i], other[i]);
  parallel_for(base.size(), opt_.jobs, [&](size_t i) {
    combine::SpanClustering a = span_clustering(base[i], base[i].entities());
    combine::SpanClustering e;
    if (mode_ == "merge-singletons") {
      e = combine::merge_singletons(a, span_clustering(other[i], other[i].entities()));
    } else if (mode_ == "pronoun") {
      e = combine::combine_pronoun_partition(a, span_clustering(other[i], other[i].entities()),
                                             combine::personal_pronoun_test(base[i]));
    } else {
      combine::FilterOptions fo;
      fo.space = space_;
      fo.margin = margin_;
      e = combine::filter_clusters(a, base[i], store_for(s, base[i]), fo, &logs[i]);
    }
    out[i] = combine::document_from_partition(base[i], e);
  });
  for (size_t i = 0; i < logs.size(); ++i)
    for (const auto &r : logs[i])
      err_ << base[i].id << ": " << (r.removed ? "removed first mention" : "number mismatch") << " (noun "
           << r.pronoun_noun << ", others " << r.pronoun_others << ")\n";
  emit(corpus_text(out));
  return kOk;
}

inline int Runner::score() {
  nlohmann::json cfg = {{"no_singletons", no_singletons_}};
  header("score", 0, cfg);
  auto key = read_corpus(key_);
  auto resp = read_corpus(response_);
  std::map<std::string, const Document *> by_id;
  for (const auto &d : resp) by_id[d.id] = &d;
  if (by_id.size() != key.size())
    throw combine::DocumentMismatch("key has " + std::to_string(key.size()) + " documents, response " +
                                    std::to_string(resp.size()));
  std::vector<std::pair<Clustering<Span>, Clustering<Span>>> parts(key.size());
  std::vector<std::pair<std::set<Span>, std::set<Span>>> mentions(key.size());
  metrics::Counts links;
  bool any_links = false;
  std::vector<std::pair<Clustering<Span>, Clustering<Span>>> deixis;
  for (size_t i = 0; i < key.size(); ++i) {
    auto it = by_id.find(key[i].id);
    if (it == by_id.end()) throw combine::DocumentMismatch("response lacks document " + key[i].id);
    const Document &r = *it->second;
    combine::check_same_document(key[i], r);
    parts[i] = {span_clustering(key[i], key[i].entities()), span_clustering(r, r.entities())};
    for (const auto &m : key[i].mentions)
      if (m.entity) mentions[i].first.insert(m.span);
    for (const auto &m : r.mentions)
      if (m.entity) mentions[i].second.insert(m.span);
    if (!key[i].deixis.empty() || !r.deixis.empty()) deixis.emplace_back(dd::deixis_clustering(key[i]), dd::deixis_clustering(r));
    if (!key[i].bridging.empty() || !r.bridging.empty()) {
      any_links = true;
      // Mention ids are compared through their spans so that the two files
      // may number mentions differently.
      auto span_of = [](const Document &d, const std::string &id) {
        const Mention *m = d.find_mention(id);
        return m->span;
      };
      metrics::LinkMap<Span> g, p;
      for (const auto &l : key[i].bridging) g.emplace(span_of(key[i], l.anaphor), span_of(key[i], l.antecedent));
      for (const auto &l : r.bridging) p.emplace(span_of(r, l.anaphor), span_of(r, l.antecedent));
      links += metrics::entity_link_counts(g, p, span_clustering(key[i], key[i].entities()));
    }
  }
  metrics::ScoreReport report = metrics::score_documents(parts, mentions);
  if (any_links) report.entity_f1 = 100.0 * links.prf().f1;
  if (!deixis.empty()) report.deixis = metrics::score_documents(deixis, {}).with_singletons;
  const metrics::CorefBlock &headline = no_singletons_ ? report.without_singletons : report.with_singletons;
  std::ostringstream os;
  if (json_) {
    nlohmann::json j = report.to_json();
    j["conll_f1"] = metrics::ScoreReport::round2(headline.conll_f1);
    os << j.dump(2) << '\n';
  } else {
    os << report.to_table();
    os << std::fixed << std::setprecision(2) << "CoNLL F1 " << (no_singletons_ ? "(without singletons)" : "(with singletons)")
       << ": " << headline.conll_f1 << '\n';
  }
  emit(os.str());
  return kOk;
}

inline int Runner::dd_stats() {
  auto cfg = load_config<dd::DdConfig>();
  header("dd-stats", cfg.seed, cfg.to_json());
  auto docs = read_corpus(input_);
  std::map<std::string, EmbeddingStore> s;
  if (!opt_.embeddings.empty()) s = stores();
  dd::Statistics stats;
  std::vector<std::string> warnings;
  for (const auto &d : docs) {
    const EmbeddingStore *store = s.empty() ? nullptr : &store_for(s, d);
    dd::collect_statistics(d, store, cfg, stats, &warnings);
  }
  warn(warnings);
  emit(stats.to_json().dump(2) + "\n");
  return kOk;
}

inline int Runner::run(const std::vector<std::string> &args) {
  CLI::App app{"anaphora resolution toolkit", "anaforge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", opt_.config, "JSON file overriding default settings");
    sub->add_option("--jobs", opt_.jobs, "worker threads for per-document work")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt_.out, "output file (default: stdout)");
    sub->add_option("--embeddings", opt_.embeddings, "directory of embedding manifests");
  };
  auto trainer = [&](const std::string &name, const std::string &help) {
    CLI::App *sub = app.add_subcommand(name, help);
    common(sub);
    sub->add_option("input", input_, "training corpus")->required();
    sub->add_option("--model", model_, "checkpoint to write")->required();
    sub->add_option("--loss-log", loss_log_, "per-epoch loss CSV");
    return sub;
  };
  auto predictor = [&](const std::string &name, const std::string &help) {
    CLI::App *sub = app.add_subcommand(name, help);
    common(sub);
    sub->add_option("input", input_, "corpus to annotate")->required();
    sub->add_option("--model", model_, "trained checkpoint")->required();
    return sub;
  };

  CLI::App *validate = app.add_subcommand("validate", "parse and check a corpus");
  common(validate);
  validate->add_option("input", input_, "corpus file")->required();
  CLI::App *tw = trainer("train-wcs", "train the incremental clustering resolver");
  CLI::App *pw = predictor("predict-wcs", "cluster mentions with a trained model");
  CLI::App *td = trainer("train-dd", "train the discourse-deixis resolver");
  CLI::App *pd = predictor("predict-dd", "resolve deictic anaphors");
  CLI::App *tb = trainer("train-bridging", "train the bridging resolver");
  CLI::App *pb = predictor("predict-bridging", "resolve gold bridging anaphors");
  CLI::App *comb = app.add_subcommand("combine", "combine two systems' identity layers");
  common(comb);
  comb->add_option("--base", base_, "base system output")->required();
  comb->add_option("--singletons,--other", other_, "second system output");
  comb->add_option("--mode", mode_, "merge-singletons, pronoun or filter")
      ->check(CLI::IsMember({"merge-singletons", "pronoun", "filter"}));
  comb->add_option("--margin", margin_, "filter margin");
  comb->add_option("--space", space_, "embedding space for the filter");
  CLI::App *sc = app.add_subcommand("score", "score a response against a key");
  common(sc);
  sc->add_option("--key", key_, "gold corpus")->required();
  sc->add_option("--response", response_, "system corpus")->required();
  sc->add_flag("--no-singletons", no_singletons_, "headline CoNLL F1 without singletons");
  sc->add_flag("--json", json_, "JSON report");
  CLI::App *st = app.add_subcommand("dd-stats", "deixis segment class and tag distributions");
  common(st);
  st->add_option("input", input_, "corpus file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &e) {
    out_ << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &e) {
    out_ << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err_ << "error: " << e.what() << '\n';
    CLI::App *sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err_ << sub->help();
    return kUsage;
  }

  try {
    if (validate->parsed()) return this->validate();
    if (tw->parsed()) return train_wcs();
    if (pw->parsed()) return predict_wcs();
    if (td->parsed()) return train_dd();
    if (pd->parsed()) return predict_dd();
    if (tb->parsed()) return train_bridging();
    if (pb->parsed()) return predict_bridging();
    if (comb->parsed()) return combine();
    if (sc->parsed()) return score();
    if (st->parsed()) return dd_stats();
  } catch (const UsageError &e) {
    err_ << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception &e) {
    err_ << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kUsage;
}

// `args` excludes the program name.
inline int run(const std::vector<std::string> &args, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  return Runner(out, err).run(args);
}

}  // namespace anaforge::cli
