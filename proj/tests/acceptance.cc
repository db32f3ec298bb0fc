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

// Release gate. Runs every acceptance criterion with pinned tolerances and
// runtime limits and prints one PASS/FAIL line per criterion. Exits non-zero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "anaforge/cli.hpp"
#include "anaforge/nn/gradient_check.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace anaforge;
using testing_util::data_path;

// Collects the first failed requirement and a summary for the report line.
struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string &what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
  void note(const std::string &s) {
    if (ok) detail = s;
  }
};

struct Criterion {
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string corpus_text(const std::vector<Document> &docs) {
  std::ostringstream os;
  write_corpus(os, docs);
  return os.str();
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json read_json(const std::string &path) { return nlohmann::json::parse(slurp(path)); }

// ---- metrics ----------------------------------------------------------------

Outcome metric_oracle() {
  Outcome out;
  nn::Rng rng(2026);
  double worst = 0.0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + static_cast<int>(rng.below(6));
    auto k = oracle::random_partition(rng, n, 0.9);
    auto r = oracle::random_partition(rng, n, 0.9);
    Clustering<int> key(k), resp(r);
    auto om = oracle::muc(k, r), ob = oracle::b_cubed(k, r), oc = oracle::ceaf_e(k, r);
    auto m = metrics::muc(key, resp), b = metrics::b_cubed(key, resp), c = metrics::ceaf_e(key, resp);
    track(m.precision, om.p), track(m.recall, om.r), track(m.f1, om.f);
    track(b.precision, ob.p), track(b.recall, ob.r), track(b.f1, ob.f);
    track(c.precision, oc.p), track(c.recall, oc.r), track(c.f1, oc.f);
    track(metrics::conll_f1(key, resp), oracle::conll(k, r));
    if (!key.empty()) out.require(std::abs(metrics::conll_f1(key, key) - 100.0) < 1e-9, "identity below 100");
  }
  out.require(worst < 1e-9, "max abs error " + fmt(worst));
  out.note("1000 random pairs, max abs error " + fmt(worst) + ", identity 100.00");
  return out;
}

// ---- combiner ---------------------------------------------------------------

std::vector<oracle::Partition> subset_partitions(int n) {
  std::vector<oracle::Partition> out;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> items;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) items.push_back(i);
    for (auto &p : oracle::all_partitions(items)) out.push_back(p);
  }
  return out;
}

combine::SpanClustering as_spans(const oracle::Partition &p) {
  return map_keys<Span>(oracle::to_clustering(p), [](int i) { return Span{i, i}; });
}

Outcome singleton_merge() {
  Outcome out;
  size_t pairs = 0;
  for (int n = 0; n <= 5; ++n) {
    auto all = subset_partitions(n);
    for (const auto &b : all)
      for (const auto &s : all) {
        // Base clusters, plus source singletons the base does not mention.
        oracle::Partition want = b;
        for (const auto &c : s)
          if (c.size() == 1 && oracle::owner(b, c[0]) < 0) want.push_back(c);
        ++pairs;
        if (combine::merge_singletons(as_spans(b), as_spans(s)) != as_spans(want)) {
          out.require(false, "mismatch at n=" + std::to_string(n));
          return out;
        }
      }
  }
  out.note(std::to_string(pairs) + " partition pairs over n <= 5");
  return out;
}

// ---- gradient checks --------------------------------------------------------

void record(Outcome &out, const std::vector<nn::TensorCheck> &recs, const std::string &model, uint64_t seed,
            double &worst, size_t &tensors) {
  for (const auto &rec : recs) {
    worst = std::max(worst, rec.max_rel_error);
    ++tensors;
    out.require(rec.checked > 0, model + " " + rec.name + " unchecked");
    out.require(rec.max_rel_error < 1e-4,
                model + " seed " + std::to_string(seed) + " " + rec.name + " rel " + fmt(rec.max_rel_error));
  }
}

Outcome gradient_checks() {
  Outcome out;
  double worst = 0.0;
  size_t tensors = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    {
      auto f = fixtures::small_wcs_document(seed + 10);
      auto cfg = fixtures::small_wcs_config(seed);
      wcs::WcsModel model(cfg);
      wcs::TrainingExample ex = wcs::make_example(f.doc, f.store, cfg);
      auto loss = [&](nn::Graph &g) {
        nn::Rng teacher(0);
        wcs::PassOptions opt{&ex.gold, &ex.referring, &teacher, 1.0, true};
        return wcs::run_document(g, model, ex.mentions, opt).total;
      };
      fixtures::jitter_clear_of_kinks(model.params(), seed, loss);
      record(out, nn::gradient_check(model.params(), loss), "wcs", seed, worst, tensors);
    }
    {
      auto cfg = fixtures::small_dd_config(seed);
      auto examples = fixtures::small_dd_examples(seed + 20, cfg);
      dd::DdModel model(cfg);
      auto loss = [&](nn::Graph &g) {
        std::vector<nn::Expr> parts;
        for (const auto &ex : examples) parts.push_back(dd::dd_loss(g, model, ex, model.forward(g, ex)).total);
        return g.sum(parts);
      };
      fixtures::jitter_clear_of_kinks(model.params(), seed, loss);
      record(out, nn::gradient_check(model.params(), loss), "dd", seed, worst, tensors);
    }
    {
      auto cfg = fixtures::small_bridging_config(seed);
      auto examples = fixtures::small_bridging_examples(seed + 30, cfg);
      bridging::BridgingModel model(cfg);
      auto loss = [&](nn::Graph &g) {
        std::vector<nn::Expr> parts;
        for (const auto &ex : examples) parts.push_back(bridging::bridging_loss(g, ex, model.forward(g, ex)));
        return g.sum(parts);
      };
      fixtures::jitter_clear_of_kinks(model.params(), seed, loss);
      record(out, nn::gradient_check(model.params(), loss), "bridging", seed, worst, tensors);
    }
  }
  out.note("3 models x 10 seeds, " + std::to_string(tensors) + " tensor checks, max rel error " + fmt(worst));
  return out;
}

// ---- WCS --------------------------------------------------------------------

Outcome wcs_overfit() {
  Outcome out;
  auto docs = read_corpus(data_path("toy/wcs/train.conll"));
  auto stores = load_store_directory(data_path("toy/wcs/embeddings"));
  wcs::WcsConfig cfg;
  out.require(cfg.epochs == 5 && cfg.lr == 1e-4, "default optimizer settings changed");
  out.require(docs.size() == 2, "toy corpus has " + std::to_string(docs.size()) + " documents");
  std::vector<wcs::TrainingExample> examples;
  for (const auto &d : docs) examples.push_back(wcs::make_example(d, stores.at(d.id), cfg));
  wcs::WcsModel model(cfg);
  LossLog log = wcs::Trainer(model).train(examples);
  double ratio = log.final_total() / log.initial_total();
  out.require(ratio < 0.2, "final/initial loss " + fmt(ratio));
  double worst = 100.0;
  for (const auto &d : docs) {
    auto mentions = wcs::prepare_mentions(d, stores.at(d.id), cfg);
    Document pred = wcs::apply_entities(d, wcs::predict(model, mentions).entities);
    double f1 = metrics::conll_f1(span_clustering(d, d.entities()), span_clustering(pred, pred.entities()));
    worst = std::min(worst, f1);
  }
  out.require(std::abs(worst - 100.0) < 1e-9, "CoNLL F1 " + fmt(worst, 5));
  out.note("final/initial loss " + fmt(ratio) + ", CoNLL F1 " + fmt(worst, 5));
  return out;
}

// ---- DD ---------------------------------------------------------------------

// A long single sentence with "it" in the middle, to exercise clipping.
Document overlong_document() {
  std::string text;
  for (int i = 0; i < 300; ++i) text += i == 150 ? "it " : "word ";
  text += ".";
  Document d = testing_util::make_document("long", text, {});
  for (size_t i = 0; i < d.tokens.size(); ++i) d.tokens[i].subtoken_count = 1 + i % 2;
  return d;
}

Outcome dd_pipeline() {
  Outcome out;
  // Segment recount over every fixture document.
  std::vector<Document> docs;
  auto stores = load_store_directory(data_path("toy/dd/embeddings"));
  for (Document d : read_corpus(data_path("toy/dd/train.conll"))) {
    stores.at(d.id).attach(d);
    docs.push_back(std::move(d));
  }
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto f = fixtures::small_dd_document(seed);
    f.store.attach(f.doc);
    docs.push_back(std::move(f.doc));
  }
  docs.push_back(overlong_document());
  size_t segments = 0;
  for (const auto &d : docs) {
    auto anaphors = dd::candidate_anaphors(d);
    auto segs = dd::build_segments(d, anaphors, 256);
    out.require(segs.size() == anaphors.size(), d.id + ": segment count differs from candidate count");
    for (size_t i = 0; i < segs.size() && i < anaphors.size(); ++i) {
      const auto &s = segs[i];
      size_t recount = 0;
      for (int t = s.window.start; t <= s.window.end; ++t) recount += d.tokens[static_cast<size_t>(t)].subtoken_count;
      bool inside = static_cast<int>(s.anaphor) >= s.window.start && static_cast<int>(s.anaphor) <= s.window.end;
      out.require(s.anaphor == anaphors[i] && inside, d.id + ": segment without its anaphor");
      out.require(recount == s.subtoken_length() && recount <= 256,
                  d.id + ": segment of " + std::to_string(recount) + " subtokens");
      ++segments;
    }
  }
  // Undersampling.
  std::vector<dd::AnaphorType> items;
  for (size_t i = 0; i < 4324; ++i) items.push_back(dd::AnaphorType::kNonRef);
  for (size_t i = 0; i < 4049; ++i) items.push_back(dd::AnaphorType::kID);
  for (size_t i = 0; i < 1454; ++i) items.push_back(dd::AnaphorType::kDD);
  nn::Rng rng(3);
  rng.shuffle(items);
  auto kept = dd::undersample(items, [](dd::AnaphorType t) { return t; }, 11);
  std::array<size_t, dd::kTypes> counts{};
  for (auto t : kept) ++counts[static_cast<size_t>(t)];
  out.require(counts == (std::array<size_t, dd::kTypes>{1454, 1454, 1454}), "undersampled classes differ");
  // Overfit on the 20-segment toy set.
  auto cfg = dd::DdConfig::from_json(read_json(data_path("toy/dd/config.json")));
  std::vector<dd::Example> examples;
  for (const auto &d : read_corpus(data_path("toy/dd/train.conll")))
    for (auto &e : dd::prepare_document(d, stores.at(d.id), cfg, true).examples) examples.push_back(std::move(e));
  out.require(examples.size() == 20, "toy set has " + std::to_string(examples.size()) + " segments");
  dd::DdModel model(cfg);
  dd::Trainer(model).train(examples);
  size_t antecedent_ok = 0, type_ok = 0;
  for (const auto &ex : examples) {
    auto p = dd::predict(model, ex);
    bool ant = ex.label.type == dd::AnaphorType::kNonRef
                   ? !p.antecedent
                   : p.antecedent && std::count(ex.label.gold.begin(), ex.label.gold.end(), *p.antecedent) > 0;
    antecedent_ok += ant;
    type_ok += p.type == ex.label.type;
  }
  out.require(antecedent_ok == examples.size(), "antecedents " + std::to_string(antecedent_ok) + "/20");
  out.require(type_ok == examples.size(), "types " + std::to_string(type_ok) + "/20");
  // All-negative scores give no antecedent.
  size_t cases = 0, none = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    auto scfg = fixtures::small_dd_config(seed);
    dd::DdModel m(scfg);
    fixtures::jitter(m.params(), seed);
    m.params().get("dd.mention.out.b").value[0] = -1e3;
    for (const auto &ex : fixtures::small_dd_examples(seed, scfg)) {
      nn::Graph g;
      nn::Vec scores = g.value(m.forward(g, ex).scores);
      if (!std::all_of(scores.begin() + 1, scores.end(), [](double v) { return v < 0.0; })) continue;
      ++cases;
      none += !dd::predict(m, ex).antecedent;
    }
  }
  for (int trial = 0; trial < 1000; ++trial) {
    nn::Vec scores = {0.0};
    for (size_t i = 0, n = 1 + rng.below(8); i < n; ++i) scores.push_back(-rng.uniform(1e-9, 10.0));
    ++cases;
    none += dd::DdModel::argmax_with_dummy(scores) == 0;
  }
  out.require(cases > 1000 && none == cases, "NONE on " + std::to_string(none) + "/" + std::to_string(cases));
  out.note(std::to_string(segments) + " segments recounted, undersample 1454x3, overfit " +
           std::to_string(antecedent_ok) + "/20 antecedents " + std::to_string(type_ok) + "/20 types, NONE on " +
           std::to_string(none) + "/" + std::to_string(cases));
  return out;
}

// One unit per segment: a deictic "that", an identity "it" and a
// non-referring "it".
Document stats_document(const std::string &id, const std::vector<dd::AnaphorType> &units) {
  std::string text;
  std::vector<std::tuple<int, int, std::string>> mentions;
  std::vector<std::pair<int, Span>> deixis;
  int t = 0, entity = 0;
  for (auto u : units) {
    if (u == dd::AnaphorType::kDD) {
      text += "we left . that was fine . ";
      mentions.emplace_back(t + 3, t + 3, "");
      deixis.emplace_back(t + 3, Span{t, t + 1});
      t += 7;
    } else if (u == dd::AnaphorType::kID) {
      std::string e = "e" + std::to_string(++entity);
      text += "the cat sat . it slept . ";
      mentions.emplace_back(t, t + 1, e);
      mentions.emplace_back(t + 4, t + 4, e);
      t += 7;
    } else {
      text += "rain fell . it rains . ";
      t += 6;
    }
  }
  Document d = testing_util::make_document(id, text, mentions);
  for (auto &m : d.mentions)
    for (const auto &[at, ant] : deixis)
      if (m.span == Span{at, at}) {
        m.kind = AnaphorKind::kDiscourseDeixis;
        d.deixis[m.id] = {ant};
      }
  d.validate();
  return d;
}

Outcome dd_class_statistics() {
  Outcome out;
  const std::array<size_t, dd::kTypes> built = {1454, 4049, 4324};  // DD, ID, NONREF
  std::vector<dd::AnaphorType> units;
  for (size_t t = 0; t < dd::kTypes; ++t) units.insert(units.end(), built[t], static_cast<dd::AnaphorType>(t));
  nn::Rng rng(9827);
  rng.shuffle(units);
  dd::Statistics stats;
  dd::DdConfig cfg;
  for (size_t at = 0, k = 0; at < units.size(); at += 100, ++k) {
    std::vector<dd::AnaphorType> chunk(units.begin() + static_cast<long>(at),
                                       units.begin() + static_cast<long>(std::min(units.size(), at + 100)));
    dd::collect_statistics(stats_document("stats" + std::to_string(k), chunk), nullptr, cfg, stats);
  }
  auto j = stats.to_json();
  out.require(j.at("segments") == 9827, "segments " + j.at("segments").dump());
  std::ostringstream shares;
  for (size_t t = 0; t < dd::kTypes; ++t) {
    std::string name = dd::type_name(static_cast<dd::AnaphorType>(t));
    out.require(j["classes"][name] == built[t], name + " count " + j["classes"][name].dump());
    double want = static_cast<double>(built[t]) / 9827.0;
    double got = j["proportions"][name].get<double>();
    out.require(got == want, name + " proportion " + fmt(got, 6));
    shares << (t ? ", " : "") << name << " " << std::fixed << std::setprecision(1) << 100.0 * got << "%";
  }
  out.note("9827 segments: " + shares.str());
  return out;
}

// ---- bridging ---------------------------------------------------------------

Outcome bridging_overfit() {
  Outcome out;
  auto docs = read_corpus(data_path("toy/bridging/train.conll"));
  auto stores = load_store_directory(data_path("toy/bridging/embeddings"));
  auto cfg = bridging::BridgingConfig::from_json(read_json(data_path("toy/bridging/config.json")));
  out.require(cfg.epochs == 5 && cfg.lr == 3e-3 && cfg.depth == 2, "default optimizer settings changed");
  std::vector<bridging::Example> examples;
  for (const auto &d : docs)
    for (auto &e : bridging::prepare_document(d, stores.at(d.id), cfg, true).examples) examples.push_back(std::move(e));
  out.require(examples.size() == 30, "toy set has " + std::to_string(examples.size()) + " instances");
  bridging::BridgingModel model(cfg);
  bridging::Trainer(model).train(examples);
  std::vector<BridgingLink> pred;
  size_t correct = 0;
  for (const auto &ex : examples) {
    pred.push_back(bridging::resolve(model, ex));
    correct += pred.back().antecedent == ex.instance.candidates[*ex.instance.gold];
  }
  out.require(correct == examples.size(), "accuracy " + std::to_string(correct) + "/30");
  double worst = 100.0;
  for (const auto &d : docs) {
    std::vector<BridgingLink> mine;
    for (size_t i = 0; i < examples.size(); ++i)
      if (examples[i].instance.doc_id == d.id) mine.push_back(pred[i]);
    worst = std::min(worst, metrics::entity_f1(bridging::link_map(d.bridging), bridging::link_map(mine), d.entities()));
  }
  out.require(std::abs(worst - 100.0) < 1e-9, "Entity-F1 " + fmt(worst, 5));
  out.note("accuracy " + std::to_string(correct) + "/30, Entity-F1 " + fmt(worst, 5));
  return out;
}

// ---- formats ----------------------------------------------------------------

Outcome format_round_trip() {
  Outcome out;
  size_t files = 0, documents = 0;
  for (const auto &entry : std::filesystem::recursive_directory_iterator(data_path(""))) {
    if (entry.path().extension() != ".conll" || entry.path().parent_path().filename() == "malformed") continue;
    auto docs = read_corpus(entry.path().string());
    std::string once = corpus_text(docs);
    out.require(parse_corpus(once) == docs, entry.path().filename().string() + " changed on round trip");
    out.require(corpus_text(parse_corpus(once)) == once, entry.path().filename().string() + " output not stable");
    ++files;
    documents += docs.size();
  }
  nn::Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    Document d = testing_util::random_document(rng, "doc" + std::to_string(trial));
    out.require(parse_document(write_document(d)) == d, "random document " + std::to_string(trial));
  }
  size_t rejected = 0;
  auto malformed = testing_util::malformed_fixtures();
  for (const auto &[file, kind] : malformed) {
    try {
      read_corpus(data_path("fixtures/malformed/" + file));
      out.require(false, file + " parsed");
    } catch (const FormatError &e) {
      out.require(e.kind() == kind, file + ": " + e.what());
      rejected += e.kind() == kind;
    }
  }
  out.note(std::to_string(files) + " fixture files (" + std::to_string(documents) +
           " documents) and 500 random documents round trip, " + std::to_string(rejected) + "/" +
           std::to_string(malformed.size()) + " malformed fixtures rejected with the declared error");
  return out;
}

// ---- determinism ------------------------------------------------------------

Outcome determinism() {
  Outcome out;
  testing_util::TempDir dir;
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args, const std::string &file) {
    args.push_back("--out");
    args.push_back(dir.file(file));
    int code = cli::run(args, sink, sink);
    out.require(code == cli::kOk, args[0] + " exited " + std::to_string(code));
    return slurp(dir.file(file));
  };
  auto toy = [](const std::string &set, const std::string &f) { return data_path("toy/" + set + "/" + f); };
  std::vector<std::string> names;
  auto twice = [&](const std::string &name, const std::vector<std::string> &args,
                   const std::vector<std::string> &side_files = {}) {
    std::string a = run(args, name + ".1");
    std::vector<std::string> first;
    for (const auto &f : side_files) first.push_back(slurp(f));
    std::string b = run(args, name + ".2");
    out.require(!a.empty() && a == b, name + " output differs between runs");
    for (size_t i = 0; i < side_files.size(); ++i)
      out.require(first[i] == slurp(side_files[i]), name + " " + side_files[i] + " differs between runs");
    names.push_back(name);
  };
  twice("validate", {"validate", toy("wcs", "train.conll"), "--embeddings", toy("wcs", "embeddings")});
  struct Task {
    std::string name, config;
  };
  for (const Task &t : {Task{"wcs", ""}, Task{"dd", toy("dd", "config.json")},
                        Task{"bridging", toy("bridging", "config.json")}}) {
    std::vector<std::string> train = {"train-" + t.name, toy(t.name, "train.conll"), "--embeddings",
                                      toy(t.name, "embeddings"), "--model", dir.file(t.name + ".ckpt")};
    if (!t.config.empty()) train.insert(train.end(), {"--config", t.config});
    twice("train-" + t.name, train, {dir.file(t.name + ".ckpt")});
    std::vector<std::string> predict = {"predict-" + t.name, toy(t.name, "train.conll"), "--embeddings",
                                        toy(t.name, "embeddings"), "--model", dir.file(t.name + ".ckpt")};
    twice("predict-" + t.name, predict);
    predict.insert(predict.end(), {"--jobs", "3"});
    out.require(run(predict, t.name + ".jobs") == slurp(dir.file("predict-" + t.name + ".1")),
                "predict-" + t.name + " differs with 3 workers");
  }
  std::string fix = data_path("fixtures/combine/");
  twice("combine-merge", {"combine", "--base", fix + "hoi.conll", "--singletons", fix + "wcs.conll"});
  twice("combine-pronoun",
        {"combine", "--base", fix + "wcs.conll", "--other", fix + "hoi.conll", "--mode", "pronoun"});
  twice("combine-filter", {"combine", "--base", toy("wcs", "train.conll"), "--mode", "filter", "--embeddings",
                           toy("wcs", "embeddings")});
  twice("score", {"score", "--key", fix + "key.conll", "--response", fix + "merged.conll", "--json"});
  twice("dd-stats", {"dd-stats", toy("dd", "train.conll"), "--embeddings", toy("dd", "embeddings")});
  std::string list;
  for (const auto &n : names) list += (list.empty() ? "" : " ") + n;
  out.note(std::to_string(names.size()) + " commands byte-identical across two runs: " + list);
  return out;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"metric-oracle", 10, metric_oracle},
      {"singleton-merge", 5, singleton_merge},
      {"gradient-checks", 120, gradient_checks},
      {"wcs-overfit", 60, wcs_overfit},
      {"dd-pipeline", 0, dd_pipeline},
      {"dd-class-statistics", 0, dd_class_statistics},
      {"bridging-overfit", 30, bridging_overfit},
      {"format-round-trip", 0, format_round_trip},
      {"determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto &c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream timing;
    timing << std::fixed << std::setprecision(1) << secs << " s";
    if (c.limit_seconds > 0) {
      timing << ", limit " << c.limit_seconds << " s";
      if (secs >= c.limit_seconds && o.ok) {
        o.ok = false;
        o.detail = "over time limit";
      }
    }
    failed += !o.ok;
    std::cout << (o.ok ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " (" << timing.str() << ")"
              << std::endl;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - static_cast<size_t>(failed) << "/"
            << criteria.size() << std::endl;
  return failed ? 1 : 0;
}
