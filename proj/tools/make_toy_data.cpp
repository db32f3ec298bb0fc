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

// Writes the small synthetic corpora under data/toy. Embeddings are random
// prototypes keyed by entity or word type plus noise, so the resolvers have
// something learnable without a real encoder.
//
//   make_toy_data <out-dir>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "anaforge/corpus.hpp"
#include "anaforge/embeddings.hpp"
#include "anaforge/features.hpp"
#include "anaforge/nn/tensor.hpp"

namespace fs = std::filesystem;
using namespace anaforge;

namespace {

// Markup: one utterance per line, "SPEAKER: text". Mentions are bracketed;
// the closing bracket carries a tag:
//   ]e1        identity mention of entity e1
//   ]nr        non-referring
//   ]dd:x      deixis anaphor whose antecedent is the region tagged {x ... }x
//   ]br:e1     bridging anaphor to the most recent mention of e1
// Deixis antecedent regions are written "{x:first ... last}x". Tokens are
// separated by spaces; brackets attach to tokens.
struct Parsed {
  Document doc;
  // Semantic key per token used to draw its embedding.
  std::vector<std::string> keys;
};

struct OpenMention {
  int start;
};

Parsed parse_markup(const std::string &doc_id, const std::vector<std::string> &lines) {
  Parsed p;
  p.doc.id = doc_id;
  std::vector<OpenMention> open;
  std::map<std::string, int> region_open;
  std::map<std::string, Span> regions;
  struct Pending {
    std::string mid;
    std::string target;
  };
  std::vector<Pending> deixis, bridging;
  std::map<std::string, std::string> last_of_entity;
  int next_mention = 1;
  int next_entity_free = 100;
  for (size_t u = 0; u < lines.size(); ++u) {
    const std::string &line = lines[u];
    auto colon = line.find(": ");
    std::string speaker = line.substr(0, colon);
    std::istringstream words(line.substr(colon + 2));
    std::string w;
    while (words >> w) {
      int t = static_cast<int>(p.doc.tokens.size());
      while (!w.empty() && (w[0] == '[' || w[0] == '{')) {
        if (w[0] == '[') {
          open.push_back({t});
          w.erase(0, 1);
        } else {
          size_t colon = w.find(':');
          region_open[w.substr(1, colon - 1)] = t;
          w.erase(0, colon + 1);
        }
      }
      size_t cut = w.find_first_of("]}");
      std::string surface = w.substr(0, cut);
      std::string rest = cut == std::string::npos ? "" : w.substr(cut);
      p.doc.tokens.push_back(Token{doc_id, static_cast<size_t>(t), surface, speaker, u, 1, "_"});
      p.keys.push_back("w:" + lowercase(surface));
      while (!rest.empty()) {
        size_t next = rest.find_first_of("]}", 1);
        std::string c = rest.substr(0, next);
        rest = next == std::string::npos ? "" : rest.substr(next);
        if (c[0] == '}') {
          std::string name = c.substr(1);
          regions[name] = Span{region_open.at(name), t};
          continue;
        }
        OpenMention om = open.back();
        open.pop_back();
        std::string tag = c.substr(1);
        Mention m;
        m.id = "m" + std::to_string(next_mention++);
        m.span = Span{om.start, t};
        std::string key;
        if (tag == "nr") {
          m.kind = AnaphorKind::kNonReferential;
          m.referring = false;
          key = "nr";
        } else if (tag.rfind("dd:", 0) == 0) {
          m.kind = AnaphorKind::kDiscourseDeixis;
          deixis.push_back({m.id, tag.substr(3)});
          key = "dd:" + tag.substr(3);
        } else if (tag.rfind("br:", 0) == 0) {
          m.kind = AnaphorKind::kBridging;
          m.entity = "e" + std::to_string(next_entity_free++);
          bridging.push_back({m.id, last_of_entity.at(tag.substr(3))});
          key = "br:" + tag.substr(3);
        } else {
          m.kind = AnaphorKind::kIdentity;
          m.entity = tag;
          m.status = last_of_entity.count(tag) ? DiscourseStatus::kOld : DiscourseStatus::kNew;
          m.referring = true;
          last_of_entity[tag] = m.id;
          key = "e:" + tag;
        }
        for (int i = m.span.start; i <= m.span.end; ++i) p.keys[static_cast<size_t>(i)] += "|" + key;
        p.doc.mentions.push_back(std::move(m));
      }
    }
  }
  for (const auto &d : deixis) p.doc.deixis[d.mid].push_back(regions.at(d.target));
  for (const auto &[name, span] : regions)
    for (int i = span.start; i <= span.end; ++i) p.keys[static_cast<size_t>(i)] += "|dd:" + name;
  for (const auto &b : bridging) p.doc.bridging.push_back({b.mid, b.target});
  p.doc.canonicalize();
  p.doc.validate();
  return p;
}

uint64_t fnv1a(const std::string &s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Vec prototype(const std::string &key, const std::string &space, size_t dim) {
  nn::Rng rng(fnv1a(space + "#" + key));
  Vec v(dim);
  for (double &x : v) x = rng.normal();
  return v;
}

std::string guess_pos(const std::string &surface) {
  std::string s = lowercase(surface);
  if (s == "." || s == "," || s == "?" || s == "!") return "PUNCT";
  if (is_pronoun(s)) return "PRON";
  if (s == "the" || s == "a" || s == "an") return "DET";
  if (s == "at" || s == "in" || s == "of" || s == "for" || s == "about" || s == "on" || s == "to") return "ADP";
  if (s == "and" || s == "but" || s == "so") return "CCONJ";
  if (std::isupper(static_cast<unsigned char>(surface[0]))) return "PROPN";
  if (s.size() > 2 && (s.substr(s.size() - 2) == "ed" || s == "is" || s == "was")) return "VERB";
  return "NOUN";
}

struct SpaceSpec {
  std::string name;
  size_t dim;
};

// Writes embeddings, annotations, the subtoken map and a manifest for `p`.
// `scale` sets the overall magnitude of the synthetic vectors.
void write_store(const Parsed &p, const fs::path &dir, const std::vector<SpaceSpec> &spaces, uint64_t seed,
                 double scale) {
  fs::create_directories(dir);
  const Document &doc = p.doc;
  std::vector<SubtokenRange> map;
  size_t rows = 0;
  for (const auto &t : doc.tokens) {
    size_t count = t.surface.size() > 6 ? 2 : 1;
    map.push_back({rows, count});
    rows += count;
  }
  // Head-final phrases: every token of a mention points at the mention's
  // last token; the last token attaches to nothing.
  std::vector<TokenAnnotation> ann(doc.tokens.size());
  for (size_t t = 0; t < doc.tokens.size(); ++t) {
    ann[t].pos = guess_pos(doc.tokens[t].surface);
    ann[t].tag = ann[t].pos == "NOUN" && doc.tokens[t].surface.back() == 's' ? "NNS" : "";
    ann[t].dep = ann[t].pos == "PUNCT" ? "punct" : ann[t].pos == "DET" ? "det" : "dep";
    ann[t].lemma = lowercase(doc.tokens[t].surface);
  }
  for (const auto &m : doc.mentions)
    for (int i = m.span.start; i < m.span.end; ++i)
      if (!ann[static_cast<size_t>(i)].parent) ann[static_cast<size_t>(i)].parent = static_cast<size_t>(m.span.end);
  std::map<Span, ConstituentType> constituents;
  for (const auto &s : doc.sentences()) constituents[s] = ConstituentType::kVerbal;
  for (const auto &m : doc.mentions) constituents[m.span] = ConstituentType::kNominal;
  for (const auto &[mid, spans] : doc.deixis)
    for (const auto &s : spans) constituents[s] = ConstituentType::kVerbal;

  EmbeddingManifest manifest;
  manifest.doc_id = doc.id;
  manifest.annotation_path = doc.id + ".ann.jsonl";
  manifest.subtoken_map_path = doc.id + ".subtok.tsv";
  nn::Rng noise(seed ^ fnv1a(doc.id));
  for (const auto &sp : spaces) {
    Matrix m;
    m.rows = rows;
    m.dim = sp.dim;
    m.data.resize(rows * sp.dim);
    for (size_t t = 0; t < doc.tokens.size(); ++t) {
      Vec base(sp.dim, 0.0);
      std::istringstream keys(p.keys[t]);
      std::string key;
      double weight = 0.5;
      while (std::getline(keys, key, '|')) {
        Vec proto = prototype(key, sp.name, sp.dim);
        for (size_t i = 0; i < sp.dim; ++i) base[i] += weight * proto[i];
        weight = 1.0;
      }
      for (size_t s = 0; s < map[t].count; ++s)
        for (size_t i = 0; i < sp.dim; ++i)
          m.data[(map[t].first + s) * sp.dim + i] = static_cast<float>(scale * (base[i] + 0.3 * noise.normal()));
    }
    std::string file = doc.id + "." + sp.name + ".f32";
    write_matrix((dir / file).string(), m);
    manifest.spaces.push_back({sp.name, sp.dim, file, std::nullopt});
  }
  write_subtoken_map((dir / manifest.subtoken_map_path).string(), map);
  write_annotations((dir / manifest.annotation_path).string(), ann, constituents);
  std::ofstream((dir / (doc.id + ".json")).string()) << manifest.to_json().dump(2) << '\n';
}

std::vector<Document> write_set(const fs::path &dir,
                                const std::vector<std::pair<std::string, std::vector<std::string>>> &docs,
                                const std::vector<SpaceSpec> &spaces, uint64_t seed, double scale) {
  std::vector<Document> corpus;
  for (const auto &[id, lines] : docs) {
    Parsed p = parse_markup(id, lines);
    write_store(p, dir / "embeddings", spaces, seed, scale);
    corpus.push_back(p.doc);
  }
  write_corpus_file((dir / "train.conll").string(), corpus);
  return corpus;
}

void write_wcs(const fs::path &root) {
  std::vector<std::pair<std::string, std::vector<std::string>>> docs = {
      {"toy_a",
       {"A: [John Smith]e1 met [Mary]e2 at [the station]e3 .",
        "B: [He]e1 gave [her]e2 [a red book]e4 .",
        "A: [She]e2 thanked [him]e1 for [the book]e4 .",
        "B: [It]nr was raining , so [John Smith]e1 left .",
        "A: [Mary]e2 read [the book]e4 at [home]e5 ."}},
      {"toy_b",
       {"A: [The company]e1 hired [Anna Lee]e2 in [March]e3 .",
        "B: [She]e2 liked [the company]e1 and [[its]e1 offices]e4 .",
        "A: [They]e5 asked [her]e2 about [the offices]e4 .",
        "B: [It]nr is clear that [Anna Lee]e2 stayed .",
        "A: [The company]e1 grew ."}},
  };
  write_set(root / "wcs", docs, {{"bert", 768}, {"numberbatch", 300}, {"glove", 100}, {"bert_mlm", 768}}, 11, 2.5);
}

constexpr double kDdScale = 1.0;

// Twenty candidate anaphors: eight deictic, seven identity, five
// non-referring.
void write_dd(const fs::path &root) {
  std::vector<std::pair<std::string, std::vector<std::string>>> docs = {
      {"dd_a",
       {"A: {p1:we should cancel the trip}p1 .", "B: [that]dd:p1 sounds fine to me .",
        "A: [the printer]e1 broke again .", "B: [it]e1 needs a new cable .", "A: [it]nr is late .",
        "B: {p2:the team finished the report}p2 .", "A: [this]dd:p2 makes me happy .",
        "B: [the report]e2 , [which]e2 was long , helped ."}},
      {"dd_b",
       {"A: {p1:you moved the desk}p1 .", "B: why did you do [that]dd:p1 ?", "A: [the lamp]e1 was too dark .",
        "B: [it]e1 was cheap .", "A: {p2:we could paint the walls}p2 .", "B: [this]dd:p2 sounds expensive .",
        "A: [it]nr seems so .", "B: [the paint]e2 is red and [it]e2 dries fast ."}},
      {"dd_c",
       {"A: {p1:the budget was approved}p1 .", "B: [that]dd:p1 is great news .", "A: [the manager]e1 called .",
        "B: [it]nr is odd .", "A: [the phone]e2 rang and [it]e2 stopped .", "B: {p2:I will write the summary}p2 .",
        "A: please do [that]dd:p2 today .", "B: [it]nr is raining ."}},
      {"dd_d",
       {"A: {p1:they cancelled the concert}p1 .", "B: [this]dd:p1 is sad .", "A: [the singer]e1 was ill .",
        "B: [the ticket]e2 , [which]e2 cost a lot , is lost .", "A: [it]nr happens .",
        "B: {p2:the band will return}p2 .", "A: I doubt [that]dd:p2 .", "B: [the stage]e3 broke and [it]e3 fell ."}},
  };
  write_set(root / "dd", docs, {{"spanbert", 32}}, 23, kDdScale);
}

// Thirty gold bridging anaphors over five documents.
void write_bridging(const fs::path &root) {
  std::vector<std::pair<std::string, std::vector<std::string>>> docs = {
      {"br_a",
       {"A: we visited [the old house]e1 on [Sunday]e2 .", "B: [the door]br:e1 was open .",
        "A: [the roof]br:e1 leaked and [the garden]br:e1 was wild .", "B: [the car]e3 was parked outside .",
        "A: [the engine]br:e3 was still warm .", "B: [the morning]br:e2 was cold and [the tyres]br:e3 were flat ."}},
      {"br_b",
       {"A: [the meeting]e1 started late .", "B: [the agenda]br:e1 was long .", "A: I read [a novel]e2 .",
        "B: was [the ending]br:e2 good ?", "A: [the first chapter]br:e2 was slow but [the author]br:e2 is great .",
        "B: [the minutes]br:e1 were lost ."}},
      {"br_c",
       {"A: [the school]e1 hired [a new coach]e2 .", "B: [the teachers]br:e1 were happy .",
        "A: [the salary]br:e2 was low .", "B: [the students]br:e1 liked [the gym]br:e1 .",
        "A: [the contract]br:e2 ends in May .", "B: [the principal]br:e1 resigned ."}},
      {"br_d",
       {"A: [the restaurant]e1 opened in [the city]e2 .", "B: [the menu]br:e1 is short .",
        "A: [the mayor]br:e2 came and [the chef]br:e1 cooked .", "B: [the streets]br:e2 were full .",
        "A: [the prices]br:e1 were fair and [the parks]br:e2 were busy .", "B: [the waiter]br:e1 smiled ."}},
      {"br_e",
       {"A: [the laptop]e1 arrived with [a manual]e2 .", "B: [the screen]br:e1 is bright .",
        "A: [the index]br:e2 is missing .", "B: [the keyboard]br:e1 is loud .",
        "A: [the battery]br:e1 died and [the cover]br:e2 tore .", "B: [the charger]br:e1 works ."}},
  };
  write_set(root / "bridging", docs, {{"bert", 32}}, 31, 1.0);
}

}  // namespace

int main(int argc, char **argv) {
  if (argc != 2) {
    std::cerr << "usage: make_toy_data <out-dir>\n";
    return 2;
  }
  fs::path root = argv[1];
  write_wcs(root);
  write_dd(root);
  write_bridging(root);
  return 0;
}
