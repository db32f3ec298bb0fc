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

// Precomputed, subtoken-aligned embeddings and token annotations for one
// document.
//
// A manifest (JSON) names the embedding spaces, each a binary matrix with
// one row per encoder subtoken:
//
//   char[8] "AFEMBF32", u64 rows, u64 dim, then rows*dim little-endian f32.
//
// The subtoken map is a text file of "token<TAB>first<TAB>count" lines that
// must tile the subtoken rows in order. Annotations are JSON lines, one per
// token: {"token", "pos", "tag", "dep", "parent", "lemma", "constituents"}.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anaforge/corpus.hpp"
#include "anaforge/nn/tensor.hpp"

namespace anaforge {

using nn::Vec;

class EmbeddingError : public std::runtime_error {
 public:
  enum class Kind {
    kDimMismatch,
    kMissingSpace,
    kTruncatedMatrix,
    kRowCountMismatch,
    kBadMatrix,
    kMalformedManifest,
    kUnknownSpace,
    kNoFallbackDeclared,
    kInvalidAnnotation,
    kMissingEmbedding,
  };

  EmbeddingError(Kind kind, const std::string &what)
      : std::runtime_error(std::string(name(kind)) + ": " + what), kind_(kind) {}

  Kind kind() const { return kind_; }

  static const char *name(Kind k) {
    switch (k) {
      case Kind::kDimMismatch: return "DimMismatch";
      case Kind::kMissingSpace: return "MissingSpace";
      case Kind::kTruncatedMatrix: return "TruncatedMatrix";
      case Kind::kRowCountMismatch: return "RowCountMismatch";
      case Kind::kBadMatrix: return "BadMatrix";
      case Kind::kMalformedManifest: return "MalformedManifest";
      case Kind::kUnknownSpace: return "UnknownSpace";
      case Kind::kNoFallbackDeclared: return "NoFallbackDeclared";
      case Kind::kInvalidAnnotation: return "InvalidAnnotation";
      case Kind::kMissingEmbedding: return "MissingEmbedding";
    }
    return "?";
  }

 private:
  Kind kind_;
};

enum class ConstituentType { kVerbal, kNominal, kOther };

inline const char *to_string(ConstituentType t) {
  switch (t) {
    case ConstituentType::kVerbal: return "verbal";
    case ConstituentType::kNominal: return "nominal";
    case ConstituentType::kOther: return "other";
  }
  return "other";
}

inline std::optional<ConstituentType> constituent_from_string(const std::string &s) {
  if (s == "verbal") return ConstituentType::kVerbal;
  if (s == "nominal") return ConstituentType::kNominal;
  if (s == "other") return ConstituentType::kOther;
  return std::nullopt;
}

struct TokenAnnotation {
  std::string pos;
  std::string tag;  // fine-grained tag, e.g. NNS; may be empty
  std::string dep;
  std::optional<size_t> parent;
  std::string lemma;
};

inline const std::vector<std::string> &default_pos_tags() {
  static const std::vector<std::string> tags = {
      "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART",
      "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X", "SPACE"};
  return tags;
}

inline const std::vector<std::string> &default_dep_tags() {
  static const std::vector<std::string> tags = {
      "ROOT", "acl", "acomp", "advcl", "advmod", "agent", "amod", "appos", "attr",
      "aux", "auxpass", "case", "cc", "ccomp", "compound", "conj", "csubj", "csubjpass",
      "dative", "dep", "det", "dobj", "expl", "intj", "mark", "meta", "neg", "nmod",
      "npadvmod", "nsubj", "nsubjpass", "nummod", "oprd", "parataxis", "pcomp", "pobj",
      "poss", "preconj", "predet", "prep", "prt", "punct", "quantmod", "relcl", "xcomp"};
  return tags;
}

struct SpaceDecl {
  std::string name;
  size_t dim = 0;
  std::string path;
  std::optional<std::string> fallback_path;
};

struct EmbeddingManifest {
  std::string doc_id;
  std::vector<SpaceDecl> spaces;
  std::string annotation_path;
  std::string subtoken_map_path;
  std::vector<std::string> pos_tags = default_pos_tags();
  std::vector<std::string> dep_tags = default_dep_tags();

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["doc_id"] = doc_id;
    j["spaces"] = nlohmann::json::array();
    for (const auto &s : spaces) {
      nlohmann::json sj{{"name", s.name}, {"dim", s.dim}, {"path", s.path}};
      if (s.fallback_path) sj["fallback_path"] = *s.fallback_path;
      j["spaces"].push_back(sj);
    }
    j["annotation_path"] = annotation_path;
    j["subtoken_map_path"] = subtoken_map_path;
    j["pos_tags"] = pos_tags;
    j["dep_tags"] = dep_tags;
    return j;
  }

  static EmbeddingManifest from_json(const nlohmann::json &j) {
    using K = EmbeddingError::Kind;
    try {
      EmbeddingManifest m;
      m.doc_id = j.at("doc_id").get<std::string>();
      std::set<std::string> names;
      for (const auto &sj : j.at("spaces")) {
        SpaceDecl s;
        s.name = sj.at("name").get<std::string>();
        s.dim = sj.at("dim").get<size_t>();
        s.path = sj.at("path").get<std::string>();
        if (sj.contains("fallback_path") && !sj["fallback_path"].is_null())
          s.fallback_path = sj["fallback_path"].get<std::string>();
        if (s.dim == 0) throw EmbeddingError(K::kMalformedManifest, "space " + s.name + " has dim 0");
        if (!names.insert(s.name).second)
          throw EmbeddingError(K::kMalformedManifest, "duplicate space " + s.name);
        m.spaces.push_back(std::move(s));
      }
      m.annotation_path = j.at("annotation_path").get<std::string>();
      m.subtoken_map_path = j.at("subtoken_map_path").get<std::string>();
      if (j.contains("pos_tags")) m.pos_tags = j["pos_tags"].get<std::vector<std::string>>();
      if (j.contains("dep_tags")) m.dep_tags = j["dep_tags"].get<std::vector<std::string>>();
      return m;
    } catch (const nlohmann::json::exception &e) {
      throw EmbeddingError(K::kMalformedManifest, e.what());
    }
  }
};

inline constexpr std::array<char, 8> kMatrixMagic = {'A', 'F', 'E', 'M', 'B', 'F', '3', '2'};

struct Matrix {
  size_t rows = 0;
  size_t dim = 0;
  std::vector<float> data;

  std::span<const float> row(size_t r) const { return {data.data() + r * dim, dim}; }
};

inline void write_matrix(const std::string &path, const Matrix &m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMatrixMagic.data(), 8);
  auto put = [&](uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char *>(b), 8);
  };
  put(m.rows);
  put(m.dim);
  for (float f : m.data) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char *>(b), 4);
  }
}

inline Matrix read_matrix(const std::string &path) {
  using K = EmbeddingError::Kind;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw EmbeddingError(K::kMissingSpace, "cannot open matrix " + path);
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), 8) || magic != kMatrixMagic)
    throw EmbeddingError(K::kBadMatrix, "bad magic in " + path);
  auto get = [&]() {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char *>(b), 8)) throw EmbeddingError(K::kBadMatrix, "short header in " + path);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  };
  Matrix m;
  m.rows = get();
  m.dim = get();
  if (m.dim == 0 || m.rows > (1ULL << 32) || m.dim > (1ULL << 20))
    throw EmbeddingError(K::kBadMatrix, "implausible shape in " + path);
  m.data.resize(m.rows * m.dim);
  std::vector<unsigned char> raw(m.data.size() * 4);
  is.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(is.gcount()) != raw.size())
    throw EmbeddingError(K::kTruncatedMatrix, path + " holds fewer than the " + std::to_string(m.rows) +
                                                   " rows its header declares");
  for (size_t i = 0; i < m.data.size(); ++i) {
    uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | raw[i * 4 + static_cast<size_t>(b)];
    std::memcpy(&m.data[i], &bits, 4);
  }
  return m;
}

struct SubtokenRange {
  size_t first = 0;
  size_t count = 1;
};

class EmbeddingStore {
 public:
  using K = EmbeddingError::Kind;

  EmbeddingStore() = default;

  // In-memory construction; `annotations` may be empty when no resolver
  // needing syntax is used.
  EmbeddingStore(std::string doc_id, std::vector<SubtokenRange> subtokens,
                 std::vector<TokenAnnotation> annotations = {})
      : doc_id_(std::move(doc_id)), subtokens_(std::move(subtokens)), annotations_(std::move(annotations)) {
    size_t next = 0;
    for (size_t t = 0; t < subtokens_.size(); ++t) {
      if (subtokens_[t].first != next || subtokens_[t].count < 1)
        throw EmbeddingError(K::kMalformedManifest, "subtoken map does not tile rows at token " + std::to_string(t));
      next += subtokens_[t].count;
    }
    total_subtokens_ = next;
    if (!annotations_.empty() && annotations_.size() != subtokens_.size())
      throw EmbeddingError(K::kInvalidAnnotation, "annotation count differs from token count");
    for (const auto &a : annotations_)
      if (a.parent && *a.parent >= subtokens_.size())
        throw EmbeddingError(K::kInvalidAnnotation, "parent index out of range");
  }

  void add_space(const std::string &name, Matrix m, std::optional<Vec> fallback = std::nullopt) {
    if (spaces_.count(name)) throw EmbeddingError(K::kMalformedManifest, "duplicate space " + name);
    if (m.rows < total_subtokens_)
      throw EmbeddingError(K::kTruncatedMatrix, "space " + name + " has " + std::to_string(m.rows) +
                                                    " rows for " + std::to_string(total_subtokens_) + " subtokens");
    if (m.rows != total_subtokens_)
      throw EmbeddingError(K::kRowCountMismatch, "space " + name + " has " + std::to_string(m.rows) +
                                                     " rows for " + std::to_string(total_subtokens_) + " subtokens");
    if (fallback && fallback->size() != m.dim)
      throw EmbeddingError(K::kDimMismatch, "fallback width for " + name);
    spaces_[name] = Space{std::move(m), std::move(fallback)};
  }

  void add_constituent(Span s, ConstituentType t) { constituents_[s] = t; }

  const std::string &doc_id() const { return doc_id_; }
  size_t token_count() const { return subtokens_.size(); }
  size_t subtoken_count() const { return total_subtokens_; }
  const SubtokenRange &subtokens(size_t token) const { return subtokens_.at(token); }
  bool has_space(const std::string &name) const { return spaces_.count(name) > 0; }
  bool has_annotations() const { return !annotations_.empty(); }

  std::vector<std::string> space_names() const {
    std::vector<std::string> out;
    for (const auto &[n, s] : spaces_) out.push_back(n);
    return out;
  }

  std::pair<size_t, size_t> shape(const std::string &name) const {
    const Space &s = space(name);
    return {s.matrix.rows, s.matrix.dim};
  }
  size_t dim(const std::string &name) const { return space(name).matrix.dim; }

  std::span<const float> subtoken_vector(const std::string &name, size_t row) const {
    const Space &s = space(name);
    if (row >= s.matrix.rows) throw std::out_of_range("subtoken row out of range");
    return s.matrix.row(row);
  }

  // Mean over the subtoken rows [first, last].
  Vec subtoken_mean(const std::string &name, size_t first, size_t last) const {
    const Space &s = space(name);
    Vec out(s.matrix.dim, 0.0);
    for (size_t r = first; r <= last; ++r) {
      auto row = s.matrix.row(r);
      for (size_t i = 0; i < out.size(); ++i) out[i] += row[i];
    }
    double n = static_cast<double>(last - first + 1);
    for (double &v : out) v /= n;
    return out;
  }

  // Arithmetic mean over every subtoken covered by the span.
  Vec span_vector(const std::string &name, const Span &span) const {
    check_span(span);
    size_t first = subtokens_[static_cast<size_t>(span.start)].first;
    const auto &last = subtokens_[static_cast<size_t>(span.end)];
    return subtoken_mean(name, first, last.first + last.count - 1);
  }

  Vec token_vector(const std::string &name, size_t token) const {
    int t = static_cast<int>(token);
    return span_vector(name, Span{t, t});
  }

  Vec fallback_vector(const std::string &name) const {
    const Space &s = space(name);
    if (!s.fallback) throw EmbeddingError(K::kNoFallbackDeclared, name);
    return *s.fallback;
  }

  // Syntactic head: the token inside the span whose parent lies outside it
  // (or has none); ties go to the leftmost such token, and a span whose
  // parents are all internal falls back to its leftmost token.
  size_t head_token(const Span &span) const {
    check_span(span);
    if (annotations_.empty()) throw EmbeddingError(K::kInvalidAnnotation, "no annotations loaded");
    for (int t = span.start; t <= span.end; ++t) {
      const auto &p = annotations_[static_cast<size_t>(t)].parent;
      if (!p || !span.contains(static_cast<int>(*p))) return static_cast<size_t>(t);
    }
    return static_cast<size_t>(span.start);
  }

  Vec head_vector(const std::string &name, const Span &span) const {
    return token_vector(name, head_token(span));
  }

  const TokenAnnotation &annotation(size_t token) const {
    if (annotations_.empty()) throw EmbeddingError(K::kInvalidAnnotation, "no annotations loaded");
    return annotations_.at(token);
  }

  ConstituentType constituent_type(const Span &s) const {
    auto it = constituents_.find(s);
    return it == constituents_.end() ? ConstituentType::kOther : it->second;
  }

  const std::map<Span, ConstituentType> &constituents() const { return constituents_; }

  // Copies subtoken counts into the document's tokens.
  void attach(Document &doc) const {
    if (doc.id != doc_id_)
      throw EmbeddingError(K::kMalformedManifest, "store for " + doc_id_ + " attached to " + doc.id);
    if (doc.tokens.size() != subtokens_.size())
      throw EmbeddingError(K::kMalformedManifest, "store covers " + std::to_string(subtokens_.size()) +
                                                      " tokens, document has " + std::to_string(doc.tokens.size()));
    for (size_t t = 0; t < subtokens_.size(); ++t) doc.tokens[t].subtoken_count = subtokens_[t].count;
  }

 private:
  struct Space {
    Matrix matrix;
    std::optional<Vec> fallback;
  };

  const Space &space(const std::string &name) const {
    auto it = spaces_.find(name);
    if (it == spaces_.end()) throw EmbeddingError(K::kUnknownSpace, name);
    return it->second;
  }

  void check_span(const Span &span) const {
    if (span.start < 0 || span.start > span.end || static_cast<size_t>(span.end) >= subtokens_.size())
      throw std::out_of_range("span outside document " + doc_id_);
  }

  std::string doc_id_;
  std::vector<SubtokenRange> subtokens_;
  size_t total_subtokens_ = 0;
  std::vector<TokenAnnotation> annotations_;
  std::map<Span, ConstituentType> constituents_;
  std::map<std::string, Space> spaces_;
};

inline std::vector<SubtokenRange> read_subtoken_map(const std::string &path) {
  using K = EmbeddingError::Kind;
  std::ifstream in(path);
  if (!in) throw EmbeddingError(K::kMalformedManifest, "cannot open subtoken map " + path);
  std::vector<SubtokenRange> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    size_t token, first, count;
    if (!(ls >> token >> first >> count) || token != out.size())
      throw EmbeddingError(K::kMalformedManifest, "bad subtoken map line '" + line + "'");
    out.push_back({first, count});
  }
  return out;
}

inline void write_subtoken_map(const std::string &path, const std::vector<SubtokenRange> &map) {
  std::ofstream os(path);
  for (size_t t = 0; t < map.size(); ++t) os << t << '\t' << map[t].first << '\t' << map[t].count << '\n';
}

struct AnnotationFile {
  std::vector<TokenAnnotation> tokens;
  std::map<Span, ConstituentType> constituents;
};

inline AnnotationFile read_annotations(const std::string &path, const std::vector<std::string> &pos_tags,
                                       const std::vector<std::string> &dep_tags) {
  using K = EmbeddingError::Kind;
  std::ifstream in(path);
  if (!in) throw EmbeddingError(K::kInvalidAnnotation, "cannot open annotations " + path);
  std::set<std::string> pos(pos_tags.begin(), pos_tags.end());
  std::set<std::string> dep(dep_tags.begin(), dep_tags.end());
  AnnotationFile out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      size_t t = j.at("token").get<size_t>();
      if (t != out.tokens.size()) throw EmbeddingError(K::kInvalidAnnotation, "annotation records out of order");
      TokenAnnotation a;
      a.pos = j.at("pos").get<std::string>();
      a.dep = j.at("dep").get<std::string>();
      if (!pos.count(a.pos)) throw EmbeddingError(K::kInvalidAnnotation, "POS tag '" + a.pos + "' not declared");
      if (!dep.count(a.dep)) throw EmbeddingError(K::kInvalidAnnotation, "DEP tag '" + a.dep + "' not declared");
      if (j.contains("tag")) a.tag = j["tag"].get<std::string>();
      if (j.contains("lemma")) a.lemma = j["lemma"].get<std::string>();
      if (j.contains("parent") && !j["parent"].is_null()) a.parent = j["parent"].get<size_t>();
      if (j.contains("constituents")) {
        for (const auto &c : j["constituents"]) {
          int end = c.at("end").get<int>();
          auto type = constituent_from_string(c.at("type").get<std::string>());
          if (!type || end < static_cast<int>(t))
            throw EmbeddingError(K::kInvalidAnnotation, "bad constituent at token " + std::to_string(t));
          out.constituents[Span{static_cast<int>(t), end}] = *type;
        }
      }
      out.tokens.push_back(std::move(a));
    } catch (const nlohmann::json::exception &e) {
      throw EmbeddingError(K::kInvalidAnnotation, std::string("bad annotation line: ") + e.what());
    }
  }
  for (const auto &[s, type] : out.constituents)
    if (static_cast<size_t>(s.end) >= out.tokens.size())
      throw EmbeddingError(K::kInvalidAnnotation, "constituent beyond document end");
  return out;
}

inline void write_annotations(const std::string &path, const std::vector<TokenAnnotation> &tokens,
                              const std::map<Span, ConstituentType> &constituents = {}) {
  std::ofstream os(path);
  for (size_t t = 0; t < tokens.size(); ++t) {
    const auto &a = tokens[t];
    nlohmann::json j;
    j["token"] = t;
    j["pos"] = a.pos;
    if (!a.tag.empty()) j["tag"] = a.tag;
    j["dep"] = a.dep;
    j["parent"] = a.parent ? nlohmann::json(*a.parent) : nlohmann::json(nullptr);
    if (!a.lemma.empty()) j["lemma"] = a.lemma;
    nlohmann::json cons = nlohmann::json::array();
    for (const auto &[s, type] : constituents)
      if (s.start == static_cast<int>(t)) cons.push_back({{"end", s.end}, {"type", to_string(type)}});
    if (!cons.empty()) j["constituents"] = cons;
    os << j.dump() << '\n';
  }
}

// Loads a manifest and everything it references. Relative paths resolve
// against the manifest's directory.
inline EmbeddingStore load_manifest(const std::string &path) {
  using K = EmbeddingError::Kind;
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) throw EmbeddingError(K::kMalformedManifest, "cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw EmbeddingError(K::kMalformedManifest, e.what());
  }
  EmbeddingManifest m = EmbeddingManifest::from_json(j);
  fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string &p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };

  auto map = read_subtoken_map(resolve(m.subtoken_map_path));
  auto ann = read_annotations(resolve(m.annotation_path), m.pos_tags, m.dep_tags);
  if (ann.tokens.size() != map.size())
    throw EmbeddingError(K::kInvalidAnnotation, "annotations cover " + std::to_string(ann.tokens.size()) +
                                                    " tokens, subtoken map " + std::to_string(map.size()));
  EmbeddingStore store(m.doc_id, std::move(map), std::move(ann.tokens));
  for (const auto &[s, t] : ann.constituents) store.add_constituent(s, t);
  for (const auto &decl : m.spaces) {
    std::string p = resolve(decl.path);
    if (!fs::exists(p)) throw EmbeddingError(K::kMissingSpace, "matrix for space " + decl.name + " not found: " + p);
    Matrix mat = read_matrix(p);
    if (mat.dim != decl.dim)
      throw EmbeddingError(K::kDimMismatch, "space " + decl.name + " declares dim " + std::to_string(decl.dim) +
                                                " but matrix rows have width " + std::to_string(mat.dim));
    std::optional<Vec> fallback;
    if (decl.fallback_path) {
      std::string fp = resolve(*decl.fallback_path);
      if (!fs::exists(fp)) throw EmbeddingError(K::kMissingSpace, "fallback for " + decl.name + " not found");
      Matrix fb = read_matrix(fp);
      if (fb.dim != decl.dim || fb.rows != 1)
        throw EmbeddingError(K::kDimMismatch, "fallback for " + decl.name + " must be one row of width " +
                                                  std::to_string(decl.dim));
      fallback = Vec(fb.data.begin(), fb.data.end());
    }
    store.add_space(decl.name, std::move(mat), std::move(fallback));
  }
  return store;
}

// All stores found as *.json manifests in a directory, keyed by document id.
inline std::map<std::string, EmbeddingStore> load_store_directory(const std::string &dir) {
  namespace fs = std::filesystem;
  std::map<std::string, EmbeddingStore> out;
  if (!fs::is_directory(dir)) throw EmbeddingError(EmbeddingError::Kind::kMalformedManifest, "not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto &p : paths) {
    EmbeddingStore s = load_manifest(p.string());
    std::string id = s.doc_id();
    out.emplace(id, std::move(s));
  }
  return out;
}

}  // namespace anaforge
