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

// Dialogue documents in a twelve-column anaphora format.
//
//   #begin document <id>
//   DOC TOKEN SURFACE SPEAKER UTTERANCE IDENTITY DEIXIS BRIDGING KIND REFERRING STATUS MISC
//   #end document
//
// Columns are tab separated; "_" marks an empty cell; multi-valued cells
// join items with "|". Mentions are id-tagged brackets in IDENTITY:
// "(m1=e4" opens m1 in entity e4, "m1)" closes it, "(m1)" is a one-token
// mention, and the "=entity" part is optional. DEIXIS holds antecedent
// brackets keyed by the anaphor's mention id; a split antecedent repeats the
// group with the same id. BRIDGING holds "anaphor>antecedent" on the
// anaphor's first row. KIND (id|dd|br|nr), REFERRING (y|n) and STATUS
// (old|new) hold "mention=value" items on the mention's first row.

#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "anaforge/clustering.hpp"

namespace anaforge {

struct Span {
  int start = 0;
  int end = 0;  // inclusive

  int width() const { return end - start + 1; }
  bool contains(int token) const { return start <= token && token <= end; }
  bool contains(const Span &o) const { return start <= o.start && o.end <= end; }

  auto operator<=>(const Span &) const = default;
};

enum class AnaphorKind { kIdentity, kDiscourseDeixis, kBridging, kNonReferential };
enum class DiscourseStatus { kOld, kNew };

struct Token {
  std::string doc_id;
  size_t index = 0;
  std::string surface;
  std::string speaker;
  size_t utterance = 0;
  // Encoder subtokens covered by this token; filled from an embedding store.
  size_t subtoken_count = 1;
  std::string misc = "_";

  bool operator==(const Token &) const = default;
};

struct Mention {
  std::string id;
  Span span;
  std::optional<std::string> entity;
  std::optional<AnaphorKind> kind;
  std::optional<DiscourseStatus> status;
  std::optional<bool> referring;

  bool operator==(const Mention &) const = default;
};

struct BridgingLink {
  std::string anaphor;
  std::string antecedent;

  auto operator<=>(const BridgingLink &) const = default;
};

using EntitySet = Clustering<std::string>;

class FormatError : public std::runtime_error {
 public:
  enum class Kind {
    kMalformedRow,
    kUnbalancedBrackets,
    kDuplicateMentionId,
    kUnknownMention,
    kInvalidDocument,
  };

  FormatError(Kind kind, size_t line, const std::string &what)
      : std::runtime_error(describe(kind, line, what)), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  size_t line() const { return line_; }

  static const char *name(Kind k) {
    switch (k) {
      case Kind::kMalformedRow: return "MalformedRow";
      case Kind::kUnbalancedBrackets: return "UnbalancedBrackets";
      case Kind::kDuplicateMentionId: return "DuplicateMentionId";
      case Kind::kUnknownMention: return "UnknownMention";
      case Kind::kInvalidDocument: return "InvalidDocument";
    }
    return "?";
  }

 private:
  static std::string describe(Kind k, size_t line, const std::string &what) {
    std::string s = name(k);
    if (line > 0) s += " at line " + std::to_string(line);
    return s + ": " + what;
  }

  Kind kind_;
  size_t line_;
};

inline std::string to_code(AnaphorKind k) {
  switch (k) {
    case AnaphorKind::kIdentity: return "id";
    case AnaphorKind::kDiscourseDeixis: return "dd";
    case AnaphorKind::kBridging: return "br";
    case AnaphorKind::kNonReferential: return "nr";
  }
  return "?";
}

inline std::optional<AnaphorKind> anaphor_kind_from_code(std::string_view s) {
  if (s == "id") return AnaphorKind::kIdentity;
  if (s == "dd") return AnaphorKind::kDiscourseDeixis;
  if (s == "br") return AnaphorKind::kBridging;
  if (s == "nr") return AnaphorKind::kNonReferential;
  return std::nullopt;
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Mentions sort by start, then longest first, then id.
inline bool canonical_mention_order(const Mention &a, const Mention &b) {
  if (a.span.start != b.span.start) return a.span.start < b.span.start;
  if (a.span.end != b.span.end) return a.span.end > b.span.end;
  return a.id < b.id;
}

inline bool canonical_span_order(const Span &a, const Span &b) {
  if (a.start != b.start) return a.start < b.start;
  return a.end > b.end;
}

struct Document {
  std::string id;
  std::vector<Token> tokens;
  std::vector<Mention> mentions;
  std::vector<BridgingLink> bridging;
  // Discourse-deixis antecedents keyed by anaphor mention id. More than one
  // span means a split antecedent.
  std::map<std::string, std::vector<Span>> deixis;

  bool operator==(const Document &) const = default;

  size_t size() const { return tokens.size(); }

  const Mention *find_mention(std::string_view mid) const {
    for (const auto &m : mentions)
      if (m.id == mid) return &m;
    return nullptr;
  }

  const Mention *find_mention(const Span &s) const {
    for (const auto &m : mentions)
      if (m.span == s) return &m;
    return nullptr;
  }

  std::string text(const Span &s) const {
    std::string out;
    for (int i = s.start; i <= s.end; ++i) {
      if (i > s.start) out += ' ';
      out += tokens.at(static_cast<size_t>(i)).surface;
    }
    return out;
  }

  // Gold entity partition over the mentions that carry an entity id.
  EntitySet entities() const {
    std::vector<std::pair<std::string, std::string>> labelled;
    for (const auto &m : mentions)
      if (m.entity) labelled.emplace_back(m.id, *m.entity);
    return group_by_label(labelled);
  }

  // Sentence spans. A sentence ends at ".", "?", "!" or "...", at an
  // utterance change, and at the end of the document.
  std::vector<Span> sentences() const {
    std::vector<Span> out;
    int begin = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
      const std::string &s = tokens[i].surface;
      bool last = i + 1 == tokens.size();
      bool terminal = s == "." || s == "?" || s == "!" || s == "...";
      bool utterance_break = !last && tokens[i + 1].utterance != tokens[i].utterance;
      if (terminal || utterance_break || last) {
        out.push_back(Span{begin, static_cast<int>(i)});
        begin = static_cast<int>(i) + 1;
      }
    }
    return out;
  }

  std::vector<size_t> sentence_of_token() const {
    std::vector<size_t> out(tokens.size(), 0);
    auto sents = sentences();
    for (size_t k = 0; k < sents.size(); ++k)
      for (int t = sents[k].start; t <= sents[k].end; ++t) out[static_cast<size_t>(t)] = k;
    return out;
  }

  // Puts mentions, bridging links and antecedent spans in canonical order.
  void canonicalize() {
    std::sort(mentions.begin(), mentions.end(), canonical_mention_order);
    std::map<std::string, size_t> rank;
    for (size_t i = 0; i < mentions.size(); ++i) rank[mentions[i].id] = i;
    std::sort(bridging.begin(), bridging.end(), [&](const BridgingLink &a, const BridgingLink &b) {
      size_t ra = rank.count(a.anaphor) ? rank[a.anaphor] : mentions.size();
      size_t rb = rank.count(b.anaphor) ? rank[b.anaphor] : mentions.size();
      if (ra != rb) return ra < rb;
      return a.antecedent < b.antecedent;
    });
    for (auto &[mid, spans] : deixis) std::sort(spans.begin(), spans.end(), canonical_span_order);
  }

  // Throws FormatError(kInvalidDocument / kDuplicateMentionId / kUnknownMention).
  void validate() const {
    using K = FormatError::Kind;
    int n = static_cast<int>(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].index != i)
        throw FormatError(K::kInvalidDocument, 0, "token indices must be 0..n-1 in order");
      if (i > 0 && tokens[i].utterance < tokens[i - 1].utterance)
        throw FormatError(K::kInvalidDocument, 0, "utterance index decreases at token " + std::to_string(i));
      if (tokens[i].subtoken_count < 1)
        throw FormatError(K::kInvalidDocument, 0, "subtoken_count must be positive");
    }
    std::set<std::string> ids;
    for (const auto &m : mentions) {
      if (!ids.insert(m.id).second) throw FormatError(K::kDuplicateMentionId, 0, m.id);
      if (m.span.start < 0 || m.span.start > m.span.end || m.span.end >= n)
        throw FormatError(K::kInvalidDocument, 0, "mention " + m.id + " outside document");
    }
    for (const auto &b : bridging) {
      if (!ids.count(b.anaphor) || !ids.count(b.antecedent))
        throw FormatError(K::kUnknownMention, 0, "bridging link " + b.anaphor + ">" + b.antecedent);
      if (b.anaphor == b.antecedent)
        throw FormatError(K::kInvalidDocument, 0, "bridging anaphor equals antecedent: " + b.anaphor);
    }
    for (const auto &[mid, spans] : deixis) {
      if (!ids.count(mid)) throw FormatError(K::kUnknownMention, 0, "deixis anaphor " + mid);
      if (spans.empty()) throw FormatError(K::kInvalidDocument, 0, "deixis anaphor " + mid + " without antecedent");
      for (const auto &s : spans)
        if (s.start < 0 || s.start > s.end || s.end >= n)
          throw FormatError(K::kInvalidDocument, 0, "deixis antecedent outside document");
    }
  }
};

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t next = s.find(sep, pos);
    out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::vector<std::string> cell_items(const std::string &cell) {
  if (cell == "_") return {};
  return split(cell, '|');
}

inline bool valid_id(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == ':';
    if (!ok) return false;
  }
  return true;
}

inline std::string join_cell(const std::vector<std::string> &items) {
  if (items.empty()) return "_";
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += '|';
    out += items[i];
  }
  return out;
}

constexpr size_t kColumns = 12;
constexpr std::string_view kBegin = "#begin document ";
constexpr std::string_view kEnd = "#end document";

class DocumentParser {
 public:
  using K = FormatError::Kind;

  explicit DocumentParser(std::string doc_id) { doc_.id = std::move(doc_id); }

  void row(const std::string &line, size_t lineno) {
    auto cols = split(line, '\t');
    if (cols.size() != kColumns) {
      throw FormatError(K::kMalformedRow, lineno,
                        "expected " + std::to_string(kColumns) + " columns, got " + std::to_string(cols.size()));
    }
    size_t row = doc_.tokens.size();
    if (cols[0] != doc_.id) throw FormatError(K::kMalformedRow, lineno, "document id " + cols[0] + " in " + doc_.id);
    Token tok;
    tok.doc_id = cols[0];
    tok.index = parse_index(cols[1], lineno);
    if (tok.index != row)
      throw FormatError(K::kInvalidDocument, lineno, "token index " + cols[1] + ", expected " + std::to_string(row));
    if (cols[2].empty()) throw FormatError(K::kMalformedRow, lineno, "empty surface");
    tok.surface = cols[2];
    tok.speaker = cols[3];
    tok.utterance = parse_index(cols[4], lineno);
    if (row > 0 && tok.utterance < doc_.tokens.back().utterance)
      throw FormatError(K::kInvalidDocument, lineno, "utterance index decreases");
    tok.misc = cols[11];
    doc_.tokens.push_back(std::move(tok));

    int r = static_cast<int>(row);
    identity(cols[5], r, lineno);
    deixis(cols[6], r, lineno);
    bridging(cols[7], r, lineno);
    attributes(cols[8], r, lineno, [&](Mention &m, const std::string &v) {
      auto k = anaphor_kind_from_code(v);
      if (!k || m.kind) throw FormatError(K::kMalformedRow, lineno, "bad kind " + v);
      m.kind = k;
    });
    attributes(cols[9], r, lineno, [&](Mention &m, const std::string &v) {
      if ((v != "y" && v != "n") || m.referring) throw FormatError(K::kMalformedRow, lineno, "bad referring flag " + v);
      m.referring = v == "y";
    });
    attributes(cols[10], r, lineno, [&](Mention &m, const std::string &v) {
      if ((v != "old" && v != "new") || m.status) throw FormatError(K::kMalformedRow, lineno, "bad status " + v);
      m.status = v == "old" ? DiscourseStatus::kOld : DiscourseStatus::kNew;
    });
  }

  Document finish(size_t lineno) {
    if (!open_.empty())
      throw FormatError(K::kUnbalancedBrackets, lineno, "mention " + open_.begin()->first + " never closed");
    if (!open_deixis_.empty())
      throw FormatError(K::kUnbalancedBrackets, lineno, "deixis group " + open_deixis_.begin()->first + " never closed");
    for (const auto &b : doc_.bridging)
      if (!index_.count(b.antecedent))
        throw FormatError(K::kUnknownMention, lineno, "bridging antecedent " + b.antecedent);
    for (const auto &[mid, spans] : doc_.deixis)
      if (!index_.count(mid)) throw FormatError(K::kUnknownMention, lineno, "deixis anaphor " + mid);
    doc_.canonicalize();
    doc_.validate();
    return std::move(doc_);
  }

 private:
  static size_t parse_index(const std::string &s, size_t lineno) {
    if (s.empty() || s.size() > 12) throw FormatError(K::kMalformedRow, lineno, "bad ordinal '" + s + "'");
    for (char c : s)
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw FormatError(K::kMalformedRow, lineno, "bad ordinal '" + s + "'");
    return static_cast<size_t>(std::stoull(s));
  }

  void identity(const std::string &cell, int row, size_t lineno) {
    for (const auto &item : cell_items(cell)) {
      if (item.size() >= 2 && item.front() == '(') {
        bool single = item.back() == ')';
        std::string body = item.substr(1, item.size() - 1 - (single ? 1 : 0));
        Mention m;
        auto eq = body.find('=');
        m.id = body.substr(0, eq);
        if (eq != std::string::npos) {
          m.entity = body.substr(eq + 1);
          if (!valid_id(*m.entity)) throw FormatError(K::kMalformedRow, lineno, "bad entity id in " + item);
        }
        if (!valid_id(m.id)) throw FormatError(K::kMalformedRow, lineno, "bad mention id in " + item);
        if (index_.count(m.id)) throw FormatError(K::kDuplicateMentionId, lineno, m.id);
        m.span = Span{row, row};
        index_[m.id] = doc_.mentions.size();
        if (!single) open_[m.id] = doc_.mentions.size();
        doc_.mentions.push_back(std::move(m));
      } else if (item.size() >= 2 && item.back() == ')') {
        std::string mid = item.substr(0, item.size() - 1);
        auto it = open_.find(mid);
        if (it == open_.end()) throw FormatError(K::kUnbalancedBrackets, lineno, "close of unopened mention " + mid);
        doc_.mentions[it->second].span.end = row;
        open_.erase(it);
      } else {
        throw FormatError(K::kMalformedRow, lineno, "bad identity item '" + item + "'");
      }
    }
  }

  void deixis(const std::string &cell, int row, size_t lineno) {
    for (const auto &item : cell_items(cell)) {
      if (item.size() >= 2 && item.front() == '(') {
        bool single = item.back() == ')';
        std::string mid = item.substr(1, item.size() - 1 - (single ? 1 : 0));
        if (!valid_id(mid)) throw FormatError(K::kMalformedRow, lineno, "bad deixis item " + item);
        if (open_deixis_.count(mid)) throw FormatError(K::kUnbalancedBrackets, lineno, "nested deixis group " + mid);
        if (single) {
          doc_.deixis[mid].push_back(Span{row, row});
        } else {
          open_deixis_[mid] = row;
        }
      } else if (item.size() >= 2 && item.back() == ')') {
        std::string mid = item.substr(0, item.size() - 1);
        auto it = open_deixis_.find(mid);
        if (it == open_deixis_.end()) throw FormatError(K::kUnbalancedBrackets, lineno, "close of unopened deixis " + mid);
        doc_.deixis[mid].push_back(Span{it->second, row});
        open_deixis_.erase(it);
      } else {
        throw FormatError(K::kMalformedRow, lineno, "bad deixis item '" + item + "'");
      }
    }
  }

  void bridging(const std::string &cell, int row, size_t lineno) {
    for (const auto &item : cell_items(cell)) {
      auto gt = item.find('>');
      if (gt == std::string::npos) throw FormatError(K::kMalformedRow, lineno, "bad bridging item " + item);
      BridgingLink link{item.substr(0, gt), item.substr(gt + 1)};
      if (!valid_id(link.anaphor) || !valid_id(link.antecedent))
        throw FormatError(K::kMalformedRow, lineno, "bad bridging item " + item);
      Mention *m = starting_here(link.anaphor, row);
      if (!m) throw FormatError(K::kUnknownMention, lineno, "bridging anaphor " + link.anaphor + " does not start here");
      doc_.bridging.push_back(std::move(link));
    }
  }

  template <class F>
  void attributes(const std::string &cell, int row, size_t lineno, F apply) {
    for (const auto &item : cell_items(cell)) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw FormatError(K::kMalformedRow, lineno, "bad attribute item " + item);
      std::string mid = item.substr(0, eq);
      Mention *m = starting_here(mid, row);
      if (!m) throw FormatError(K::kUnknownMention, lineno, "attribute for " + mid + " which does not start here");
      apply(*m, item.substr(eq + 1));
    }
  }

  Mention *starting_here(const std::string &mid, int row) {
    auto it = index_.find(mid);
    if (it == index_.end()) return nullptr;
    Mention &m = doc_.mentions[it->second];
    return m.span.start == row ? &m : nullptr;
  }

  Document doc_;
  std::map<std::string, size_t> index_;
  std::map<std::string, size_t> open_;
  std::map<std::string, int> open_deixis_;
};

}  // namespace detail

// Parses every document in the stream.
inline std::vector<Document> parse_corpus(std::istream &in) {
  using K = FormatError::Kind;
  std::vector<Document> docs;
  std::optional<detail::DocumentParser> current;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') throw FormatError(K::kMalformedRow, lineno, "CR line ending");
    if (line.rfind(detail::kBegin, 0) == 0) {
      if (current) throw FormatError(K::kMalformedRow, lineno, "nested #begin document");
      std::string id = line.substr(detail::kBegin.size());
      if (!detail::valid_id(id)) throw FormatError(K::kMalformedRow, lineno, "bad document id '" + id + "'");
      current.emplace(id);
    } else if (line == detail::kEnd) {
      if (!current) throw FormatError(K::kMalformedRow, lineno, "#end document without #begin");
      docs.push_back(current->finish(lineno));
      current.reset();
    } else if (line.empty() && !current) {
      continue;
    } else {
      if (!current) throw FormatError(K::kMalformedRow, lineno, "row outside document");
      current->row(line, lineno);
    }
  }
  if (current) throw FormatError(K::kMalformedRow, lineno, "missing #end document");
  return docs;
}

inline std::vector<Document> parse_corpus(const std::string &text) {
  std::istringstream in(text);
  return parse_corpus(in);
}

inline std::vector<Document> read_corpus(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_corpus(in);
}

// Parses a stream holding exactly one document.
inline Document parse_document(std::istream &in) {
  auto docs = parse_corpus(in);
  if (docs.size() != 1)
    throw FormatError(FormatError::Kind::kMalformedRow, 0,
                      "expected one document, found " + std::to_string(docs.size()));
  return std::move(docs.front());
}

inline Document parse_document(const std::string &text) {
  std::istringstream in(text);
  return parse_document(in);
}

inline void write_document(std::ostream &os, const Document &in) {
  Document doc = in;
  doc.canonicalize();
  doc.validate();

  size_t n = doc.tokens.size();
  std::vector<std::vector<std::string>> ident(n), deix(n), bridge(n), kind(n), ref(n), status(n);
  for (const auto &m : doc.mentions) {
    auto s = static_cast<size_t>(m.span.start);
    std::string open = "(" + m.id + (m.entity ? "=" + *m.entity : "");
    ident[s].push_back(m.span.start == m.span.end ? open + ")" : open);
    if (m.kind) kind[s].push_back(m.id + "=" + to_code(*m.kind));
    if (m.referring) ref[s].push_back(m.id + "=" + (*m.referring ? "y" : "n"));
    if (m.status) status[s].push_back(m.id + "=" + (*m.status == DiscourseStatus::kOld ? "old" : "new"));
  }
  // Closes go innermost first: by start descending, then id.
  std::vector<const Mention *> by_close;
  for (const auto &m : doc.mentions)
    if (m.span.start != m.span.end) by_close.push_back(&m);
  std::stable_sort(by_close.begin(), by_close.end(), [](const Mention *a, const Mention *b) {
    if (a->span.start != b->span.start) return a->span.start > b->span.start;
    return a->id < b->id;
  });
  for (const Mention *m : by_close) ident[static_cast<size_t>(m->span.end)].push_back(m->id + ")");

  for (const auto &[mid, spans] : doc.deixis) {
    for (const auto &sp : spans) {
      if (sp.start == sp.end) {
        deix[static_cast<size_t>(sp.start)].push_back("(" + mid + ")");
      } else {
        deix[static_cast<size_t>(sp.start)].push_back("(" + mid);
        deix[static_cast<size_t>(sp.end)].push_back(mid + ")");
      }
    }
  }
  for (const auto &b : doc.bridging) {
    const Mention *m = doc.find_mention(b.anaphor);
    bridge[static_cast<size_t>(m->span.start)].push_back(b.anaphor + ">" + b.antecedent);
  }

  os << detail::kBegin << doc.id << '\n';
  for (size_t i = 0; i < n; ++i) {
    const Token &t = doc.tokens[i];
    os << doc.id << '\t' << i << '\t' << t.surface << '\t' << t.speaker << '\t' << t.utterance << '\t'
       << detail::join_cell(ident[i]) << '\t' << detail::join_cell(deix[i]) << '\t'
       << detail::join_cell(bridge[i]) << '\t' << detail::join_cell(kind[i]) << '\t'
       << detail::join_cell(ref[i]) << '\t' << detail::join_cell(status[i]) << '\t'
       << (t.misc.empty() ? "_" : t.misc) << '\n';
  }
  os << detail::kEnd << '\n';
}

inline std::string write_document(const Document &doc) {
  std::ostringstream os;
  write_document(os, doc);
  return os.str();
}

inline void write_corpus(std::ostream &os, const std::vector<Document> &docs) {
  for (const auto &d : docs) write_document(os, d);
}

inline void write_corpus_file(const std::string &path, const std::vector<Document> &docs) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_corpus(os, docs);
}

// Entity partition expressed over mention spans.
inline Clustering<Span> span_clustering(const Document &doc, const EntitySet &e) {
  return map_keys<Span>(e, [&](const std::string &mid) {
    const Mention *m = doc.find_mention(mid);
    if (!m) throw InvalidClustering("unknown mention " + mid + " in " + doc.id);
    return m->span;
  });
}

}  // namespace anaforge
