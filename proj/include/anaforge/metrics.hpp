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

// Coreference and bridging evaluation.
//
// Every metric is computed from (numerator, denominator) pairs so that
// documents can be micro-averaged by summing counts. A ratio whose
// denominator is zero is 1 when both of the metric's denominators are zero
// (nothing to find and nothing found) and 0 otherwise.

#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anaforge/clustering.hpp"

namespace anaforge::metrics {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double f_measure(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

struct Counts {
  double p_num = 0.0;
  double p_den = 0.0;
  double r_num = 0.0;
  double r_den = 0.0;

  Counts &operator+=(const Counts &o) {
    p_num += o.p_num;
    p_den += o.p_den;
    r_num += o.r_num;
    r_den += o.r_den;
    return *this;
  }

  Prf prf() const {
    bool vacuous = p_den == 0.0 && r_den == 0.0;
    double p = p_den > 0.0 ? p_num / p_den : (vacuous ? 1.0 : 0.0);
    double r = r_den > 0.0 ? r_num / r_den : (vacuous ? 1.0 : 0.0);
    return {p, r, f_measure(p, r)};
  }
};

namespace detail {

template <class K>
std::map<K, size_t> cluster_index(const Clustering<K> &c) {
  std::map<K, size_t> idx;
  for (size_t i = 0; i < c.clusters().size(); ++i)
    for (const auto &k : c.clusters()[i]) idx[k] = i;
  return idx;
}

// Σ_K (|K| - |partition of K by other|), Σ_K (|K| - 1)
template <class K>
std::pair<double, double> muc_side(const Clustering<K> &key, const Clustering<K> &other) {
  auto idx = cluster_index(other);
  double num = 0.0, den = 0.0;
  for (const auto &cluster : key.clusters()) {
    std::set<size_t> parts;
    size_t unmatched = 0;
    for (const auto &k : cluster) {
      auto it = idx.find(k);
      if (it == idx.end()) {
        ++unmatched;
      } else {
        parts.insert(it->second);
      }
    }
    double n = static_cast<double>(cluster.size());
    num += n - static_cast<double>(parts.size() + unmatched);
    den += n - 1.0;
  }
  return {num, den};
}

// Σ_K Σ_R |K∩R|² / |K|, Σ_K |K|
template <class K>
std::pair<double, double> b_cubed_side(const Clustering<K> &key, const Clustering<K> &other) {
  auto idx = cluster_index(other);
  double num = 0.0, den = 0.0;
  for (const auto &cluster : key.clusters()) {
    std::map<size_t, double> overlap;
    for (const auto &k : cluster) {
      auto it = idx.find(k);
      if (it != idx.end()) overlap[it->second] += 1.0;
    }
    double n = static_cast<double>(cluster.size());
    for (const auto &[r, c] : overlap) num += c * c / n;
    den += n;
  }
  return {num, den};
}

// Maximum-weight assignment on an n x m matrix (Kuhn-Munkres on the
// negated, square-padded matrix). Returns the optimal total weight.
inline double max_weight_assignment(const std::vector<std::vector<double>> &w) {
  size_t n = w.size();
  size_t m = n ? w[0].size() : 0;
  size_t dim = std::max(n, m);
  if (dim == 0) return 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](size_t i, size_t j) { return (i < n && j < m) ? -w[i][j] : 0.0; };
  // 1-based potentials, e-maxx formulation.
  std::vector<double> u(dim + 1, 0.0), v(dim + 1, 0.0);
  std::vector<size_t> p(dim + 1, 0), way(dim + 1, 0);
  for (size_t i = 1; i <= dim; ++i) {
    p[0] = i;
    size_t j0 = 0;
    std::vector<double> minv(dim + 1, inf);
    std::vector<bool> used(dim + 1, false);
    do {
      used[j0] = true;
      size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (size_t j = 1; j <= dim; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= dim; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (size_t j = 1; j <= dim; ++j)
    if (p[j] >= 1 && p[j] <= n && j <= m) total += w[p[j] - 1][j - 1];
  return total;
}

}  // namespace detail

template <class K>
Counts muc_counts(const Clustering<K> &key, const Clustering<K> &response) {
  auto [rn, rd] = detail::muc_side(key, response);
  auto [pn, pd] = detail::muc_side(response, key);
  return {pn, pd, rn, rd};
}

template <class K>
Counts b_cubed_counts(const Clustering<K> &key, const Clustering<K> &response) {
  auto [rn, rd] = detail::b_cubed_side(key, response);
  auto [pn, pd] = detail::b_cubed_side(response, key);
  return {pn, pd, rn, rd};
}

// Entity-based CEAF with φ4(K, R) = 2|K∩R| / (|K| + |R|).
template <class K>
Counts ceaf_e_counts(const Clustering<K> &key, const Clustering<K> &response) {
  const auto &kc = key.clusters();
  const auto &rc = response.clusters();
  std::vector<std::vector<double>> sim(kc.size(), std::vector<double>(rc.size(), 0.0));
  for (size_t i = 0; i < kc.size(); ++i) {
    for (size_t j = 0; j < rc.size(); ++j) {
      std::vector<K> common;
      std::set_intersection(kc[i].begin(), kc[i].end(), rc[j].begin(), rc[j].end(), std::back_inserter(common));
      sim[i][j] = 2.0 * static_cast<double>(common.size()) / static_cast<double>(kc[i].size() + rc[j].size());
    }
  }
  double best = detail::max_weight_assignment(sim);
  return {best, static_cast<double>(rc.size()), best, static_cast<double>(kc.size())};
}

template <class K>
Prf muc(const Clustering<K> &key, const Clustering<K> &response) {
  return muc_counts(key, response).prf();
}
template <class K>
Prf b_cubed(const Clustering<K> &key, const Clustering<K> &response) {
  return b_cubed_counts(key, response).prf();
}
template <class K>
Prf ceaf_e(const Clustering<K> &key, const Clustering<K> &response) {
  return ceaf_e_counts(key, response).prf();
}

struct CorefCounts {
  Counts muc, b_cubed, ceaf_e;

  CorefCounts &operator+=(const CorefCounts &o) {
    muc += o.muc;
    b_cubed += o.b_cubed;
    ceaf_e += o.ceaf_e;
    return *this;
  }

  // Mean of the three F1 scores, in percent.
  double conll_f1() const {
    return 100.0 * (muc.prf().f1 + b_cubed.prf().f1 + ceaf_e.prf().f1) / 3.0;
  }
};

template <class K>
CorefCounts coref_counts(const Clustering<K> &key, const Clustering<K> &response, bool include_singletons) {
  if (!include_singletons) {
    return coref_counts(strip_singletons(key), strip_singletons(response), true);
  }
  return {muc_counts(key, response), b_cubed_counts(key, response), ceaf_e_counts(key, response)};
}

// CoNLL F1 in percent.
template <class K>
double conll_f1(const Clustering<K> &key, const Clustering<K> &response, bool include_singletons = true) {
  return coref_counts(key, response, include_singletons).conll_f1();
}

// Exact-match mention detection.
template <class K>
Counts mention_counts(const std::set<K> &gold, const std::set<K> &predicted) {
  std::vector<K> common;
  std::set_intersection(gold.begin(), gold.end(), predicted.begin(), predicted.end(), std::back_inserter(common));
  double c = static_cast<double>(common.size());
  return {c, static_cast<double>(predicted.size()), c, static_cast<double>(gold.size())};
}

template <class K>
Prf mention_prf(const std::set<K> &gold, const std::set<K> &predicted) {
  return mention_counts(gold, predicted).prf();
}

class AnaphorSetMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// anaphor -> antecedent
template <class K>
using LinkMap = std::map<K, K>;

// A predicted link is correct when its antecedent is the gold antecedent or
// lies in the same gold entity. Anaphor sets must agree.
template <class K>
Counts entity_link_counts(const LinkMap<K> &gold, const LinkMap<K> &predicted, const Clustering<K> &entities) {
  if (gold.size() != predicted.size())
    throw AnaphorSetMismatch("gold has " + std::to_string(gold.size()) + " anaphors, prediction " +
                             std::to_string(predicted.size()));
  for (const auto &[a, ant] : gold)
    if (!predicted.count(a)) throw AnaphorSetMismatch("anaphor missing from prediction");
  auto idx = detail::cluster_index(entities);
  double correct = 0.0;
  for (const auto &[a, pred] : predicted) {
    const K &g = gold.at(a);
    bool ok = pred == g;
    if (!ok) {
      auto gi = idx.find(g), pi = idx.find(pred);
      ok = gi != idx.end() && pi != idx.end() && gi->second == pi->second;
    }
    if (ok) correct += 1.0;
  }
  double n = static_cast<double>(gold.size());
  return {correct, n, correct, n};
}

// Entity-F1 in percent.
template <class K>
double entity_f1(const LinkMap<K> &gold, const LinkMap<K> &predicted, const Clustering<K> &entities) {
  return 100.0 * entity_link_counts(gold, predicted, entities).prf().f1;
}

// ---- reports ---------------------------------------------------------------

struct CorefBlock {
  Prf muc, b_cubed, ceaf_e;
  double conll_f1 = 0.0;

  static CorefBlock from(const CorefCounts &c) {
    return {c.muc.prf(), c.b_cubed.prf(), c.ceaf_e.prf(), c.conll_f1()};
  }
};

struct ScoreReport {
  size_t documents = 0;
  CorefBlock with_singletons;
  CorefBlock without_singletons;
  Prf mentions;
  std::optional<double> entity_f1;
  std::optional<CorefBlock> deixis;

  nlohmann::json to_json() const {
    auto prf = [](const Prf &p) {
      return nlohmann::json{{"precision", round2(100.0 * p.precision)},
                            {"recall", round2(100.0 * p.recall)},
                            {"f1", round2(100.0 * p.f1)}};
    };
    auto block = [&](const CorefBlock &b) {
      return nlohmann::json{{"muc", prf(b.muc)},
                            {"b_cubed", prf(b.b_cubed)},
                            {"ceaf_e", prf(b.ceaf_e)},
                            {"conll_f1", round2(b.conll_f1)}};
    };
    nlohmann::json j{{"documents", documents},
                     {"with_singletons", block(with_singletons)},
                     {"without_singletons", block(without_singletons)},
                     {"mentions", prf(mentions)}};
    if (entity_f1) j["entity_f1"] = round2(*entity_f1);
    if (deixis) j["deixis"] = block(*deixis);
    return j;
  }

  std::string to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    auto row = [&](const std::string &name, const Prf &p) {
      os << std::left << std::setw(22) << name << std::right << std::setw(8) << 100.0 * p.precision
         << std::setw(8) << 100.0 * p.recall << std::setw(8) << 100.0 * p.f1 << '\n';
    };
    os << std::left << std::setw(22) << "metric" << std::right << std::setw(8) << "P" << std::setw(8) << "R"
       << std::setw(8) << "F1" << '\n';
    row("MUC", with_singletons.muc);
    row("B3", with_singletons.b_cubed);
    row("CEAFe", with_singletons.ceaf_e);
    row("MUC (no singletons)", without_singletons.muc);
    row("B3 (no singletons)", without_singletons.b_cubed);
    row("CEAFe (no singletons)", without_singletons.ceaf_e);
    row("mentions", mentions);
    os << std::left << std::setw(22) << "CoNLL F1" << std::right << std::setw(24) << with_singletons.conll_f1 << '\n';
    os << std::left << std::setw(22) << "CoNLL F1 (no single.)" << std::right << std::setw(24)
       << without_singletons.conll_f1 << '\n';
    if (entity_f1) os << std::left << std::setw(22) << "Entity F1" << std::right << std::setw(24) << *entity_f1 << '\n';
    if (deixis)
      os << std::left << std::setw(22) << "Deixis CoNLL F1" << std::right << std::setw(24) << deixis->conll_f1 << '\n';
    return os.str();
  }

  static double round2(double x) { return std::round(x * 100.0) / 100.0; }
};

// Micro-averaged report over (key, response) document pairs.
template <class K>
ScoreReport score_documents(const std::vector<std::pair<Clustering<K>, Clustering<K>>> &docs,
                            const std::vector<std::pair<std::set<K>, std::set<K>>> &mention_sets) {
  CorefCounts with, without;
  Counts ment;
  for (const auto &[key, resp] : docs) {
    with += coref_counts(key, resp, true);
    without += coref_counts(key, resp, false);
  }
  for (const auto &[gold, pred] : mention_sets) ment += mention_counts(gold, pred);
  ScoreReport r;
  r.documents = docs.size();
  r.with_singletons = CorefBlock::from(with);
  r.without_singletons = CorefBlock::from(without);
  r.mentions = ment.prf();
  return r;
}

}  // namespace anaforge::metrics
