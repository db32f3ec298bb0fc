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

// Slow, direct reimplementations used as test oracles. Written from the
// textbook definitions without sharing code with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "anaforge/clustering.hpp"
#include "anaforge/nn/tensor.hpp"

namespace oracle {

using Partition = std::vector<std::vector<int>>;

struct Score {
  double p, r, f;
};

inline double fm(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

inline Score finish(double pn, double pd, double rn, double rd) {
  bool vac = pd == 0 && rd == 0;
  double p = pd > 0 ? pn / pd : (vac ? 1.0 : 0.0);
  double r = rd > 0 ? rn / rd : (vac ? 1.0 : 0.0);
  return {p, r, fm(p, r)};
}

inline int owner(const Partition &x, int m) {
  for (size_t i = 0; i < x.size(); ++i)
    if (std::find(x[i].begin(), x[i].end(), m) != x[i].end()) return static_cast<int>(i);
  return -1;
}

// Connected components of `cluster` when two mentions are joined iff the
// other partition puts them together (unknown mentions stay alone).
inline int components(const std::vector<int> &cluster, const Partition &other) {
  std::vector<bool> seen(cluster.size(), false);
  int comps = 0;
  for (size_t s = 0; s < cluster.size(); ++s) {
    if (seen[s]) continue;
    ++comps;
    std::vector<size_t> stack = {s};
    seen[s] = true;
    while (!stack.empty()) {
      size_t a = stack.back();
      stack.pop_back();
      int oa = owner(other, cluster[a]);
      for (size_t b = 0; b < cluster.size(); ++b) {
        if (seen[b] || oa < 0) continue;
        if (owner(other, cluster[b]) == oa) {
          seen[b] = true;
          stack.push_back(b);
        }
      }
    }
  }
  return comps;
}

inline Score muc(const Partition &key, const Partition &resp) {
  double rn = 0, rd = 0, pn = 0, pd = 0;
  for (const auto &k : key) {
    rn += static_cast<double>(k.size()) - components(k, resp);
    rd += static_cast<double>(k.size()) - 1;
  }
  for (const auto &r : resp) {
    pn += static_cast<double>(r.size()) - components(r, key);
    pd += static_cast<double>(r.size()) - 1;
  }
  return finish(pn, pd, rn, rd);
}

// Per-mention averaging form.
inline Score b_cubed(const Partition &key, const Partition &resp) {
  auto side = [](const Partition &a, const Partition &b) {
    double num = 0, den = 0;
    for (const auto &c : a)
      for (int m : c) {
        int o = owner(b, m);
        double common = 0;
        if (o >= 0)
          for (int x : b[static_cast<size_t>(o)])
            if (std::find(c.begin(), c.end(), x) != c.end()) common += 1;
        num += common / static_cast<double>(c.size());
        den += 1;
      }
    return std::pair{num, den};
  };
  auto [rn, rd] = side(key, resp);
  auto [pn, pd] = side(resp, key);
  return finish(pn, pd, rn, rd);
}

inline double phi4(const std::vector<int> &a, const std::vector<int> &b) {
  double common = 0;
  for (int x : a)
    if (std::find(b.begin(), b.end(), x) != b.end()) common += 1;
  return 2 * common / static_cast<double>(a.size() + b.size());
}

// Exhaustive search over all partial one-to-one alignments.
inline double best_alignment(const Partition &key, const Partition &resp) {
  std::vector<int> idx(std::max(key.size(), resp.size()));
  std::iota(idx.begin(), idx.end(), 0);
  double best = 0;
  do {
    double s = 0;
    for (size_t i = 0; i < key.size(); ++i)
      if (static_cast<size_t>(idx[i]) < resp.size()) s += phi4(key[i], resp[static_cast<size_t>(idx[i])]);
    best = std::max(best, s);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

inline Score ceaf_e(const Partition &key, const Partition &resp) {
  double b = best_alignment(key, resp);
  return finish(b, static_cast<double>(resp.size()), b, static_cast<double>(key.size()));
}

inline double conll(const Partition &key, const Partition &resp) {
  return 100.0 * (muc(key, resp).f + b_cubed(key, resp).f + ceaf_e(key, resp).f) / 3.0;
}

// Random partition of a random subset of {0..n-1}.
inline Partition random_partition(anaforge::nn::Rng &rng, int n, double keep = 1.0) {
  Partition out;
  for (int m = 0; m < n; ++m) {
    if (rng.uniform() >= keep) continue;
    size_t slot = rng.below(out.size() + 1);
    if (slot == out.size())
      out.push_back({m});
    else
      out[slot].push_back(m);
  }
  return out;
}

inline anaforge::Clustering<int> to_clustering(const Partition &p) { return anaforge::Clustering<int>(p); }

// Every set partition of `items` (Bell-number many).
inline void all_partitions(const std::vector<int> &items, size_t i, Partition &cur, std::vector<Partition> &out) {
  if (i == items.size()) {
    out.push_back(cur);
    return;
  }
  for (size_t c = 0; c < cur.size(); ++c) {
    cur[c].push_back(items[i]);
    all_partitions(items, i + 1, cur, out);
    cur[c].pop_back();
  }
  cur.push_back({items[i]});
  all_partitions(items, i + 1, cur, out);
  cur.pop_back();
}

inline std::vector<Partition> all_partitions(const std::vector<int> &items) {
  std::vector<Partition> out;
  Partition cur;
  all_partitions(items, 0, cur, out);
  return out;
}

// ---- dense layers ----------------------------------------------------------

using Vec = anaforge::nn::Vec;

inline Vec row(const anaforge::nn::Tensor &t, size_t r) {
  return Vec(t.value.begin() + r * t.cols, t.value.begin() + (r + 1) * t.cols);
}

inline Vec mv(const anaforge::nn::Tensor &w, const Vec &x) {
  Vec y(w.rows, 0.0);
  for (size_t i = 0; i < w.rows; ++i)
    for (size_t j = 0; j < w.cols; ++j) y[i] += w.at(i, j) * x[j];
  return y;
}

inline Vec plus(Vec a, const Vec &b) {
  for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vec relu(Vec a) {
  for (double &v : a) v = std::max(v, 0.0);
  return a;
}

inline Vec cat(std::initializer_list<Vec> parts) {
  Vec out;
  for (const auto &p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline double dotp(const Vec &a, const Vec &b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec sigmoid(Vec a) {
  for (double &v : a) v = 1.0 / (1.0 + std::exp(-v));
  return a;
}

inline Vec softmax(Vec a) {
  double mx = *std::max_element(a.begin(), a.end()), z = 0;
  for (double &v : a) z += (v = std::exp(v - mx));
  for (double &v : a) v /= z;
  return a;
}

}  // namespace oracle
