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

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace anaforge {

class InvalidClustering : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A partition of (a subset of) mentions into disjoint non-empty clusters.
// Stored canonically: each cluster sorted, clusters sorted by first member,
// so two clusterings are equal iff they describe the same partition.
template <class Key>
class Clustering {
 public:
  using Cluster = std::vector<Key>;

  Clustering() = default;

  explicit Clustering(std::vector<Cluster> clusters) : clusters_(std::move(clusters)) {
    std::set<Key> seen;
    for (auto &c : clusters_) {
      if (c.empty()) throw InvalidClustering("empty cluster");
      std::sort(c.begin(), c.end());
      for (const auto &k : c) {
        if (!seen.insert(k).second) throw InvalidClustering("mention in two clusters");
      }
    }
    std::sort(clusters_.begin(), clusters_.end());
  }

  const std::vector<Cluster> &clusters() const { return clusters_; }
  size_t size() const { return clusters_.size(); }
  bool empty() const { return clusters_.empty(); }

  std::vector<Key> mentions() const {
    std::vector<Key> out;
    for (const auto &c : clusters_) out.insert(out.end(), c.begin(), c.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::optional<size_t> cluster_of(const Key &k) const {
    for (size_t i = 0; i < clusters_.size(); ++i) {
      if (std::binary_search(clusters_[i].begin(), clusters_[i].end(), k)) return i;
    }
    return std::nullopt;
  }

  bool contains(const Key &k) const { return cluster_of(k).has_value(); }

  bool operator==(const Clustering &) const = default;

 private:
  std::vector<Cluster> clusters_;
};

template <class Key>
Clustering<Key> strip_singletons(const Clustering<Key> &e) {
  std::vector<typename Clustering<Key>::Cluster> kept;
  for (const auto &c : e.clusters())
    if (c.size() >= 2) kept.push_back(c);
  return Clustering<Key>(std::move(kept));
}

// Relabels every key through `f`; clusters whose keys collide are rejected.
template <class To, class From, class F>
Clustering<To> map_keys(const Clustering<From> &e, F f) {
  std::vector<std::vector<To>> out;
  for (const auto &c : e.clusters()) {
    std::vector<To> mapped;
    for (const auto &k : c) mapped.push_back(f(k));
    out.push_back(std::move(mapped));
  }
  return Clustering<To>(std::move(out));
}

// Groups keys by a label; keys with no label are omitted.
template <class Key, class Label>
Clustering<Key> group_by_label(const std::vector<std::pair<Key, Label>> &labelled) {
  std::map<Label, std::vector<Key>> groups;
  for (const auto &[k, l] : labelled) groups[l].push_back(k);
  std::vector<std::vector<Key>> out;
  for (auto &[l, ks] : groups) out.push_back(std::move(ks));
  return Clustering<Key>(std::move(out));
}

}  // namespace anaforge
