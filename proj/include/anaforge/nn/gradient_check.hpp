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

// Central finite-difference check of Graph::backward.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "anaforge/nn/graph.hpp"

namespace anaforge::nn {

struct TensorCheck {
  std::string name;
  size_t checked = 0;
  double max_rel_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradientCheckOptions {
  double step = 1e-4;
  // Denominator floor of the relative error, so that gradients that are
  // numerically zero compare on an absolute scale.
  double floor = 1e-6;
  // Entries per tensor; larger tensors are sampled deterministically.
  size_t max_entries = 256;
  uint64_t seed = 7;
};

// `loss` must build a fresh graph and return the scalar loss node.
// Returns one record per tensor.
inline std::vector<TensorCheck> gradient_check(
    ParameterSet &params, const std::function<Expr(Graph &)> &loss,
    const GradientCheckOptions &opt = {}) {
  params.zero_grad();
  {
    Graph g;
    Expr l = loss(g);
    g.backward(l);
  }
  auto eval = [&]() {
    Graph g;
    return g.scalar(loss(g));
  };

  Rng rng(opt.seed);
  std::vector<TensorCheck> out;
  for (auto &t : params.tensors()) {
    TensorCheck rec;
    rec.name = t.name;
    std::vector<size_t> entries(t.size());
    for (size_t i = 0; i < entries.size(); ++i) entries[i] = i;
    if (entries.size() > opt.max_entries) {
      rng.shuffle(entries);
      entries.resize(opt.max_entries);
    }
    Vec analytic = t.grad;
    for (size_t i : entries) {
      double saved = t.value[i];
      t.value[i] = saved + opt.step;
      double up = eval();
      t.value[i] = saved - opt.step;
      double down = eval();
      t.value[i] = saved;
      double numeric = (up - down) / (2.0 * opt.step);
      double a = analytic[i];
      double rel = std::abs(a - numeric) /
                   std::max({std::abs(a), std::abs(numeric), opt.floor});
      if (rel > rec.max_rel_error || rec.checked == 0) {
        rec.max_rel_error = std::max(rec.max_rel_error, rel);
        rec.worst_analytic = a;
        rec.worst_numeric = numeric;
      }
      ++rec.checked;
    }
    out.push_back(rec);
  }
  params.zero_grad();
  return out;
}

}  // namespace anaforge::nn
