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

#include <cmath>
#include <vector>

#include "anaforge/nn/tensor.hpp"

namespace anaforge::nn {

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double learning_rate() const { return lr_; }

  // Applies one update from the accumulated gradients, then clears them.
  void step(ParameterSet &params) {
    auto &tensors = params.tensors();
    if (moments_.size() != tensors.size()) {
      moments_.resize(tensors.size());
      for (size_t k = 0; k < tensors.size(); ++k) {
        moments_[k].m.assign(tensors[k].size(), 0.0);
        moments_[k].v.assign(tensors[k].size(), 0.0);
      }
    }
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t k = 0; k < tensors.size(); ++k) {
      Tensor &p = tensors[k];
      Moments &mo = moments_[k];
      for (size_t i = 0; i < p.size(); ++i) {
        double g = p.grad[i];
        mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
        mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
        if (lr_ == 0.0) continue;
        double mhat = mo.m[i] / c1;
        double vhat = mo.v[i] / c2;
        p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
    params.zero_grad();
  }

 private:
  struct Moments {
    Vec m;
    Vec v;
  };
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Moments> moments_;
};

}  // namespace anaforge::nn
