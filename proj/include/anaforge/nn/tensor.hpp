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
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace anaforge::nn {

using Vec = std::vector<double>;

// Deterministic RNG wrapper. Distributions are implemented here rather than
// taken from <random> so that draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  // splitmix64
  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  size_t below(size_t n) { return n == 0 ? 0 : static_cast<size_t>(next() % n); }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T> &items) {
    for (size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  uint64_t state_;
};

// A trainable parameter tensor. Matrices are row-major; vectors have cols == 1.
struct Tensor {
  std::string name;
  size_t rows = 0;
  size_t cols = 0;
  Vec value;
  Vec grad;

  Tensor(std::string n, size_t r, size_t c)
      : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

  size_t size() const { return value.size(); }
  double &at(size_t r, size_t c) { return value[r * cols + c]; }
  double at(size_t r, size_t c) const { return value[r * cols + c]; }
};

// Owns all trainable tensors of a model. Addresses are stable.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet &) = delete;
  ParameterSet &operator=(const ParameterSet &) = delete;
  ParameterSet(ParameterSet &&) = default;
  ParameterSet &operator=(ParameterSet &&) = default;

  Tensor &add(const std::string &name, size_t rows, size_t cols = 1) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
    tensors_.emplace_back(name, rows, cols);
    index_[name] = tensors_.size() - 1;
    return tensors_.back();
  }

  Tensor &get(const std::string &name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter " + name);
    return tensors_[it->second];
  }
  const Tensor &get(const std::string &name) const {
    return const_cast<ParameterSet *>(this)->get(name);
  }
  bool contains(const std::string &name) const { return index_.count(name) > 0; }

  std::deque<Tensor> &tensors() { return tensors_; }
  const std::deque<Tensor> &tensors() const { return tensors_; }

  size_t total_size() const {
    size_t n = 0;
    for (const auto &t : tensors_) n += t.size();
    return n;
  }

  void zero_grad() {
    for (auto &t : tensors_) std::fill(t.grad.begin(), t.grad.end(), 0.0);
  }

  // Glorot-uniform for matrices, zeros for biases (cols == 1 and name ends
  // in ".b"), small uniform for everything else.
  void initialize(Rng &rng) {
    for (auto &t : tensors_) {
      bool bias = t.cols == 1 && t.name.size() > 2 &&
                  t.name.compare(t.name.size() - 2, 2, ".b") == 0;
      if (bias) {
        std::fill(t.value.begin(), t.value.end(), 0.0);
      } else if (t.cols > 1) {
        double limit = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
        for (auto &v : t.value) v = rng.uniform(-limit, limit);
      } else {
        for (auto &v : t.value) v = rng.uniform(-0.1, 0.1);
      }
    }
  }

  bool all_finite() const {
    for (const auto &t : tensors_)
      for (double v : t.value)
        if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::deque<Tensor> tensors_;
  std::map<std::string, size_t> index_;
};

}  // namespace anaforge::nn
