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

// Reverse-mode automatic differentiation over dense vectors.
//
// A Graph records every operation of one forward pass. Nodes are vectors;
// scalars are vectors of length one. Parameters enter the graph through
// matvec/lookup/parameter and receive their gradients in Tensor::grad when
// backward() is called on a scalar node.

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "anaforge/nn/tensor.hpp"

namespace anaforge::nn {

struct Expr {
  size_t id = static_cast<size_t>(-1);
  bool valid() const { return id != static_cast<size_t>(-1); }
};

class Graph {
 public:
  // Dropout is active only when training is set and rng is non-null.
  explicit Graph(bool training = false, Rng *rng = nullptr)
      : training_(training), rng_(rng) {}

  bool training() const { return training_; }

  const Vec &value(Expr e) const { return nodes_[e.id].value; }
  double scalar(Expr e) const {
    assert(nodes_[e.id].value.size() == 1);
    return nodes_[e.id].value[0];
  }
  size_t dim(Expr e) const { return nodes_[e.id].value.size(); }
  size_t size() const { return nodes_.size(); }
  // Smallest |input| seen by any rectifier; infinity when there is none.
  // Finite differences are only meaningful when this exceeds the step.
  double kink_margin() const { return kink_margin_; }

  // ---- leaves ----------------------------------------------------------

  Expr constant(Vec v) { return push(std::move(v), {}); }
  Expr constant(double x) { return push(Vec{x}, {}); }
  Expr zeros(size_t n) { return push(Vec(n, 0.0), {}); }

  // Whole tensor as a vector.
  Expr parameter(Tensor &t) {
    Expr out = push(t.value, {});
    nodes_[out.id].backward = [&t, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      for (size_t i = 0; i < go.size(); ++i) t.grad[i] += go[i];
    };
    return out;
  }

  // Row r of an embedding table.
  Expr lookup(Tensor &table, size_t r) {
    if (r >= table.rows) throw std::out_of_range("lookup row out of range in " + table.name);
    Vec v(table.value.begin() + r * table.cols, table.value.begin() + (r + 1) * table.cols);
    Expr out = push(std::move(v), {});
    nodes_[out.id].backward = [&table, r, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      double *dst = table.grad.data() + r * table.cols;
      for (size_t i = 0; i < go.size(); ++i) dst[i] += go[i];
    };
    return out;
  }

  // ---- linear algebra --------------------------------------------------

  // W x, with W rows x cols.
  Expr matvec(Tensor &w, Expr x) {
    const Vec &xv = value(x);
    if (xv.size() != w.cols) {
      throw std::invalid_argument("matvec width mismatch for " + w.name + ": " +
                                  std::to_string(xv.size()) + " vs " + std::to_string(w.cols));
    }
    Vec y(w.rows, 0.0);
    const double *wp = w.value.data();
    for (size_t i = 0; i < w.rows; ++i) {
      const double *row = wp + i * w.cols;
      double acc = 0.0;
      for (size_t j = 0; j < w.cols; ++j) acc += row[j] * xv[j];
      y[i] = acc;
    }
    Expr out = push(std::move(y), {x});
    nodes_[out.id].backward = [&w, x, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &xv = g.nodes_[x.id].value;
      Vec &gx = g.nodes_[x.id].grad;
      const double *wp = w.value.data();
      double *gw = w.grad.data();
      for (size_t i = 0; i < w.rows; ++i) {
        double gi = go[i];
        if (gi == 0.0) continue;
        const double *row = wp + i * w.cols;
        double *grow = gw + i * w.cols;
        for (size_t j = 0; j < w.cols; ++j) {
          gx[j] += row[j] * gi;
          grow[j] += gi * xv[j];
        }
      }
    };
    return out;
  }

  // W x + b.
  Expr affine(Tensor &w, Tensor &b, Expr x) { return add(matvec(w, x), parameter(b)); }

  Expr add(Expr a, Expr b) {
    const Vec &av = value(a);
    const Vec &bv = value(b);
    check_same(av, bv, "add");
    Vec y(av.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
    Expr out = push(std::move(y), {a, b});
    nodes_[out.id].backward = [a, b, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      Vec &ga = g.nodes_[a.id].grad;
      Vec &gb = g.nodes_[b.id].grad;
      for (size_t i = 0; i < go.size(); ++i) {
        ga[i] += go[i];
        gb[i] += go[i];
      }
    };
    return out;
  }

  Expr sum(std::span<const Expr> xs) {
    if (xs.empty()) throw std::invalid_argument("sum of nothing");
    Vec y = value(xs[0]);
    for (size_t k = 1; k < xs.size(); ++k) {
      const Vec &v = value(xs[k]);
      check_same(y, v, "sum");
      for (size_t i = 0; i < y.size(); ++i) y[i] += v[i];
    }
    std::vector<Expr> parents(xs.begin(), xs.end());
    Expr out = push(std::move(y), parents);
    nodes_[out.id].backward = [parents, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      for (Expr p : parents) {
        Vec &gp = g.nodes_[p.id].grad;
        for (size_t i = 0; i < go.size(); ++i) gp[i] += go[i];
      }
    };
    return out;
  }

  Expr mean(std::span<const Expr> xs) {
    return scale(sum(xs), 1.0 / static_cast<double>(xs.size()));
  }

  Expr sub(Expr a, Expr b) { return add(a, scale(b, -1.0)); }

  Expr mul(Expr a, Expr b) {
    const Vec &av = value(a);
    const Vec &bv = value(b);
    check_same(av, bv, "mul");
    Vec y(av.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    Expr out = push(std::move(y), {a, b});
    nodes_[out.id].backward = [a, b, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &av = g.nodes_[a.id].value;
      const Vec &bv = g.nodes_[b.id].value;
      Vec &ga = g.nodes_[a.id].grad;
      Vec &gb = g.nodes_[b.id].grad;
      for (size_t i = 0; i < go.size(); ++i) {
        ga[i] += go[i] * bv[i];
        gb[i] += go[i] * av[i];
      }
    };
    return out;
  }

  Expr scale(Expr a, double k) {
    Vec y = value(a);
    for (double &v : y) v *= k;
    Expr out = push(std::move(y), {a});
    nodes_[out.id].backward = [a, k, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < go.size(); ++i) ga[i] += k * go[i];
    };
    return out;
  }

  // k - a, elementwise.
  Expr rsub(double k, Expr a) {
    Vec y = value(a);
    for (double &v : y) v = k - v;
    Expr out = push(std::move(y), {a});
    nodes_[out.id].backward = [a, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < go.size(); ++i) ga[i] -= go[i];
    };
    return out;
  }

  // Scalar inner product.
  Expr dot(Expr a, Expr b) {
    const Vec &av = value(a);
    const Vec &bv = value(b);
    check_same(av, bv, "dot");
    double acc = 0.0;
    for (size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    Expr out = push(Vec{acc}, {a, b});
    nodes_[out.id].backward = [a, b, out](Graph &g) {
      double go = g.nodes_[out.id].grad[0];
      const Vec &av = g.nodes_[a.id].value;
      const Vec &bv = g.nodes_[b.id].value;
      Vec &ga = g.nodes_[a.id].grad;
      Vec &gb = g.nodes_[b.id].grad;
      for (size_t i = 0; i < av.size(); ++i) {
        ga[i] += go * bv[i];
        gb[i] += go * av[i];
      }
    };
    return out;
  }

  // Sum of all components, as a scalar.
  Expr reduce_sum(Expr a) {
    const Vec &av = value(a);
    double acc = 0.0;
    for (double v : av) acc += v;
    Expr out = push(Vec{acc}, {a});
    nodes_[out.id].backward = [a, out](Graph &g) {
      double go = g.nodes_[out.id].grad[0];
      for (double &v : g.nodes_[a.id].grad) v += go;
    };
    return out;
  }

  Expr concat(std::span<const Expr> xs) {
    Vec y;
    for (Expr x : xs) {
      const Vec &v = value(x);
      y.insert(y.end(), v.begin(), v.end());
    }
    std::vector<Expr> parents(xs.begin(), xs.end());
    Expr out = push(std::move(y), parents);
    nodes_[out.id].backward = [parents, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      size_t off = 0;
      for (Expr p : parents) {
        Vec &gp = g.nodes_[p.id].grad;
        for (size_t i = 0; i < gp.size(); ++i) gp[i] += go[off + i];
        off += gp.size();
      }
    };
    return out;
  }
  Expr concat(std::initializer_list<Expr> xs) {
    return concat(std::span<const Expr>(xs.begin(), xs.size()));
  }

  // Scalars -> vector.
  Expr stack(std::span<const Expr> scalars) { return concat(scalars); }

  // Component i as a scalar.
  Expr pick(Expr a, size_t i) {
    Expr out = push(Vec{value(a).at(i)}, {a});
    nodes_[out.id].backward = [a, i, out](Graph &g) {
      g.nodes_[a.id].grad[i] += g.nodes_[out.id].grad[0];
    };
    return out;
  }

  // Σ_k w[k] · xs[k], where w is a vector of xs.size() weights.
  Expr weighted_sum(Expr w, std::span<const Expr> xs) {
    const Vec &wv = value(w);
    if (wv.size() != xs.size() || xs.empty()) throw std::invalid_argument("weighted_sum arity");
    Vec y(value(xs[0]).size(), 0.0);
    for (size_t k = 0; k < xs.size(); ++k) {
      const Vec &v = value(xs[k]);
      check_same(y, v, "weighted_sum");
      for (size_t i = 0; i < y.size(); ++i) y[i] += wv[k] * v[i];
    }
    std::vector<Expr> parents(xs.begin(), xs.end());
    std::vector<Expr> all = parents;
    all.push_back(w);
    Expr out = push(std::move(y), all);
    nodes_[out.id].backward = [w, parents, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &wv = g.nodes_[w.id].value;
      for (size_t k = 0; k < parents.size(); ++k) {
        const Vec &v = g.nodes_[parents[k].id].value;
        Vec &gv = g.nodes_[parents[k].id].grad;
        double acc = 0.0;
        for (size_t i = 0; i < go.size(); ++i) {
          gv[i] += wv[k] * go[i];
          acc += go[i] * v[i];
        }
        g.nodes_[w.id].grad[k] += acc;
      }
    };
    return out;
  }

  // ---- nonlinearities ----------------------------------------------------

  Expr tanh(Expr a) {
    Vec y = value(a);
    for (double &v : y) v = std::tanh(v);
    Expr out = push(std::move(y), {a});
    nodes_[out.id].backward = [a, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &yv = g.nodes_[out.id].value;
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (1.0 - yv[i] * yv[i]);
    };
    return out;
  }

  Expr relu(Expr a) {
    Vec y = value(a);
    for (double &v : y) {
      kink_margin_ = std::min(kink_margin_, std::abs(v));
      v = v > 0.0 ? v : 0.0;
    }
    Expr out = push(std::move(y), {a});
    nodes_[out.id].backward = [a, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &av = g.nodes_[a.id].value;
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < go.size(); ++i)
        if (av[i] > 0.0) ga[i] += go[i];
    };
    return out;
  }

  Expr sigmoid(Expr a) {
    Vec y = value(a);
    for (double &v : y) v = stable_sigmoid(v);
    Expr out = push(std::move(y), {a});
    nodes_[out.id].backward = [a, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &yv = g.nodes_[out.id].value;
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * yv[i] * (1.0 - yv[i]);
    };
    return out;
  }

  // Natural log, clamped below at `floor` (gradient is zero where clamped).
  Expr log(Expr a, double floor = 1e-12) {
    Vec y = value(a);
    for (double &v : y) v = std::log(std::max(v, floor));
    Expr out = push(std::move(y), {a});
    nodes_[out.id].backward = [a, floor, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &av = g.nodes_[a.id].value;
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < go.size(); ++i)
        if (av[i] > floor) ga[i] += go[i] / av[i];
    };
    return out;
  }

  Expr softmax(Expr a) {
    Vec y = softmax_values(value(a));
    Expr out = push(std::move(y), {a});
    nodes_[out.id].backward = [a, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &yv = g.nodes_[out.id].value;
      double inner = 0.0;
      for (size_t i = 0; i < go.size(); ++i) inner += go[i] * yv[i];
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < go.size(); ++i) ga[i] += yv[i] * (go[i] - inner);
    };
    return out;
  }

  Expr log_softmax(Expr a) {
    const Vec &av = value(a);
    double lse = logsumexp_values(av);
    Vec y(av.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = av[i] - lse;
    Expr out = push(std::move(y), {a});
    nodes_[out.id].backward = [a, out](Graph &g) {
      const Vec &go = g.nodes_[out.id].grad;
      const Vec &yv = g.nodes_[out.id].value;
      double total = 0.0;
      for (double v : go) total += v;
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] - std::exp(yv[i]) * total;
    };
    return out;
  }

  Expr logsumexp(Expr a) {
    const Vec &av = value(a);
    double lse = logsumexp_values(av);
    Expr out = push(Vec{lse}, {a});
    nodes_[out.id].backward = [a, out](Graph &g) {
      double go = g.nodes_[out.id].grad[0];
      double lse = g.nodes_[out.id].value[0];
      const Vec &av = g.nodes_[a.id].value;
      Vec &ga = g.nodes_[a.id].grad;
      for (size_t i = 0; i < av.size(); ++i) ga[i] += go * std::exp(av[i] - lse);
    };
    return out;
  }

  // Inverted dropout. Identity outside training.
  Expr dropout(Expr a, double p) {
    if (!training_ || rng_ == nullptr || p <= 0.0) return a;
    Vec mask(dim(a));
    double keep = 1.0 - p;
    for (double &m : mask) m = rng_->uniform() < keep ? 1.0 / keep : 0.0;
    return mul(a, constant(std::move(mask)));
  }

  // ---- losses --------------------------------------------------------------

  // Binary cross-entropy of a probability against a 0/1 (or soft) target.
  Expr binary_cross_entropy(Expr prob, double target) {
    Expr lp = log(prob);
    Expr lq = log(rsub(1.0, prob));
    return scale(add(scale(lp, target), scale(lq, 1.0 - target)), -1.0);
  }

  // Binary cross-entropy computed from a logit (numerically stable).
  Expr bce_with_logit(Expr logit, double target) {
    double z = scalar(logit);
    double loss = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
    Expr out = push(Vec{loss}, {logit});
    nodes_[out.id].backward = [logit, target, out](Graph &g) {
      double go = g.nodes_[out.id].grad[0];
      double z = g.nodes_[logit.id].value[0];
      g.nodes_[logit.id].grad[0] += go * (stable_sigmoid(z) - target);
    };
    return out;
  }

  // Accumulates d(loss)/d(param) into every Tensor::grad reached by the graph.
  void backward(Expr loss) {
    if (dim(loss) != 1) throw std::invalid_argument("backward needs a scalar");
    for (auto &n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    nodes_[loss.id].grad[0] = 1.0;
    for (size_t i = loss.id + 1; i-- > 0;) {
      Node &n = nodes_[i];
      if (!n.backward) continue;
      bool any = false;
      for (double v : n.grad)
        if (v != 0.0) {
          any = true;
          break;
        }
      if (any) n.backward(*this);
    }
  }

  static double stable_sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
  }

  static double logsumexp_values(const Vec &v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
  }

  static Vec softmax_values(const Vec &v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    Vec y(v.size());
    double s = 0.0;
    for (size_t i = 0; i < v.size(); ++i) s += (y[i] = std::exp(v[i] - m));
    for (double &x : y) x /= s;
    return y;
  }

 private:
  struct Node {
    Vec value;
    Vec grad;
    std::function<void(Graph &)> backward;
  };

  Expr push(Vec v, std::initializer_list<Expr> parents) {
    return push(std::move(v), std::vector<Expr>(parents));
  }
  Expr push(Vec v, const std::vector<Expr> &) {
    Node n;
    n.grad.assign(v.size(), 0.0);
    n.value = std::move(v);
    nodes_.push_back(std::move(n));
    return Expr{nodes_.size() - 1};
  }

  static void check_same(const Vec &a, const Vec &b, const char *op) {
    if (a.size() != b.size()) {
      throw std::invalid_argument(std::string(op) + ": size mismatch " +
                                  std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
  }

  std::vector<Node> nodes_;
  bool training_;
  Rng *rng_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

}  // namespace anaforge::nn
