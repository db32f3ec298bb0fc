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

#include "anaforge/nn/graph.hpp"

#include <gtest/gtest.h>

#include <limits>

#include "anaforge/nn/adam.hpp"
#include "anaforge/nn/checkpoint.hpp"
#include "anaforge/nn/gradient_check.hpp"
#include "test_util.hpp"

namespace anaforge::nn {
namespace {

void expect_gradients_ok(ParameterSet &p, const std::function<Expr(Graph &)> &loss) {
  for (const auto &rec : gradient_check(p, loss)) {
    EXPECT_GT(rec.checked, 0u) << rec.name;
    EXPECT_LT(rec.max_rel_error, 1e-5) << rec.name << " analytic " << rec.worst_analytic << " numeric "
                                       << rec.worst_numeric;
  }
}

TEST(GraphTest, ForwardValues) {
  Graph g;
  Expr a = g.constant(Vec{1.0, 2.0, 3.0});
  Expr b = g.constant(Vec{0.5, -1.0, 2.0});
  EXPECT_DOUBLE_EQ(g.scalar(g.dot(a, b)), 0.5 - 2.0 + 6.0);
  EXPECT_EQ(g.value(g.concat({a, b})).size(), 6u);
  Vec sm = g.value(g.softmax(a));
  EXPECT_NEAR(sm[0] + sm[1] + sm[2], 1.0, 1e-15);
  EXPECT_NEAR(g.scalar(g.logsumexp(a)), std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)), 1e-12);
  Vec ls = g.value(g.log_softmax(a));
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(std::exp(ls[i]), sm[i], 1e-12);
}

TEST(GraphTest, SoftmaxStableForLargeLogits) {
  Graph g;
  Vec sm = g.value(g.softmax(g.constant(Vec{1000.0, 1000.0})));
  EXPECT_DOUBLE_EQ(sm[0], 0.5);
  EXPECT_TRUE(std::isfinite(g.scalar(g.bce_with_logit(g.constant(-800.0), 1.0))));
}

TEST(GraphTest, AllOpsPassGradientCheck) {
  ParameterSet p;
  p.add("W", 4, 3);
  p.add("b", 4);
  p.add("v", 3);
  p.add("table", 5, 4);
  Rng rng(1);
  p.initialize(rng);
  for (auto &t : p.tensors())
    for (double &x : t.value) x += rng.uniform(-0.3, 0.3);
  auto loss = [&](Graph &g) {
    Expr x = g.parameter(p.get("v"));
    Expr h = g.tanh(g.affine(p.get("W"), p.get("b"), x));
    Expr r = g.relu(g.add(h, g.constant(Vec{0.05, -0.02, 0.3, 0.01})));
    Expr e = g.lookup(p.get("table"), 2);
    Expr s = g.sigmoid(g.mul(h, e));
    std::vector<Expr> xs = {h, r, s};
    Expr w = g.softmax(g.stack(std::vector<Expr>{g.dot(h, e), g.reduce_sum(r), g.pick(s, 1)}));
    Expr mix = g.weighted_sum(w, xs);
    Expr scores = g.concat({mix, g.mean(xs), g.sub(h, s)});
    Expr ce = g.scale(g.pick(g.log_softmax(scores), 3), -1.0);
    Expr bce = g.binary_cross_entropy(g.pick(s, 0), 0.7);
    Expr bl = g.bce_with_logit(g.dot(h, e), 1.0);
    Expr lse = g.logsumexp(g.rsub(1.0, scores));
    return g.sum(std::vector<Expr>{ce, bce, bl, g.scale(lse, 0.1), g.log(g.pick(s, 2))});
  };
  expect_gradients_ok(p, loss);
}

TEST(GraphTest, DropoutOnlyWhenTraining) {
  Rng rng(3);
  Graph eval(false, &rng);
  Expr a = eval.constant(Vec(100, 1.0));
  EXPECT_EQ(eval.value(eval.dropout(a, 0.5)), Vec(100, 1.0));
  Graph train(true, &rng);
  Vec d = train.value(train.dropout(train.constant(Vec(1000, 1.0)), 0.5));
  size_t zeros = std::count(d.begin(), d.end(), 0.0);
  EXPECT_GT(zeros, 400u);
  EXPECT_LT(zeros, 600u);
  for (double v : d) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(GraphTest, KinkMarginTracksRectifierInputs) {
  Graph g;
  EXPECT_EQ(g.kink_margin(), std::numeric_limits<double>::infinity());
  g.relu(g.constant({-0.5, 0.2, 3.0}));
  EXPECT_DOUBLE_EQ(g.kink_margin(), 0.2);
  g.relu(g.constant({-0.01}));
  EXPECT_DOUBLE_EQ(g.kink_margin(), 0.01);
}

TEST(GraphTest, AdamReducesQuadratic) {
  ParameterSet p;
  Tensor &x = p.add("x", 3);
  x.value = {1.0, -2.0, 0.5};
  Adam adam(0.1);
  double first = 0;
  for (int step = 0; step < 200; ++step) {
    Graph g;
    Expr v = g.parameter(x);
    Expr l = g.dot(v, v);
    if (step == 0) first = g.scalar(l);
    g.backward(l);
    adam.step(p);
  }
  Graph g;
  Expr v = g.parameter(x);
  EXPECT_LT(g.scalar(g.dot(v, v)), 1e-2 * first);
}

TEST(GraphTest, ZeroLearningRateLeavesParametersBitIdentical) {
  ParameterSet p;
  Tensor &x = p.add("x", 3);
  x.value = {1.0, -2.0, 0.5};
  Vec before = x.value;
  Adam adam(0.0);
  for (int step = 0; step < 5; ++step) {
    Graph g;
    Expr v = g.parameter(x);
    g.backward(g.dot(v, v));
    adam.step(p);
  }
  EXPECT_EQ(std::memcmp(before.data(), x.value.data(), before.size() * sizeof(double)), 0);
}

TEST(GraphTest, CheckpointRoundTrip) {
  testing_util::TempDir dir;
  ParameterSet p;
  p.add("a.W", 2, 3);
  p.add("a.b", 2);
  Rng rng(9);
  p.initialize(rng);
  save_checkpoint(dir.file("m.ckpt"), "toy", "{\"k\":1}", p);
  auto header = read_checkpoint_header(dir.file("m.ckpt"));
  EXPECT_EQ(header.kind, "toy");
  EXPECT_EQ(header.metadata, "{\"k\":1}");
  ParameterSet q;
  q.add("a.W", 2, 3);
  q.add("a.b", 2);
  load_checkpoint_tensors(dir.file("m.ckpt"), q);
  EXPECT_EQ(q.get("a.W").value, p.get("a.W").value);
  ParameterSet wrong;
  wrong.add("a.W", 3, 2);
  wrong.add("a.b", 2);
  EXPECT_THROW(load_checkpoint_tensors(dir.file("m.ckpt"), wrong), CheckpointError);
}

TEST(GraphTest, RngIsDeterministic) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
  Rng c(1);
  double sum = 0;
  for (int i = 0; i < 10000; ++i) sum += c.normal();
  EXPECT_NEAR(sum / 10000, 0.0, 0.05);
}

}  // namespace
}  // namespace anaforge::nn
