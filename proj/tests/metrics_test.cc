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

#include "anaforge/metrics.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace anaforge::metrics {
namespace {

using C = Clustering<int>;

TEST(MetricsTest, HandComputedSplit) {
  C key({{1, 2, 3}});
  C resp({{1, 2}, {3}});
  EXPECT_NEAR(muc(key, resp).recall, 0.5, 1e-12);
  EXPECT_NEAR(muc(key, resp).precision, 1.0, 1e-12);
  EXPECT_NEAR(b_cubed(key, resp).recall, 5.0 / 9.0, 1e-12);
  EXPECT_NEAR(b_cubed(key, resp).precision, 1.0, 1e-12);
  EXPECT_NEAR(ceaf_e(key, resp).recall, 0.8, 1e-12);
  EXPECT_NEAR(ceaf_e(key, resp).precision, 0.4, 1e-12);
  double conll = 100.0 * (2.0 / 3.0 + 5.0 / 7.0 + 1.6 / 3.0) / 3.0;
  EXPECT_NEAR(conll_f1(key, resp), conll, 1e-9);
}

TEST(MetricsTest, IdentityScoresHundred) {
  C key({{1, 2}, {3}, {4, 5, 6}});
  EXPECT_DOUBLE_EQ(conll_f1(key, key), 100.0);
  EXPECT_DOUBLE_EQ(conll_f1(key, key, false), 100.0);
}

TEST(MetricsTest, EmptyAgainstEmptyIsVacuouslyPerfect) {
  EXPECT_DOUBLE_EQ(conll_f1(C(), C()), 100.0);
  C key({{1, 2}});
  EXPECT_DOUBLE_EQ(muc(key, C()).recall, 0.0);
  EXPECT_DOUBLE_EQ(muc(key, C()).f1, 0.0);
}

TEST(MetricsTest, SingletonsOnlyHaveZeroMucDenominators) {
  C key({{1}, {2}});
  Counts c = muc_counts(key, key);
  EXPECT_EQ(c.r_den, 0.0);
  EXPECT_EQ(c.p_den, 0.0);
  EXPECT_DOUBLE_EQ(c.prf().f1, 1.0);
}

TEST(MetricsTest, AgreesWithOracleOnRandomPartitions) {
  nn::Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 1 + static_cast<int>(rng.below(6));
    auto k = oracle::random_partition(rng, n, 0.9);
    auto r = oracle::random_partition(rng, n, 0.9);
    C key(k), resp(r);
    auto om = oracle::muc(k, r), ob = oracle::b_cubed(k, r), oc = oracle::ceaf_e(k, r);
    ASSERT_NEAR(muc(key, resp).f1, om.f, 1e-12);
    ASSERT_NEAR(b_cubed(key, resp).precision, ob.p, 1e-12);
    ASSERT_NEAR(b_cubed(key, resp).recall, ob.r, 1e-12);
    ASSERT_NEAR(ceaf_e(key, resp).f1, oc.f, 1e-12);
  }
}

TEST(MetricsTest, SymmetricUnderSwapExceptPrecisionRecall) {
  nn::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    C a(oracle::random_partition(rng, 6)), b(oracle::random_partition(rng, 6));
    EXPECT_NEAR(muc(a, b).precision, muc(b, a).recall, 1e-12);
    EXPECT_NEAR(b_cubed(a, b).f1, b_cubed(b, a).f1, 1e-12);
    EXPECT_NEAR(conll_f1(a, b), conll_f1(b, a), 1e-9);
  }
}

TEST(MetricsTest, AssignmentMatchesBruteForce) {
  nn::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 1 + rng.below(5), m = 1 + rng.below(5);
    std::vector<std::vector<double>> w(n, std::vector<double>(m));
    for (auto &row : w)
      for (double &x : row) x = rng.uniform();
    std::vector<size_t> idx(std::max(n, m));
    std::iota(idx.begin(), idx.end(), 0);
    double best = 0;
    do {
      double s = 0;
      for (size_t i = 0; i < n; ++i)
        if (idx[i] < m) s += w[i][idx[i]];
      best = std::max(best, s);
    } while (std::next_permutation(idx.begin(), idx.end()));
    ASSERT_NEAR(detail::max_weight_assignment(w), best, 1e-12);
  }
}

TEST(MetricsTest, WithoutSingletonsStripsBothSides) {
  C key({{1, 2}, {3}});
  C resp({{1, 2}, {4}});
  EXPECT_DOUBLE_EQ(conll_f1(key, resp, false), 100.0);
  EXPECT_LT(conll_f1(key, resp, true), 100.0);
}

TEST(MetricsTest, MentionDetection) {
  Prf p = mention_prf<int>({1, 2, 3, 4}, {1, 2, 5});
  EXPECT_NEAR(p.precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p.recall, 0.5, 1e-12);
}

TEST(MetricsTest, EntityF1CreditsCoreferentAntecedents) {
  C entities({{10, 11}, {12}});
  LinkMap<int> gold{{1, 10}, {2, 12}};
  LinkMap<int> pred{{1, 11}, {2, 10}};
  EXPECT_DOUBLE_EQ(entity_f1(gold, pred, entities), 50.0);
  EXPECT_DOUBLE_EQ(entity_f1(gold, gold, entities), 100.0);
}

TEST(MetricsTest, EntityF1RejectsDifferentAnaphorSets) {
  C entities;
  EXPECT_THROW(entity_f1<int>({{1, 2}}, {{3, 2}}, entities), AnaphorSetMismatch);
  EXPECT_THROW(entity_f1<int>({{1, 2}}, {}, entities), AnaphorSetMismatch);
}

TEST(MetricsTest, MicroAverageSumsCounts) {
  std::vector<std::pair<C, C>> docs = {{C({{1, 2}}), C({{1}, {2}})}, {C({{1, 2}}), C({{1, 2}})}};
  auto report = score_documents<int>(docs, {});
  EXPECT_NEAR(report.with_singletons.muc.recall, 0.5, 1e-12);
  EXPECT_EQ(report.documents, 2u);
  auto j = report.to_json();
  EXPECT_DOUBLE_EQ(j["with_singletons"]["muc"]["recall"].get<double>(), 50.0);
}

}  // namespace
}  // namespace anaforge::metrics
