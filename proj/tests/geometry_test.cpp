// Copyright 2026 The hoirel Authors.
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

#include "hoirel/geometry.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace hoirel {
namespace {

TEST(Iou, KnownValues) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 50.0 / 150.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {10, 0, 10, 10}), 0.0);  // touching edges
}

TEST(Iou, Properties) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    BoundingBox a{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 50), rng.uniform(1, 50)};
    BoundingBox b{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 50), rng.uniform(1, 50)};
    const double v = iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_DOUBLE_EQ(v, iou(b, a));
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    const double dx = rng.uniform(0, 100), dy = rng.uniform(0, 100);
    EXPECT_NEAR(iou({a.x + dx, a.y + dy, a.w, a.h}, {b.x + dx, b.y + dy, b.w, b.h}), v, 1e-12);
  }
}

TEST(Nms, EmptyInput) { EXPECT_TRUE(nms({}).empty()); }

TEST(Nms, IdenticalBoxesKeepHighest) {
  std::vector<Detection> d = {{"a", "bicycle", {0, 0, 10, 10}, 0.8}, {"b", "bicycle", {0, 0, 10, 10}, 0.9}};
  auto out = nms(d);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].region_id, "b");
}

TEST(Nms, ScoreThresholdIsStrict) {
  std::vector<Detection> d = {{"a", "cup", {0, 0, 10, 10}, 0.2}, {"b", "cup", {50, 50, 10, 10}, 0.21}};
  auto out = nms(d);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].region_id, "b");
}

TEST(Nms, PerCategoryAndAcrossSubtypes) {
  std::vector<Detection> d = {{"h", "man", {0, 0, 10, 10}, 0.9},
                              {"o", "bicycle", {0, 0, 10, 10}, 0.8},
                              {"g", "boy", {0, 0, 10, 10}, 0.7}};
  EXPECT_EQ(nms(d).size(), 3u);
}

TEST(Nms, TiesKeepEarlierInput) {
  std::vector<Detection> d = {{"first", "cup", {0, 0, 10, 10}, 0.5}, {"second", "cup", {1, 0, 10, 10}, 0.5}};
  auto out = nms(d);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].region_id, "first");
}

std::vector<Detection> random_detections(Rng& rng, std::size_t n) {
  static const char* cats[] = {"man", "woman", "bicycle", "horse"};
  std::vector<Detection> d;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back({"r" + std::to_string(i), cats[rng.index(4)],
                 {rng.uniform(0, 60), rng.uniform(0, 60), rng.uniform(5, 40), rng.uniform(5, 40)},
                 std::round(rng.uniform() * 20) / 20});  // coarse scores produce ties
  }
  return d;
}

TEST(Nms, MatchesBruteForceOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    auto d = random_detections(rng, 1 + rng.index(100));
    auto got = nms(d);
    auto want = oracle::brute_force_nms(d, 0.3, 0.2);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].region_id, want[i].region_id);
  }
}

TEST(Nms, SurvivorsDoNotOverlapWithinCategory) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto d = random_detections(rng, 80);
    auto out = nms(d);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (i > 0) {
        EXPECT_GE(out[i - 1].score, out[i].score);
      }
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (out[i].category == out[j].category) {
          EXPECT_LE(iou(out[i].box, out[j].box), 0.3);
        }
      }
    }
  }
}

TEST(PairCandidates, Cardinality) {
  std::vector<Detection> d = {{"h1", "man", {0, 0, 5, 5}, 1},   {"h2", "girl", {5, 5, 5, 5}, 1},
                              {"o1", "cup", {1, 1, 2, 2}, 1},   {"o2", "bicycle", {3, 3, 4, 4}, 1},
                              {"o3", "horse", {0, 9, 9, 9}, 1}};
  auto pairs = pair_candidates(d);
  EXPECT_EQ(pairs.size(), 6u);
  for (const auto& p : pairs) {
    EXPECT_TRUE(p.human.is_human());
    EXPECT_FALSE(p.object.is_human());
  }
}

TEST(PairCandidates, NoHumans) {
  std::vector<Detection> d(5, Detection{"o", "cup", {0, 0, 1, 1}, 1});
  EXPECT_TRUE(pair_candidates(d).empty());
}

TEST(PairCandidates, UnionBox) {
  std::vector<Detection> d = {{"h", "man", {0, 0, 10, 10}, 1}, {"o", "bicycle", {10, 0, 10, 10}, 1}};
  auto pairs = pair_candidates(d);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].union_box, (BoundingBox{0, 0, 20, 10}));
}

}  // namespace
}  // namespace hoirel
