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

#include "hoirel/infer.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "test_util.hpp"

namespace hoirel {
namespace {

const RelType kManRideBike{HumanSubtype::kMan, "ride", "bicycle"};
const RelType kWomanRideBike{HumanSubtype::kWoman, "ride", "bicycle"};
const RelType kManPushBike{HumanSubtype::kMan, "push", "bicycle"};

WebIndex random_index(std::size_t n, std::size_t dim, Rng& rng, bool coarse = false) {
  WebIndex idx;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(dim);
    // Coarse coordinates make exact distance ties common.
    for (auto& x : e) x = coarse ? double(rng.index(3)) : rng.normal();
    idx.embeddings.push_back(std::move(e));
    idx.labels.push_back(kManRideBike);
    idx.sample_ids.push_back("w" + std::to_string((i * 7919) % 100003));
  }
  return idx;
}

TEST(Knn, SingleSampleAlwaysReturned) {
  Rng rng(1);
  const auto idx = random_index(1, 4, rng);
  const std::vector<double> q = {9, 9, 9, 9};
  for (std::size_t k : {1, 5, 20}) {
    const auto nn = knn_retrieve(q, idx, k);
    ASSERT_EQ(nn.size(), 1u);
    EXPECT_EQ(nn[0].index, 0u);
  }
}

TEST(Knn, ExactQueryComesFirst) {
  Rng rng(2);
  const auto idx = random_index(50, 6, rng);
  const auto nn = knn_retrieve(idx.embeddings[17], idx, 5);
  EXPECT_EQ(nn[0].index, 17u);
  EXPECT_EQ(nn[0].distance, 0.0);
}

TEST(Knn, Errors) {
  WebIndex empty;
  const std::vector<double> q = {0};
  EXPECT_THROW(knn_retrieve(q, empty, 3), Error);
  Rng rng(3);
  EXPECT_THROW(knn_retrieve(q, random_index(2, 1, rng), 0), Error);
}

TEST(Knn, MatchesFullSortOracle) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const bool coarse = t % 2 == 1;
    const auto idx = random_index(1 + rng.index(1000), 8, rng, coarse);
    std::vector<double> q(8);
    for (auto& x : q) x = coarse ? double(rng.index(3)) : rng.normal();
    const std::size_t k = 1 + rng.index(30);
    const auto nn = knn_retrieve(q, idx, k);
    const auto want = oracle::full_sort_knn(q, idx, k);
    ASSERT_EQ(nn.size(), want.size());
    for (std::size_t i = 0; i < nn.size(); ++i) EXPECT_EQ(nn[i].index, want[i]) << "rank " << i;
  }
}

TEST(Constrain, PaperStyleExample) {
  const std::vector<Neighbor> nn = {{0, kManRideBike, 0.3}, {1, kWomanRideBike, 0.1}, {2, kManPushBike, 0.5}};
  const auto c = constrain_candidates(nn, HumanSubtype::kMan, "bicycle");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].predicate, "ride");
  EXPECT_DOUBLE_EQ(c[0].distance, 0.3);
  EXPECT_EQ(c[1].predicate, "push");
  EXPECT_DOUBLE_EQ(c[1].distance, 0.5);
}

TEST(Constrain, AllMatchingDeduplicates) {
  const std::vector<Neighbor> nn = {
      {0, kManRideBike, 0.1}, {1, kManPushBike, 0.2}, {2, kManRideBike, 0.3}, {3, kManPushBike, 0.4}};
  const auto c = constrain_candidates(nn, HumanSubtype::kMan, "bicycle");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].predicate, "ride");
  EXPECT_EQ(c[1].predicate, "push");
  EXPECT_EQ(c[0].votes, 2u);
}

TEST(Constrain, NoMatchIsEmpty) {
  const std::vector<Neighbor> nn = {{0, kWomanRideBike, 0.1}};
  EXPECT_TRUE(constrain_candidates(nn, HumanSubtype::kMan, "bicycle").empty());
  EXPECT_TRUE(constrain_candidates(nn, HumanSubtype::kWoman, "horse").empty());
}

TEST(Constrain, VoteAggregation) {
  const std::vector<Neighbor> nn = {
      {0, kManRideBike, 0.1}, {1, kManPushBike, 0.2}, {2, kManPushBike, 0.3}, {3, kManRideBike, 0.9},
      {4, kManPushBike, 1.0}};
  const auto c = constrain_candidates(nn, HumanSubtype::kMan, "bicycle", Aggregation::kVote);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].predicate, "push");
  EXPECT_EQ(parse_aggregation("vote"), Aggregation::kVote);
  EXPECT_EQ(parse_aggregation("best"), Aggregation::kBestDistance);
  EXPECT_THROW(parse_aggregation("mean"), Error);
}

TEST(Constrain, Properties) {
  Rng rng(5);
  const char* preds[] = {"ride", "push", "hold", "wash"};
  const char* objs[] = {"bicycle", "horse"};
  for (int t = 0; t < 200; ++t) {
    std::vector<Neighbor> nn;
    double d = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      d += rng.uniform(0, 1);
      nn.push_back({i, RelType{kHumanSubtypes[rng.index(4)], preds[rng.index(4)], objs[rng.index(2)]}, d});
    }
    const auto human = kHumanSubtypes[rng.index(4)];
    const std::string obj = objs[rng.index(2)];
    const auto c = constrain_candidates(nn, human, obj);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_TRUE(seen.insert(c[i].predicate).second);
      if (i) {
        EXPECT_LE(c[i - 1].distance, c[i].distance);
      }
      double best = 1e300;
      for (const auto& n : nn) {
        if (n.label == RelType{human, c[i].predicate, obj}) best = std::min(best, n.distance);
      }
      EXPECT_EQ(c[i].distance, best);
    }
  }
}

TEST(ZeroShotSpace, Examples) {
  const std::set<RelType> universe = {kManRideBike, kWomanRideBike, RelType{HumanSubtype::kMan, "ride", "horse"}};
  EXPECT_EQ(zero_shot_space(HumanSubtype::kMan, "bicycle", universe), std::set<RelType>{kManRideBike});
  EXPECT_TRUE(zero_shot_space(HumanSubtype::kMan, "bicycle", {}).empty());
}

TEST(ZeroShotSpace, MatchesLinearScan) {
  Rng rng(6);
  std::set<RelType> universe;
  const char* preds[] = {"ride", "push", "hold", "wash", "feed"};
  const char* objs[] = {"bicycle", "horse", "dog"};
  while (universe.size() < 50) {
    universe.insert({kHumanSubtypes[rng.index(4)], preds[rng.index(5)], objs[rng.index(3)]});
  }
  for (auto h : kHumanSubtypes) {
    for (const char* o : objs) {
      std::set<RelType> want;
      for (const auto& t : universe) {
        if (t.subject == h && t.object == o) want.insert(t);
      }
      EXPECT_EQ(zero_shot_space(h, o, universe), want);
    }
  }
}

// Identity model on 256-d inputs: union features are placed on coordinate
// axes so neighbour distances are known exactly.
struct PredictFixture : ::testing::Test {
  MetricModel model = testing::identity_model();
  WebIndex index;
  FeatureStore features{kEmbeddingDim};
  Detection man{"h1", "man", {0, 0, 10, 10}, 0.9};
  Detection bike{"o1", "bicycle", {5, 5, 10, 10}, 0.8};

  void SetUp() override {
    WebCorpus corpus;
    // Query sits at the origin; neighbours at distances 0.3, 0.1, 0.5.
    corpus.samples.push_back({"a", kManRideBike, testing::axis_point(0, 0.3), std::nullopt, true});
    corpus.samples.push_back({"b", kWomanRideBike, testing::axis_point(1, 0.1), std::nullopt, true});
    corpus.samples.push_back({"c", kManPushBike, testing::axis_point(2, 0.5), std::nullopt, true});
    corpus.samples.push_back({"d", kManPushBike, testing::axis_point(3, 0.05), std::nullopt, false});
    index = build_index(model, corpus);
    features.add(union_feature_id("img", "h1", "o1"), std::vector<float>(kEmbeddingDim, 0.0f));
  }
};

TEST_F(PredictFixture, IndexSkipsDroppedSamples) {
  EXPECT_EQ(index.size(), 3u);
  EXPECT_EQ(index.class_means.size(), 3u);
}

TEST_F(PredictFixture, TopOne) {
  PredictOptions opt;
  opt.top_k = 1;
  const auto out = predict_triplets("img", {man, bike}, features, model, index, opt);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].type, kManRideBike);
  EXPECT_NEAR(out[0].score, -0.3, 1e-15);
  EXPECT_EQ(out[0].subject_box, man.box);
  EXPECT_EQ(out[0].object_box, bike.box);
}

TEST_F(PredictFixture, NoPadding) {
  PredictOptions opt;
  opt.top_k = 3;
  const auto out = predict_triplets("img", {man, bike}, features, model, index, opt);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_GE(out[0].score, out[1].score);
  EXPECT_EQ(out[1].type, kManPushBike);
}

TEST_F(PredictFixture, NoPairsNoOutput) {
  EXPECT_TRUE(predict_triplets("img", {man}, features, model, index, {}).empty());
  EXPECT_TRUE(predict_triplets("img", {}, features, model, index, {}).empty());
}

TEST_F(PredictFixture, MissingFeatureCounted) {
  Detection bike2{"o2", "bicycle", {50, 50, 10, 10}, 0.8};
  PredictDiagnostics diag;
  const auto out = predict_triplets("img", {man, bike, bike2}, features, model, index, {}, &diag);
  EXPECT_EQ(diag.pairs, 2u);
  EXPECT_EQ(diag.missing_features, 1u);
  EXPECT_EQ(out.size(), 2u);
}

TEST_F(PredictFixture, UniverseRestrictsCandidates) {
  const std::set<RelType> universe = {kManPushBike};
  PredictOptions opt;
  opt.universe = &universe;
  const auto out = predict_triplets("img", {man, bike}, features, model, index, opt);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].type, kManPushBike);
}

TEST_F(PredictFixture, BelowScoreThresholdStillPaired) {
  // Pairing does not filter by score; NMS upstream does.
  Detection weak = bike;
  weak.score = 0.01;
  EXPECT_EQ(predict_triplets("img", {man, weak}, features, model, index, {}).size(), 2u);
}

TEST(PredictProperties, AtMostTopKMonotone) {
  Rng rng(8);
  const auto model = testing::identity_model();
  WebCorpus corpus;
  const char* preds[] = {"ride", "push", "hold", "wash"};
  for (int i = 0; i < 200; ++i) {
    std::vector<double> f(kEmbeddingDim);
    for (std::size_t k = 0; k < 4; ++k) f[k] = rng.uniform();
    corpus.samples.push_back(
        {"s" + std::to_string(i), RelType{kHumanSubtypes[rng.index(2)], preds[rng.index(4)], "bicycle"}, f,
         std::nullopt, true});
  }
  const auto index = build_index(model, corpus);
  FeatureStore fs(kEmbeddingDim);
  std::vector<Detection> dets;
  for (int i = 0; i < 4; ++i) {
    dets.push_back({"h" + std::to_string(i), i % 2 ? "woman" : "man", {double(i) * 20, 0, 10, 10}, 1.0});
    dets.push_back({"o" + std::to_string(i), "bicycle", {double(i) * 20, 30, 10, 10}, 1.0});
  }
  for (const auto& p : pair_candidates(dets)) {
    std::vector<float> f(kEmbeddingDim, 0.0f);
    for (std::size_t k = 0; k < 4; ++k) f[k] = float(rng.uniform());
    fs.add(union_feature_id("img", p.human.region_id, p.object.region_id), f);
  }
  for (std::size_t top_k : {1, 2, 3}) {
    PredictOptions opt;
    opt.top_k = top_k;
    const auto out = predict_triplets("img", dets, fs, model, index, opt);
    std::map<std::pair<std::array<double, 4>, std::array<double, 4>>, std::vector<double>> per_pair;
    for (const auto& p : out) per_pair[{p.subject_box.as_array(), p.object_box.as_array()}].push_back(p.score);
    EXPECT_EQ(per_pair.size(), 16u);
    for (const auto& [k, scores] : per_pair) {
      EXPECT_LE(scores.size(), top_k);
      for (std::size_t i = 1; i < scores.size(); ++i) EXPECT_GE(scores[i - 1], scores[i]);
    }
  }
}

TEST(GroundTruthPairs, OncePerPair) {
  ImageRecord rec;
  rec.image_id = "i";
  rec.regions = {{"h", "man", {0, 0, 5, 5}, 1}, {"o", "horse", {5, 5, 5, 5}, 1}};
  rec.relationships = {{"h", "ride", "o"}, {"h", "feed", "o"}};
  const auto pairs = ground_truth_pairs(rec);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].union_box, (BoundingBox{0, 0, 10, 10}));
}

WebIndex means_index(const std::vector<std::pair<std::string, std::vector<double>>>& means) {
  WebIndex idx;
  for (const auto& [p, m] : means) idx.class_means[{HumanSubtype::kMan, p, "bicycle"}] = m;
  idx.class_means[{HumanSubtype::kWoman, "other", "bicycle"}] = {1, 0, 0};
  return idx;
}

TEST(ClassMeanBaseline, QueryEqualsMean) {
  const auto idx = means_index({{"ride", {1, 0, 0}}, {"push", {0, 1, 0}}, {"hold", {0, 0, 1}}});
  const std::vector<double> q = {0, 2, 0};
  const auto out = classmean_baseline(q, idx, HumanSubtype::kMan, "bicycle", 3);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].predicate, "push");
  EXPECT_DOUBLE_EQ(out[0].similarity, 1.0);
}

TEST(ClassMeanBaseline, HandSetCosines) {
  // Unit means whose first coordinate is the target cosine with q = e0.
  auto unit = [](double c) { return std::vector<double>{c, std::sqrt(1 - c * c)}; };
  const auto idx = means_index({{"a", unit(0.1)}, {"b", unit(-0.2)}, {"c", unit(0.9)}, {"d", unit(0.5)}});
  const std::vector<double> q = {1, 0};
  const auto out = classmean_baseline(q, idx, HumanSubtype::kMan, "bicycle", 10);
  ASSERT_EQ(out.size(), 4u);
  const std::vector<std::string> order = {"c", "d", "a", "b"};
  const std::vector<double> cos = {0.9, 0.5, 0.1, -0.2};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(out[i].predicate, order[i]);
    EXPECT_NEAR(out[i].similarity, cos[i], 1e-12);
  }
  EXPECT_EQ(classmean_baseline(q, idx, HumanSubtype::kMan, "bicycle", 2).size(), 2u);
}

TEST(ClassMeanBaseline, EmptyAndZeroNorm) {
  const auto idx = means_index({{"ride", {1, 0}}, {"zero", {0, 0}}});
  const std::vector<double> q = {1, 0};
  EXPECT_TRUE(classmean_baseline(q, idx, HumanSubtype::kBoy, "bicycle", 3).empty());
  const auto out = classmean_baseline(q, idx, HumanSubtype::kMan, "bicycle", 3);
  EXPECT_EQ(out.back().predicate, "zero");
  EXPECT_EQ(out.back().similarity, -1.0);
  const std::vector<double> zq = {0, 0};
  for (const auto& s : classmean_baseline(zq, idx, HumanSubtype::kMan, "bicycle", 3)) EXPECT_EQ(s.similarity, -1.0);
}

TEST(PredictionFile, RoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "hoirel_preds_test.jsonl").string();
  std::vector<ScoredTriplet> preds = {{"i1", kManRideBike, {0, 0, 1, 2}, {3, 4, 5, 6}, -0.125},
                                      {"i2", kManPushBike, {1.5, 0, 1, 2}, {3, 4, 5, 6}, -1e-9}};
  write_predictions(path, preds);
  {
    std::ofstream app(path, std::ios::app);
    app << R"({"image_id":"i3","subject":"dog","predicate":"ride","object":"bicycle",)"
           R"("subject_box":[0,0,1,1],"object_box":[0,0,1,1],"score":0})"
        << '\n';
  }
  const auto back = read_predictions(path);
  EXPECT_EQ(back.unknown_subjects, 1u);
  ASSERT_EQ(back.predictions.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.predictions[i].type, preds[i].type);
    EXPECT_EQ(back.predictions[i].score, preds[i].score);
    EXPECT_EQ(back.predictions[i].subject_box, preds[i].subject_box);
  }
  std::remove(path.c_str());
  EXPECT_THROW(read_predictions(path), InputError);
}

}  // namespace
}  // namespace hoirel
