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

#include "hoirel/evalbench.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"

namespace hoirel {
namespace {

const RelType kRide{HumanSubtype::kMan, "ride", "bicycle"};
const RelType kPush{HumanSubtype::kMan, "push", "bicycle"};
const RelType kHold{HumanSubtype::kWoman, "hold", "cup"};

ScoredTriplet as_prediction(const std::string& img, const GroundTruth& g, double score = 0) {
  return {img, g.type, g.subject_box, g.object_box, score};
}

TEST(MatchInstance, ExactCopy) {
  const GroundTruth g{kRide, {0, 0, 10, 10}, {10, 0, 10, 10}};
  for (auto t : kEvalTasks) EXPECT_TRUE(match_instance(as_prediction("i", g), g, t));
}

TEST(MatchInstance, SubjectOverlapBelowThreshold) {
  const GroundTruth g{kRide, {0, 0, 10, 10}, {10, 0, 10, 10}};
  auto p = as_prediction("i", g);
  p.subject_box = {0, 0, 4, 10};  // IoU 0.4
  EXPECT_DOUBLE_EQ(iou(p.subject_box, g.subject_box), 0.4);
  EXPECT_FALSE(match_instance(p, g, EvalTask::kRelationship));
  EXPECT_TRUE(match_instance(p, g, EvalTask::kPredicate));
}

TEST(MatchInstance, UnionOverlapOneThird) {
  const GroundTruth g{kRide, {5, 0, 5, 10}, {10, 0, 5, 10}};
  const ScoredTriplet p{"i", kRide, {0, 0, 5, 10}, {5, 0, 5, 10}, 0};
  EXPECT_EQ(p.union_box(), (BoundingBox{0, 0, 10, 10}));
  EXPECT_EQ(g.union_box(), (BoundingBox{5, 0, 10, 10}));
  EXPECT_NEAR(iou(p.union_box(), g.union_box()), 1.0 / 3, 1e-15);
  EXPECT_FALSE(match_instance(p, g, EvalTask::kPhrase));
}

TEST(MatchInstance, WrongLabelNeverMatches) {
  const GroundTruth g{kRide, {0, 0, 10, 10}, {10, 0, 10, 10}};
  auto p = as_prediction("i", g);
  p.type = kPush;
  for (auto t : kEvalTasks) EXPECT_FALSE(match_instance(p, g, t));
}

TEST(TruncatePerPair, KeepsBestPerPair) {
  const GroundTruth g{kRide, {0, 0, 10, 10}, {10, 0, 10, 10}};
  std::vector<ScoredTriplet> ps;
  for (double s : {-3.0, -1.0, -2.0}) ps.push_back(as_prediction("i", g, s));
  ps[1].type = kPush;
  auto other = as_prediction("i", g, -9);
  other.object_box.x += 1;
  ps.push_back(other);
  const auto t1 = truncate_per_pair(ps, 1);
  ASSERT_EQ(t1.size(), 2u);
  EXPECT_EQ(t1[0].score, -1.0);
  EXPECT_EQ(t1[1].score, -9.0);
  EXPECT_EQ(truncate_per_pair(ps, 3).size(), 4u);
}

TEST(RecallAt, PredictionsEqualGroundTruth) {
  Rng rng(1);
  const auto scenes = testing::random_scene_set(10, 8, rng);
  PredictionsByImage preds;
  for (const auto& [img, gts] : scenes.ground_truth) {
    for (const auto& g : gts) preds[img].push_back(as_prediction(img, g, rng.uniform()));
  }
  for (auto t : kEvalTasks) {
    for (auto r : kRecallAt) {
      const auto rc = recall_at(preds, scenes.ground_truth, r, 1, t);
      ASSERT_TRUE(rc.recall());
      EXPECT_EQ(*rc.recall(), 1.0);
    }
  }
}

TEST(RecallAt, NoPredictions) {
  GroundTruthByImage gts;
  gts["i"].push_back({kRide, {0, 0, 10, 10}, {10, 0, 10, 10}});
  const auto rc = recall_at({}, gts, 50, 1, EvalTask::kPredicate);
  EXPECT_EQ(rc.total, 1u);
  EXPECT_EQ(rc.recall(), 0.0);
  EXPECT_FALSE(recall_at({}, {}, 50, 1, EvalTask::kPredicate).recall());
}

TEST(RecallAt, OrphanImagesIgnored) {
  GroundTruthByImage gts;
  gts["i"].push_back({kRide, {0, 0, 10, 10}, {10, 0, 10, 10}});
  PredictionsByImage preds;
  preds["elsewhere"].push_back(as_prediction("elsewhere", gts["i"][0]));
  std::size_t orphans = 0;
  EXPECT_EQ(recall_at(preds, gts, 50, 1, EvalTask::kPredicate, &orphans).matched, 0u);
  EXPECT_EQ(orphans, 1u);
}

TEST(RecallAt, EachGroundTruthCreditedOnce) {
  GroundTruthByImage gts;
  const GroundTruth g{kRide, {0, 0, 10, 10}, {10, 0, 10, 10}};
  gts["i"] = {g, {kHold, {50, 0, 10, 10}, {60, 0, 10, 10}}};
  PredictionsByImage preds;
  auto p2 = as_prediction("i", g, -1);
  p2.subject_box.x += 1;  // a second pair, same labels
  preds["i"] = {as_prediction("i", g, 0), p2};
  const auto rc = recall_at(preds, gts, 50, 1, EvalTask::kRelationship);
  EXPECT_EQ(rc.matched, 1u);
  EXPECT_DOUBLE_EQ(*rc.recall(), 0.5);
}

TEST(RecallAt, PoolIsTruncatedPerImage) {
  GroundTruthByImage gts;
  PredictionsByImage preds;
  for (int k = 0; k < 60; ++k) {
    const GroundTruth g{kRide, {100.0 * k, 0, 10, 10}, {100.0 * k + 10, 0, 10, 10}};
    gts["i"].push_back(g);
    preds["i"].push_back(as_prediction("i", g, -double(k)));
  }
  EXPECT_EQ(recall_at(preds, gts, 50, 1, EvalTask::kRelationship).matched, 50u);
  EXPECT_EQ(recall_at(preds, gts, 100, 1, EvalTask::kRelationship).matched, 60u);
}

TEST(RecallAt, EqualsExhaustiveMatcher) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const auto s = testing::random_scene_set(5, 8, rng);
    for (auto task : kEvalTasks) {
      for (auto r : kRecallAt) {
        for (auto k : kTopK) {
          std::size_t want = 0, total = 0;
          for (const auto& [img, gts] : s.ground_truth) {
            total += gts.size();
            auto it = s.predictions.find(img);
            if (it == s.predictions.end()) continue;
            want += oracle::exhaustive_matches(oracle::reference_pool(it->second, k, r), gts, task);
          }
          const auto rc = recall_at(s.predictions, s.ground_truth, r, k, task);
          EXPECT_EQ(rc.total, total);
          EXPECT_EQ(rc.matched, want) << "instance " << t;
        }
      }
    }
  }
}

TEST(RecallAt, Monotonicity) {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto s = testing::random_scene_set(5, 8, rng);
    for (auto task : kEvalTasks) {
      for (auto k : kTopK) {
        EXPECT_GE(recall_at(s.predictions, s.ground_truth, 100, k, task).matched,
                  recall_at(s.predictions, s.ground_truth, 50, k, task).matched);
      }
      for (auto r : kRecallAt) {
        EXPECT_GE(recall_at(s.predictions, s.ground_truth, r, 3, task).matched,
                  recall_at(s.predictions, s.ground_truth, r, 1, task).matched);
      }
    }
    for (auto r : kRecallAt) {
      for (auto k : kTopK) {
        EXPECT_GE(recall_at(s.predictions, s.ground_truth, r, k, EvalTask::kPredicate).matched,
                  recall_at(s.predictions, s.ground_truth, r, k, EvalTask::kRelationship).matched);
      }
    }
  }
}

// Suite fixture: one train image, one seen test image, one zero-shot image.
struct SuiteFixture : ::testing::Test {
  std::vector<ImageRecord> records;
  SplitSpec split;

  static ImageRecord image(const std::string& id, const std::vector<std::pair<RelType, BoundingBox>>& rels) {
    ImageRecord rec;
    rec.image_id = id;
    rec.width = rec.height = 1000;
    for (std::size_t i = 0; i < rels.size(); ++i) {
      const auto& [t, b] = rels[i];
      const std::string h = "h" + std::to_string(i), o = "o" + std::to_string(i);
      rec.regions.push_back({h, std::string(to_string(t.subject)), b, 1});
      rec.regions.push_back({o, t.object, {b.x + 20, b.y, 10, 10}, 1});
      rec.relationships.push_back({h, t.predicate, o});
    }
    return rec;
  }

  void SetUp() override {
    const RelType feed{HumanSubtype::kMan, "feed", "horse"};
    records.push_back(image("train", {{kRide, {0, 0, 10, 10}}, {kHold, {100, 0, 10, 10}}, {kPush, {200, 0, 10, 10}}}));
    records.push_back(image("seen", {{kRide, {0, 0, 10, 10}}, {kHold, {100, 0, 10, 10}}}));
    records.push_back(image("zs", {{feed, {0, 0, 10, 10}}, {kRide, {100, 0, 10, 10}}}));
    split.train = {"train"};
    split.test_seen = {"seen"};
    split.test_zeroshot = {"zs"};
  }

  SuitePredictions scripted() const {
    const auto g = ground_truth_of(records[1]);
    SuitePredictions sp;
    sp.detection.push_back(as_prediction("seen", g[0], -0.1));
    auto push = as_prediction("seen", g[0], -0.2);
    push.type = kPush;
    sp.detection.push_back(push);
    // Second pair: subject box IoU 0.4 with the GT, identical union box.
    auto wrong = as_prediction("seen", g[1], -0.05);
    wrong.subject_box = {100, 0, 4, 10};
    wrong.type.predicate = "push";
    sp.detection.push_back(wrong);
    auto hold = wrong;
    hold.type = kHold;
    hold.score = -0.4;
    sp.detection.push_back(hold);
    return sp;
  }
};

TEST_F(SuiteFixture, EmptyPredictions) {
  const auto rep = run_suite(records, split, {}, Suite::kFull);
  EXPECT_EQ(rep.gt_instances, 2u);
  ASSERT_EQ(rep.cells.size(), 12u);
  for (const auto& c : rep.cells) {
    EXPECT_EQ(c.count.total, 2u);
    EXPECT_EQ(c.count.recall(), 0.0);
  }
}

TEST_F(SuiteFixture, GroundTruthPredictionsScoreOne) {
  SuitePredictions sp;
  for (const auto& rec : records) {
    for (const auto& g : ground_truth_of(rec)) sp.detection.push_back(as_prediction(rec.image_id, g));
  }
  for (auto suite : {Suite::kFull, Suite::kZeroshot}) {
    const auto rep = run_suite(records, split, sp, suite);
    for (const auto& c : rep.cells) EXPECT_EQ(c.count.recall(), 1.0);
  }
}

TEST_F(SuiteFixture, LongtailWithoutLongtailTypesIsUndefined) {
  const auto rep = run_suite(records, split, scripted(), Suite::kLongtail);
  EXPECT_EQ(rep.gt_instances, 0u);
  for (const auto& c : rep.cells) EXPECT_FALSE(c.count.recall());
  const auto j = report_to_json(rep);
  EXPECT_FALSE(j["recall_defined"].get<bool>());
  EXPECT_TRUE(j["cells"][0]["recall"].is_null());
  EXPECT_NE(report_to_csv({rep}).find("longtail,predicate_det,50,1,,0,0"), std::string::npos);
}

TEST_F(SuiteFixture, LongtailRestrictsGroundTruth) {
  split.longtail_types = {kHold};
  const auto rep = run_suite(records, split, scripted(), Suite::kLongtail);
  EXPECT_EQ(rep.gt_instances, 1u);
  EXPECT_EQ(*rep.cell(EvalTask::kPredicate, 50, 1).count.recall(), 0.0);
  EXPECT_EQ(*rep.cell(EvalTask::kPredicate, 50, 3).count.recall(), 1.0);
}

TEST_F(SuiteFixture, ZeroshotKeepsUnseenTypesOnly) {
  const auto rep = run_suite(records, split, {}, Suite::kZeroshot);
  EXPECT_EQ(rep.gt_instances, 1u);
  ASSERT_EQ(rep.per_type.size(), 1u);
  EXPECT_EQ(rep.per_type[0].type.predicate, "feed");
}

TEST_F(SuiteFixture, HandComputedCells) {
  const auto rep = run_suite(records, split, scripted(), Suite::kFull);
  for (auto r : kRecallAt) {
    EXPECT_EQ(*rep.cell(EvalTask::kPredicate, r, 1).count.recall(), 0.5);
    EXPECT_EQ(*rep.cell(EvalTask::kPredicate, r, 3).count.recall(), 1.0);
    EXPECT_EQ(*rep.cell(EvalTask::kPhrase, r, 1).count.recall(), 0.5);
    EXPECT_EQ(*rep.cell(EvalTask::kPhrase, r, 3).count.recall(), 1.0);
    EXPECT_EQ(*rep.cell(EvalTask::kRelationship, r, 1).count.recall(), 0.5);
    EXPECT_EQ(*rep.cell(EvalTask::kRelationship, r, 3).count.recall(), 0.5);
  }
  const auto j = report_to_json(rep);
  EXPECT_TRUE(j["recall_defined"].get<bool>());
  EXPECT_EQ(j["per_type_r50_top1"].size(), 2u);
}

TEST_F(SuiteFixture, SeparatePredicateFile) {
  auto sp = scripted();
  for (const auto& g : ground_truth_of(records[1])) sp.predicate.push_back(as_prediction("seen", g));
  const auto rep = run_suite(records, split, sp, Suite::kFull);
  EXPECT_EQ(*rep.cell(EvalTask::kPredicate, 50, 1).count.recall(), 1.0);
  EXPECT_EQ(*rep.cell(EvalTask::kRelationship, 50, 1).count.recall(), 0.5);
}

TEST_F(SuiteFixture, UnknownLabelsTallied) {
  auto sp = scripted();
  sp.detection[0].type.predicate = "juggle";
  sp.unknown_subjects = 3;
  const auto rep = run_suite(records, split, sp, Suite::kFull);
  EXPECT_EQ(rep.diagnostics.unknown_label_predictions, 1u);
  EXPECT_EQ(rep.diagnostics.unknown_subject_predictions, 3u);
}

TEST(ParseSuite, Names) {
  EXPECT_EQ(parse_suite("longtail"), Suite::kLongtail);
  EXPECT_THROW(parse_suite("all"), Error);
}

}  // namespace
}  // namespace hoirel
