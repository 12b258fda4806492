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

#pragma once

// Recall@R for predicate, phrase and relationship detection, over the full
// test split, the long-tail subset and the zero-shot split.

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "hoirel/common.hpp"
#include "hoirel/geometry.hpp"
#include "hoirel/infer.hpp"
#include "hoirel/ingest.hpp"
#include "hoirel/relmodel.hpp"

namespace hoirel {

enum class EvalTask { kPredicate, kPhrase, kRelationship };

inline constexpr std::array<EvalTask, 3> kEvalTasks = {EvalTask::kPredicate, EvalTask::kPhrase,
                                                       EvalTask::kRelationship};
inline constexpr std::array<std::size_t, 2> kRecallAt = {50, 100};
inline constexpr std::array<std::size_t, 2> kTopK = {1, 3};
inline constexpr double kMatchIoU = 0.5;

inline std::string_view to_string(EvalTask t) {
  switch (t) {
    case EvalTask::kPredicate: return "predicate_det";
    case EvalTask::kPhrase: return "phrase_det";
    case EvalTask::kRelationship: return "relationship_det";
  }
  return "?";
}

struct GroundTruth {
  RelType type;
  BoundingBox subject_box;
  BoundingBox object_box;

  BoundingBox union_box() const { return hoirel::union_box(subject_box, object_box); }
};

inline std::vector<GroundTruth> ground_truth_of(const ImageRecord& rec) {
  std::vector<GroundTruth> out;
  for (const auto& rel : rec.relationships) {
    auto t = relationship_type(rec, rel);
    if (!t) continue;
    out.push_back({*t, rec.find_region(rel.subject)->box, rec.find_region(rel.object)->box});
  }
  return out;
}

inline bool match_instance(const ScoredTriplet& pred, const GroundTruth& gt, EvalTask task) {
  if (pred.type != gt.type) return false;
  switch (task) {
    case EvalTask::kPredicate:
      return true;
    case EvalTask::kPhrase:
      return iou(pred.union_box(), gt.union_box()) >= kMatchIoU;
    case EvalTask::kRelationship:
      return iou(pred.subject_box, gt.subject_box) >= kMatchIoU && iou(pred.object_box, gt.object_box) >= kMatchIoU;
  }
  return false;
}

// Keeps the top_k highest-scoring predictions of every (subject, object) pair
// (same labels and boxes). Relative order is preserved.
inline std::vector<ScoredTriplet> truncate_per_pair(const std::vector<ScoredTriplet>& preds, std::size_t top_k) {
  using Key = std::tuple<std::string, HumanSubtype, std::string, std::array<double, 4>, std::array<double, 4>>;
  std::map<Key, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    groups[{p.image_id, p.type.subject, p.type.object, p.subject_box.as_array(), p.object_box.as_array()}].push_back(i);
  }
  std::vector<bool> keep(preds.size(), false);
  for (auto& [key, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
    for (std::size_t r = 0; r < std::min(top_k, idx.size()); ++r) keep[idx[r]] = true;
  }
  std::vector<ScoredTriplet> out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (keep[i]) out.push_back(preds[i]);
  }
  return out;
}

// Top-R predictions of one image in descending score order (stable).
inline std::vector<ScoredTriplet> ranked_pool(std::vector<ScoredTriplet> preds, std::size_t recall_at) {
  std::stable_sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  if (preds.size() > recall_at) preds.resize(recall_at);
  return preds;
}

// Greedy one-to-one matching in score order; returns the GT indices matched.
inline std::vector<bool> greedy_match(const std::vector<ScoredTriplet>& ranked, const std::vector<GroundTruth>& gts,
                                      EvalTask task) {
  std::vector<bool> matched(gts.size(), false);
  for (const auto& p : ranked) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!matched[g] && match_instance(p, gts[g], task)) {
        matched[g] = true;
        break;
      }
    }
  }
  return matched;
}

struct RecallCount {
  std::size_t matched = 0;
  std::size_t total = 0;

  std::optional<double> recall() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(matched) / static_cast<double>(total);
  }
};

using PredictionsByImage = std::map<std::string, std::vector<ScoredTriplet>>;
using GroundTruthByImage = std::map<std::string, std::vector<GroundTruth>>;

inline PredictionsByImage group_by_image(const std::vector<ScoredTriplet>& preds) {
  PredictionsByImage m;
  for (const auto& p : preds) m[p.image_id].push_back(p);
  return m;
}

// Fraction of GT instances matched within each image's top-R predictions.
// Predictions for images without a GT entry are ignored and counted in
// *orphan_images.
inline RecallCount recall_at(const PredictionsByImage& preds, const GroundTruthByImage& gts, std::size_t recall_at,
                             std::size_t top_k, EvalTask task, std::size_t* orphan_images = nullptr) {
  RecallCount rc;
  std::size_t orphans = 0;
  for (const auto& [img, ps] : preds) {
    if (!gts.count(img)) ++orphans;
  }
  for (const auto& [img, g] : gts) {
    rc.total += g.size();
    auto it = preds.find(img);
    if (it == preds.end()) continue;
    const auto ranked = ranked_pool(truncate_per_pair(it->second, top_k), recall_at);
    const auto m = greedy_match(ranked, g, task);
    rc.matched += static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
  }
  if (orphan_images) *orphan_images = orphans;
  return rc;
}

// Suites -----------------------------------------------------------------------

enum class Suite { kFull, kLongtail, kZeroshot };

inline constexpr std::array<Suite, 3> kSuites = {Suite::kFull, Suite::kLongtail, Suite::kZeroshot};

inline std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::kFull: return "full";
    case Suite::kLongtail: return "longtail";
    case Suite::kZeroshot: return "zeroshot";
  }
  return "?";
}

inline Suite parse_suite(std::string_view s) {
  for (auto v : kSuites) {
    if (to_string(v) == s) return v;
  }
  throw Error("unknown suite '" + std::string(s) + "' (expected full, longtail or zeroshot)");
}

struct EvalCell {
  EvalTask task;
  std::size_t recall_at;
  std::size_t top_k;
  RecallCount count;
};

struct TypeRecall {
  RelType type;
  std::size_t gt = 0;
  std::array<std::size_t, 3> matched{};  // per task at R=50, top-1
};

struct EvalDiagnostics {
  std::size_t unknown_label_predictions = 0;
  std::size_t unknown_subject_predictions = 0;
  std::size_t orphan_prediction_images = 0;
};

struct EvalReport {
  Suite suite = Suite::kFull;
  std::size_t gt_instances = 0;
  std::size_t images = 0;
  std::vector<EvalCell> cells;  // task x R x top_k
  std::vector<TypeRecall> per_type;
  EvalDiagnostics diagnostics;

  const EvalCell& cell(EvalTask t, std::size_t r, std::size_t k) const {
    for (const auto& c : cells) {
      if (c.task == t && c.recall_at == r && c.top_k == k) return c;
    }
    throw Error("no such report cell");
  }
};

struct SuitePredictions {
  std::vector<ScoredTriplet> detection;  // phrase and relationship detection
  std::vector<ScoredTriplet> predicate;  // predicate detection (ground-truth boxes); empty -> use detection
  std::size_t unknown_subjects = 0;
};

// Ground truth restricted to a suite: full uses test_seen; longtail keeps
// test_seen instances of long-tail types; zeroshot keeps test_zeroshot
// instances of types absent from train.
inline GroundTruthByImage suite_ground_truth(const std::vector<ImageRecord>& records, const SplitSpec& split,
                                             Suite suite) {
  std::set<RelType> train_types;
  const std::set<std::string> train_ids(split.train.begin(), split.train.end());
  for (const auto& [t, n] : type_counts(records, &train_ids)) train_types.insert(t);
  const auto& ids = suite == Suite::kZeroshot ? split.test_zeroshot : split.test_seen;
  const std::set<std::string> wanted(ids.begin(), ids.end());

  GroundTruthByImage out;
  for (const auto& rec : records) {
    if (!wanted.count(rec.image_id)) continue;
    auto& dst = out[rec.image_id];
    for (auto& g : ground_truth_of(rec)) {
      if (suite == Suite::kLongtail && !split.longtail_types.count(g.type)) continue;
      if (suite == Suite::kZeroshot && train_types.count(g.type)) continue;
      dst.push_back(std::move(g));
    }
  }
  return out;
}

inline EvalReport run_suite(const std::vector<ImageRecord>& records, const SplitSpec& split,
                            const SuitePredictions& input, Suite suite) {
  EvalReport rep;
  rep.suite = suite;
  const auto gts = suite_ground_truth(records, split, suite);
  rep.images = gts.size();
  for (const auto& [img, g] : gts) rep.gt_instances += g.size();

  std::set<std::string> predicates, objects;
  for (const auto& [t, n] : type_counts(records)) {
    predicates.insert(t.predicate);
    objects.insert(t.object);
  }
  // Predictions for images outside the suite never reach a GT list below.
  auto index_predictions = [&](const std::vector<ScoredTriplet>& preds) {
    std::vector<ScoredTriplet> kept;
    for (const auto& p : preds) {
      if (!predicates.count(p.type.predicate) || !objects.count(p.type.object)) {
        ++rep.diagnostics.unknown_label_predictions;
      }
      kept.push_back(p);
    }
    return group_by_image(kept);
  };
  const auto det = index_predictions(input.detection);
  const auto pred = input.predicate.empty() ? det : index_predictions(input.predicate);
  rep.diagnostics.unknown_subject_predictions = input.unknown_subjects;
  std::set<std::string> known_images;
  for (const auto& r : records) known_images.insert(r.image_id);
  for (const auto& [img, ps] : det) rep.diagnostics.orphan_prediction_images += !known_images.count(img);

  for (auto task : kEvalTasks) {
    const auto& source = task == EvalTask::kPredicate ? pred : det;
    for (auto r : kRecallAt) {
      for (auto k : kTopK) rep.cells.push_back({task, r, k, recall_at(source, gts, r, k, task)});
    }
  }

  std::map<RelType, TypeRecall> per_type;
  for (const auto& [img, g] : gts) {
    for (const auto& x : g) {
      auto& tr = per_type[x.type];
      tr.type = x.type;
      ++tr.gt;
    }
  }
  for (std::size_t ti = 0; ti < kEvalTasks.size(); ++ti) {
    const auto task = kEvalTasks[ti];
    const auto& source = task == EvalTask::kPredicate ? pred : det;
    for (const auto& [img, g] : gts) {
      auto it = source.find(img);
      if (it == source.end()) continue;
      const auto m = greedy_match(ranked_pool(truncate_per_pair(it->second, 1), 50), g, task);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (m[i]) ++per_type[g[i].type].matched[ti];
      }
    }
  }
  for (auto& [t, tr] : per_type) rep.per_type.push_back(tr);
  return rep;
}

inline json report_to_json(const EvalReport& rep) {
  json cells = json::array();
  for (const auto& c : rep.cells) {
    const auto r = c.count.recall();
    cells.push_back({{"task", std::string(to_string(c.task))},
                     {"R", c.recall_at},
                     {"top_k", c.top_k},
                     {"recall", r ? json(*r) : json(nullptr)},
                     {"matched", c.count.matched},
                     {"total", c.count.total}});
  }
  json per_type = json::array();
  for (const auto& t : rep.per_type) {
    per_type.push_back({{"type", reltype_to_json(t.type)},
                        {"gt", t.gt},
                        {"predicate_det", t.matched[0]},
                        {"phrase_det", t.matched[1]},
                        {"relationship_det", t.matched[2]}});
  }
  return {{"suite", std::string(to_string(rep.suite))},
          {"images", rep.images},
          {"gt_instances", rep.gt_instances},
          {"recall_defined", rep.gt_instances > 0},
          {"cells", cells},
          {"per_type_r50_top1", per_type},
          {"diagnostics",
           {{"unknown_label_predictions", rep.diagnostics.unknown_label_predictions},
            {"unknown_subject_predictions", rep.diagnostics.unknown_subject_predictions},
            {"orphan_prediction_images", rep.diagnostics.orphan_prediction_images}}}};
}

// CSV flattening: suite,task,R,top_k,recall,matched,total (recall empty when undefined).
inline std::string report_to_csv(const std::vector<EvalReport>& reports) {
  std::string out = "suite,task,R,top_k,recall,matched,total\n";
  char buf[256];
  for (const auto& rep : reports) {
    for (const auto& c : rep.cells) {
      const auto r = c.count.recall();
      std::string rs;
      if (r) {
        std::snprintf(buf, sizeof buf, "%.6f", *r);
        rs = buf;
      }
      std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%s,%zu,%zu\n", std::string(to_string(rep.suite)).c_str(),
                    std::string(to_string(c.task)).c_str(), c.recall_at, c.top_k, rs.c_str(), c.count.matched,
                    c.count.total);
      out += buf;
    }
  }
  return out;
}

}  // namespace hoirel
