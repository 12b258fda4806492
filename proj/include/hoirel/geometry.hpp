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

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "hoirel/relmodel.hpp"

namespace hoirel {

struct Detection {
  std::string region_id;
  std::string category;  // object name or a human subtype name
  BoundingBox box;
  double score = 1.0;  // objectness in [0, 1]

  bool is_human() const { return parse_subtype(category).has_value(); }
};

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0 || ih <= 0) return 0.0;
  return iw * ih;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  // Areas from corners, consistent with the intersection arithmetic, so that
  // iou(a, a) is exactly 1.
  const double area_a = (a.right() - a.x) * (a.bottom() - a.y);
  const double area_b = (b.right() - b.x) * (b.bottom() - b.y);
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

struct NmsParams {
  double iou_threshold = 0.3;
  double score_threshold = 0.2;
};

// Greedy per-category suppression. Detections scoring at or below the score
// threshold are dropped first; equal scores keep input order. Output is sorted
// by descending score.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, NmsParams params = {}) {
  std::vector<std::size_t> order;
  order.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].score > params.score_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (dets[k].category == dets[i].category &&
          iou(dets[k].box, dets[i].box) > params.iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }

  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(dets[k]);
  return out;
}

struct CandidatePair {
  Detection human;
  Detection object;
  BoundingBox union_box;
};

// Every human detection paired with every non-human detection.
inline std::vector<CandidatePair> pair_candidates(const std::vector<Detection>& dets) {
  std::vector<CandidatePair> pairs;
  for (const auto& h : dets) {
    if (!h.is_human()) continue;
    for (const auto& o : dets) {
      if (o.is_human()) continue;
      pairs.push_back({h, o, union_box(h.box, o.box)});
    }
  }
  return pairs;
}

inline std::vector<Detection> detections_of(const ImageRecord& rec) {
  std::vector<Detection> out;
  out.reserve(rec.regions.size());
  for (const auto& r : rec.regions) out.push_back({r.id, r.category, r.box, r.score});
  return out;
}

}  // namespace hoirel
