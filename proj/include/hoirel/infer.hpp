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

// Relationship prediction by nearest-neighbour search against embedded web
// samples, restricted to candidates compatible with the detected categories.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hoirel/common.hpp"
#include "hoirel/feature_store.hpp"
#include "hoirel/geometry.hpp"
#include "hoirel/ingest.hpp"
#include "hoirel/metric.hpp"
#include "hoirel/relmodel.hpp"
#include "hoirel/webfilter.hpp"

namespace hoirel {

inline constexpr std::size_t kDefaultNeighbors = 20;

struct WebIndex {
  std::vector<std::vector<double>> embeddings;
  std::vector<RelType> labels;
  std::vector<std::string> sample_ids;
  std::map<RelType, std::vector<double>> class_means;  // mean raw feature per type

  std::size_t size() const { return embeddings.size(); }
};

// Embeds kept web samples with the web branch. When a universe is given,
// only samples of types in it are indexed.
inline WebIndex build_index(const MetricModel& model, const WebCorpus& corpus,
                            const std::set<RelType>* universe = nullptr) {
  WebIndex idx;
  std::map<RelType, std::pair<std::vector<double>, std::size_t>> sums;
  for (const auto& s : corpus.samples) {
    if (!s.kept) continue;
    if (universe && !universe->count(s.cls)) continue;
    idx.embeddings.push_back(embed_web(model, s.features));
    idx.labels.push_back(s.cls);
    idx.sample_ids.push_back(s.sample_id);
    auto& [sum, n] = sums[s.cls];
    if (sum.empty()) sum.assign(s.features.size(), 0.0);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += s.features[k];
    ++n;
  }
  for (auto& [cls, acc] : sums) {
    for (auto& v : acc.first) v /= static_cast<double>(acc.second);
    idx.class_means.emplace(cls, std::move(acc.first));
  }
  return idx;
}

struct Neighbor {
  std::size_t index = 0;
  RelType label;
  double distance = 0;
};

// Exact k nearest neighbours by Euclidean distance; ties broken by sample id.
inline std::vector<Neighbor> knn_retrieve(std::span<const double> query, const WebIndex& index,
                                          std::size_t k = kDefaultNeighbors) {
  if (index.size() == 0) throw Error("knn_retrieve: empty index");
  if (k == 0) throw Error("knn_retrieve: k must be >= 1");
  std::vector<std::pair<double, std::size_t>> d(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) d[i] = {pair_distance(query, index.embeddings[i]), i};
  const std::size_t take = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), d.end(),
                    [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first < b.first;
                      return index.sample_ids[a.second] < index.sample_ids[b.second];
                    });
  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({d[i].second, index.labels[d[i].second], d[i].first});
  return out;
}

enum class Aggregation { kBestDistance, kVote };

inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "best" || s == "best_distance") return Aggregation::kBestDistance;
  if (s == "vote") return Aggregation::kVote;
  throw Error("unknown aggregation '" + std::string(s) + "' (expected best or vote)");
}

struct PredicateCandidate {
  std::string predicate;
  double distance = 0;  // best (smallest) neighbour distance
  std::size_t votes = 0;
};

// Keeps neighbours whose subject and object match the pair, collapsed to one
// entry per predicate. Best-distance aggregation ranks by ascending distance;
// vote aggregation ranks by neighbour count, then distance.
inline std::vector<PredicateCandidate> constrain_candidates(const std::vector<Neighbor>& neighbors,
                                                            HumanSubtype human, std::string_view object,
                                                            Aggregation agg = Aggregation::kBestDistance,
                                                            const std::set<RelType>* allowed = nullptr) {
  std::map<std::string, PredicateCandidate> by_pred;
  for (const auto& n : neighbors) {
    if (n.label.subject != human || n.label.object != object) continue;
    if (allowed && !allowed->count(n.label)) continue;
    auto [it, inserted] = by_pred.try_emplace(n.label.predicate, PredicateCandidate{n.label.predicate, n.distance, 0});
    it->second.distance = std::min(it->second.distance, n.distance);
    ++it->second.votes;
  }
  std::vector<PredicateCandidate> out;
  for (auto& [p, c] : by_pred) out.push_back(std::move(c));
  std::stable_sort(out.begin(), out.end(), [agg](const auto& a, const auto& b) {
    if (agg == Aggregation::kVote && a.votes != b.votes) return a.votes > b.votes;
    return a.distance < b.distance;
  });
  return out;
}

// All universe triples whose subject and object match the pair.
inline std::set<RelType> zero_shot_space(HumanSubtype human, std::string_view object,
                                         const std::set<RelType>& universe) {
  std::set<RelType> out;
  for (const auto& t : universe) {
    if (t.subject == human && t.object == object) out.insert(t);
  }
  return out;
}

// A labelled pair of boxes with a ranking score (larger is better).
struct ScoredTriplet {
  std::string image_id;
  RelType type;
  BoundingBox subject_box;
  BoundingBox object_box;
  double score = 0;

  BoundingBox union_box() const { return hoirel::union_box(subject_box, object_box); }
};

struct PredictOptions {
  std::size_t top_k = 3;
  std::size_t neighbors = kDefaultNeighbors;
  Aggregation aggregation = Aggregation::kBestDistance;
  const std::set<RelType>* universe = nullptr;  // restricts candidates when set
};

struct PredictDiagnostics {
  std::size_t pairs = 0;
  std::size_t missing_features = 0;
  std::size_t empty_candidate_pairs = 0;

  PredictDiagnostics& operator+=(const PredictDiagnostics& o) {
    pairs += o.pairs;
    missing_features += o.missing_features;
    empty_candidate_pairs += o.empty_candidate_pairs;
    return *this;
  }
};

// Key of the union-region feature of a (subject region, object region) pair.
inline std::string union_feature_id(std::string_view image_id, std::string_view subject_region,
                                    std::string_view object_region) {
  std::string s;
  s.reserve(image_id.size() + subject_region.size() + object_region.size() + 2);
  s.append(image_id).append("|").append(subject_region).append("|").append(object_region);
  return s;
}

// Scores the given pairs: dataset-branch embedding of the union feature,
// neighbour retrieval, category constraint, top_k predicates per pair with
// score = -distance.
inline std::vector<ScoredTriplet> predict_pairs(const std::string& image_id, const std::vector<CandidatePair>& pairs,
                                                const FeatureStore& union_features, const MetricModel& model,
                                                const WebIndex& index, const PredictOptions& opt,
                                                PredictDiagnostics* diag = nullptr) {
  PredictDiagnostics local;
  std::vector<ScoredTriplet> out;
  for (const auto& p : pairs) {
    ++local.pairs;
    const auto human = parse_subtype(p.human.category);
    if (!human) continue;
    auto feat = union_features.get(union_feature_id(image_id, p.human.region_id, p.object.region_id));
    if (!feat) {
      ++local.missing_features;
      continue;
    }
    const auto emb = embed_dataset(model, *feat);
    const auto nn = knn_retrieve(emb, index, opt.neighbors);
    std::set<RelType> space;
    if (opt.universe) space = zero_shot_space(*human, p.object.category, *opt.universe);
    const auto cands = constrain_candidates(nn, *human, p.object.category, opt.aggregation,
                                            opt.universe ? &space : nullptr);
    if (cands.empty()) ++local.empty_candidate_pairs;
    for (std::size_t r = 0; r < std::min(opt.top_k, cands.size()); ++r) {
      out.push_back({image_id, RelType{*human, cands[r].predicate, p.object.category}, p.human.box, p.object.box,
                     -cands[r].distance});
    }
  }
  if (diag) *diag += local;
  return out;
}

// Detection mode: NMS-filtered detections are paired and scored.
inline std::vector<ScoredTriplet> predict_triplets(const std::string& image_id, const std::vector<Detection>& dets,
                                                   const FeatureStore& union_features, const MetricModel& model,
                                                   const WebIndex& index, const PredictOptions& opt,
                                                   PredictDiagnostics* diag = nullptr) {
  return predict_pairs(image_id, pair_candidates(dets), union_features, model, index, opt, diag);
}

// Annotated (subject, object) pairs of an image, each once, in annotation order.
inline std::vector<CandidatePair> ground_truth_pairs(const ImageRecord& rec) {
  std::vector<CandidatePair> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& rel : rec.relationships) {
    if (!seen.emplace(rel.subject, rel.object).second) continue;
    const Region* s = rec.find_region(rel.subject);
    const Region* o = rec.find_region(rel.object);
    Detection hs{s->id, s->category, s->box, 1.0};
    Detection os{o->id, o->category, o->box, 1.0};
    out.push_back({hs, os, union_box(s->box, o->box)});
  }
  return out;
}

struct BaselineScore {
  std::string predicate;
  double similarity = 0;
};

// Cosine similarity of the raw query feature against each class mean whose
// subject and object match; top_k by descending similarity.
inline std::vector<BaselineScore> classmean_baseline(std::span<const double> query, const WebIndex& index,
                                                     HumanSubtype human, std::string_view object, std::size_t top_k) {
  std::vector<BaselineScore> out;
  double qn = 0;
  for (double v : query) qn += v * v;
  for (const auto& [cls, mean] : index.class_means) {
    if (cls.subject != human || cls.object != object) continue;
    if (mean.size() != query.size()) throw Error("classmean_baseline: dimension mismatch");
    double mn = 0, dot = 0;
    for (std::size_t k = 0; k < mean.size(); ++k) {
      mn += mean[k] * mean[k];
      dot += mean[k] * query[k];
    }
    const double sim = (qn <= 0 || mn <= 0) ? -1.0 : dot / (std::sqrt(qn) * std::sqrt(mn));
    out.push_back({cls.predicate, sim});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.similarity > b.similarity; });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

// Prediction file --------------------------------------------------------------

inline json prediction_to_json(const ScoredTriplet& p) {
  return {{"image_id", p.image_id},
          {"subject", std::string(to_string(p.type.subject))},
          {"predicate", p.type.predicate},
          {"object", p.type.object},
          {"subject_box", detail::box_to_json(p.subject_box)},
          {"object_box", detail::box_to_json(p.object_box)},
          {"score", p.score}};
}

inline void write_predictions(const std::string& path, const std::vector<ScoredTriplet>& preds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (const auto& p : preds) out << prediction_to_json(p).dump() << '\n';
}

struct PredictionFile {
  std::vector<ScoredTriplet> predictions;
  std::size_t unknown_subjects = 0;  // subject not one of the four subtypes; dropped
};

inline PredictionFile read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  PredictionFile pf;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      auto subject = parse_subtype(normalize_name(j.at("subject").get<std::string>()));
      if (!subject) {
        ++pf.unknown_subjects;
        continue;
      }
      ScoredTriplet p;
      p.image_id = j.at("image_id").get<std::string>();
      p.type = {*subject, normalize_name(j.at("predicate").get<std::string>()),
                normalize_name(j.at("object").get<std::string>())};
      p.subject_box = detail::box_from_json(j.at("subject_box"));
      p.object_box = detail::box_from_json(j.at("object_box"));
      p.score = j.at("score").get<double>();
      if (!std::isfinite(p.score)) throw Error("non-finite score");
      pf.predictions.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pf;
}

}  // namespace hoirel
