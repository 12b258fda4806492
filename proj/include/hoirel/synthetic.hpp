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

// Synthetic benchmark fixture: raw annotations with messy labels, the cleanup
// tables that repair them, union-region and web features drawn from one
// Gaussian cluster per relationship type, detections with duplicates and
// clutter, and a web corpus with planted label noise.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hoirel/feature_store.hpp"
#include "hoirel/infer.hpp"
#include "hoirel/ingest.hpp"

namespace hoirel {

struct SyntheticOptions {
  std::size_t images = 100;
  std::size_t dim = 32;
  std::size_t types = 28;
  std::size_t web_per_type = 30;
  double web_noise = 0.2;
  double cluster_norm = 40.0;  // comparable to CNN activation norms
  double sigma = 5.0;
  std::uint64_t seed = 1;
};

namespace synth_detail {

struct Catalogue {
  // canonical -> raw spellings; the first entry is the canonical form itself
  std::vector<std::pair<std::string, std::vector<std::string>>> predicates = {
      {"ride", {"ride", "riding", "Rides,"}},   {"hold", {"hold", "holding", "holds"}},
      {"push", {"push", "pushing"}},            {"feed", {"feed", "feeding", "feeds"}},
      {"carry", {"carry", "carrying", "carries"}}, {"wash", {"wash", "washing"}},
      {"walk", {"walk", "walking"}}};
  std::vector<std::pair<std::string, std::vector<std::string>>> objects = {
      {"bicycle", {"bicycle", "bike", "Bicycle"}}, {"horse", {"horse", "hrose"}},
      {"cup", {"cup", "coffee cup"}},               {"dog", {"dog"}},
      {"umbrella", {"umbrella"}},                   {"kite", {"kite"}}};
  std::vector<std::vector<std::string>> humans = {
      {"man", "guy", "gentleman", "Man "}, {"woman", "lady"}, {"boy", "kid"}, {"girl", "little girl"}};
};

inline std::vector<double> random_direction(std::size_t dim, double norm, Rng& rng) {
  std::vector<double> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  n = std::sqrt(n);
  for (auto& x : v) x *= norm / n;
  return v;
}

inline std::vector<float> draw(const std::vector<double>& mean, double sigma, Rng& rng) {
  std::vector<float> f(mean.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(mean[i] + sigma * rng.normal());
  return f;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
}

}  // namespace synth_detail

struct SyntheticSummary {
  std::size_t images = 0;
  std::size_t relationships = 0;
  std::size_t union_features = 0;
  std::size_t web_samples = 0;
};

// Writes the fixture files and a config.toml into dir.
inline SyntheticSummary write_synthetic_fixture(const std::string& dir, const SyntheticOptions& opt = {}) {
  namespace sd = synth_detail;
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  const sd::Catalogue cat;
  Rng rng(opt.seed);

  // Distinct relationship types with Zipf-like frequencies.
  std::vector<std::array<std::size_t, 3>> types;  // (subtype, predicate, object) indices
  std::set<std::array<std::size_t, 3>> taken;
  const std::size_t max_types = 4 * cat.predicates.size() * cat.objects.size();
  while (types.size() < std::min(opt.types, max_types)) {
    const std::array<std::size_t, 3> t = {rng.index(4), rng.index(cat.predicates.size()),
                                          rng.index(cat.objects.size())};
    if (taken.insert(t).second) types.push_back(t);
  }
  std::vector<double> cumulative;
  double total_weight = 0;
  for (std::size_t r = 0; r < types.size(); ++r) cumulative.push_back(total_weight += 1.0 / double(r + 1));
  auto draw_type = [&]() {
    const double u = rng.uniform() * total_weight;
    return static_cast<std::size_t>(std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
  };
  auto reltype = [&](std::size_t t) {
    return RelType{kHumanSubtypes[types[t][0]], cat.predicates[types[t][1]].first, cat.objects[types[t][2]].first};
  };
  std::vector<std::vector<double>> means;
  for (std::size_t t = 0; t < types.size(); ++t) means.push_back(sd::random_direction(opt.dim, opt.cluster_norm, rng));
  auto pick = [&](const std::vector<std::string>& v) { return v[rng.index(v.size())]; };

  std::vector<ImageRecord> annotations, detections;
  FeatureStore union_features(opt.dim);
  SyntheticSummary summary;
  std::set<std::size_t> used_types;
  for (std::size_t i = 0; i < opt.images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "img%04zu", i);
    ImageRecord ann, det;
    ann.image_id = det.image_id = id;
    ann.width = det.width = 1000;
    ann.height = det.height = 400;

    struct Planted {
      std::string subject, object;
      std::size_t type;
    };
    std::vector<Planted> planted;
    std::map<std::string, std::string> clean_category;  // detectable regions only
    const std::size_t persons = 1 + rng.index(2);
    for (std::size_t p = 0; p < persons; ++p) {
      // All relationships of a person share its subtype; objects sit to its right.
      const std::size_t first = draw_type();
      const std::size_t subtype = types[first][0];
      const std::string h = "p" + std::to_string(p);
      const BoundingBox hbox{20.0 + 480.0 * double(p), 20, 100, 200};
      ann.regions.push_back({h, pick(cat.humans[subtype]), hbox, 1.0});
      clean_category[h] = cat.humans[subtype][0];
      const std::size_t n_rel = 1 + rng.index(2);
      for (std::size_t k = 0; k < n_rel; ++k) {
        std::size_t t = first;
        if (k > 0) {
          for (int tries = 0; tries < 20; ++tries) {
            t = draw_type();
            if (types[t][0] == subtype) break;
          }
          if (types[t][0] != subtype) continue;
        }
        const std::string o = h + "o" + std::to_string(k);
        const BoundingBox obox{140.0 + 480.0 * double(p) + 110.0 * double(k), 60, 90, 90};
        ann.regions.push_back({o, pick(cat.objects[types[t][2]].second), obox, 1.0});
        ann.relationships.push_back({h, pick(cat.predicates[types[t][1]].second), o});
        planted.push_back({h, o, t});
        clean_category[o] = cat.objects[types[t][2]].first;
        used_types.insert(t);
      }
      // Attribute predicate on a separate region; removed by cleanup.
      if (rng.uniform() < 0.15) {
        const std::string a = h + "a";
        ann.regions.push_back({a, "umbrella", {20.0 + 480.0 * double(p), 300, 60, 60}, 1.0});
        ann.relationships.push_back({h, rng.uniform() < 0.5 ? "has" : "Is", a});
      }
    }
    // A non-human subject; dropped by cleanup.
    if (rng.uniform() < 0.1) {
      ann.regions.push_back({"x0", "dog", {900, 300, 50, 50}, 1.0});
      ann.regions.push_back({"x1", "kite", {900, 200, 50, 50}, 1.0});
      ann.relationships.push_back({"x0", "chase", "x1"});
    }

    // Union features for annotated pairs.
    for (const auto& pl : planted) {
      union_features.add(union_feature_id(ann.image_id, pl.subject, pl.object),
                         sd::draw(means[pl.type], opt.sigma, rng));
    }

    // Detections: jittered copies of the clean regions, NMS-suppressed
    // duplicates, and low-score clutter.
    std::map<std::string, std::string> det_of;  // annotation region -> detection id
    std::size_t next = 0;
    auto add_det = [&](const std::string& category, const BoundingBox& b, double score) {
      const std::string did = "d" + std::to_string(next++);
      det.regions.push_back({did, category, b, score});
      return did;
    };
    for (const auto& reg : ann.regions) {
      if (!clean_category.count(reg.id)) continue;
      const std::string& category = clean_category.at(reg.id);
      const BoundingBox jb{reg.box.x + rng.uniform(-3, 3), reg.box.y + rng.uniform(-3, 3), reg.box.w, reg.box.h};
      det_of[reg.id] = add_det(category, jb, rng.uniform(0.6, 0.99));
      if (rng.uniform() < 0.3) add_det(category, {jb.x + 6, jb.y + 4, jb.w, jb.h}, rng.uniform(0.3, 0.55));
    }
    add_det("kite", {940, 10, 40, 40}, rng.uniform(0.01, 0.15));

    // Union features for every detected human-object pair.
    std::map<std::pair<std::string, std::string>, std::size_t> planted_by_det;
    for (const auto& pl : planted) planted_by_det[{det_of[pl.subject], det_of[pl.object]}] = pl.type;
    for (const auto& pair : pair_candidates(detections_of(det))) {
      auto it = planted_by_det.find({pair.human.region_id, pair.object.region_id});
      const auto mean = it != planted_by_det.end() ? means[it->second]
                                                   : sd::random_direction(opt.dim, opt.cluster_norm, rng);
      union_features.add(union_feature_id(det.image_id, pair.human.region_id, pair.object.region_id),
                         sd::draw(mean, opt.sigma, rng));
    }

    summary.relationships += ann.relationships.size();
    annotations.push_back(std::move(ann));
    detections.push_back(std::move(det));
  }
  summary.images = annotations.size();
  summary.union_features = union_features.size();

  // Web corpus: every used type, a fraction of each class drawn from another type.
  std::string web_labels;
  FeatureStore web_features(opt.dim);
  const std::vector<std::size_t> used(used_types.begin(), used_types.end());
  const auto n_noise = static_cast<std::size_t>(std::llround(opt.web_noise * double(opt.web_per_type)));
  for (std::size_t t : used) {
    for (std::size_t k = 0; k < opt.web_per_type; ++k) {
      const bool noise = k < n_noise && used.size() > 1;
      std::size_t src = t;
      while (noise && src == t) src = used[rng.index(used.size())];
      char sid[48];
      std::snprintf(sid, sizeof sid, "web-%02zu-%03zu", t, k);
      web_features.add(sid, sd::draw(means[src], opt.sigma, rng));
      json j = {{"class", reltype_to_json(reltype(t))}, {"sample_id", sid}, {"planted_noise", noise}};
      web_labels += j.dump() + "\n";
    }
  }
  summary.web_samples = web_features.size();

  write_annotations((root / "annotations.jsonl").string(), annotations);
  write_annotations((root / "detections.jsonl").string(), detections);
  write_feature_store((root / "union_features.hcvf").string(), union_features);
  write_feature_store((root / "web_features.hcvf").string(), web_features);
  sd::write_text(root / "web_labels.jsonl", web_labels);

  std::string lemmas = "# inflected form<TAB>canonical predicate\n";
  for (const auto& [canon, raw] : cat.predicates) {
    for (std::size_t k = 1; k < raw.size(); ++k) lemmas += clean_label(raw[k]) + "\t" + canon + "\n";
  }
  sd::write_text(root / "lemmas.tsv", lemmas);
  sd::write_text(root / "blocklist.txt", "# discarded predicates beyond has/is/are\nwearing\n");
  std::string subtypes = "# raw human label<TAB>subtype\n";
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t k = 1; k < cat.humans[s].size(); ++k) {
      if (clean_label(cat.humans[s][k]) != cat.humans[s][0]) {
        subtypes += cat.humans[s][k] + "\t" + cat.humans[s][0] + "\n";
      }
    }
  }
  subtypes += "dog\tnonhuman\n";
  sd::write_text(root / "subtypes.tsv", subtypes);
  sd::write_text(root / "corrections.tsv", "# misspelling<TAB>fix\nhrose\thorse\n");

  // Word vectors: near-identical vectors for spelling variants so they merge.
  std::string vectors;
  Rng wrng(opt.seed ^ 0x5eedULL);
  auto vec_line = [&](const std::string& token, const std::vector<double>& v) {
    vectors += token;
    char buf[32];
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.6f", x);
      vectors += buf;
    }
    vectors += "\n";
  };
  for (const auto& [canon, raw] : cat.objects) {
    const auto base = sd::random_direction(8, 1.0, wrng);
    vec_line(canon, base);
    if (canon == "bicycle") {
      auto bike = base;
      bike[0] += 0.05;
      vec_line("bike", bike);
    }
    if (canon == "cup") {
      auto coffee = base;
      coffee[1] += 0.1;
      vec_line("coffee", coffee);
    }
  }
  sd::write_text(root / "word_vectors.txt", vectors);

  sd::write_text(root / "config.toml",
                 "# Synthetic fixture run configuration. Paths are relative to this file.\n"
                 "out_dir = \"out\"\n"
                 "seed = 7\n"
                 "threads = 1\n\n"
                 "[inputs]\n"
                 "annotations = \"annotations.jsonl\"\n"
                 "lemmas = \"lemmas.tsv\"\n"
                 "blocklist = \"blocklist.txt\"\n"
                 "subtypes = \"subtypes.tsv\"\n"
                 "corrections = \"corrections.tsv\"\n"
                 "word_vectors = \"word_vectors.txt\"\n"
                 "detections = \"detections.jsonl\"\n"
                 "union_features = \"union_features.hcvf\"\n"
                 "web_labels = \"web_labels.jsonl\"\n"
                 "web_features = \"web_features.hcvf\"\n\n"
                 "[split]\n"
                 "train_fraction = 0.6\n"
                 "test_seen_fraction = 0.2\n\n"
                 "[train]\n"
                 "hidden = 256\n"
                 "epochs = 10\n"
                 "learning_rate = 1e-4\n"
                 "batch_size = 32\n");
  return summary;
}

}  // namespace hoirel
