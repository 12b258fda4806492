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

// Weakly-supervised filtering of the web corpus: samples of one class are
// randomly grouped, each group is attention-pooled into a single instance and
// classified, and the learned attention weights become per-sample confidences.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hoirel/common.hpp"
#include "hoirel/feature_store.hpp"
#include "hoirel/ingest.hpp"
#include "hoirel/metric.hpp"
#include "hoirel/relmodel.hpp"

namespace hoirel {

struct WebSample {
  std::string sample_id;
  RelType cls;
  std::vector<double> features;
  std::optional<double> confidence;
  bool kept = true;
};

struct WebCorpus {
  std::vector<WebSample> samples;

  std::vector<RelType> classes() const {
    std::set<RelType> s;
    for (const auto& w : samples) s.insert(w.cls);
    return {s.begin(), s.end()};
  }

  // Sample indices per class, in corpus order.
  std::map<RelType, std::vector<std::size_t>> by_class() const {
    std::map<RelType, std::vector<std::size_t>> m;
    for (std::size_t i = 0; i < samples.size(); ++i) m[samples[i].cls].push_back(i);
    return m;
  }
};

// Attention vector per class plus a linear classifier over pooled features.
struct FilterModel {
  std::size_t dim = 0;
  std::vector<std::vector<double>> attention;  // [class][dim]
  Dense classifier;                            // dim -> #classes

  FilterModel() = default;
  FilterModel(std::size_t d, std::size_t n_classes)
      : dim(d), attention(n_classes, std::vector<double>(d, 0.0)), classifier(d, n_classes) {}
};

// Seeded shuffle, then consecutive chunks of group_size; the last chunk may be short.
inline std::vector<std::vector<std::size_t>> random_group(std::size_t n, std::size_t group_size, Rng& rng) {
  if (group_size < 2) throw Error("group size must be >= 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t s = 0; s < n; s += group_size) {
    groups.emplace_back(order.begin() + s, order.begin() + std::min(n, s + group_size));
  }
  return groups;
}

template <typename T>
std::vector<std::vector<T>> random_group(const std::vector<T>& members, std::size_t group_size,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<T>> out;
  for (const auto& g : random_group(members.size(), group_size, rng)) {
    auto& dst = out.emplace_back();
    for (std::size_t i : g) dst.push_back(members[i]);
  }
  return out;
}

struct PooledGroup {
  std::vector<double> pooled;
  std::vector<double> weights;  // softmax over members, sums to 1
};

// weights = softmax(attention . f_m); pooled = sum_m weights_m f_m.
inline PooledGroup attention_pool(const std::vector<std::span<const double>>& group,
                                  std::span<const double> attention) {
  if (group.empty()) throw Error("attention_pool: empty group");
  const std::size_t d = attention.size();
  PooledGroup out;
  out.weights.resize(group.size());
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < group.size(); ++m) {
    if (group[m].size() != d) throw Error("attention_pool: dimension mismatch");
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) s += attention[k] * group[m][k];
    out.weights[m] = s;
    shift = std::max(shift, s);
  }
  double z = 0;
  for (auto& w : out.weights) z += (w = std::exp(w - shift));
  for (auto& w : out.weights) w /= z;
  out.pooled.assign(d, 0.0);
  for (std::size_t m = 0; m < group.size(); ++m) {
    for (std::size_t k = 0; k < d; ++k) out.pooled[k] += out.weights[m] * group[m][k];
  }
  return out;
}

inline PooledGroup attention_pool(const std::vector<std::span<const double>>& group, const FilterModel& model,
                                  std::size_t class_index) {
  return attention_pool(group, model.attention.at(class_index));
}

struct FilterConfig {
  std::size_t group_size = 4;
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct FilterResult {
  FilterModel model;
  std::vector<double> confidence;  // aligned with corpus.samples
  std::vector<double> epoch_loss;
};

namespace detail {

// One SGD step of cross-entropy on a pooled group; returns the loss.
inline double filter_step(FilterModel& m, const std::vector<std::span<const double>>& group,
                          std::size_t cls, double lr) {
  const auto pg = attention_pool(group, m.attention[cls]);
  const std::size_t c_n = m.classifier.out, d = m.dim;
  std::vector<double> logits(c_n);
  m.classifier.forward(std::span<const double>(pg.pooled), std::span<double>(logits));
  const double shift = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (auto& l : logits) z += (l = std::exp(l - shift));
  for (auto& l : logits) l /= z;
  const double loss = -std::log(std::max(logits[cls], 1e-300));

  std::vector<double> dz = logits;
  dz[cls] -= 1.0;
  std::vector<double> dpooled(d, 0.0);
  for (std::size_t r = 0; r < c_n; ++r) {
    const double* w = m.classifier.weight.data() + r * d;
    for (std::size_t k = 0; k < d; ++k) dpooled[k] += dz[r] * w[k];
  }
  std::vector<double> da(group.size(), 0.0);
  double mean_da = 0;
  for (std::size_t g = 0; g < group.size(); ++g) {
    for (std::size_t k = 0; k < d; ++k) da[g] += group[g][k] * dpooled[k];
    mean_da += pg.weights[g] * da[g];
  }
  auto& att = m.attention[cls];
  for (std::size_t g = 0; g < group.size(); ++g) {
    const double ds = pg.weights[g] * (da[g] - mean_da);
    for (std::size_t k = 0; k < d; ++k) att[k] -= lr * ds * group[g][k];
  }
  for (std::size_t r = 0; r < c_n; ++r) {
    double* w = m.classifier.weight.data() + r * d;
    for (std::size_t k = 0; k < d; ++k) w[k] -= lr * dz[r] * pg.pooled[k];
    m.classifier.bias[r] -= lr * dz[r];
  }
  return loss;
}

}  // namespace detail

// Trains the grouped attention classifier and scores every sample. A sample's
// confidence is its attention weight within its final-epoch group times the
// group size, so a member of a uniformly weighted group scores 1.
inline FilterResult train_filter(const WebCorpus& corpus, const FilterConfig& cfg) {
  const auto classes = corpus.classes();
  if (classes.size() < 2) throw Error("train_filter needs at least 2 classes");
  if (cfg.group_size < 2) throw Error("group size must be >= 2");
  const std::size_t d = corpus.samples.front().features.size();
  for (const auto& s : corpus.samples) {
    if (s.features.size() != d) throw Error("web sample '" + s.sample_id + "' has inconsistent dimension");
  }
  const auto members = corpus.by_class();

  FilterResult res;
  res.model = FilterModel(d, classes.size());
  Rng rng(cfg.seed);
  res.model.classifier.init_uniform(rng);

  // (class index, sample indices)
  using Group = std::pair<std::size_t, std::vector<std::size_t>>;
  auto draw_groups = [&]() {
    std::vector<Group> groups;
    std::size_t ci = 0;
    for (const auto& [cls, idx] : members) {
      for (auto& g : random_group(idx.size(), cfg.group_size, rng)) {
        for (auto& k : g) k = idx[k];
        groups.emplace_back(ci, std::move(g));
      }
      ++ci;
    }
    return groups;
  };
  auto spans = [&](const std::vector<std::size_t>& g) {
    std::vector<std::span<const double>> v;
    for (std::size_t k : g) v.emplace_back(corpus.samples[k].features);
    return v;
  };

  std::vector<Group> last;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    last = draw_groups();
    rng.shuffle(last);
    double loss = 0;
    for (const auto& [ci, g] : last) loss += detail::filter_step(res.model, spans(g), ci, cfg.learning_rate);
    res.epoch_loss.push_back(loss / static_cast<double>(last.size()));
  }
  if (last.empty()) last = draw_groups();

  res.confidence.assign(corpus.samples.size(), 0.0);
  for (const auto& [ci, g] : last) {
    const auto pg = attention_pool(spans(g), res.model, ci);
    for (std::size_t m = 0; m < g.size(); ++m) {
      res.confidence[g[m]] = pg.weights[m] * static_cast<double>(g.size());
    }
  }
  return res;
}

// Per class: keep the ceil(keep_ratio * n) most confident samples (ties by
// sample id). Unset confidences rank last.
inline WebCorpus filter_top(WebCorpus corpus, double keep_ratio = 0.8) {
  if (!(keep_ratio > 0 && keep_ratio <= 1)) throw Error("keep_ratio must be in (0, 1]");
  for (const auto& [cls, idx] : corpus.by_class()) {
    std::vector<std::size_t> order = idx;
    auto conf = [&](std::size_t i) {
      return corpus.samples[i].confidence.value_or(-std::numeric_limits<double>::infinity());
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (conf(a) != conf(b)) return conf(a) > conf(b);
      return corpus.samples[a].sample_id < corpus.samples[b].sample_id;
    });
    const auto keep = static_cast<std::size_t>(std::ceil(keep_ratio * static_cast<double>(order.size()) - 1e-9));
    for (std::size_t r = 0; r < order.size(); ++r) corpus.samples[order[r]].kept = r < keep;
  }
  return corpus;
}

inline WebCorpus kept_only(const WebCorpus& c) {
  WebCorpus out;
  for (const auto& s : c.samples) {
    if (s.kept) out.samples.push_back(s);
  }
  return out;
}

// Files ----------------------------------------------------------------------

// Labels file: JSON lines {"class": [subject, predicate, object], "sample_id": str}
// (extra fields ignored). Features come from an HCVF store keyed by sample id.
inline WebCorpus load_web_corpus(const std::string& labels_path, const FeatureStore& features) {
  std::ifstream in(labels_path);
  if (!in) throw InputError("cannot open " + labels_path);
  WebCorpus c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      WebSample s;
      s.cls = reltype_from_json(j.at("class"));
      s.sample_id = j.at("sample_id").get<std::string>();
      auto row = features.get(s.sample_id);
      if (!row) throw Error("no feature for sample '" + s.sample_id + "'");
      s.features.assign(row->begin(), row->end());
      if (j.contains("confidence") && !j["confidence"].is_null()) s.confidence = j["confidence"].get<double>();
      if (j.contains("kept")) s.kept = j["kept"].get<bool>();
      c.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(labels_path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(labels_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

// Manifest: JSON lines {"class", "sample_id", "confidence", "kept"}.
inline void write_filter_manifest(const std::string& path, const WebCorpus& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (const auto& s : c.samples) {
    json j = {{"class", reltype_to_json(s.cls)}, {"sample_id", s.sample_id}, {"kept", s.kept}};
    j["confidence"] = s.confidence ? json(*s.confidence) : json(nullptr);
    out << j.dump() << '\n';
  }
}

}  // namespace hoirel
