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

// Two-branch embedding and the lifted structured loss.
//
// Dataset samples (union-region features) pass through
//   hidden = relu(W1 x + b1),  e = W2 hidden + b2
// and web samples through a single affine layer e = W x + b. Both branches
// land in the same 256-d space where pairs are compared by Euclidean distance.
//
// For a positive pair (i, j) with dataset sample i and web sample j:
//   L_ij = log( sum_{(i,k) in N} exp(alpha - D_ik) + sum_{(l,j) in N} exp(alpha - D_lj) ) + D_ij
//   loss = 1 / (2 |P|) * sum_{(i,j) in P} max(0, L_ij)^2
// A positive pair with no incident negatives uses L_ij = D_ij.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hoirel/common.hpp"
#include "hoirel/feature_store.hpp"

namespace hoirel {

inline constexpr std::size_t kEmbeddingDim = 256;
inline constexpr std::size_t kDefaultHiddenDim = 512;
inline constexpr double kDistanceFloor = 1e-12;

// Fully connected layer, weights stored row-major (out x in).
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Dense() = default;
  Dense(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  template <typename T>
  void forward(std::span<const T> x, std::span<double> y) const {
    for (std::size_t r = 0; r < out; ++r) {
      const double* w = weight.data() + r * in;
      double acc = bias[r];
      for (std::size_t c = 0; c < in; ++c) acc += w[c] * static_cast<double>(x[c]);
      y[r] = acc;
    }
  }

  void init_uniform(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : weight) w = rng.uniform(-bound, bound);
    std::fill(bias.begin(), bias.end(), 0.0);
  }

  friend bool operator==(const Dense&, const Dense&) = default;
};

struct MetricModel {
  Dense hidden;   // dataset branch, d -> h
  Dense project;  // dataset branch, h -> 256
  Dense web;      // web branch, d -> 256

  MetricModel() = default;
  MetricModel(std::size_t input_dim, std::size_t hidden_dim = kDefaultHiddenDim,
              std::size_t embed_dim = kEmbeddingDim)
      : hidden(input_dim, hidden_dim), project(hidden_dim, embed_dim), web(input_dim, embed_dim) {}

  // Seeded uniform(+-1/sqrt(fan_in)) weights, zero biases.
  static MetricModel initialized(std::size_t input_dim, std::uint64_t seed,
                                 std::size_t hidden_dim = kDefaultHiddenDim) {
    MetricModel m(input_dim, hidden_dim);
    Rng rng(seed);
    m.hidden.init_uniform(rng);
    m.project.init_uniform(rng);
    m.web.init_uniform(rng);
    return m;
  }

  std::size_t input_dim() const { return hidden.in; }
  std::size_t embed_dim() const { return project.out; }

  // Parameter blocks in checkpoint order.
  std::vector<std::span<double>> blocks() {
    return {hidden.weight, hidden.bias, project.weight, project.bias, web.weight, web.bias};
  }
  std::vector<std::span<const double>> blocks() const {
    return {hidden.weight, hidden.bias, project.weight, project.bias, web.weight, web.bias};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto b : blocks()) n += b.size();
    return n;
  }

  bool finite() const {
    for (auto b : blocks()) {
      for (double v : b) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  friend bool operator==(const MetricModel&, const MetricModel&) = default;
};

namespace detail {
template <typename T>
void check_dim(const MetricModel& m, std::span<const T> f) {
  if (f.size() != m.input_dim()) {
    throw Error("feature dimension " + std::to_string(f.size()) + " does not match model input " +
                std::to_string(m.input_dim()));
  }
}
}  // namespace detail

template <typename T>
std::vector<double> embed_dataset(const MetricModel& m, std::span<const T> f) {
  detail::check_dim(m, f);
  std::vector<double> h(m.hidden.out), e(m.project.out);
  m.hidden.forward(f, std::span<double>(h));
  for (auto& v : h) v = std::max(v, 0.0);
  m.project.forward(std::span<const double>(h), std::span<double>(e));
  return e;
}

template <typename T>
std::vector<double> embed_web(const MetricModel& m, std::span<const T> f) {
  detail::check_dim(m, f);
  std::vector<double> e(m.web.out);
  m.web.forward(f, std::span<double>(e));
  return e;
}

inline std::vector<double> embed_dataset(const MetricModel& m, const std::vector<double>& f) {
  return embed_dataset(m, std::span<const double>(f));
}
inline std::vector<double> embed_web(const MetricModel& m, const std::vector<double>& f) {
  return embed_web(m, std::span<const double>(f));
}

inline double pair_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("pair_distance: dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Batches --------------------------------------------------------------------

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;
};

using IndexPair = std::pair<std::size_t, std::size_t>;  // (dataset index, web index)

struct PairBatch {
  std::vector<Sample> dataset;
  std::vector<Sample> web;
  std::vector<IndexPair> positives;
  std::vector<IndexPair> negatives;
  double alpha = 1.0;
};

// Every same-class (dataset, web) pair becomes a positive. For each dataset
// anchor, up to per_anchor_negatives different-class web samples are drawn as
// negatives; symmetrically for every web sample that takes part in a positive.
inline PairBatch construct_pairs(std::vector<Sample> dataset, std::vector<Sample> web,
                                 std::size_t per_anchor_negatives, std::uint64_t seed,
                                 double alpha = 1.0) {
  if (dataset.empty() || web.empty()) throw Error("construct_pairs: both sides must be non-empty");
  PairBatch b;
  b.alpha = alpha;
  std::set<std::size_t> web_in_positive;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = 0; j < web.size(); ++j) {
      if (dataset[i].label == web[j].label) {
        b.positives.emplace_back(i, j);
        web_in_positive.insert(j);
      }
    }
  }

  Rng rng(seed);
  std::set<IndexPair> negatives;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    pool.clear();
    for (std::size_t j = 0; j < web.size(); ++j) {
      if (web[j].label != dataset[i].label) pool.push_back(j);
    }
    rng.shuffle(pool);
    for (std::size_t n = 0; n < std::min(per_anchor_negatives, pool.size()); ++n) negatives.emplace(i, pool[n]);
  }
  for (std::size_t j : web_in_positive) {
    pool.clear();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset[i].label != web[j].label) pool.push_back(i);
    }
    rng.shuffle(pool);
    for (std::size_t n = 0; n < std::min(per_anchor_negatives, pool.size()); ++n) negatives.emplace(pool[n], j);
  }
  b.negatives.assign(negatives.begin(), negatives.end());
  b.dataset = std::move(dataset);
  b.web = std::move(web);
  return b;
}

// Loss -----------------------------------------------------------------------

struct Embeddings {
  std::vector<std::vector<double>> dataset;
  std::vector<std::vector<double>> web;
};

inline Embeddings embed_batch(const MetricModel& m, const PairBatch& b) {
  Embeddings e;
  e.dataset.reserve(b.dataset.size());
  e.web.reserve(b.web.size());
  for (const auto& s : b.dataset) e.dataset.push_back(embed_dataset(m, s.features));
  for (const auto& s : b.web) e.web.push_back(embed_web(m, s.features));
  return e;
}

namespace detail {

inline void check_batch(const PairBatch& b) {
  if (b.positives.empty()) throw Error("no positive pairs");
  for (const auto* set : {&b.positives, &b.negatives}) {
    for (const auto& [i, j] : *set) {
      if (i >= b.dataset.size() || j >= b.web.size()) throw Error("pair index out of range");
    }
  }
}

// Negatives grouped by their dataset endpoint and by their web endpoint.
struct NegativeIndex {
  std::vector<std::vector<std::size_t>> by_dataset;
  std::vector<std::vector<std::size_t>> by_web;

  explicit NegativeIndex(const PairBatch& b) : by_dataset(b.dataset.size()), by_web(b.web.size()) {
    for (std::size_t n = 0; n < b.negatives.size(); ++n) {
      by_dataset[b.negatives[n].first].push_back(n);
      by_web[b.negatives[n].second].push_back(n);
    }
  }
};

}  // namespace detail

struct LossAndEmbeddingGrad {
  double loss = 0;
  std::vector<std::vector<double>> d_dataset;  // dloss / d embedding
  std::vector<std::vector<double>> d_web;
};

// Loss and its gradient with respect to the embeddings.
inline LossAndEmbeddingGrad lifted_loss_embeddings(const Embeddings& e, const PairBatch& b,
                                                   bool with_gradient = true) {
  detail::check_batch(b);
  const detail::NegativeIndex neg(b);
  std::vector<double> neg_dist(b.negatives.size());
  for (std::size_t n = 0; n < b.negatives.size(); ++n) {
    neg_dist[n] = pair_distance(e.dataset[b.negatives[n].first], e.web[b.negatives[n].second]);
  }

  LossAndEmbeddingGrad out;
  std::vector<double> d_neg(b.negatives.size(), 0.0);  // dloss / dD for negatives
  std::vector<double> d_pos(b.positives.size(), 0.0);
  std::vector<double> pos_dist(b.positives.size());
  const double inv_p = 1.0 / static_cast<double>(b.positives.size());
  std::vector<std::size_t> incident;

  for (std::size_t p = 0; p < b.positives.size(); ++p) {
    const auto [i, j] = b.positives[p];
    pos_dist[p] = pair_distance(e.dataset[i], e.web[j]);
    incident.assign(neg.by_dataset[i].begin(), neg.by_dataset[i].end());
    incident.insert(incident.end(), neg.by_web[j].begin(), neg.by_web[j].end());

    // Without incident negatives the pair contributes max(0, D_ij)^2.
    double lse = 0;
    double shift = 0, sum = 0;
    if (!incident.empty()) {
      shift = -std::numeric_limits<double>::infinity();
      for (std::size_t n : incident) shift = std::max(shift, b.alpha - neg_dist[n]);
      for (std::size_t n : incident) sum += std::exp(b.alpha - neg_dist[n] - shift);
      lse = shift + std::log(sum);
    }
    const double l = lse + pos_dist[p];
    const double hinge = std::max(0.0, l);
    out.loss += hinge * hinge;
    if (!with_gradient || hinge <= 0) continue;
    const double g = hinge * inv_p;  // d(hinge^2 / 2|P|) / dL
    d_pos[p] += g;
    for (std::size_t n : incident) d_neg[n] -= g * std::exp(b.alpha - neg_dist[n] - shift) / sum;
  }
  out.loss *= 0.5 * inv_p;
  if (!with_gradient) return out;

  const std::size_t dim = e.dataset.empty() ? 0 : e.dataset[0].size();
  out.d_dataset.assign(e.dataset.size(), std::vector<double>(dim, 0.0));
  out.d_web.assign(e.web.size(), std::vector<double>(dim, 0.0));
  auto scatter = [&](std::size_t i, std::size_t j, double dist, double g) {
    if (g == 0) return;
    const double s = g / std::max(dist, kDistanceFloor);
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = (e.dataset[i][k] - e.web[j][k]) * s;
      out.d_dataset[i][k] += diff;
      out.d_web[j][k] -= diff;
    }
  };
  for (std::size_t p = 0; p < b.positives.size(); ++p) {
    scatter(b.positives[p].first, b.positives[p].second, pos_dist[p], d_pos[p]);
  }
  for (std::size_t n = 0; n < b.negatives.size(); ++n) {
    scatter(b.negatives[n].first, b.negatives[n].second, neg_dist[n], d_neg[n]);
  }
  return out;
}

inline double lifted_loss(const MetricModel& m, const PairBatch& b) {
  detail::check_batch(b);
  return lifted_loss_embeddings(embed_batch(m, b), b, false).loss;
}

struct LossGradient {
  double loss = 0;
  MetricModel grad;  // same shapes as the model
};

// Exact gradient of the lifted loss with respect to every model parameter.
inline LossGradient lifted_loss_gradient(const MetricModel& m, const PairBatch& b) {
  detail::check_batch(b);
  const Embeddings e = embed_batch(m, b);
  const auto lg = lifted_loss_embeddings(e, b, true);

  LossGradient out;
  out.loss = lg.loss;
  out.grad = MetricModel(m.input_dim(), m.hidden.out, m.project.out);
  auto& g = out.grad;

  std::vector<double> z(m.hidden.out), a(m.hidden.out), da(m.hidden.out);
  for (std::size_t s = 0; s < b.dataset.size(); ++s) {
    const auto& de = lg.d_dataset[s];
    if (std::all_of(de.begin(), de.end(), [](double v) { return v == 0.0; })) continue;
    const auto& x = b.dataset[s].features;
    m.hidden.forward(std::span<const double>(x), std::span<double>(z));
    for (std::size_t k = 0; k < z.size(); ++k) a[k] = std::max(z[k], 0.0);

    std::fill(da.begin(), da.end(), 0.0);
    for (std::size_t r = 0; r < m.project.out; ++r) {
      if (de[r] == 0) continue;
      g.project.bias[r] += de[r];
      double* gw = g.project.weight.data() + r * m.project.in;
      const double* w = m.project.weight.data() + r * m.project.in;
      for (std::size_t c = 0; c < m.project.in; ++c) {
        gw[c] += de[r] * a[c];
        da[c] += de[r] * w[c];
      }
    }
    for (std::size_t r = 0; r < m.hidden.out; ++r) {
      if (z[r] <= 0) continue;
      g.hidden.bias[r] += da[r];
      double* gw = g.hidden.weight.data() + r * m.hidden.in;
      for (std::size_t c = 0; c < m.hidden.in; ++c) gw[c] += da[r] * x[c];
    }
  }
  for (std::size_t s = 0; s < b.web.size(); ++s) {
    const auto& de = lg.d_web[s];
    const auto& x = b.web[s].features;
    for (std::size_t r = 0; r < m.web.out; ++r) {
      if (de[r] == 0) continue;
      g.web.bias[r] += de[r];
      double* gw = g.web.weight.data() + r * m.web.in;
      for (std::size_t c = 0; c < m.web.in; ++c) gw[c] += de[r] * x[c];
    }
  }
  return out;
}

// Training -------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-4;
  double decay_factor = 10.0;
  std::size_t decay_every = 5;  // epochs
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t per_anchor_negatives = 10;
  std::uint64_t seed = 0;
  double alpha = 1.0;

  void validate() const {
    if (!(learning_rate > 0)) throw Error("learning_rate must be > 0");
    if (decay_every < 1) throw Error("decay_every must be >= 1");
    if (!(decay_factor > 0)) throw Error("decay_factor must be > 0");
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (!(alpha > 0)) throw Error("alpha must be > 0");
  }

  // lr_e = lr_0 / decay_factor^floor(e / decay_every)
  double rate_for_epoch(std::size_t epoch) const {
    return learning_rate / std::pow(decay_factor, static_cast<double>(epoch / decay_every));
  }
};

struct TrainResult {
  MetricModel model;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::size_t skipped_batches = 0;  // batches without a positive pair
};

// Seeded mini-batch gradient descent. Each epoch reshuffles both sides; the
// web side is consumed cyclically so every dataset batch meets batch_size web
// samples.
inline TrainResult train(const MetricModel& init, const std::vector<Sample>& dataset,
                         const std::vector<Sample>& web, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult res{init, {}, 0};
  if (cfg.epochs == 0) return res;
  if (dataset.empty() || web.empty()) throw Error("train: empty dataset or web samples");
  for (const auto* side : {&dataset, &web}) {
    for (const auto& s : *side) detail::check_dim(init, std::span<const double>(s.features));
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> d_order(dataset.size()), w_order(web.size());
  std::iota(d_order.begin(), d_order.end(), 0);
  std::iota(w_order.begin(), w_order.end(), 0);
  MetricModel& m = res.model;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.rate_for_epoch(epoch);
    rng.shuffle(d_order);
    rng.shuffle(w_order);
    double loss_sum = 0;
    std::size_t batches = 0;
    std::size_t w_cursor = 0;
    for (std::size_t start = 0, batch = 0; start < d_order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(start + cfg.batch_size, d_order.size());
      std::vector<Sample> ds, ws;
      for (std::size_t k = start; k < end; ++k) ds.push_back(dataset[d_order[k]]);
      for (std::size_t k = 0; k < std::min(cfg.batch_size, web.size()); ++k) {
        ws.push_back(web[w_order[w_cursor]]);
        w_cursor = (w_cursor + 1) % web.size();
      }
      const std::uint64_t pair_seed = rng.next();
      PairBatch pb = construct_pairs(std::move(ds), std::move(ws), cfg.per_anchor_negatives, pair_seed,
                                     cfg.alpha);
      if (pb.positives.empty()) {
        ++res.skipped_batches;
        continue;
      }
      const auto lg = lifted_loss_gradient(m, pb);
      if (!std::isfinite(lg.loss)) {
        throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch));
      }
      loss_sum += lg.loss;
      ++batches;
      auto params = m.blocks();
      auto grads = lg.grad.blocks();
      for (std::size_t blk = 0; blk < params.size(); ++blk) {
        for (std::size_t k = 0; k < params[blk].size(); ++k) params[blk][k] -= lr * grads[blk][k];
      }
    }
    res.epoch_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
  }
  return res;
}

inline void write_loss_curve(const std::string& path, const std::vector<double>& epoch_loss) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, epoch_loss[e]);
    out << buf;
  }
}

// Checkpoint -----------------------------------------------------------------
//
// "HCVM" | version u32 | layer count u32 | per layer (out u32, in u32)
// | parameters as little-endian float64: hidden W, b, project W, b, web W, b

inline constexpr char kModelMagic[4] = {'H', 'C', 'V', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

inline std::string encode_model(const MetricModel& m) {
  std::string out(kModelMagic, 4);
  detail::put_u32(out, kModelVersion);
  detail::put_u32(out, 3);
  for (const Dense* l : {&m.hidden, &m.project, &m.web}) {
    detail::put_u32(out, static_cast<std::uint32_t>(l->out));
    detail::put_u32(out, static_cast<std::uint32_t>(l->in));
  }
  for (auto blk : m.blocks()) {
    for (double v : blk) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline MetricModel decode_model(std::string_view bytes, const std::string& what = "HCVM") {
  detail::ByteReader rd(bytes, what);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) rd.fail("bad magic", 0);
  rd.bytes(4);
  const auto version = rd.u32();
  if (version != kModelVersion) rd.fail("unsupported version " + std::to_string(version), 4);
  const std::size_t layers_at = rd.offset();
  if (rd.u32() != 3) rd.fail("expected 3 layers", layers_at);
  std::size_t shape[3][2];
  for (auto& s : shape) {
    s[0] = rd.u32();
    s[1] = rd.u32();
  }
  const bool consistent = shape[0][1] == shape[2][1] && shape[1][1] == shape[0][0] && shape[1][0] == shape[2][0];
  if (!consistent) rd.fail("inconsistent layer shapes", layers_at + 4);
  MetricModel m(shape[0][1], shape[0][0], shape[1][0]);
  for (auto blk : m.blocks()) {
    for (auto& v : blk) v = std::bit_cast<double>(rd.u64());
  }
  if (!rd.at_end()) rd.fail("trailing bytes", rd.offset());
  return m;
}

inline void write_model(const std::string& path, const MetricModel& m) { detail::dump(path, encode_model(m)); }
inline MetricModel read_model(const std::string& path) { return decode_model(detail::slurp(path), path); }

}  // namespace hoirel
