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

#include "hoirel/webfilter.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"

namespace hoirel {
namespace {

TEST(RandomGroup, Sizes) {
  Rng rng(1);
  auto g = random_group(8, 4, rng);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].size(), 4u);
  EXPECT_EQ(g[1].size(), 4u);
  g = random_group(9, 4, rng);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[2].size(), 1u);
  EXPECT_TRUE(random_group(0, 4, rng).empty());
  EXPECT_THROW(random_group(5, 1, rng), Error);
}

TEST(RandomGroup, DeterministicPartition) {
  std::vector<std::string> items;
  for (int i = 0; i < 23; ++i) items.push_back("s" + std::to_string(i));
  const auto a = random_group(items, 4, 77);
  EXPECT_EQ(a, random_group(items, 4, 77));
  std::multiset<std::string> seen;
  for (const auto& g : a) seen.insert(g.begin(), g.end());
  EXPECT_EQ(seen, std::multiset<std::string>(items.begin(), items.end()));
}

TEST(AttentionPool, SingleMember) {
  const std::vector<double> f = {1, 2, 3};
  const std::vector<double> w = {0.3, -1, 2};
  auto p = attention_pool({std::span<const double>(f)}, w);
  EXPECT_DOUBLE_EQ(p.weights[0], 1.0);
  EXPECT_EQ(p.pooled, f);
}

TEST(AttentionPool, ZeroAttentionIsUniform) {
  const std::vector<double> a = {1, 0}, b = {0, 1}, c = {5, 5};
  auto p = attention_pool({a, b, c}, std::vector<double>{0, 0});
  for (double w : p.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 3);
  EXPECT_DOUBLE_EQ(p.pooled[0], 2.0);
}

TEST(AttentionPool, AlignedMemberDominates) {
  const std::vector<double> a = {1, 0, 0}, b = {0, 1, 0}, c = {0, 0, 1};
  const std::vector<double> w = {50, 0, 0};
  auto p = attention_pool({a, b, c}, w);
  // e^50 / (e^50 + 2)
  EXPECT_GT(p.weights[0], 0.99);
  EXPECT_NEAR(p.weights[0], 1.0 / (1.0 + 2.0 * std::exp(-50.0)), 1e-15);
}

TEST(AttentionPool, WeightsPositiveAndNormalized) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng.index(10), n = 1 + rng.index(6);
    std::vector<std::vector<double>> members(n, std::vector<double>(d));
    for (auto& m : members) {
      for (auto& x : m) x = rng.normal() * 5;
    }
    std::vector<double> w(d);
    for (auto& x : w) x = rng.normal() * 3;
    std::vector<std::span<const double>> spans(members.begin(), members.end());
    const auto p = attention_pool(spans, w);
    double s = 0;
    for (double x : p.weights) {
      EXPECT_GT(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

WebCorpus constant_corpus() {
  WebCorpus c;
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 10; ++i) {
      c.samples.push_back({"s" + std::to_string(k) + "_" + std::to_string(i),
                           RelType{HumanSubtype::kBoy, k ? "a" : "b", "x"}, std::vector<double>(6, 1.0 + k),
                           std::nullopt, true});
    }
  }
  return c;
}

TEST(TrainFilter, IndistinguishableMembersScoreOne) {
  FilterConfig cfg;
  cfg.epochs = 5;
  const auto r = train_filter(constant_corpus(), cfg);
  for (double c : r.confidence) EXPECT_NEAR(c, 1.0, 1e-9);
}

TEST(TrainFilter, ZeroEpochsStillScores) {
  FilterConfig cfg;
  cfg.epochs = 0;
  Rng rng(3);
  testing::Clusters cl(3, 8, 3.0, 1.0, rng);
  const auto pc = testing::planted_noise_corpus(cl, 10, 0.2, rng);
  const auto r = train_filter(pc.corpus, cfg);
  ASSERT_EQ(r.confidence.size(), pc.corpus.samples.size());
  for (double c : r.confidence) {
    EXPECT_TRUE(std::isfinite(c));
    EXPECT_GT(c, 0.0);
  }
}

TEST(TrainFilter, SingleClassIsAnError) {
  auto c = constant_corpus();
  c.samples.resize(10);
  EXPECT_THROW(train_filter(c, {}), Error);
}

TEST(TrainFilter, PlantedNoiseRanksLow) {
  Rng rng(2024);
  testing::Clusters cl(3, 32, 4.0, 1.0, rng);
  const auto pc = testing::planted_noise_corpus(cl, 100, 0.2, rng);
  FilterConfig cfg;
  cfg.seed = 5;
  const auto r = train_filter(pc.corpus, cfg);
  double clean = 0, noise = 0;
  std::size_t nc = 0, nn = 0;
  for (std::size_t i = 0; i < r.confidence.size(); ++i) {
    (pc.is_noise[i] ? noise : clean) += r.confidence[i];
    ++(pc.is_noise[i] ? nn : nc);
  }
  EXPECT_GT(clean / double(nc), noise / double(nn));
  EXPECT_GT(testing::noise_auc(r.confidence, pc.is_noise), 0.9);
}

WebCorpus with_confidences(const std::vector<double>& conf) {
  WebCorpus c;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    c.samples.push_back({"id" + std::to_string(i), RelType{HumanSubtype::kMan, "ride", "horse"}, {0.0}, conf[i], true});
  }
  return c;
}

std::size_t kept_count(const WebCorpus& c) {
  return static_cast<std::size_t>(std::count_if(c.samples.begin(), c.samples.end(), [](auto& s) { return s.kept; }));
}

TEST(FilterTop, KeepsEightyPercent) {
  std::vector<double> conf(100);
  for (std::size_t i = 0; i < conf.size(); ++i) conf[i] = double((i * 37) % 100);
  EXPECT_EQ(kept_count(filter_top(with_confidences(conf), 0.8)), 80u);
  EXPECT_EQ(kept_count(filter_top(with_confidences(conf), 1.0)), 100u);
}

TEST(FilterTop, ExactTopPrefix) {
  const auto out = filter_top(with_confidences({0.3, 0.9, 0.1, 0.5, 0.7}), 0.8);
  const std::vector<bool> want = {true, true, false, true, true};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(out.samples[i].kept, want[i]) << i;
}

TEST(FilterTop, TiesBrokenBySampleId) {
  // ceil(0.5 * 3) = 2: the tie at 0.5 keeps id1 over id2.
  const auto out = filter_top(with_confidences({0.9, 0.5, 0.5}), 0.5);
  EXPECT_TRUE(out.samples[0].kept);
  EXPECT_TRUE(out.samples[1].kept);
  EXPECT_FALSE(out.samples[2].kept);
}

TEST(FilterTop, PerClassCeiling) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    WebCorpus c;
    const double ratio = rng.uniform(0.05, 1.0);
    std::map<std::string, std::size_t> sizes;
    for (int k = 0; k < 4; ++k) {
      const std::size_t n = 1 + rng.index(30);
      sizes["p" + std::to_string(k)] = n;
      for (std::size_t i = 0; i < n; ++i) {
        c.samples.push_back({"s" + std::to_string(k) + "_" + std::to_string(i),
                             RelType{HumanSubtype::kMan, "p" + std::to_string(k), "o"}, {0.0},
                             std::round(rng.uniform() * 5), true});
      }
    }
    const auto out = filter_top(c, ratio);
    for (const auto& [p, n] : sizes) {
      std::size_t kept = 0;
      double min_kept = 1e9, max_dropped = -1e9;
      for (const auto& s : out.samples) {
        if (s.cls.predicate != p) continue;
        if (s.kept) {
          ++kept;
          min_kept = std::min(min_kept, *s.confidence);
        } else {
          max_dropped = std::max(max_dropped, *s.confidence);
        }
      }
      EXPECT_EQ(kept, static_cast<std::size_t>(std::ceil(ratio * double(n) - 1e-9)));
      EXPECT_GE(min_kept, max_dropped);
    }
  }
}

TEST(Manifest, WriteAndReload) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto labels = (dir / "hoirel_manifest_test.jsonl").string();
  auto c = filter_top(with_confidences({0.3, 0.9, 0.1}), 0.5);
  FeatureStore fs(1);
  for (const auto& s : c.samples) fs.add(s.sample_id, std::vector<float>{1.0f});
  write_filter_manifest(labels, c);
  const auto back = load_web_corpus(labels, fs);
  ASSERT_EQ(back.samples.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.samples[i].kept, c.samples[i].kept);
    EXPECT_EQ(back.samples[i].confidence, c.samples[i].confidence);
    EXPECT_EQ(back.samples[i].cls, c.samples[i].cls);
  }
  std::remove(labels.c_str());
}

}  // namespace
}  // namespace hoirel
