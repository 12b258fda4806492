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

// Run configuration: a small TOML-style file of `key = value` lines with
// optional [section] headers (keys become "section.key"). Command-line
// overrides are applied on top with the same key names.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoirel/common.hpp"

namespace hoirel {

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace detail

inline KeyValues parse_key_values(std::istream& in, const std::string& what) {
  KeyValues kv;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error(what + ":" + std::to_string(line_no) + ": unterminated section header");
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(what + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(std::string_view(s).substr(0, eq));
    if (key.empty()) throw Error(what + ":" + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    kv[key] = detail::unquote(detail::trim(std::string_view(s).substr(eq + 1)));
  }
  return kv;
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  return parse_key_values(in, path);
}

struct RunConfig {
  // Inputs
  std::string annotations;       // raw annotation JSONL
  std::string lemmas;            // TSV inflected -> canonical
  std::string blocklist;         // extra discarded predicates
  std::string subtypes;          // TSV label -> man|woman|boy|girl|nonhuman
  std::string corrections;       // TSV raw label fixes
  std::string word_vectors;      // token + floats per line
  std::string detections;        // detection JSONL (annotation schema, no relationships)
  std::string union_features;    // HCVF keyed by image|subject|object
  std::string web_labels;        // web corpus labels JSONL
  std::string web_features;      // HCVF keyed by sample id
  std::string universe;          // triple list; empty -> <out>/universe.tsv when present
  std::string predictions;       // eval input; empty -> <out>/predictions.jsonl
  std::string predicate_predictions;  // empty -> <out>/predictions_predicate.jsonl when present
  std::string out_dir = "out";

  // Ingest
  double merge_threshold = 0.9;
  // Split
  std::size_t train_size = 0;      // 0 -> round(train_fraction * images)
  std::size_t test_seen_size = 0;  // 0 -> round(test_seen_fraction * images)
  double train_fraction = 0.6;
  double test_seen_fraction = 0.2;
  bool stats_global = false;
  // Detection post-processing
  double nms_iou = 0.3;
  double nms_score = 0.2;
  // Web filter
  std::size_t group_size = 4;
  std::size_t filter_epochs = 30;
  double filter_lr = 0.05;
  double keep_ratio = 0.8;
  // Metric learning
  std::size_t hidden = 512;
  double learning_rate = 1e-4;
  double decay_factor = 10.0;
  std::size_t decay_every = 5;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t per_anchor_negatives = 10;
  double alpha = 1.0;
  // Inference
  std::size_t neighbors = 20;
  std::size_t top_k = 3;
  std::string aggregation = "best";

  std::uint64_t seed = 0;
  std::size_t threads = 1;

  std::string out(const std::string& name) const { return (std::filesystem::path(out_dir) / name).string(); }

  void validate() const {
    auto in01 = [](double v) { return v > 0 && v <= 1; };
    if (!in01(merge_threshold)) throw Error("merge_threshold must be in (0, 1]");
    if (!(train_fraction >= 0 && test_seen_fraction >= 0 && train_fraction + test_seen_fraction <= 1)) {
      throw Error("train_fraction and test_seen_fraction must be >= 0 and sum to at most 1");
    }
    if (!(nms_iou >= 0 && nms_iou <= 1) || !(nms_score >= 0 && nms_score <= 1)) {
      throw Error("NMS thresholds must be in [0, 1]");
    }
    if (group_size < 2) throw Error("group_size must be >= 2");
    if (!(filter_lr > 0)) throw Error("filter_lr must be > 0");
    if (!in01(keep_ratio)) throw Error("keep_ratio must be in (0, 1]");
    if (hidden < 1) throw Error("hidden must be >= 1");
    if (neighbors < 1) throw Error("neighbors must be >= 1");
    if (top_k < 1) throw Error("top_k must be >= 1");
    if (threads < 1) throw Error("threads must be >= 1");
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': invalid value '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config key '" + key + "': expected true or false, got '" + v + "'");
}

}  // namespace detail

// Applies key/value pairs to cfg. Relative paths are resolved against base
// (the config file's directory); unknown keys are an error.
inline void apply_config(RunConfig& cfg, const KeyValues& kv, const std::filesystem::path& base = {}) {
  auto path = [&](const std::string& v) {
    if (v.empty()) return v;
    std::filesystem::path p(v);
    return (p.is_absolute() || base.empty() ? p : base / p).lexically_normal().string();
  };
  const std::map<std::string, std::string*> paths = {
      {"annotations", &cfg.annotations},       {"lemmas", &cfg.lemmas},
      {"blocklist", &cfg.blocklist},           {"subtypes", &cfg.subtypes},
      {"corrections", &cfg.corrections},       {"word_vectors", &cfg.word_vectors},
      {"detections", &cfg.detections},         {"union_features", &cfg.union_features},
      {"web_labels", &cfg.web_labels},         {"web_features", &cfg.web_features},
      {"universe", &cfg.universe},             {"predictions", &cfg.predictions},
      {"predicate_predictions", &cfg.predicate_predictions}, {"out_dir", &cfg.out_dir}};
  const std::map<std::string, double*> reals = {
      {"merge_threshold", &cfg.merge_threshold}, {"train_fraction", &cfg.train_fraction},
      {"test_seen_fraction", &cfg.test_seen_fraction}, {"nms_iou", &cfg.nms_iou},
      {"nms_score", &cfg.nms_score},             {"filter_lr", &cfg.filter_lr},
      {"keep_ratio", &cfg.keep_ratio},           {"learning_rate", &cfg.learning_rate},
      {"decay_factor", &cfg.decay_factor},       {"alpha", &cfg.alpha}};
  const std::map<std::string, std::size_t*> counts = {
      {"train_size", &cfg.train_size},   {"test_seen_size", &cfg.test_seen_size},
      {"group_size", &cfg.group_size},   {"filter_epochs", &cfg.filter_epochs},
      {"hidden", &cfg.hidden},           {"decay_every", &cfg.decay_every},
      {"epochs", &cfg.epochs},           {"batch_size", &cfg.batch_size},
      {"per_anchor_negatives", &cfg.per_anchor_negatives},
      {"neighbors", &cfg.neighbors},     {"top_k", &cfg.top_k},
      {"threads", &cfg.threads}};

  for (const auto& [full_key, value] : kv) {
    // Sections are organisational only: [train] epochs = 5 sets "epochs".
    const auto dot = full_key.rfind('.');
    const std::string key = dot == std::string::npos ? full_key : full_key.substr(dot + 1);
    if (auto it = paths.find(key); it != paths.end()) {
      *it->second = path(value);
    } else if (auto r = reals.find(key); r != reals.end()) {
      *r->second = detail::parse_number<double>(full_key, value);
    } else if (auto c = counts.find(key); c != counts.end()) {
      *c->second = detail::parse_number<std::size_t>(full_key, value);
    } else if (key == "seed") {
      cfg.seed = detail::parse_number<std::uint64_t>(full_key, value);
    } else if (key == "aggregation") {
      cfg.aggregation = value;
    } else if (key == "stats_global") {
      cfg.stats_global = detail::parse_bool(full_key, value);
    } else {
      throw Error("unknown config key '" + full_key + "'");
    }
  }
}

// Loads a config file (if any) and then applies overrides given as
// "key=value" strings; override paths are relative to the working directory.
inline RunConfig load_config(const std::string& file, const std::vector<std::string>& overrides = {}) {
  RunConfig cfg;
  if (!file.empty()) {
    if (!std::filesystem::exists(file)) throw InputError("missing input: " + file);
    apply_config(cfg, read_key_values(file), std::filesystem::path(file).parent_path());
  }
  KeyValues kv;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error("override '" + o + "' is not key=value");
    kv[detail::trim(std::string_view(o).substr(0, eq))] = detail::trim(std::string_view(o).substr(eq + 1));
  }
  apply_config(cfg, kv);
  cfg.validate();
  return cfg;
}

}  // namespace hoirel
