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

// Dataset construction: annotation parsing, label cleanup, object merging,
// human subtyping, split construction and dataset statistics.

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "hoirel/common.hpp"
#include "hoirel/relmodel.hpp"

namespace hoirel {

using json = nlohmann::json;

// Annotation file (JSON lines) ---------------------------------------------

namespace detail {

inline BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error("bbox must be [x,y,w,h]");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  require_valid(b);
  return b;
}

inline json box_to_json(const BoundingBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

}  // namespace detail

// Parses and validates one annotation line. Throws Error with a description
// of the first schema violation.
inline ImageRecord parse_annotation_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("record must be a JSON object");
  ImageRecord rec;
  try {
    rec.image_id = j.at("image_id").get<std::string>();
    rec.width = j.value("width", 0);
    rec.height = j.value("height", 0);
    std::unordered_set<std::string> seen;
    for (const auto& r : j.at("regions")) {
      Region reg;
      reg.id = r.at("id").get<std::string>();
      reg.category = r.at("category").get<std::string>();
      reg.box = detail::box_from_json(r.at("bbox"));
      if (r.contains("score") && !r["score"].is_null()) reg.score = r["score"].get<double>();
      if (!(reg.score >= 0.0 && reg.score <= 1.0)) {
        throw Error("region '" + reg.id + "' score outside [0,1]");
      }
      if (!seen.insert(reg.id).second) throw Error("duplicate region id '" + reg.id + "'");
      rec.regions.push_back(std::move(reg));
    }
    if (j.contains("relationships")) {
      for (const auto& r : j.at("relationships")) {
        RelationshipRef rel{r.at("subject").get<std::string>(), r.at("predicate").get<std::string>(),
                            r.at("object").get<std::string>()};
        for (const auto* ref : {&rel.subject, &rel.object}) {
          if (!seen.count(*ref)) throw Error("relationship references missing region_id '" + *ref + "'");
        }
        rec.relationships.push_back(std::move(rel));
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("schema violation: ") + e.what());
  }
  return rec;
}

inline std::vector<ImageRecord> parse_annotations_stream(std::istream& in, const std::string& what) {
  std::vector<ImageRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_annotation_line(line));
    } catch (const Error& e) {
      throw Error(what + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<ImageRecord> parse_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return parse_annotations_stream(in, path);
}

inline json record_to_json(const ImageRecord& rec) {
  json regions = json::array();
  for (const auto& r : rec.regions) {
    regions.push_back({{"id", r.id}, {"category", r.category}, {"bbox", detail::box_to_json(r.box)},
                       {"score", r.score}});
  }
  json rels = json::array();
  for (const auto& r : rec.relationships) {
    rels.push_back({{"subject", r.subject}, {"predicate", r.predicate}, {"object", r.object}});
  }
  return {{"image_id", rec.image_id}, {"width", rec.width}, {"height", rec.height},
          {"regions", regions}, {"relationships", rels}};
}

inline void write_annotations(const std::string& path, const std::vector<ImageRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

// Predicate normalization ----------------------------------------------------

// Inflected form -> canonical form. File format: "form<TAB>canonical" per line.
using LemmaTable = std::unordered_map<std::string, std::string>;

inline const std::set<std::string>& attribute_predicates() {
  static const std::set<std::string> kAttr = {"has", "is", "are"};
  return kAttr;
}

// Lowercases, drops characters other than letters, digits, spaces, hyphens and
// apostrophes, collapses whitespace.
inline std::string clean_label(std::string_view raw) {
  std::string kept;
  kept.reserve(raw.size());
  for (unsigned char c : raw) {
    if (std::isalnum(c) || c == '-' || c == '\'') {
      kept.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c) || c == '_') {
      kept.push_back(' ');
    }
  }
  std::string out;
  std::istringstream ss(kept);
  std::string word;
  while (ss >> word) {
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

// Returns the canonical predicate, or nullopt when it is discarded (empty or
// an attribute predicate). Idempotent.
inline std::optional<std::string> normalize_predicate(std::string_view raw, const LemmaTable& lemmas,
                                                      const std::set<std::string>& blocklist) {
  std::string p = clean_label(raw);
  // Follow lemma chains to a fixed point. A cyclic chain resolves to the
  // smallest name on the cycle, which keeps the function idempotent.
  std::vector<std::string> chain{p};
  while (true) {
    auto it = lemmas.find(p);
    if (it == lemmas.end()) break;
    std::string next = clean_label(it->second);
    auto seen = std::find(chain.begin(), chain.end(), next);
    if (seen != chain.end()) {
      p = *std::min_element(seen, chain.end());
      break;
    }
    chain.push_back(next);
    p = std::move(next);
  }
  if (p.empty() || blocklist.count(p) || attribute_predicates().count(p)) return std::nullopt;
  return p;
}

inline LemmaTable read_lemma_table(const std::string& path) {
  LemmaTable t;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(path + ":" + std::to_string(line_no) + ": expected form<TAB>canonical");
    t[clean_label(line.substr(0, tab))] = clean_label(line.substr(tab + 1));
  }
  return t;
}

inline std::set<std::string> read_blocklist(const std::string& path) {
  std::set<std::string> b = attribute_predicates();
  for (const auto& line : read_lines(path)) {
    auto n = clean_label(line);
    if (!n.empty() && line[0] != '#') b.insert(n);
  }
  return b;
}

// Human subtyping ------------------------------------------------------------

// Raw subject label -> subtype; nullopt entries mark explicit non-humans.
using SubtypeTable = std::unordered_map<std::string, std::optional<HumanSubtype>>;

inline std::optional<HumanSubtype> classify_human(std::string_view label, const SubtypeTable& table) {
  const std::string n = clean_label(label);
  auto it = table.find(n);
  if (it != table.end()) return it->second;
  return parse_subtype(n);
}

// "label<TAB>subtype" per line, subtype one of man/woman/boy/girl/nonhuman.
inline SubtypeTable read_subtype_table(const std::string& path) {
  SubtypeTable t;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(path + ":" + std::to_string(line_no) + ": expected label<TAB>subtype");
    const std::string target = normalize_name(line.substr(tab + 1));
    if (target == "nonhuman") {
      t[clean_label(line.substr(0, tab))] = std::nullopt;
    } else if (auto s = parse_subtype(target)) {
      t[clean_label(line.substr(0, tab))] = *s;
    } else {
      throw Error(path + ":" + std::to_string(line_no) + ": unknown subtype '" + target + "'");
    }
  }
  return t;
}

// Object merging -------------------------------------------------------------

class WordVectorTable {
 public:
  WordVectorTable() = default;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  void add(const std::string& token, std::vector<double> v) {
    if (vectors_.empty() && dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0) throw Error("word vector '" + token + "' has wrong dimension");
    for (double x : v) {
      if (!std::isfinite(x)) throw Error("word vector '" + token + "' has a non-finite entry");
    }
    vectors_[token] = std::move(v);
  }

  const std::vector<double>* find(const std::string& token) const {
    auto it = vectors_.find(token);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  // Unweighted mean of the known token vectors of a (possibly multi-word)
  // name; nullopt when no token is known.
  std::optional<std::vector<double>> embed(std::string_view name) const {
    std::istringstream ss{std::string(name)};
    std::string tok;
    std::vector<double> sum(dim_, 0.0);
    std::size_t n = 0;
    while (ss >> tok) {
      if (const auto* v = find(tok)) {
        for (std::size_t i = 0; i < dim_; ++i) sum[i] += (*v)[i];
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    for (auto& x : sum) x /= static_cast<double>(n);
    return sum;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

inline WordVectorTable read_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  WordVectorTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (!ss.eof()) throw Error(path + ":" + std::to_string(line_no) + ": malformed number");
    try {
      t.add(token, std::move(v));
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0 || nb <= 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct MergeResult {
  std::map<std::string, std::string> canonical;  // name -> canonical name, total over input
  std::vector<std::string> warnings;
};

// Single-link clustering of object names whose embeddings have cosine
// similarity >= threshold. The most frequent member of a cluster (ties: the
// lexicographically smallest name) becomes its canonical name.
inline MergeResult merge_objects(const std::map<std::string, std::size_t>& object_freq,
                                 const WordVectorTable& vectors, double threshold = 0.9) {
  std::vector<std::string> names;
  std::vector<std::optional<std::vector<double>>> emb;
  MergeResult res;
  for (const auto& [name, freq] : object_freq) {
    names.push_back(name);
    emb.push_back(vectors.embed(name));
    if (!emb.back()) res.warnings.push_back("no known tokens for object '" + name + "', left unmerged");
  }

  std::vector<std::size_t> parent(names.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  constexpr double kCosSlack = 1e-12;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!emb[i]) continue;
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      if (!emb[j]) continue;
      if (cosine_similarity(*emb[i], *emb[j]) >= threshold - kCosSlack) parent[root(i)] = root(j);
    }
  }

  std::map<std::size_t, std::size_t> best;  // root -> member index
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::size_t r = root(i);
    auto it = best.find(r);
    if (it == best.end()) {
      best.emplace(r, i);
    } else {
      const auto fi = object_freq.at(names[i]);
      const auto fb = object_freq.at(names[it->second]);
      if (fi > fb || (fi == fb && names[i] < names[it->second])) it->second = i;
    }
  }
  for (std::size_t i = 0; i < names.size(); ++i) res.canonical[names[i]] = names[best.at(root(i))];
  return res;
}

// Cleanup pass ---------------------------------------------------------------

struct CleanupTables {
  LemmaTable lemmas;
  std::set<std::string> blocklist = attribute_predicates();
  SubtypeTable subtypes;
  const WordVectorTable* word_vectors = nullptr;  // null disables merging
  double merge_threshold = 0.9;
  std::map<std::string, std::string> corrections;  // raw label fixes, applied first
};

struct CleanupReport {
  std::size_t relationships_in = 0;
  std::size_t relationships_out = 0;
  std::size_t discarded_predicates = 0;
  std::size_t nonhuman_subjects = 0;
  std::size_t human_objects = 0;
  std::size_t merged_objects = 0;
  std::vector<std::string> warnings;
};

// Applies predicate normalization, human subtyping and object merging.
// Relationships with a discarded predicate or a non-human subject are dropped.
inline std::vector<ImageRecord> clean_records(const std::vector<ImageRecord>& raw,
                                              const CleanupTables& tables, CleanupReport* report = nullptr) {
  CleanupReport rep;
  auto fix = [&](const std::string& s) {
    std::string c = clean_label(s);
    auto it = tables.corrections.find(c);
    return it == tables.corrections.end() ? c : clean_label(it->second);
  };

  // Region categories: humans -> subtype name, objects -> cleaned label.
  std::vector<ImageRecord> out = raw;
  std::map<std::string, std::size_t> object_freq;
  for (auto& rec : out) {
    std::unordered_set<std::string> object_regions;
    for (const auto& rel : rec.relationships) object_regions.insert(rel.object);
    for (auto& reg : rec.regions) {
      const std::string label = fix(reg.category);
      if (auto s = classify_human(label, tables.subtypes)) {
        reg.category = std::string(to_string(*s));
      } else {
        reg.category = label;
        if (object_regions.count(reg.id)) ++object_freq[label];
      }
    }
  }

  if (tables.word_vectors != nullptr && !object_freq.empty()) {
    auto merged = merge_objects(object_freq, *tables.word_vectors, tables.merge_threshold);
    rep.warnings = std::move(merged.warnings);
    for (const auto& [from, to] : merged.canonical) rep.merged_objects += (from != to);
    for (auto& rec : out) {
      for (auto& reg : rec.regions) {
        auto it = merged.canonical.find(reg.category);
        if (it != merged.canonical.end()) reg.category = it->second;
      }
    }
  }

  for (auto& rec : out) {
    std::vector<RelationshipRef> kept;
    for (const auto& rel : rec.relationships) {
      ++rep.relationships_in;
      auto p = normalize_predicate(fix(rel.predicate), tables.lemmas, tables.blocklist);
      if (!p) {
        ++rep.discarded_predicates;
        continue;
      }
      const Region* s = rec.find_region(rel.subject);
      const Region* o = rec.find_region(rel.object);
      if (!parse_subtype(s->category)) {
        ++rep.nonhuman_subjects;
        continue;
      }
      if (parse_subtype(o->category)) {
        ++rep.human_objects;
        continue;
      }
      kept.push_back({rel.subject, *p, rel.object});
    }
    rep.relationships_out += kept.size();
    rec.relationships = std::move(kept);
  }
  if (report) *report = std::move(rep);
  return out;
}

// Vocabulary over cleaned records; relationship-type counts are global.
inline Vocabulary build_vocabulary(const std::vector<ImageRecord>& records) {
  std::vector<std::string> preds, objs;
  Vocabulary v;
  for (const auto& rec : records) {
    for (const auto& rel : rec.relationships) {
      auto t = relationship_type(rec, rel);
      if (!t) continue;
      preds.push_back(t->predicate);
      objs.push_back(t->object);
      ++v.relationship_types[*t];
    }
  }
  if (!preds.empty()) {
    v.predicates = resolve_vocabulary(preds);
    v.objects = resolve_vocabulary(objs);
  }
  return v;
}

// Splits ---------------------------------------------------------------------

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> test_seen;
  std::vector<std::string> test_zeroshot;
  std::set<RelType> longtail_types;
};

struct SplitReport {
  std::vector<std::string> moved_to_zeroshot;  // drawn for test_seen but had unseen types
  std::vector<std::string> unassigned;
  std::size_t test_seen_shortfall = 0;
};

inline constexpr std::size_t kLongtailLimit = 10;  // "appears less than 10 times"

inline std::map<RelType, std::size_t> type_counts(const std::vector<ImageRecord>& records,
                                                  const std::set<std::string>* only_images = nullptr) {
  std::map<RelType, std::size_t> counts;
  for (const auto& rec : records) {
    if (only_images && !only_images->count(rec.image_id)) continue;
    for (const auto& rel : rec.relationships) {
      if (auto t = relationship_type(rec, rel)) ++counts[*t];
    }
  }
  return counts;
}

// Seeded split: the first train_size shuffled images form the training set;
// remaining images whose types all occur in training fill test_seen, and
// those containing an unseen type form test_zeroshot.
inline SplitSpec build_splits(const std::vector<ImageRecord>& records, std::size_t train_size,
                              std::size_t test_seen_size, std::uint64_t seed,
                              SplitReport* report = nullptr) {
  if (records.empty()) throw Error("empty dataset");
  if (train_size + test_seen_size > records.size()) {
    throw Error("train_size + test_seen_size exceeds the number of images (" +
                std::to_string(records.size()) + ")");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  SplitSpec split;
  SplitReport rep;
  std::set<RelType> seen;
  std::map<RelType, std::size_t> train_counts;
  for (std::size_t i = 0; i < train_size; ++i) {
    const auto& rec = records[order[i]];
    split.train.push_back(rec.image_id);
    for (const auto& rel : rec.relationships) {
      if (auto t = relationship_type(rec, rel)) ++train_counts[*t];
    }
  }
  for (std::size_t i = train_size; i < order.size(); ++i) {
    const auto& rec = records[order[i]];
    bool all_seen = true;
    for (const auto& rel : rec.relationships) {
      auto t = relationship_type(rec, rel);
      if (t && !train_counts.count(*t)) {
        all_seen = false;
        break;
      }
    }
    if (!all_seen) {
      if (split.test_seen.size() < test_seen_size) rep.moved_to_zeroshot.push_back(rec.image_id);
      split.test_zeroshot.push_back(rec.image_id);
    } else if (split.test_seen.size() < test_seen_size) {
      split.test_seen.push_back(rec.image_id);
    } else {
      rep.unassigned.push_back(rec.image_id);
    }
  }
  rep.test_seen_shortfall = test_seen_size - split.test_seen.size();
  for (const auto& [t, n] : train_counts) {
    if (n >= 1 && n < kLongtailLimit) split.longtail_types.insert(t);
  }
  for (auto* v : {&split.train, &split.test_seen, &split.test_zeroshot}) std::sort(v->begin(), v->end());
  if (report) *report = std::move(rep);
  return split;
}

inline json reltype_to_json(const RelType& t) {
  return json::array({std::string(to_string(t.subject)), t.predicate, t.object});
}

inline RelType reltype_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("relationship type must be [subject, predicate, object]");
  auto s = parse_subtype(j[0].get<std::string>());
  if (!s) throw Error("unknown subject subtype '" + j[0].get<std::string>() + "'");
  return {*s, j[1].get<std::string>(), j[2].get<std::string>()};
}

inline json split_to_json(const SplitSpec& s) {
  json lt = json::array();
  for (const auto& t : s.longtail_types) lt.push_back(reltype_to_json(t));
  return {{"train", s.train}, {"test_seen", s.test_seen}, {"test_zeroshot", s.test_zeroshot},
          {"longtail_types", lt}};
}

inline SplitSpec split_from_json(const json& j) {
  SplitSpec s;
  try {
    s.train = j.at("train").get<std::vector<std::string>>();
    s.test_seen = j.at("test_seen").get<std::vector<std::string>>();
    s.test_zeroshot = j.at("test_zeroshot").get<std::vector<std::string>>();
    for (const auto& t : j.at("longtail_types")) s.longtail_types.insert(reltype_from_json(t));
  } catch (const json::exception& e) {
    throw Error(std::string("split file: ") + e.what());
  }
  return s;
}

inline SplitSpec read_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return split_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
}

// Statistics -----------------------------------------------------------------

struct DatasetStats {
  std::size_t n_images = 0;
  std::size_t n_instances = 0;
  std::size_t n_relationship_types = 0;  // types seen in training (all types without a split)
  std::size_t n_zeroshot_types = 0;
  std::size_t n_predicates = 0;
  std::size_t n_objects = 0;
  std::size_t n_longtail_types = 0;  // count in [1, 9]
  std::size_t n_frequent_types = 0;  // count > 100
  double instances_per_image_mean = 0;
  double relationships_per_person_mean = 0;
  double predicates_per_object_mean = 0;
  std::vector<std::pair<RelType, std::size_t>> type_frequency_histogram;  // descending count
  std::map<HumanSubtype, std::size_t> human_subtype_distribution;          // distinct subject regions
};

// Direct counts over the records. With a split, relationship types are
// divided into seen (present in train) and zero-shot; long-tail and frequent
// type counts use training counts unless count_globally is set.
inline DatasetStats compute_stats(const std::vector<ImageRecord>& records, const SplitSpec* split = nullptr,
                                  bool count_globally = false) {
  DatasetStats st;
  st.n_images = records.size();
  for (auto s : kHumanSubtypes) st.human_subtype_distribution[s] = 0;

  std::map<RelType, std::size_t> global = type_counts(records);
  std::set<std::string> preds, objs;
  std::map<std::string, std::set<std::string>> preds_per_obj;
  std::size_t persons = 0;
  for (const auto& rec : records) {
    std::set<std::string> subjects;
    for (const auto& rel : rec.relationships) {
      auto t = relationship_type(rec, rel);
      if (!t) continue;
      ++st.n_instances;
      preds.insert(t->predicate);
      objs.insert(t->object);
      preds_per_obj[t->object].insert(t->predicate);
      if (subjects.insert(rel.subject).second) ++st.human_subtype_distribution[t->subject];
    }
    persons += subjects.size();
  }
  st.n_predicates = preds.size();
  st.n_objects = objs.size();
  if (st.n_images) st.instances_per_image_mean = double(st.n_instances) / double(st.n_images);
  if (persons) st.relationships_per_person_mean = double(st.n_instances) / double(persons);
  if (!preds_per_obj.empty()) {
    std::size_t total = 0;
    for (const auto& [o, ps] : preds_per_obj) total += ps.size();
    st.predicates_per_object_mean = double(total) / double(preds_per_obj.size());
  }

  std::map<RelType, std::size_t> train;
  if (split != nullptr) {
    std::set<std::string> ids(split->train.begin(), split->train.end());
    train = type_counts(records, &ids);
    for (const auto& [t, n] : global) {
      if (train.count(t)) {
        ++st.n_relationship_types;
      } else {
        ++st.n_zeroshot_types;
      }
    }
  } else {
    st.n_relationship_types = global.size();
  }
  const auto& tail_counts = (split != nullptr && !count_globally) ? train : global;
  for (const auto& [t, n] : tail_counts) {
    if (n >= 1 && n < kLongtailLimit) ++st.n_longtail_types;
    if (n > 100) ++st.n_frequent_types;
  }

  st.type_frequency_histogram.assign(global.begin(), global.end());
  std::stable_sort(st.type_frequency_histogram.begin(), st.type_frequency_histogram.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return st;
}

inline json stats_to_json(const DatasetStats& st) {
  json hist = json::array();
  json rank = json::array();
  std::size_t r = 0;
  for (const auto& [t, n] : st.type_frequency_histogram) {
    hist.push_back({{"type", reltype_to_json(t)}, {"count", n}});
    rank.push_back(json::array({++r, n}));
  }
  json subtypes = json::object();
  for (const auto& [s, n] : st.human_subtype_distribution) subtypes[std::string(to_string(s))] = n;
  return {{"n_images", st.n_images},
          {"n_instances", st.n_instances},
          {"n_relationship_types", st.n_relationship_types},
          {"n_zeroshot_types", st.n_zeroshot_types},
          {"n_predicates", st.n_predicates},
          {"n_objects", st.n_objects},
          {"n_longtail_types", st.n_longtail_types},
          {"n_frequent_types", st.n_frequent_types},
          {"instances_per_image_mean", st.instances_per_image_mean},
          {"relationships_per_person_mean", st.relationships_per_person_mean},
          {"predicates_per_object_mean", st.predicates_per_object_mean},
          {"human_subtype_distribution", subtypes},
          {"type_frequency_histogram", hist},
          {"rank_frequency", rank}};
}

}  // namespace hoirel
