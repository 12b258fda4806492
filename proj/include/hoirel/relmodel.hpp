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

// Domain types shared across the pipeline: boxes, human subtypes,
// relationship triplets, vocabularies and annotation records.

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "hoirel/common.hpp"

namespace hoirel {

// Axis-aligned box, [x, y, w, h] with a top-left origin.
struct BoundingBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }

  bool valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) &&
           x >= 0 && y >= 0 && w > 0 && h > 0;
  }

  bool contains(const BoundingBox& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }

  std::array<double, 4> as_array() const { return {x, y, w, h}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline void require_valid(const BoundingBox& b) {
  if (!b.valid()) {
    std::ostringstream os;
    os << "invalid box [" << b.x << "," << b.y << "," << b.w << "," << b.h << "]";
    throw Error(os.str());
  }
}

// Minimal box enclosing both inputs.
inline BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  const double x0 = std::min(a.x, b.x);
  const double y0 = std::min(a.y, b.y);
  const double x1 = std::max(a.right(), b.right());
  const double y1 = std::max(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

enum class HumanSubtype : std::uint8_t { kMan = 0, kWoman = 1, kBoy = 2, kGirl = 3 };

inline constexpr std::array<HumanSubtype, 4> kHumanSubtypes = {
    HumanSubtype::kMan, HumanSubtype::kWoman, HumanSubtype::kBoy, HumanSubtype::kGirl};

inline std::string_view to_string(HumanSubtype s) {
  switch (s) {
    case HumanSubtype::kMan: return "man";
    case HumanSubtype::kWoman: return "woman";
    case HumanSubtype::kBoy: return "boy";
    case HumanSubtype::kGirl: return "girl";
  }
  return "?";
}

// Exact canonical-name lookup ("man", "woman", "boy", "girl").
inline std::optional<HumanSubtype> parse_subtype(std::string_view name) {
  for (auto s : kHumanSubtypes) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

// Relationship type: the exact (subject subtype, predicate, object) triple.
struct RelType {
  HumanSubtype subject = HumanSubtype::kMan;
  std::string predicate;
  std::string object;

  friend auto operator<=>(const RelType&, const RelType&) = default;
  friend bool operator==(const RelType&, const RelType&) = default;

  std::string str() const {
    return std::string(to_string(subject)) + "-" + predicate + "-" + object;
  }
};

// Sorted, deduplicated list of normalized names with id lookup.
class NameIndex {
 public:
  NameIndex() = default;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }

  std::optional<std::size_t> id(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const NameIndex& a, const NameIndex& b) { return a.names_ == b.names_; }

 private:
  friend NameIndex resolve_vocabulary(const std::vector<std::string>& raw);
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Normalizes (lowercase, trim), deduplicates and assigns ids in sorted name order.
inline NameIndex resolve_vocabulary(const std::vector<std::string>& raw) {
  if (raw.empty()) throw Error("empty vocabulary");
  std::vector<std::string> names;
  names.reserve(raw.size());
  for (const auto& r : raw) {
    auto n = normalize_name(r);
    if (!n.empty()) names.push_back(std::move(n));
  }
  if (names.empty()) throw Error("empty vocabulary");
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  NameIndex idx;
  idx.names_ = std::move(names);
  for (std::size_t i = 0; i < idx.names_.size(); ++i) idx.ids_.emplace(idx.names_[i], i);
  return idx;
}

struct Vocabulary {
  NameIndex predicates;
  NameIndex objects;
  std::map<RelType, std::size_t> relationship_types;  // type -> frequency
};

// A grounded triplet; predicate and object are vocabulary ids.
struct RelationshipTriplet {
  HumanSubtype subject = HumanSubtype::kMan;
  std::size_t predicate = 0;
  std::size_t object = 0;
  BoundingBox subject_box;
  BoundingBox object_box;
  BoundingBox union_box;
};

inline RelationshipTriplet make_triplet(HumanSubtype subject, std::size_t predicate,
                                        std::size_t object, const BoundingBox& subject_box,
                                        const BoundingBox& object_box) {
  require_valid(subject_box);
  require_valid(object_box);
  return {subject, predicate, object, subject_box, object_box,
          union_box(subject_box, object_box)};
}

inline RelationshipTriplet make_triplet(const Vocabulary& vocab, HumanSubtype subject,
                                        std::size_t predicate, std::size_t object,
                                        const BoundingBox& subject_box,
                                        const BoundingBox& object_box) {
  if (predicate >= vocab.predicates.size()) throw Error("predicate id out of range");
  if (object >= vocab.objects.size()) throw Error("object id out of range");
  return make_triplet(subject, predicate, object, subject_box, object_box);
}

// Annotated (or detected) region inside one image.
struct Region {
  std::string id;
  std::string category;
  BoundingBox box;
  double score = 1.0;
};

struct RelationshipRef {
  std::string subject;  // region id
  std::string predicate;
  std::string object;  // region id
};

struct ImageRecord {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Region> regions;
  std::vector<RelationshipRef> relationships;

  const Region* find_region(std::string_view id) const {
    for (const auto& r : regions) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }
};

// Relationship type of one annotated relationship; nullopt when the subject
// region is not one of the four human subtypes.
inline std::optional<RelType> relationship_type(const ImageRecord& rec, const RelationshipRef& rel) {
  const Region* s = rec.find_region(rel.subject);
  const Region* o = rec.find_region(rel.object);
  if (s == nullptr || o == nullptr) return std::nullopt;
  auto subtype = parse_subtype(s->category);
  if (!subtype) return std::nullopt;
  return RelType{*subtype, rel.predicate, o->category};
}

struct FeatureVector {
  std::string sample_id;
  std::vector<float> values;
};

// Vocabulary files ---------------------------------------------------------

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_name_list(const std::string& path, const NameIndex& idx) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& n : idx.names()) out << n << '\n';
}

inline NameIndex read_name_list(const std::string& path) {
  std::vector<std::string> names;
  for (auto& l : read_lines(path)) {
    if (!normalize_name(l).empty()) names.push_back(l);
  }
  return resolve_vocabulary(names);
}

// Tab-separated "subject<TAB>predicate<TAB>object<TAB>count".
inline void write_triple_list(const std::string& path, const std::map<RelType, std::size_t>& types) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& [t, n] : types) {
    out << to_string(t.subject) << '\t' << t.predicate << '\t' << t.object << '\t' << n << '\n';
  }
}

inline std::map<RelType, std::size_t> read_triple_list(const std::string& path) {
  std::map<RelType, std::size_t> types;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 4) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    auto subject = parse_subtype(normalize_name(cols[0]));
    if (!subject) throw Error(path + ":" + std::to_string(line_no) + ": unknown subject " + cols[0]);
    std::size_t count = 0;
    try {
      count = std::stoull(cols[3]);
    } catch (const std::exception&) {
      throw Error(path + ":" + std::to_string(line_no) + ": bad count " + cols[3]);
    }
    types[RelType{*subject, normalize_name(cols[1]), normalize_name(cols[2])}] += count;
  }
  return types;
}

}  // namespace hoirel
