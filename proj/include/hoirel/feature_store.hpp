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

// HCVF feature-store codec.
//
// Layout (all integers little-endian):
//   "HCVF" | version u32 | count u32 | dim u32
//   count x (id length u16 | id bytes, UTF-8)
//   count x dim float32, row-major

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hoirel/common.hpp"
#include "hoirel/relmodel.hpp"

namespace hoirel {

inline constexpr char kFeatureMagic[4] = {'H', 'C', 'V', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t row) const { return ids_.at(row); }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::span<const float>> get(std::string_view id) const {
    auto r = find(id);
    if (!r) return std::nullopt;
    return row(*r);
  }

  void add(std::string id, std::span<const float> values) {
    if (ids_.empty() && dim_ == 0) dim_ = values.size();
    if (values.size() != dim_) {
      throw Error("feature '" + id + "' has dimension " + std::to_string(values.size()) +
                  ", store dimension is " + std::to_string(dim_));
    }
    for (float v : values) {
      if (!std::isfinite(v)) throw Error("feature '" + id + "' has a non-finite entry");
    }
    if (id.size() > UINT16_MAX) throw Error("feature id too long");
    if (index_.count(id)) throw Error("duplicate feature id '" + id + "'");
    index_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    data_.insert(data_.end(), values.begin(), values.end());
  }

  void add(const FeatureVector& f) { add(f.sample_id, f.values); }

  friend bool operator==(const FeatureStore& a, const FeatureStore& b) {
    if (a.dim_ != b.dim_ || a.ids_ != b.ids_ || a.data_.size() != b.data_.size()) return false;
    return std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Bounds-checked little-endian reader over an in-memory buffer.
class ByteReader {
 public:
  ByteReader(std::string_view buf, std::string what) : buf_(buf), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == buf_.size(); }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint16_t u16() {
    auto s = bytes(2);
    return static_cast<std::uint16_t>(static_cast<unsigned char>(s[0]) |
                                      (static_cast<unsigned char>(s[1]) << 8));
  }

  std::uint32_t u32() {
    auto s = bytes(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
    return v;
  }

  std::uint64_t u64() {
    auto s = bytes(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
    return v;
  }

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw Error(what_ + ": " + msg + " at byte offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail("truncated input", pos_);
  }

  std::string_view buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void dump(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

}  // namespace detail

inline std::string encode_feature_store(const FeatureStore& store) {
  std::string out;
  out.append(kFeatureMagic, 4);
  detail::put_u32(out, kFeatureVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(store.dim()));
  for (const auto& id : store.ids()) {
    detail::put_u16(out, static_cast<std::uint16_t>(id.size()));
    out.append(id);
  }
  for (std::size_t r = 0; r < store.size(); ++r) {
    for (float v : store.row(r)) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline FeatureStore decode_feature_store(std::string_view bytes, const std::string& what = "HCVF") {
  detail::ByteReader rd(bytes, what);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
    rd.fail("bad magic", 0);
  }
  rd.bytes(4);
  const std::size_t version_at = rd.offset();
  const auto version = rd.u32();
  if (version != kFeatureVersion) rd.fail("unsupported version " + std::to_string(version), version_at);
  const auto count = rd.u32();
  const auto dim = rd.u32();
  std::vector<std::string> ids;
  ids.reserve(std::min<std::size_t>(count, bytes.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = rd.u16();
    ids.emplace_back(rd.bytes(len));
  }
  FeatureStore store(dim);
  std::vector<float> row(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t row_at = rd.offset();
    for (std::uint32_t k = 0; k < dim; ++k) row[k] = std::bit_cast<float>(rd.u32());
    try {
      store.add(std::move(ids[i]), row);
    } catch (const Error& e) {
      rd.fail(e.what(), row_at);
    }
  }
  if (!rd.at_end()) rd.fail("trailing bytes", rd.offset());
  return store;
}

inline void write_feature_store(const std::string& path, const FeatureStore& store) {
  detail::dump(path, encode_feature_store(store));
}

inline FeatureStore read_feature_store(const std::string& path) {
  return decode_feature_store(detail::slurp(path), path);
}

// Read and require a specific dimension.
inline FeatureStore read_feature_store(const std::string& path, std::size_t expected_dim) {
  auto store = read_feature_store(path);
  if (!store.empty() && store.dim() != expected_dim) {
    throw Error(path + ": dimension " + std::to_string(store.dim()) + ", expected " +
                std::to_string(expected_dim));
  }
  return store;
}

}  // namespace hoirel
