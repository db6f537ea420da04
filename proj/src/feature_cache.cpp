// Copyright 2026 The phasefuse Authors
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

#include "phasefuse/feature_cache.hpp"

#include "phasefuse/binary_io.hpp"

#include <fstream>

namespace phasefuse {

namespace {
constexpr char kMagic[8] = {'P', 'F', 'F', 'E', 'A', 'T', '\0', '\1'};
}  // namespace

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& feat, const std::string& utterance_id) {
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kFeatureFileVersion);
  w.str(utterance_id);
  w.u8(static_cast<std::uint8_t>(feat.source));
  w.u8(static_cast<std::uint8_t>(feat.kind));
  w.u16(0);
  w.i64(feat.frames());
  w.i64(feat.dim());
  for (Eigen::Index t = 0; t < feat.frames(); ++t) {
    for (Eigen::Index d = 0; d < feat.dim(); ++d) w.f32(static_cast<float>(feat.values(t, d)));
  }
  return w.take();
}

FeatureMap decode_feature_map(const std::vector<std::uint8_t>& bytes, std::string* utterance_id) {
  ByteReader r(bytes, "feature file");
  r.expect_magic(kMagic, sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kFeatureFileVersion) {
    throw IoError("feature file: unsupported version " + std::to_string(version));
  }
  std::string id = r.str();
  FeatureMap f;
  const std::uint8_t source = r.u8(), kind = r.u8();
  if (source > 2 || kind > 3) throw IoError("feature file: bad channel tag");
  f.source = static_cast<FeatureSource>(source);
  f.kind = static_cast<ChannelKind>(kind);
  r.u16();
  const std::int64_t t = r.i64(), d = r.i64();
  if (t < 0 || d < 0 || (d > 0 && t > static_cast<std::int64_t>(r.remaining() / 4 / static_cast<std::size_t>(d)))) {
    throw IoError("feature file: bad dimensions");
  }
  f.values.resize(t, d);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) f.values(i, j) = r.f32();
  }
  if (r.remaining() != 0) throw IoError("feature file: trailing bytes");
  if (utterance_id) *utterance_id = std::move(id);
  return f;
}

void save_feature_map(const FeatureMap& feat, const std::string& utterance_id, const std::filesystem::path& path) {
  write_file(path, encode_feature_map(feat, utterance_id));
}

FeatureMap load_feature_map(const std::filesystem::path& path, std::string* utterance_id) {
  return decode_feature_map(read_file(path), utterance_id);
}

std::filesystem::path FeatureCache::path(const std::string& pairing, const std::string& utterance_id,
                                         const std::string& channel) const {
  return root_ / pairing / (utterance_id + "." + channel + ".pff");
}

bool FeatureCache::has(const std::string& pairing, const std::string& utterance_id) const {
  return std::filesystem::exists(path(pairing, utterance_id, "mag")) &&
         std::filesystem::exists(path(pairing, utterance_id, "phase"));
}

void FeatureCache::put(const std::string& pairing, const std::string& utterance_id, const FeatureMap& magnitude,
                       const FeatureMap& phase) const {
  std::filesystem::create_directories(root_ / pairing);
  save_feature_map(magnitude, utterance_id, path(pairing, utterance_id, "mag"));
  save_feature_map(phase, utterance_id, path(pairing, utterance_id, "phase"));
}

void FeatureCache::get(const std::string& pairing, const std::string& utterance_id, FeatureMap& magnitude,
                       FeatureMap& phase) const {
  if (!has(pairing, utterance_id)) {
    throw DataError("feature cache miss: '" + utterance_id + "' (" + pairing + ") not under " + root_.string());
  }
  std::string id;
  magnitude = load_feature_map(path(pairing, utterance_id, "mag"), &id);
  if (id != utterance_id) throw IoError("feature cache: file for '" + utterance_id + "' holds '" + id + "'");
  phase = load_feature_map(path(pairing, utterance_id, "phase"), &id);
  if (id != utterance_id) throw IoError("feature cache: file for '" + utterance_id + "' holds '" + id + "'");
}

}  // namespace phasefuse
