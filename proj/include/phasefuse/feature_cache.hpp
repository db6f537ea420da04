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

// Binary feature files, little-endian:
//   char[8] "PFFEAT\0\1" | u32 version | u32 id length | id bytes |
//   u8 source | u8 kind | u16 reserved | i64 T | i64 D | f32[T*D] row-major

#pragma once

#include "phasefuse/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace phasefuse {

inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& feat, const std::string& utterance_id);
FeatureMap decode_feature_map(const std::vector<std::uint8_t>& bytes, std::string* utterance_id = nullptr);

void save_feature_map(const FeatureMap& feat, const std::string& utterance_id, const std::filesystem::path& path);
FeatureMap load_feature_map(const std::filesystem::path& path, std::string* utterance_id = nullptr);

/// <root>/<pairing>/<utterance>.<channel>.pff
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path path(const std::string& pairing, const std::string& utterance_id,
                             const std::string& channel) const;
  bool has(const std::string& pairing, const std::string& utterance_id) const;
  void put(const std::string& pairing, const std::string& utterance_id, const FeatureMap& magnitude,
           const FeatureMap& phase) const;
  /// Throws DataError on a miss.
  void get(const std::string& pairing, const std::string& utterance_id, FeatureMap& magnitude,
           FeatureMap& phase) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace phasefuse
