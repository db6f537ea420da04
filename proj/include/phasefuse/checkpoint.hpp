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

// Checkpoint byte layout (little-endian):
//   char[8] "PFCKPT\0\1" | u32 version | str model_config_json |
//   f64 best_dev_eer | i64 epoch_of_best | u64 seed |
//   u32 n_params  | n_params  x array |
//   u32 n_buffers | n_buffers x array |
//   i64 adam_step | f64 lr, beta1, beta2, eps, weight_decay |
//   u32 n_moments | n_moments x array (first moments) | n_moments x array (second)
// where str = u32 length + bytes and
//   array = str name | u32 ndim | i64 dims[ndim] | f32 values[prod(dims)].

#pragma once

#include "phasefuse/models.hpp"
#include "phasefuse/nn/adam.hpp"

#include <filesystem>

namespace phasefuse {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct Checkpoint {
  ModelConfig model;
  double best_dev_eer = 0.0;
  int epoch_of_best = 0;
  std::uint64_t seed = 0;
  std::vector<NamedArray> params;
  std::vector<NamedArray> buffers;
  std::int64_t adam_step = 0;
  nn::AdamConfig adam;
  std::vector<NamedArray> adam_m, adam_v;
};

/// Copies model parameters, BN buffers and (optionally) optimizer state.
Checkpoint capture_checkpoint(FrameworkModel<float>& model, const nn::AdamState<float>* adam);
/// Loads arrays by name; shapes must match exactly.
void restore_checkpoint(const Checkpoint& ckpt, FrameworkModel<float>& model, nn::AdamState<float>* adam = nullptr);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace phasefuse
