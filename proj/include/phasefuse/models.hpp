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

#pragma once

#include "phasefuse/nn/layers.hpp"

#include <memory>
#include <string>
#include <vector>

namespace phasefuse {

/// Magnitude/phase feature pairings.
enum class Pairing : std::uint8_t {
  lps,   // log-power DFT + DFT phase
  cqt,   // log-power CQT + CQT phase
  lfcc,  // LFCC + DFT phase
};

enum class FrameworkKind : std::uint8_t {
  A_magnitude_only,
  B_raw_concat,
  C_phase_network_concat,
};

std::string to_string(Pairing p);
std::string to_string(FrameworkKind k);
Pairing pairing_from_string(const std::string& s);       // lps | cqt | lfcc
FrameworkKind framework_from_string(const std::string& s);  // a | b | c

/// Magnitude and phase dims a pairing produces with the default front-ends.
struct PairingDims {
  Eigen::Index magnitude = 0;
  Eigen::Index phase = 0;
};
PairingDims default_dims(Pairing p);

/// Conv ladder: hidden conv -> BN -> ReLU units, then a final conv to one
/// channel. The first conv strides the frequency axis by `stride`.
struct PhaseNetConfig {
  int stride = 1;
  bool use_adaptive_pool = false;
  Eigen::Index target_dim = 0;  // D*
  std::vector<Eigen::Index> channels{4, 4};
  std::vector<Eigen::Index> kernels{3, 3, 1};  // one more than channels

  /// S = 2 with pooling to the magnitude dim for LFCC, S = 1 otherwise.
  static PhaseNetConfig for_pairing(Pairing p, Eigen::Index magnitude_dim);
  void validate() const;
};

struct BackendConfig {
  std::string preset = "lite";
  Eigen::Index in_channels = 1;
  Eigen::Index stem_channels = 8;
  std::vector<Eigen::Index> widths{8, 16, 32};  // Res2Net inner width per stage
  std::vector<int> blocks{1, 1, 1};
  Eigen::Index expansion = 4;  // stage output channels = expansion * width
  Eigen::Index scale = 4;
  Eigen::Index se_reduction = 4;

  static BackendConfig lite(Eigen::Index in_channels);
  static BackendConfig paper_scale(Eigen::Index in_channels);
  static BackendConfig from_preset(const std::string& name, Eigen::Index in_channels);
  void validate() const;
};

/// Everything needed to rebuild a model.
struct ModelConfig {
  FrameworkKind framework = FrameworkKind::C_phase_network_concat;
  Pairing pairing = Pairing::cqt;
  Eigen::Index magnitude_dim = 108;
  Eigen::Index phase_dim = 108;
  PhaseNetConfig phase_net;  // used by C only
  BackendConfig backend;

  /// Consistent defaults for (framework, pairing) at the given dims.
  static ModelConfig make(FrameworkKind kind, Pairing pairing, Eigen::Index magnitude_dim, Eigen::Index phase_dim,
                          const std::string& backend_preset = "lite");
  void validate() const;
};

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

template <typename Scalar>
std::unique_ptr<nn::Sequential<Scalar>> build_phase_network(const PhaseNetConfig& cfg);

template <typename Scalar>
std::unique_ptr<nn::Sequential<Scalar>> build_backend(const BackendConfig& cfg);

/// Framework assemblies. A feeds magnitude only; B stacks magnitude with raw
/// phase (pooled to the magnitude dim without parameters when they
/// differ); C stacks magnitude with the phase network's output.
template <typename Scalar>
class FrameworkModel {
 public:
  explicit FrameworkModel(const ModelConfig& cfg);

  /// magnitude: B x 1 x T x D; phase: B x 1 x T x D_phase (unused by A).
  /// Returns logits B x 2 x 1 x 1 (index 1 = bonafide).
  nn::Tensor4<Scalar> forward(const nn::Tensor4<Scalar>& magnitude, const nn::Tensor4<Scalar>& phase, nn::Mode mode);
  /// Accumulates parameter gradients.
  void backward(const nn::Tensor4<Scalar>& grad_logits);

  /// Phase channel exactly as the backend sees it (C: phase-network output,
  /// B: raw or pooled phase) from the last forward.
  const nn::Tensor4<Scalar>& phase_channel() const { return phase_channel_; }

  nn::Collection<Scalar> collect();
  void reset_parameters(std::uint64_t seed);
  std::size_t param_count();

  const ModelConfig& config() const { return cfg_; }
  nn::Sequential<Scalar>* phase_network() { return phase_net_.get(); }
  nn::Sequential<Scalar>& backend() { return *backend_; }

 private:
  ModelConfig cfg_;
  std::unique_ptr<nn::Sequential<Scalar>> phase_net_;
  std::unique_ptr<nn::AdaptiveAvgPool2d<Scalar>> raw_pool_;
  std::unique_ptr<nn::Sequential<Scalar>> backend_;
  nn::Tensor4<Scalar> phase_channel_;
};

/// Parameter count of a framework model without keeping it around.
std::size_t framework_param_count(const ModelConfig& cfg);

}  // namespace phasefuse
