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

#include "phasefuse/models.hpp"

#include <json.hpp>

namespace phasefuse {

using nlohmann::json;
using Eigen::Index;

std::string to_string(Pairing p) {
  switch (p) {
    case Pairing::lps: return "lps";
    case Pairing::cqt: return "cqt";
    case Pairing::lfcc: return "lfcc";
  }
  return "?";
}

std::string to_string(FrameworkKind k) {
  switch (k) {
    case FrameworkKind::A_magnitude_only: return "a";
    case FrameworkKind::B_raw_concat: return "b";
    case FrameworkKind::C_phase_network_concat: return "c";
  }
  return "?";
}

Pairing pairing_from_string(const std::string& s) {
  if (s == "lps") return Pairing::lps;
  if (s == "cqt") return Pairing::cqt;
  if (s == "lfcc") return Pairing::lfcc;
  throw ConfigError("unknown feature pairing '" + s + "' (expected lps, cqt or lfcc)");
}

FrameworkKind framework_from_string(const std::string& s) {
  if (s == "a" || s == "A") return FrameworkKind::A_magnitude_only;
  if (s == "b" || s == "B") return FrameworkKind::B_raw_concat;
  if (s == "c" || s == "C") return FrameworkKind::C_phase_network_concat;
  throw ConfigError("unknown framework '" + s + "' (expected a, b or c)");
}

PairingDims default_dims(Pairing p) {
  switch (p) {
    case Pairing::lps: return {513, 513};
    case Pairing::cqt: return {108, 108};
    case Pairing::lfcc: return {60, 513};
  }
  return {};
}

PhaseNetConfig PhaseNetConfig::for_pairing(Pairing p, Index magnitude_dim) {
  PhaseNetConfig c;
  c.target_dim = magnitude_dim;
  if (p == Pairing::lfcc) {
    c.stride = 2;
    c.use_adaptive_pool = true;
  }
  return c;
}

void PhaseNetConfig::validate() const {
  if (stride != 1 && stride != 2) throw ConfigError("phase network: stride S must be 1 or 2");
  if (target_dim < 1) throw ConfigError("phase network: target dim D* must be >= 1");
  if (kernels.size() != channels.size() + 1) {
    throw ConfigError("phase network: need one kernel per conv (hidden channels + final)");
  }
  for (Index k : kernels) {
    if (k < 1 || k % 2 == 0) throw ConfigError("phase network: kernels must be odd and >= 1");
  }
  for (Index c : channels) {
    if (c < 1) throw ConfigError("phase network: channel counts must be >= 1");
  }
}

BackendConfig BackendConfig::lite(Index in_channels) {
  BackendConfig c;
  c.in_channels = in_channels;
  return c;
}

BackendConfig BackendConfig::paper_scale(Index in_channels) {
  BackendConfig c;
  c.preset = "paper_scale";
  c.in_channels = in_channels;
  c.stem_channels = 32;
  c.widths = {16, 32, 64, 128};
  c.blocks = {2, 2, 2, 2};
  c.expansion = 4;
  c.scale = 4;
  c.se_reduction = 8;
  return c;
}

BackendConfig BackendConfig::from_preset(const std::string& name, Index in_channels) {
  if (name == "lite") return lite(in_channels);
  if (name == "paper_scale") return paper_scale(in_channels);
  throw ConfigError("unknown backend preset '" + name + "' (expected lite or paper_scale)");
}

void BackendConfig::validate() const {
  if (in_channels != 1 && in_channels != 2) throw ConfigError("backend: in_channels must be 1 or 2");
  if (stem_channels < 1 || expansion < 1) throw ConfigError("backend: invalid stem or expansion");
  if (widths.empty() || widths.size() != blocks.size()) {
    throw ConfigError("backend: widths and blocks must be non-empty and of equal length");
  }
  if (scale < 2) throw ConfigError("backend: Res2Net scale must be >= 2");
  if (se_reduction < 1) throw ConfigError("backend: SE reduction must be >= 1");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] < scale || widths[i] % scale != 0) {
      throw ConfigError("backend: width " + std::to_string(widths[i]) + " not divisible by scale " +
                        std::to_string(scale));
    }
    if (blocks[i] < 1) throw ConfigError("backend: each stage needs >= 1 block");
  }
}

ModelConfig ModelConfig::make(FrameworkKind kind, Pairing pairing, Index magnitude_dim, Index phase_dim,
                              const std::string& backend_preset) {
  ModelConfig c;
  c.framework = kind;
  c.pairing = pairing;
  c.magnitude_dim = magnitude_dim;
  c.phase_dim = phase_dim;
  c.phase_net = PhaseNetConfig::for_pairing(pairing, magnitude_dim);
  c.backend = BackendConfig::from_preset(backend_preset, kind == FrameworkKind::A_magnitude_only ? 1 : 2);
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (magnitude_dim < 1 || phase_dim < 1) throw ConfigError("model: feature dims must be >= 1");
  backend.validate();
  const Index want = framework == FrameworkKind::A_magnitude_only ? 1 : 2;
  if (backend.in_channels != want) {
    throw ConfigError("model: framework " + to_string(framework) + " needs backend in_channels = " +
                      std::to_string(want));
  }
  if (framework == FrameworkKind::B_raw_concat && phase_dim != magnitude_dim) {
    if (pairing != Pairing::lfcc) {
      throw ConfigError("model: framework b needs equal magnitude/phase dims for pairing " + to_string(pairing));
    }
    if (phase_dim < magnitude_dim) throw ConfigError("model: phase dim smaller than magnitude dim");
  }
  if (framework == FrameworkKind::C_phase_network_concat) {
    phase_net.validate();
    if (phase_net.target_dim != magnitude_dim) {
      throw ConfigError("model: phase network target dim must equal the magnitude dim");
    }
    const bool want_pool = pairing == Pairing::lfcc;
    if (phase_net.use_adaptive_pool != want_pool || (phase_net.stride == 2) != want_pool) {
      throw ConfigError("model: phase network uses S = 2 with pooling for lfcc and S = 1 without pooling otherwise");
    }
    const Index k0 = phase_net.kernels.front();
    const Index conv_w = (phase_dim + 2 * (k0 / 2) - k0) / phase_net.stride + 1;
    if (phase_net.use_adaptive_pool ? phase_net.target_dim > conv_w : conv_w != magnitude_dim) {
      throw ConfigError("model: phase network output width " + std::to_string(conv_w) +
                        " cannot be mapped to D* = " + std::to_string(phase_net.target_dim));
    }
  }
}

std::string model_config_to_json(const ModelConfig& c) {
  json j;
  j["framework"] = to_string(c.framework);
  j["pairing"] = to_string(c.pairing);
  j["magnitude_dim"] = c.magnitude_dim;
  j["phase_dim"] = c.phase_dim;
  j["phase_net"] = {{"stride", c.phase_net.stride},
                    {"adaptive_pool", c.phase_net.use_adaptive_pool},
                    {"target_dim", c.phase_net.target_dim},
                    {"channels", c.phase_net.channels},
                    {"kernels", c.phase_net.kernels}};
  j["backend"] = {{"preset", c.backend.preset},
                  {"in_channels", c.backend.in_channels},
                  {"stem_channels", c.backend.stem_channels},
                  {"widths", c.backend.widths},
                  {"blocks", c.backend.blocks},
                  {"expansion", c.backend.expansion},
                  {"scale", c.backend.scale},
                  {"se_reduction", c.backend.se_reduction}};
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    c.framework = framework_from_string(j.at("framework").get<std::string>());
    c.pairing = pairing_from_string(j.at("pairing").get<std::string>());
    c.magnitude_dim = j.at("magnitude_dim").get<Index>();
    c.phase_dim = j.at("phase_dim").get<Index>();
    const auto& p = j.at("phase_net");
    c.phase_net.stride = p.at("stride").get<int>();
    c.phase_net.use_adaptive_pool = p.at("adaptive_pool").get<bool>();
    c.phase_net.target_dim = p.at("target_dim").get<Index>();
    c.phase_net.channels = p.at("channels").get<std::vector<Index>>();
    c.phase_net.kernels = p.at("kernels").get<std::vector<Index>>();
    const auto& b = j.at("backend");
    c.backend.preset = b.at("preset").get<std::string>();
    c.backend.in_channels = b.at("in_channels").get<Index>();
    c.backend.stem_channels = b.at("stem_channels").get<Index>();
    c.backend.widths = b.at("widths").get<std::vector<Index>>();
    c.backend.blocks = b.at("blocks").get<std::vector<int>>();
    c.backend.expansion = b.at("expansion").get<Index>();
    c.backend.scale = b.at("scale").get<Index>();
    c.backend.se_reduction = b.at("se_reduction").get<Index>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename Scalar>
std::unique_ptr<nn::Sequential<Scalar>> build_phase_network(const PhaseNetConfig& cfg) {
  cfg.validate();
  auto net = std::make_unique<nn::Sequential<Scalar>>();
  Index in = 1;
  for (std::size_t i = 0; i < cfg.kernels.size(); ++i) {
    const bool last = i + 1 == cfg.kernels.size();
    const Index out = last ? 1 : cfg.channels[i];
    const Index k = cfg.kernels[i];
    nn::ConvGeometry g{k, k, 1, i == 0 ? cfg.stride : 1, k / 2, k / 2};
    const std::string id = std::to_string(i);
    net->add("conv" + id, std::make_unique<nn::Conv2d<Scalar>>(in, out, g, true));
    if (!last) {
      net->add("bn" + id, std::make_unique<nn::BatchNorm2d<Scalar>>(out));
      net->add("relu" + id, std::make_unique<nn::ReLU<Scalar>>());
    }
    in = out;
  }
  if (cfg.use_adaptive_pool) net->add("pool", std::make_unique<nn::AdaptiveAvgPool2d<Scalar>>(-1, cfg.target_dim));
  return net;
}

template <typename Scalar>
std::unique_ptr<nn::Sequential<Scalar>> build_backend(const BackendConfig& cfg) {
  cfg.validate();
  auto net = std::make_unique<nn::Sequential<Scalar>>();
  net->add("stem", nn::conv_bn_relu<Scalar>(cfg.in_channels, cfg.stem_channels, {3, 3, 2, 2, 1, 1}, false));
  Index in = cfg.stem_channels;
  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    const Index out = cfg.expansion * cfg.widths[s];
    auto stage = std::make_unique<nn::Sequential<Scalar>>();
    stage->add("pool", std::make_unique<nn::HalvingAvgPool2d<Scalar>>());
    stage->add("proj", nn::conv_bn_relu<Scalar>(in, out, nn::pointwise(), false, /*relu=*/false));
    for (int b = 0; b < cfg.blocks[s]; ++b) {
      stage->add("block" + std::to_string(b),
                 std::make_unique<nn::Res2NetBlock<Scalar>>(out, cfg.widths[s], cfg.scale, cfg.se_reduction));
    }
    net->add("stage" + std::to_string(s), std::move(stage));
    in = out;
  }
  net->add("pool", std::make_unique<nn::GlobalAvgPool<Scalar>>());
  net->add("fc", std::make_unique<nn::Linear<Scalar>>(in, 2));
  return net;
}

template <typename Scalar>
FrameworkModel<Scalar>::FrameworkModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.framework == FrameworkKind::C_phase_network_concat) {
    phase_net_ = build_phase_network<Scalar>(cfg_.phase_net);
  } else if (cfg_.framework == FrameworkKind::B_raw_concat && cfg_.phase_dim != cfg_.magnitude_dim) {
    raw_pool_ = std::make_unique<nn::AdaptiveAvgPool2d<Scalar>>(-1, cfg_.magnitude_dim);
  }
  backend_ = build_backend<Scalar>(cfg_.backend);
}

template <typename Scalar>
nn::Tensor4<Scalar> FrameworkModel<Scalar>::forward(const nn::Tensor4<Scalar>& magnitude,
                                                    const nn::Tensor4<Scalar>& phase, nn::Mode mode) {
  if (magnitude.c() != 1 || magnitude.w() != cfg_.magnitude_dim) {
    throw DataError("model expects magnitude B x 1 x T x " + std::to_string(cfg_.magnitude_dim) + ", got " +
                    nn::to_string(magnitude.shape()));
  }
  if (cfg_.framework == FrameworkKind::A_magnitude_only) return backend_->forward(magnitude, mode);
  if (phase.c() != 1 || phase.w() != cfg_.phase_dim || phase.n() != magnitude.n() || phase.h() != magnitude.h()) {
    throw DataError("model expects phase B x 1 x T x " + std::to_string(cfg_.phase_dim) + ", got " +
                    nn::to_string(phase.shape()));
  }
  if (phase_net_) {
    phase_channel_ = phase_net_->forward(phase, mode);
  } else if (raw_pool_) {
    phase_channel_ = raw_pool_->forward(phase, mode);
  } else {
    phase_channel_ = phase;
  }
  return backend_->forward(nn::concat_channels(magnitude, phase_channel_), mode);
}

template <typename Scalar>
void FrameworkModel<Scalar>::backward(const nn::Tensor4<Scalar>& grad_logits) {
  const nn::Tensor4<Scalar> g_in = backend_->backward(grad_logits);
  if (!phase_net_) return;
  nn::Tensor4<Scalar> g_mag, g_phase;
  nn::split_channels(g_in, 1, g_mag, g_phase);
  phase_net_->backward(g_phase);
}

template <typename Scalar>
nn::Collection<Scalar> FrameworkModel<Scalar>::collect() {
  nn::Collection<Scalar> c;
  if (phase_net_) phase_net_->collect(c, "phase_net");
  backend_->collect(c, "backend");
  return c;
}

template <typename Scalar>
void FrameworkModel<Scalar>::reset_parameters(std::uint64_t seed) {
  Rng rng(seed);
  if (phase_net_) phase_net_->reset_parameters(rng);
  backend_->reset_parameters(rng);
}

template <typename Scalar>
std::size_t FrameworkModel<Scalar>::param_count() {
  std::size_t n = 0;
  for (const auto& p : collect().params) n += static_cast<std::size_t>(p.param->size());
  return n;
}

std::size_t framework_param_count(const ModelConfig& cfg) { return FrameworkModel<float>(cfg).param_count(); }

template std::unique_ptr<nn::Sequential<float>> build_phase_network<float>(const PhaseNetConfig&);
template std::unique_ptr<nn::Sequential<double>> build_phase_network<double>(const PhaseNetConfig&);
template std::unique_ptr<nn::Sequential<float>> build_backend<float>(const BackendConfig&);
template std::unique_ptr<nn::Sequential<double>> build_backend<double>(const BackendConfig&);
template class FrameworkModel<float>;
template class FrameworkModel<double>;

}  // namespace phasefuse
