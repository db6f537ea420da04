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

#include "phasefuse/common.hpp"

#include <memory>

namespace phasefuse {

/// Short-time DFT framing. Defaults: 64 ms Hann window, 32 ms hop, 1024 bins.
struct StftConfig {
  double window_ms = 64.0;
  double hop_ms = 32.0;
  int n_fft = 1024;

  int window_length(int sample_rate = kSampleRate) const;
  int hop_length(int sample_rate = kSampleRate) const;
  void validate(int sample_rate = kSampleRate) const;
};

/// Constant-Q analysis with geometric bin spacing. f_min defaults to
/// Nyquist / 2^9 so the top octave ends at 8 kHz.
struct CqtConfig {
  double hop_ms = 16.0;
  int n_octaves = 9;
  int bins_per_octave = 12;
  double f_min = 15.625;

  int n_bins() const { return n_octaves * bins_per_octave; }
  int hop_length(int sample_rate = kSampleRate) const;
  double quality() const;  // Q = 1 / (2^(1/B) - 1)
  double center_frequency(int k) const;
  void validate(int sample_rate = kSampleRate) const;
};

struct LfccConfig {
  double window_ms = 20.0;
  double hop_ms = 10.0;
  int n_fft = 512;
  int n_filters = 20;
  int n_ceps = 20;
  int delta_width = 5;
  double log_floor = 1e-10;

  int dim() const { return 3 * n_ceps; }
  void validate(int sample_rate = kSampleRate) const;
};

struct ComplexSpectrogram {
  ComplexMatrix values;  // T x D
  Vector frame_times;    // centre of each frame, seconds
  FeatureSource kind = FeatureSource::dft;
};

/// Periodic Hann window of length n.
Vector hann_window(int n);

/// Frames fully inside the signal, no centre padding; frame t covers
/// samples [t*hop, t*hop + win). Phase is referenced to the frame start.
ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg = {});

/// Precomputed direct-correlation kernels for every CQT bin. Each kernel is
/// a Hann-windowed complex exponential of length ceil(Q fs / f_k),
/// scaled by sqrt(length) / window sum and centred in a frame as long as
/// the longest kernel; phase is referenced to the frame start.
class CqtKernel {
 public:
  explicit CqtKernel(const CqtConfig& cfg, int sample_rate = kSampleRate);

  const CqtConfig& config() const { return cfg_; }
  int frame_length() const { return frame_length_; }
  int kernel_length(int k) const { return static_cast<int>(kernels_[k].size()); }
  int kernel_offset(int k) const { return offsets_[k]; }
  const VectorX<std::complex<double>>& kernel(int k) const { return kernels_[k]; }

  ComplexSpectrogram apply(const Waveform& wave) const;

 private:
  CqtConfig cfg_;
  int sample_rate_;
  int frame_length_ = 0;
  std::vector<int> offsets_;
  std::vector<VectorX<std::complex<double>>> kernels_;
};

/// Shared, lazily built kernel for a configuration.
std::shared_ptr<const CqtKernel> cqt_kernel(const CqtConfig& cfg);

ComplexSpectrogram cqt(const Waveform& wave, const CqtConfig& cfg = {});

/// 10 log10(max(|z|^2, 10^(floor_db/10))).
FeatureMap log_power(const ComplexSpectrogram& spec, double floor_db = -100.0);

/// atan2(Im, Re) in (-pi, pi]; z = 0 maps to 0. No unwrapping.
FeatureMap phase(const ComplexSpectrogram& spec);

/// Regression deltas with half-width (width-1)/2 and replicated edges.
Matrix delta(const Matrix& feats, int width = 5);
FeatureMap delta(const FeatureMap& feat, int width = 5);

/// Linear triangular filterbank over the power spectrum, log, orthonormal
/// DCT-II, then static + delta + delta-delta columns.
FeatureMap lfcc(const Waveform& wave, const LfccConfig& cfg = {});

/// Filterbank matrix (n_filters x (n_fft/2+1)) used by lfcc.
Matrix linear_filterbank(int n_filters, int n_fft, int sample_rate = kSampleRate);
/// Orthonormal DCT-II matrix (n_out x n_in).
Matrix dct2_matrix(int n_out, int n_in);

}  // namespace phasefuse
