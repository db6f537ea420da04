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

#include "phasefuse/dsp.hpp"

#include "phasefuse/dataset_io.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <map>
#include <mutex>
#include <tuple>

namespace phasefuse {
namespace {

int ms_to_samples(double ms, int sample_rate) {
  return static_cast<int>(std::lround(ms * 1e-3 * sample_rate));
}

// Windowed frames -> one-sided spectra (n_fft/2 + 1 bins per row).
ComplexMatrix framed_fft(const Vector& x, int win, int hop, int n_fft, const Vector& window) {
  const Eigen::Index n_frames = (x.size() - win) / hop + 1;
  const int n_bins = n_fft / 2 + 1;
  ComplexMatrix out(n_frames, n_bins);
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(n_fft), 0.0);
  std::vector<std::complex<double>> spec;
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int n = 0; n < win; ++n) frame[n] = x[t * hop + n] * window[n];
    fft.fwd(spec, frame);
    for (int k = 0; k < n_bins; ++k) out(t, k) = spec[k];
  }
  return out;
}

}  // namespace

Vector hann_window(int n) {
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

// ------------------------------------------------------------------ STFT

int StftConfig::window_length(int sample_rate) const { return ms_to_samples(window_ms, sample_rate); }
int StftConfig::hop_length(int sample_rate) const { return ms_to_samples(hop_ms, sample_rate); }

void StftConfig::validate(int sample_rate) const {
  if (hop_length(sample_rate) <= 0) throw ConfigError("stft: hop must be > 0");
  if (window_length(sample_rate) <= 0) throw ConfigError("stft: window must be > 0");
  if (n_fft < window_length(sample_rate)) throw ConfigError("stft: n_fft must be >= window length");
}

ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg) {
  require_pipeline_rate(wave);
  cfg.validate(wave.sample_rate);
  const int win = cfg.window_length(wave.sample_rate);
  const int hop = cfg.hop_length(wave.sample_rate);
  if (wave.samples.size() < win) {
    throw DataError("utterance '" + wave.id + "' shorter than one STFT window (" +
                    std::to_string(win) + " samples)");
  }
  ComplexSpectrogram out;
  out.kind = FeatureSource::dft;
  out.values = framed_fft(wave.samples, win, hop, cfg.n_fft, hann_window(win));
  out.frame_times.resize(out.values.rows());
  for (Eigen::Index t = 0; t < out.values.rows(); ++t) {
    out.frame_times[t] = (static_cast<double>(t * hop) + 0.5 * win) / wave.sample_rate;
  }
  return out;
}

// ------------------------------------------------------------------- CQT

int CqtConfig::hop_length(int sample_rate) const { return ms_to_samples(hop_ms, sample_rate); }
double CqtConfig::quality() const { return 1.0 / (std::pow(2.0, 1.0 / bins_per_octave) - 1.0); }
double CqtConfig::center_frequency(int k) const {
  return f_min * std::pow(2.0, static_cast<double>(k) / bins_per_octave);
}

void CqtConfig::validate(int sample_rate) const {
  if (n_octaves < 1 || bins_per_octave < 1) throw ConfigError("cqt: octave/bin counts must be >= 1");
  if (n_bins() != 108) throw ConfigError("cqt: n_octaves * bins_per_octave must be 108");
  if (!(f_min > 0.0)) throw ConfigError("cqt: f_min must be > 0");
  if (f_min * std::pow(2.0, n_octaves) > sample_rate / 2.0 + 1e-6) {
    throw ConfigError("cqt: top octave exceeds Nyquist");
  }
  if (hop_length(sample_rate) <= 0) throw ConfigError("cqt: hop must be > 0");
}

CqtKernel::CqtKernel(const CqtConfig& cfg, int sample_rate) : cfg_(cfg), sample_rate_(sample_rate) {
  cfg_.validate(sample_rate);
  const double q = cfg_.quality();
  const int n_bins = cfg_.n_bins();
  std::vector<int> lengths(static_cast<std::size_t>(n_bins));
  for (int k = 0; k < n_bins; ++k) {
    lengths[k] = static_cast<int>(std::ceil(q * sample_rate / cfg_.center_frequency(k)));
  }
  frame_length_ = *std::max_element(lengths.begin(), lengths.end());
  offsets_.resize(static_cast<std::size_t>(n_bins));
  kernels_.resize(static_cast<std::size_t>(n_bins));
  for (int k = 0; k < n_bins; ++k) {
    const int len = lengths[k];
    const int off = (frame_length_ - len) / 2;
    const Vector w = hann_window(len);
    // Window-sum normalisation times sqrt(len): white noise comes out flat
    // across bins, as with the common toolkit default.
    const double norm = w.sum() / std::sqrt(static_cast<double>(len));
    const double omega = 2.0 * kPi * cfg_.center_frequency(k) / sample_rate;
    auto& kern = kernels_[k];
    kern.resize(len);
    for (int n = 0; n < len; ++n) {
      kern[n] = (w[n] / norm) * std::polar(1.0, -omega * (off + n));
    }
    offsets_[k] = off;
  }
}

ComplexSpectrogram CqtKernel::apply(const Waveform& wave) const {
  require_pipeline_rate(wave);
  if (wave.sample_rate != sample_rate_) throw DataError("cqt: kernel built for another sample rate");
  if (wave.samples.size() < frame_length_) {
    throw DataError("utterance '" + wave.id + "' shorter than the lowest CQT kernel (" +
                    std::to_string(frame_length_) + " samples)");
  }
  const int hop = cfg_.hop_length(sample_rate_);
  const Eigen::Index n_frames = (wave.samples.size() - frame_length_) / hop + 1;
  const int n_bins = cfg_.n_bins();
  ComplexSpectrogram out;
  out.kind = FeatureSource::cqt;
  out.values.resize(n_frames, n_bins);
  out.frame_times.resize(n_frames);
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const Eigen::Index start = t * hop;
    for (int k = 0; k < n_bins; ++k) {
      const auto& kern = kernels_[k];
      const auto seg = wave.samples.segment(start + offsets_[k], kern.size());
      out.values(t, k) = (kern.array() * seg.array().cast<std::complex<double>>()).sum();
    }
    out.frame_times[t] = (static_cast<double>(start) + 0.5 * frame_length_) / sample_rate_;
  }
  return out;
}

std::shared_ptr<const CqtKernel> cqt_kernel(const CqtConfig& cfg) {
  using Key = std::tuple<double, int, int, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const CqtKernel>> cache;
  const Key key{cfg.hop_ms, cfg.n_octaves, cfg.bins_per_octave, cfg.f_min};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_shared<const CqtKernel>(cfg)).first;
  return it->second;
}

ComplexSpectrogram cqt(const Waveform& wave, const CqtConfig& cfg) { return cqt_kernel(cfg)->apply(wave); }

// ------------------------------------------------------- Magnitude/phase

FeatureMap log_power(const ComplexSpectrogram& spec, double floor_db) {
  const double p_floor = std::pow(10.0, floor_db / 10.0);
  FeatureMap out;
  out.kind = ChannelKind::magnitude;
  out.source = spec.kind;
  out.values = spec.values.unaryExpr([p_floor](const std::complex<double>& z) {
    return 10.0 * std::log10(std::max(std::norm(z), p_floor));
  });
  return out;
}

FeatureMap phase(const ComplexSpectrogram& spec) {
  FeatureMap out;
  out.kind = ChannelKind::phase;
  out.source = spec.kind;
  out.values = spec.values.unaryExpr([](const std::complex<double>& z) {
    if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
    const double a = std::atan2(z.imag(), z.real());
    return a == -kPi ? kPi : a;  // atan2(-0, -1) = -pi
  });
  return out;
}

// ----------------------------------------------------------------- Deltas

Matrix delta(const Matrix& c, int width) {
  if (width < 3 || width % 2 == 0) throw ConfigError("delta: width must be odd and >= 3");
  const int m_max = (width - 1) / 2;
  const Eigen::Index n = c.rows();
  double denom = 0.0;
  for (int m = 1; m <= m_max; ++m) denom += m * m;
  denom *= 2.0;
  Matrix d = Matrix::Zero(n, c.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int m = 1; m <= m_max; ++m) {
      const Eigen::Index fwd = std::min<Eigen::Index>(t + m, n - 1);
      const Eigen::Index bwd = std::max<Eigen::Index>(t - m, 0);
      d.row(t) += m * (c.row(fwd) - c.row(bwd));
    }
  }
  return d / denom;
}

FeatureMap delta(const FeatureMap& feat, int width) {
  FeatureMap out = feat;
  out.values = delta(feat.values, width);
  return out;
}

// ------------------------------------------------------------------- LFCC

void LfccConfig::validate(int sample_rate) const {
  const int win = ms_to_samples(window_ms, sample_rate);
  if (win <= 0 || ms_to_samples(hop_ms, sample_rate) <= 0) throw ConfigError("lfcc: bad framing");
  if (n_fft < win) throw ConfigError("lfcc: n_fft must be >= window length");
  if (n_filters < 1 || n_ceps < 1 || n_ceps > n_filters) throw ConfigError("lfcc: bad filter/cepstra counts");
}

Matrix linear_filterbank(int n_filters, int n_fft, int sample_rate) {
  const int n_bins = n_fft / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double spacing = nyquist / (n_filters + 1);
  Matrix fb = Matrix::Zero(n_filters, n_bins);
  for (int m = 0; m < n_filters; ++m) {
    const double lo = m * spacing, mid = (m + 1) * spacing, hi = (m + 2) * spacing;
    for (int b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / n_fft;
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb(m, b) = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

Matrix dct2_matrix(int n_out, int n_in) {
  Matrix d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int n = 0; n < n_in; ++n) d(k, n) = s * std::cos(kPi * k * (2.0 * n + 1.0) / (2.0 * n_in));
  }
  return d;
}

FeatureMap lfcc(const Waveform& wave, const LfccConfig& cfg) {
  require_pipeline_rate(wave);
  cfg.validate(wave.sample_rate);
  const int win = ms_to_samples(cfg.window_ms, wave.sample_rate);
  const int hop = ms_to_samples(cfg.hop_ms, wave.sample_rate);
  if (wave.samples.size() < win) {
    throw DataError("utterance '" + wave.id + "' shorter than one LFCC window");
  }
  const ComplexMatrix spec = framed_fft(wave.samples, win, hop, cfg.n_fft, hann_window(win));
  const Matrix power = spec.cwiseAbs2();
  const Matrix fb = linear_filterbank(cfg.n_filters, cfg.n_fft, wave.sample_rate);
  const Matrix log_energy = (power * fb.transpose()).array().max(cfg.log_floor).log().matrix();
  const Matrix ceps = log_energy * dct2_matrix(cfg.n_ceps, cfg.n_filters).transpose();
  const Matrix d1 = delta(ceps, cfg.delta_width);
  const Matrix d2 = delta(d1, cfg.delta_width);

  FeatureMap out;
  out.kind = ChannelKind::cepstral;
  out.source = FeatureSource::lfcc;
  out.values.resize(ceps.rows(), 3 * cfg.n_ceps);
  out.values << ceps, d1, d2;
  return out;
}

}  // namespace phasefuse
