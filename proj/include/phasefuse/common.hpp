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

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phasefuse {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using ComplexMatrix = MatrixX<std::complex<double>>;
using Vector = VectorX<double>;

inline constexpr const char* kVersion = "0.1.0";

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr int kSampleRate = 16000;

// Errors carry a category so the CLI can map them onto exit codes:
// configuration problems exit with 2, everything else with 1.
enum class ErrorCategory { config, data, io, runtime };

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::io: return "io";
    case ErrorCategory::runtime: return "runtime";
  }
  return "runtime";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Mono PCM audio. Pipeline entry points require kSampleRate.
struct Waveform {
  Vector samples;
  int sample_rate = kSampleRate;
  std::string id;
};

enum class ChannelKind : std::uint8_t { magnitude = 0, phase = 1, cepstral = 2, processed_phase = 3 };
enum class FeatureSource : std::uint8_t { dft = 0, cqt = 1, lfcc = 2 };

/// Real-valued time x frequency map; rows are frames.
struct FeatureMap {
  Matrix values;
  ChannelKind kind = ChannelKind::magnitude;
  FeatureSource source = FeatureSource::dft;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

std::string_view to_string(ChannelKind kind);
std::string_view to_string(FeatureSource source);
ChannelKind channel_kind_from_string(std::string_view s);
FeatureSource feature_source_from_string(std::string_view s);

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double x) {
  double y = std::remainder(x, 2.0 * kPi);
  if (y <= -kPi) y += 2.0 * kPi;
  return y;
}

}  // namespace phasefuse
