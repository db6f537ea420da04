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

#include "phasefuse/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace phasefuse {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = bytes_[pos_] | (bytes_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::string tag() {
    need(4);
    std::string s(reinterpret_cast<const char*>(&bytes_[pos_]), 4);
    pos_ += 4;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (!has(n)) throw DataError("malformed WAV header: truncated file");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back(v >> 8);
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::vector<std::uint8_t> wav_header(std::uint16_t format, int channels, int rate, int bits,
                                     std::uint32_t data_bytes) {
  std::vector<std::uint8_t> out;
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(rate));
  const int block_align = channels * bits / 8;
  put_u32(out, static_cast<std::uint32_t>(rate * block_align));
  put_u16(out, static_cast<std::uint16_t>(block_align));
  put_u16(out, static_cast<std::uint16_t>(bits));
  put_tag(out, "data");
  put_u32(out, data_bytes);
  return out;
}

}  // namespace

void require_pipeline_rate(const Waveform& wave) {
  if (wave.sample_rate != kSampleRate) {
    throw DataError("unsupported sample rate " + std::to_string(wave.sample_rate) +
                    " Hz (expected 16000 Hz; resample externally)");
  }
  if (wave.samples.size() == 0) throw DataError("empty waveform '" + wave.id + "'");
}

Waveform decode_wav(const std::vector<std::uint8_t>& bytes, std::string id) {
  ByteReader in(bytes);
  if (in.tag() != "RIFF") throw DataError("malformed WAV header: missing RIFF");
  in.u32();
  if (in.tag() != "WAVE") throw DataError("malformed WAV header: missing WAVE");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_pos = 0, data_len = 0;
  bool have_data = false;

  while (in.has(8)) {
    const std::string tag = in.tag();
    const std::uint32_t len = in.u32();
    const std::size_t body = in.pos();
    if (tag == "fmt ") {
      if (len < 16) throw DataError("malformed WAV header: short fmt chunk");
      format = in.u16();
      channels = in.u16();
      rate = in.u32();
      in.u32();
      in.u16();
      bits = in.u16();
      if (format == kFormatExtensible) {
        if (len < 40) throw DataError("malformed WAV header: short extensible fmt chunk");
        in.u16();  // cbSize
        in.u16();  // valid bits
        in.u32();  // channel mask
        format = in.u16();  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (tag == "data") {
      data_pos = body;
      data_len = std::min<std::size_t>(len, bytes.size() - body);
      have_data = true;
    }
    in.seek(body + len + (len & 1));
    if (have_data && have_fmt) break;
  }
  if (!have_fmt) throw DataError("malformed WAV header: no fmt chunk");
  if (!have_data) throw DataError("malformed WAV header: no data chunk");
  if (channels == 0) throw DataError("malformed WAV header: zero channels");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw DataError("unsupported codec (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits); only PCM16 and float32 are accepted");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_len / (bytes_per_sample * channels);
  Waveform wave;
  wave.id = std::move(id);
  wave.sample_rate = static_cast<int>(rate);
  wave.samples.setZero(static_cast<Eigen::Index>(frames));
  const std::uint8_t* p = bytes.data() + data_pos;
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      if (pcm16) {
        const auto raw = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        acc += raw / 32768.0;
      } else {
        std::uint32_t u = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        acc += std::bit_cast<float>(u);
      }
      p += bytes_per_sample;
    }
    wave.samples[static_cast<Eigen::Index>(f)] = acc / channels;
  }
  require_pipeline_rate(wave);
  return wave;
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.stem().string());
}

std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& wave, int channels) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  auto out = wav_header(kFormatPcm, channels, wave.sample_rate, 16, n * 2 * channels);
  for (Eigen::Index i = 0; i < wave.samples.size(); ++i) {
    const double v = std::clamp(wave.samples[i], -1.0, 32767.0 / 32768.0);
    const auto q = static_cast<std::int16_t>(std::lround(v * 32768.0));
    for (int c = 0; c < channels; ++c) put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

std::vector<std::uint8_t> encode_wav_float32(const Waveform& wave, int channels) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  auto out = wav_header(kFormatFloat, channels, wave.sample_rate, 32, n * 4 * channels);
  for (Eigen::Index i = 0; i < wave.samples.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(wave.samples[i]));
    for (int c = 0; c < channels; ++c) put_u32(out, u);
  }
  return out;
}

void save_wav_pcm16(const Waveform& wave, const std::filesystem::path& path) {
  const auto bytes = encode_wav_pcm16(wave);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace phasefuse
