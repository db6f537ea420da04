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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace phasefuse {

enum class Label : std::uint8_t { spoof = 0, bonafide = 1 };
enum class Subset : std::uint8_t { PA, LA };
enum class Scenario : std::uint8_t { known_kind, unknown_kind };

std::string_view to_string(Label label);
std::string_view to_string(Subset subset);
std::string_view to_string(Scenario scenario);
Label label_from_string(std::string_view s);
Subset subset_from_string(std::string_view s);
Scenario scenario_from_string(std::string_view s);

struct TrialRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string attack_id = "-";  // "-" for bonafide
  Label label = Label::bonafide;
  Subset subset = Subset::LA;
  std::string audio_path;  // relative to Manifest::audio_root; may be empty

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// A validated set of trials. Construction enforces unique utterance ids,
/// the bonafide <=> "-" attack rule, and a single subset for known-kind.
class Manifest {
 public:
  Manifest() = default;
  Manifest(std::vector<TrialRecord> records, std::filesystem::path audio_root, Scenario scenario);

  const std::vector<TrialRecord>& records() const { return records_; }
  const std::filesystem::path& audio_root() const { return audio_root_; }
  Scenario scenario() const { return scenario_; }
  std::size_t size() const { return records_.size(); }

  std::filesystem::path audio_path(const TrialRecord& r) const;

 private:
  std::vector<TrialRecord> records_;
  std::filesystem::path audio_root_;
  Scenario scenario_ = Scenario::known_kind;
};

/// Training manifest for the unknown-kind scenario: all records of both
/// inputs, order preserved. Audio paths are made absolute.
Manifest merge_for_unknown_kind(const Manifest& pa, const Manifest& la);

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// ASVspoof CM protocol: "SPEAKER UTT_ID <ignored> ATTACK_ID KEY" per line.
std::vector<TrialRecord> parse_protocol(std::string_view text, Subset subset = Subset::LA);
std::string serialize_protocol(const std::vector<TrialRecord>& records);

// WAV I/O. load_wav accepts PCM16 and float32, any channel count (averaged
// down to mono), and rejects anything other than 16 kHz.
Waveform load_wav(const std::filesystem::path& path);
Waveform decode_wav(const std::vector<std::uint8_t>& bytes, std::string id = {});
void save_wav_pcm16(const Waveform& wave, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& wave, int channels = 1);
std::vector<std::uint8_t> encode_wav_float32(const Waveform& wave, int channels = 1);

void require_pipeline_rate(const Waveform& wave);

enum class SpoofMode : std::uint8_t { magnitude_perturbed, phase_randomized };

struct SynthSpec {
  int n_bonafide = 10;
  int n_spoof = 10;
  SpoofMode spoof_mode = SpoofMode::magnitude_perturbed;
  double duration_s = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SynthSpec synth_spec_from_json(const std::string& json_text);

/// Single harmonic-plus-noise utterance used by the synthetic corpus.
struct HarmonicParams {
  double f0 = 150.0;
  std::vector<double> amplitudes;     // one per harmonic
  std::vector<double> start_phases;   // one per harmonic
  double snr_db = 30.0;
  double duration_s = 1.0;
  // When > 0, harmonic phases are redrawn at every block of this many samples.
  int phase_scramble_block = 0;
};

Waveform synth_harmonic(const HarmonicParams& params, std::uint64_t seed, std::string id = {});

/// Writes bonafide then spoof utterances as PCM16 WAV under out_dir and a
/// manifest.json describing them. Pure function of the SynthSpec.
Manifest synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace phasefuse
