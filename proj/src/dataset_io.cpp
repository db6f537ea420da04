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

#include "phasefuse/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace phasefuse {

using nlohmann::json;

std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::magnitude: return "magnitude";
    case ChannelKind::phase: return "phase";
    case ChannelKind::cepstral: return "cepstral";
    case ChannelKind::processed_phase: return "processed_phase";
  }
  return "?";
}

std::string_view to_string(FeatureSource source) {
  switch (source) {
    case FeatureSource::dft: return "dft";
    case FeatureSource::cqt: return "cqt";
    case FeatureSource::lfcc: return "lfcc";
  }
  return "?";
}

ChannelKind channel_kind_from_string(std::string_view s) {
  if (s == "magnitude") return ChannelKind::magnitude;
  if (s == "phase") return ChannelKind::phase;
  if (s == "cepstral") return ChannelKind::cepstral;
  if (s == "processed_phase") return ChannelKind::processed_phase;
  throw ConfigError("unknown channel kind '" + std::string(s) + "'");
}

FeatureSource feature_source_from_string(std::string_view s) {
  if (s == "dft" || s == "lps") return FeatureSource::dft;
  if (s == "cqt") return FeatureSource::cqt;
  if (s == "lfcc") return FeatureSource::lfcc;
  throw ConfigError("unknown feature source '" + std::string(s) + "'");
}

std::string_view to_string(Label label) { return label == Label::bonafide ? "bonafide" : "spoof"; }
std::string_view to_string(Subset subset) { return subset == Subset::PA ? "PA" : "LA"; }
std::string_view to_string(Scenario scenario) {
  return scenario == Scenario::known_kind ? "known_kind" : "unknown_kind";
}

Label label_from_string(std::string_view s) {
  if (s == "bonafide") return Label::bonafide;
  if (s == "spoof") return Label::spoof;
  throw DataError("unknown key '" + std::string(s) + "' (expected bonafide or spoof)");
}

Subset subset_from_string(std::string_view s) {
  if (s == "PA") return Subset::PA;
  if (s == "LA") return Subset::LA;
  throw DataError("unknown subset '" + std::string(s) + "'");
}

Scenario scenario_from_string(std::string_view s) {
  if (s == "known_kind" || s == "known") return Scenario::known_kind;
  if (s == "unknown_kind" || s == "unknown") return Scenario::unknown_kind;
  throw ConfigError("unknown scenario '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- Manifest

Manifest::Manifest(std::vector<TrialRecord> records, std::filesystem::path audio_root,
                   Scenario scenario)
    : records_(std::move(records)), audio_root_(std::move(audio_root)), scenario_(scenario) {
  std::set<std::string> seen;
  std::set<Subset> subsets;
  for (const auto& r : records_) {
    if (!seen.insert(r.utterance_id).second) {
      throw DataError("duplicate utterance id '" + r.utterance_id + "' in manifest");
    }
    if ((r.label == Label::bonafide) != (r.attack_id == "-")) {
      throw DataError("record '" + r.utterance_id + "': bonafide iff attack_id is '-'");
    }
    subsets.insert(r.subset);
  }
  if (scenario_ == Scenario::known_kind && subsets.size() > 1) {
    throw DataError("known_kind manifest mixes PA and LA records");
  }
}

std::filesystem::path Manifest::audio_path(const TrialRecord& r) const {
  const std::filesystem::path rel = r.audio_path.empty() ? r.utterance_id + ".wav" : r.audio_path;
  return rel.is_absolute() ? rel : audio_root_ / rel;
}

Manifest merge_for_unknown_kind(const Manifest& pa, const Manifest& la) {
  std::vector<TrialRecord> all;
  all.reserve(pa.size() + la.size());
  for (const Manifest* m : {&pa, &la}) {
    for (TrialRecord r : m->records()) {
      r.audio_path = std::filesystem::absolute(m->audio_path(r)).string();
      all.push_back(std::move(r));
    }
  }
  return Manifest(std::move(all), {}, Scenario::unknown_kind);
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  std::filesystem::path root = j.value("audio_root", std::string("."));
  if (root.is_relative()) root = path.parent_path() / root;
  std::vector<TrialRecord> records;
  for (const auto& jr : j.at("records")) {
    TrialRecord r;
    r.utterance_id = jr.at("utterance_id").get<std::string>();
    r.speaker_id = jr.value("speaker_id", std::string("-"));
    r.attack_id = jr.value("attack_id", std::string("-"));
    r.label = label_from_string(jr.at("label").get<std::string>());
    r.subset = subset_from_string(jr.value("subset", std::string("LA")));
    r.audio_path = jr.value("path", std::string());
    records.push_back(std::move(r));
  }
  return Manifest(std::move(records), root,
                  scenario_from_string(j.value("scenario", std::string("known_kind"))));
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  json j;
  j["scenario"] = to_string(manifest.scenario());
  j["audio_root"] = manifest.audio_root().string();
  json recs = json::array();
  for (const auto& r : manifest.records()) {
    recs.push_back({{"utterance_id", r.utterance_id},
                    {"speaker_id", r.speaker_id},
                    {"attack_id", r.attack_id},
                    {"label", to_string(r.label)},
                    {"subset", to_string(r.subset)},
                    {"path", r.audio_path}});
  }
  j["records"] = std::move(recs);
  std::ofstream f(path);
  if (!f) throw IoError("cannot write manifest " + path.string());
  f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- Protocol

std::vector<TrialRecord> parse_protocol(std::string_view text, Subset subset) {
  std::vector<TrialRecord> out;
  std::istringstream lines{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(std::move(t));
    if (tok.empty()) continue;
    if (tok.size() < 5) {
      throw DataError("protocol line " + std::to_string(lineno) + ": expected 5 fields, got " +
                      std::to_string(tok.size()));
    }
    TrialRecord r;
    r.speaker_id = tok[0];
    r.utterance_id = tok[1];
    r.attack_id = tok[3];
    r.label = label_from_string(tok[4]);
    r.subset = subset;
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_protocol(const std::vector<TrialRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.speaker_id + ' ' + r.utterance_id + " - " + r.attack_id + ' ' +
           std::string(to_string(r.label)) + '\n';
  }
  return out;
}

// ------------------------------------------------------------- Synthesis

void SynthSpec::validate() const {
  if (n_bonafide < 1 || n_spoof < 1) throw ConfigError("synth spec: counts must be >= 1");
  if (!(duration_s > 0.0)) throw ConfigError("synth spec: duration_s must be > 0");
}

SynthSpec synth_spec_from_json(const std::string& json_text) {
  SynthSpec s;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  s.n_bonafide = j.value("n_bonafide", s.n_bonafide);
  s.n_spoof = j.value("n_spoof", s.n_spoof);
  s.duration_s = j.value("duration_s", s.duration_s);
  s.seed = j.value("seed", s.seed);
  const std::string mode = j.value("spoof_mode", std::string("magnitude_perturbed"));
  if (mode == "magnitude_perturbed") {
    s.spoof_mode = SpoofMode::magnitude_perturbed;
  } else if (mode == "phase_randomized") {
    s.spoof_mode = SpoofMode::phase_randomized;
  } else {
    throw ConfigError("synth spec: unknown spoof_mode '" + mode + "'");
  }
  s.validate();
  return s;
}

Waveform synth_harmonic(const HarmonicParams& p, std::uint64_t seed, std::string id) {
  if (p.amplitudes.size() != p.start_phases.size()) {
    throw ConfigError("synth_harmonic: amplitude/phase count mismatch");
  }
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(std::llround(p.duration_s * kSampleRate));
  Waveform w;
  w.id = std::move(id);
  w.samples.setZero(n);
  std::vector<double> phases = p.start_phases;
  double power = 0.0;
  for (double a : p.amplitudes) power += 0.5 * a * a;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.phase_scramble_block > 0 && i > 0 && i % p.phase_scramble_block == 0) {
      for (auto& ph : phases) ph = rng.uniform(0.0, 2.0 * kPi);
    }
    const double t = static_cast<double>(i) / kSampleRate;
    double v = 0.0;
    for (std::size_t h = 0; h < p.amplitudes.size(); ++h) {
      v += p.amplitudes[h] * std::cos(2.0 * kPi * p.f0 * static_cast<double>(h + 1) * t + phases[h]);
    }
    w.samples[i] = v;
  }
  const double noise_sd = std::sqrt(power / std::pow(10.0, p.snr_db / 10.0));
  for (Eigen::Index i = 0; i < n; ++i) w.samples[i] += noise_sd * rng.normal();
  return w;
}

namespace {

HarmonicParams draw_bonafide(Rng& rng, double duration_s) {
  HarmonicParams p;
  p.duration_s = duration_s;
  p.f0 = rng.uniform(100.0, 300.0);
  const int n_harm = static_cast<int>(rng.uniform_int(3, 6));
  double total = 0.0;
  for (int h = 0; h < n_harm; ++h) {
    p.amplitudes.push_back(rng.uniform(0.2, 1.0));
    p.start_phases.push_back(rng.uniform(0.0, 2.0 * kPi));
    total += p.amplitudes.back();
  }
  for (auto& a : p.amplitudes) a *= 0.8 / total;
  return p;
}

}  // namespace

Manifest synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const char* attack = spec.spoof_mode == SpoofMode::magnitude_perturbed ? "SYN-MAG" : "SYN-PHS";
  std::vector<TrialRecord> records;
  const int total = spec.n_bonafide + spec.n_spoof;
  for (int i = 0; i < total; ++i) {
    const bool bonafide = i < spec.n_bonafide;
    const int k = bonafide ? i : i - spec.n_bonafide;
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    HarmonicParams p = draw_bonafide(rng, spec.duration_s);
    if (!bonafide) {
      if (spec.spoof_mode == SpoofMode::magnitude_perturbed) {
        const double tilt_db = rng.uniform(-9.0, 9.0);
        for (std::size_t h = 0; h < p.amplitudes.size(); ++h) {
          p.amplitudes[h] *= std::pow(10.0, tilt_db * static_cast<double>(h) / 20.0);
        }
        const double peak = std::accumulate(p.amplitudes.begin(), p.amplitudes.end(), 0.0);
        for (auto& a : p.amplitudes) a *= 0.8 / peak;
      } else {
        p.phase_scramble_block = 512;
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "%s_%04d", bonafide ? "SYN_B" : "SYN_S", k);
    TrialRecord r;
    r.utterance_id = name;
    r.speaker_id = "SYN";
    r.attack_id = bonafide ? "-" : attack;
    r.label = bonafide ? Label::bonafide : Label::spoof;
    r.subset = Subset::LA;
    r.audio_path = std::string(name) + ".wav";
    const Waveform w = synth_harmonic(p, rng.next(), name);
    save_wav_pcm16(w, out_dir / r.audio_path);
    records.push_back(std::move(r));
  }
  Manifest m(std::move(records), ".", Scenario::known_kind);
  save_manifest(m, out_dir / "manifest.json");
  return Manifest(m.records(), out_dir, Scenario::known_kind);
}

}  // namespace phasefuse
