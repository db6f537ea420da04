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

// phasefuse command-line driver. Exit codes: 0 success, 1 runtime
// failure, 2 configuration error.

#include "CLI11.hpp"
#include "json.hpp"

#include "checks.hpp"
#include "phasefuse/binary_io.hpp"
#include "phasefuse/entropy.hpp"
#include "phasefuse/pipeline.hpp"
#include "phasefuse/train_eval.hpp"

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace phasefuse {
namespace {

// --config reads JSON. Top-level keys are global flags, nested objects
// belong to the subcommand of the same name:
//   {"seed": 7, "train": {"epochs": 5, "batch-size": 16}}
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
    return dump_app(*app).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

  static json dump_app(const CLI::App& app) {
    json out = json::object();
    for (const CLI::Option* opt : app.get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || name == "config" || name.empty()) continue;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        if (opt->get_expected_max() > 1) {
          out[name] = r;
        } else {
          out[name] = r.empty() ? std::string("true") : r.back();
        }
      } else {
        out[name] = opt->get_default_str();
      }
    }
    return out;
  }

 private:
  static void flatten(const json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& items) {
    if (!j.is_object()) throw CLI::ConversionError("config file: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar_text(v));
      } else {
        item.inputs.push_back(scalar_text(value));
      }
      items.push_back(std::move(item));
    }
  }

  static std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
};

struct Globals {
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string run_manifest;
};

// Resolved options of the app and the chosen subcommand; no timestamps, so
// two identical runs write identical files.
void write_run_manifest(const CLI::App& app, const CLI::App& sub, const fs::path& path) {
  json j;
  j["tool"] = "phasefuse";
  j["version"] = kVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["subcommand"] = sub.get_name();
  j["global"] = JsonConfig::dump_app(app);
  j["options"] = JsonConfig::dump_app(sub);
  write_text_file(path, j.dump(2) + "\n");
}

void log_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

const std::map<std::string, Scenario> kScenarios{{"known", Scenario::known_kind},
                                                 {"unknown", Scenario::unknown_kind}};

Manifest load_training_manifest(const std::vector<std::string>& paths, Scenario scenario) {
  if (paths.empty()) throw ConfigError("train: need at least one training manifest");
  if (scenario == Scenario::known_kind) {
    if (paths.size() != 1) throw ConfigError("train: the known scenario takes exactly one training manifest");
    return load_manifest(paths.front());
  }
  Manifest merged = load_manifest(paths.front());
  for (std::size_t i = 1; i < paths.size(); ++i) merged = merge_for_unknown_kind(merged, load_manifest(paths[i]));
  return merged;
}

std::vector<LabeledFeatures> features_for(const std::string& manifest, Pairing p, const std::string& cache_dir,
                                          bool extract) {
  const Manifest m = load_manifest(manifest);
  std::unique_ptr<FeatureCache> cache;
  if (!cache_dir.empty()) cache = std::make_unique<FeatureCache>(cache_dir);
  return load_features(m, p, cache.get(), extract);
}

FeatureCorpusSpec feature_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("feature corpus spec: ") + e.what());
  }
  FeatureCorpusSpec s;
  try {
    s.n_per_class = j.value("n_per_class", s.n_per_class);
    s.frames = j.value("frames", s.frames);
    s.dim = j.value("dim", s.dim);
    s.seed = j.value("seed", s.seed);
    s.walk_step = j.value("walk_step", s.walk_step);
    s.id_prefix = j.value("id_prefix", s.id_prefix);
    const std::string pm = j.value("phase_mode", std::string("structured"));
    const std::string mm = j.value("magnitude_mode", std::string("shared_distribution"));
    if (pm == "structured") {
      s.phase_mode = PhaseMode::structured;
    } else if (pm == "uniform_random") {
      s.phase_mode = PhaseMode::uniform_random;
    } else {
      throw ConfigError("feature corpus spec: unknown phase_mode '" + pm + "'");
    }
    if (mm == "shared_distribution") {
      s.magnitude_mode = MagnitudeMode::shared_distribution;
    } else if (mm == "class_tilted") {
      s.magnitude_mode = MagnitudeMode::class_tilted;
    } else {
      throw ConfigError("feature corpus spec: unknown magnitude_mode '" + mm + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("feature corpus spec: ") + e.what());
  }
  s.validate();
  return s;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
  std::string spec, out, domain = "audio", pairing = "cqt";
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* s = app.add_subcommand("synth", "Write a synthetic labelled corpus and its manifest.json");
  s->add_option("--spec", a.spec, "JSON corpus spec (audio: n_bonafide, n_spoof, spoof_mode, duration_s, seed; "
                                  "features: n_per_class, frames, dim, seed, walk_step, phase_mode, magnitude_mode)")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("--out", a.out, "Output directory")->required();
  s->add_option("--domain", a.domain, "audio: PCM16 WAV files; features: cached feature maps only")
      ->check(CLI::IsMember({"audio", "features"}))
      ->capture_default_str();
  s->add_option("--pairing", a.pairing, "Cache subdirectory for --domain features")
      ->check(CLI::IsMember({"lps", "cqt", "lfcc"}))
      ->capture_default_str();
}

int run_synth(const SynthArgs& a, const Globals& g, bool seed_given) {
  const std::string text = read_text_file(a.spec);
  if (a.domain == "audio") {
    SynthSpec spec = synth_spec_from_json(text);
    if (seed_given) spec.seed = g.seed;
    const Manifest m = synth_corpus(spec, a.out);
    std::printf("wrote %zu utterances to %s\n", m.size(), a.out.c_str());
    return 0;
  }
  FeatureCorpusSpec spec = feature_spec_from_json(text);
  if (seed_given) spec.seed = g.seed;
  const auto items = synth_feature_corpus(spec);
  const FeatureCache cache(fs::path(a.out) / "features");
  std::vector<TrialRecord> records;
  for (const auto& it : items) {
    cache.put(a.pairing, it.record.utterance_id, it.magnitude, it.phase);
    records.push_back(it.record);
  }
  save_manifest(Manifest(records, ".", Scenario::known_kind), fs::path(a.out) / "manifest.json");
  std::printf("wrote %zu feature-domain utterances to %s\n", items.size(), a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  std::string feature, manifest, out;
  bool with_phase = false;
};

void add_extract(CLI::App& app, ExtractArgs& a) {
  auto* s = app.add_subcommand("extract", "Extract magnitude and phase maps for a manifest into a feature cache");
  s->add_option("--feature", a.feature, "Feature pairing")->required()->check(CLI::IsMember({"lps", "cqt", "lfcc"}));
  s->add_flag("--with-phase", a.with_phase,
              "Store the phase channel next to the magnitude (the cache always keeps both)");
  s->add_option("--manifest", a.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--out", a.out, "Cache root directory")->required();
}

int run_extract(const ExtractArgs& a) {
  const Manifest m = load_manifest(a.manifest);
  const FeatureCache cache(a.out);
  const Pairing p = pairing_from_string(a.feature);
  const auto items = load_features(m, p, &cache, true, {}, [](std::size_t done, std::size_t total) {
    if (done == total || done % 100 == 0) std::fprintf(stderr, "extract %zu/%zu\n", done, total);
  });
  std::printf("cached %zu utterances (%s) under %s\n", items.size(), a.feature.c_str(), a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------- entropy

struct EntropyArgs {
  std::string feature = "cqt", utt, out, ckpt;
  int bins = 32;
};

void add_entropy(CLI::App& app, EntropyArgs& a) {
  auto* s = app.add_subcommand("entropy", "Per-frame histogram entropy curves of one utterance (CSV)");
  s->add_option("--feature", a.feature, "Feature pairing")
      ->check(CLI::IsMember({"lps", "cqt", "lfcc"}))
      ->capture_default_str();
  s->add_option("--utt", a.utt, "Input WAV file (16 kHz)")->required()->check(CLI::ExistingFile);
  s->add_option("--bins", a.bins, "Histogram bins over [0, 1]")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--out", a.out, "Output CSV: frame, time and one column per curve")->required();
  s->add_option("--ckpt", a.ckpt, "Framework-C checkpoint; adds the processed-phase curve")
      ->check(CLI::ExistingFile);
}

double hop_seconds(Pairing p, const FrontendConfig& fe) {
  switch (p) {
    case Pairing::lps: return fe.stft.hop_ms / 1000.0;
    case Pairing::cqt: return fe.cqt.hop_ms / 1000.0;
    case Pairing::lfcc: return fe.lfcc.hop_ms / 1000.0;
  }
  return 0.0;
}

int run_entropy(const EntropyArgs& a, const Globals& g) {
  EntropyConfig ec;
  ec.n_bins = a.bins;
  ec.validate();
  const Pairing p = pairing_from_string(a.feature);
  const FrontendConfig fe;
  Waveform w = load_wav(a.utt);
  TrialRecord rec;
  rec.utterance_id = fs::path(a.utt).stem().string();
  const LabeledFeatures f = extract_features(w, rec, p, fe);

  auto curve = [&](const FeatureMap& m, const std::string& label) {
    EntropyCurve c = frame_entropy(global_minmax_normalize(m), ec);
    c.source_label = label;
    c.frame_times = Vector::LinSpaced(c.values.size(), 0.0, hop_seconds(p, fe) * double(c.values.size() - 1));
    return c;
  };
  std::vector<EntropyCurve> curves{curve(f.magnitude, "magnitude"), curve(f.phase, "phase"),
                                   curve(random_noise_map(f.phase.frames(), f.phase.dim(), g.seed), "noise")};
  if (!a.ckpt.empty()) {
    const Checkpoint ck = load_checkpoint(a.ckpt);
    if (ck.model.framework != FrameworkKind::C_phase_network_concat) {
      throw ConfigError("entropy: --ckpt must hold a framework-c model");
    }
    if (ck.model.pairing != p || ck.model.phase_dim != f.phase.dim()) {
      throw ConfigError("config mismatch: checkpoint pairing " + to_string(ck.model.pairing) + " vs --feature " +
                        a.feature);
    }
    FrameworkModel<float> model(ck.model);
    restore_checkpoint(ck, model);
    const auto x = stack_channels<float>(f.phase.values, nullptr);
    const auto y = model.phase_network()->forward(x, nn::Mode::eval);
    FeatureMap processed;
    processed.kind = ChannelKind::phase;
    processed.values = Eigen::Map<const MatrixX<float>>(y.ptr(), y.h(), y.w()).cast<double>();
    curves.push_back(curve(processed, "processed_phase"));
  }
  write_text_file(a.out, entropy_report(curves));
  std::printf("%s", entropy_summary(curves).c_str());
  return 0;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::vector<std::string> manifest_train;
  std::string manifest_dev, cache, framework = "c", pairing = "cqt", scenario = "known", backend = "lite", out;
  int epochs = 30, batch_size = 32;
  double lr = 1e-3;
  bool no_extract = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* s = app.add_subcommand("train", "Train one framework model and keep the best-dev-EER epoch");
  s->add_option("--manifest-train", a.manifest_train,
                "Training manifest; repeat for the unknown scenario (manifests are concatenated)")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("--manifest-dev", a.manifest_dev, "Development manifest")->required()->check(CLI::ExistingFile);
  s->add_option("--cache", a.cache, "Feature cache root");
  s->add_option("--framework", a.framework, "a: magnitude only, b: raw phase concat, c: phase network concat")
      ->check(CLI::IsMember({"a", "b", "c"}))
      ->capture_default_str();
  s->add_option("--pairing", a.pairing, "Feature pairing")
      ->check(CLI::IsMember({"lps", "cqt", "lfcc"}))
      ->capture_default_str();
  s->add_option("--scenario", a.scenario, "known or unknown attack kind")
      ->check(CLI::IsMember({"known", "unknown"}))
      ->capture_default_str();
  s->add_option("--epochs", a.epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--batch-size", a.batch_size, "Segments per minibatch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--lr", a.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--backend", a.backend, "Backend size preset")
      ->check(CLI::IsMember({"lite", "paper_scale"}))
      ->capture_default_str();
  s->add_option("--out", a.out, "Output directory: model.ckpt, dev_scores.txt, history.csv")->required();
  s->add_flag("--no-extract", a.no_extract, "Fail on a cache miss instead of extracting from audio");
}

int run_train(const TrainArgs& a, const Globals& g) {
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.lr = a.lr;
  cfg.framework = framework_from_string(a.framework);
  cfg.pairing = pairing_from_string(a.pairing);
  cfg.scenario = kScenarios.at(a.scenario);
  cfg.backend_preset = a.backend;
  cfg.seeds = {g.seed};
  cfg.validate();

  const Manifest train_m = load_training_manifest(a.manifest_train, cfg.scenario);
  std::unique_ptr<FeatureCache> cache;
  if (!a.cache.empty()) cache = std::make_unique<FeatureCache>(a.cache);
  const auto train_set = load_features(train_m, cfg.pairing, cache.get(), !a.no_extract);
  const auto dev_set = features_for(a.manifest_dev, cfg.pairing, a.cache, !a.no_extract);

  std::string history = "epoch,train_loss,dev_eer\n";
  const TrainResult r = train(train_set, dev_set, cfg, g.seed, [&](const EpochRecord& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.dev_eer);
    history += buf;
    std::fprintf(stderr, "epoch %d: loss %.5f dev EER %.4f\n", e.epoch, e.train_loss, e.dev_eer);
  });
  const fs::path out(a.out);
  save_checkpoint(r.checkpoint, out / "model.ckpt");
  save_scores(evaluate(r.checkpoint, dev_set), out / "dev_scores.txt");
  write_text_file(out / "history.csv", history);
  std::printf("best dev EER %.4f at epoch %d; wrote %s\n", r.checkpoint.best_dev_eer, r.checkpoint.epoch_of_best,
              (out / "model.ckpt").string().c_str());
  return 0;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  std::string ckpt, manifest, cache, out, framework, pairing;
  int batch_size = 64;
  bool no_extract = false;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* s = app.add_subcommand("eval", "Score a manifest with a checkpoint");
  s->add_option("--ckpt", a.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  s->add_option("--manifest", a.manifest, "Evaluation manifest")->required()->check(CLI::ExistingFile);
  s->add_option("--cache", a.cache, "Feature cache root");
  s->add_option("--out", a.out, "Output ScoreFile")->required();
  s->add_option("--framework", a.framework, "Expected framework; exit 2 when the checkpoint differs")
      ->check(CLI::IsMember({"a", "b", "c"}));
  s->add_option("--pairing", a.pairing, "Feature pairing; defaults to the checkpoint's, exit 2 when it differs")
      ->check(CLI::IsMember({"lps", "cqt", "lfcc"}));
  s->add_option("--batch-size", a.batch_size, "Segments per forward pass")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_flag("--no-extract", a.no_extract, "Fail on a cache miss instead of extracting from audio");
}

int run_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  if (!a.framework.empty() && framework_from_string(a.framework) != ck.model.framework) {
    throw ConfigError("config mismatch: checkpoint holds framework " + to_string(ck.model.framework) +
                      ", --framework is " + a.framework);
  }
  if (!a.pairing.empty() && pairing_from_string(a.pairing) != ck.model.pairing) {
    throw ConfigError("config mismatch: checkpoint holds pairing " + to_string(ck.model.pairing) +
                      ", --pairing is " + a.pairing);
  }
  const auto items = features_for(a.manifest, ck.model.pairing, a.cache, !a.no_extract);
  const ScoreFile scores = evaluate(ck, items, a.batch_size);
  save_scores(scores, a.out);
  std::printf("scored %zu utterances; EER %.4f\n", scores.size(), compute_eer(scores).eer);
  return 0;
}

// ------------------------------------------------------------------ score

struct ScoreArgs {
  std::string scores, asv_op, csv;
  bool breakdown = false;
};

void add_score(CLI::App& app, ScoreArgs& a) {
  auto* s = app.add_subcommand("score", "EER and min t-DCF of a ScoreFile");
  s->add_option("--scores", a.scores, "ScoreFile: utt attack label score per line")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("--asv-op", a.asv_op, "ASV operating point JSON (defaults are built in)")->check(CLI::ExistingFile);
  s->add_flag("--breakdown", a.breakdown, "Per-attack table");
  s->add_option("--csv", a.csv, "Also write the report as CSV");
}

AsvOperatingPoint operating_point(const std::string& path) {
  return path.empty() ? default_asv_operating_point() : asv_op_from_json(read_text_file(path));
}

int run_score(const ScoreArgs& a) {
  const ScoreFile scores = load_scores(a.scores);
  const AsvOperatingPoint op = operating_point(a.asv_op);
  const Breakdown b = per_attack_breakdown(scores, op);
  if (a.breakdown) {
    std::printf("%s", format_breakdown_text(b).c_str());
  } else {
    std::printf("EER %.6f\nmin t-DCF %.6f\n", b.pooled_eer, b.pooled_min_tdcf);
    for (const auto& w : b.warnings) std::printf("warning: %s\n", w.c_str());
  }
  if (!a.csv.empty()) write_text_file(a.csv, format_breakdown_csv(b));
  return 0;
}

// ----------------------------------------------------------------- matrix

struct MatrixArgs {
  std::vector<std::string> frameworks{"a", "b", "c"}, pairings{"cqt"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string manifest_train, manifest_dev, manifest_eval, cache, backend = "lite", asv_op, out, csv;
  int controlled = 0, dim = 16, frames = 400, epochs = 30, batch_size = 32;
  double lr = 1e-3, walk_step = 0.1;
  bool no_extract = false;
};

void add_matrix(CLI::App& app, MatrixArgs& a) {
  auto* s = app.add_subcommand("matrix", "Train and evaluate every framework x pairing x seed; avg(best) table");
  s->add_option("--frameworks", a.frameworks, "Comma-separated frameworks")
      ->delimiter(',')
      ->check(CLI::IsMember({"a", "b", "c"}))
      ->capture_default_str();
  s->add_option("--pairings", a.pairings, "Comma-separated pairings")
      ->delimiter(',')
      ->check(CLI::IsMember({"lps", "cqt", "lfcc"}))
      ->capture_default_str();
  s->add_option("--seeds", a.seeds, "Comma-separated training seeds")->delimiter(',')->capture_default_str();
  s->add_option("--manifest-train", a.manifest_train, "Training manifest")->check(CLI::ExistingFile);
  s->add_option("--manifest-dev", a.manifest_dev, "Development manifest")->check(CLI::ExistingFile);
  s->add_option("--manifest-eval", a.manifest_eval, "Evaluation manifest")->check(CLI::ExistingFile);
  s->add_option("--cache", a.cache, "Feature cache root");
  s->add_flag("--no-extract", a.no_extract, "Fail on a cache miss instead of extracting from audio");
  s->add_option("--controlled", a.controlled,
                "Use the controlled feature-domain corpus with N training utterances (dev and eval get N/5)")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--dim", a.dim, "Controlled corpus: feature dim")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--frames", a.frames, "Controlled corpus: frames per utterance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--walk-step", a.walk_step, "Controlled corpus: bonafide phase random-walk step (rad)")
      ->capture_default_str();
  s->add_option("--epochs", a.epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--batch-size", a.batch_size, "Segments per minibatch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--lr", a.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--backend", a.backend, "Backend size preset")
      ->check(CLI::IsMember({"lite", "paper_scale"}))
      ->capture_default_str();
  s->add_option("--asv-op", a.asv_op, "ASV operating point JSON")->check(CLI::ExistingFile);
  s->add_option("--out", a.out, "Write the text report here as well as to stdout");
  s->add_option("--csv", a.csv, "Per-seed CSV");
}

int run_matrix_cmd(const MatrixArgs& a, const Globals& g) {
  std::vector<FrameworkKind> fws;
  for (const auto& f : a.frameworks) fws.push_back(framework_from_string(f));
  std::vector<Pairing> ps;
  for (const auto& p : a.pairings) ps.push_back(pairing_from_string(p));

  TrainConfig base;
  base.epochs = a.epochs;
  base.batch_size = a.batch_size;
  base.lr = a.lr;
  base.backend_preset = a.backend;
  base.seeds = a.seeds;
  base.validate();

  std::function<DataSplits(Pairing)> data;
  if (a.controlled > 0) {
    FeatureCorpusSpec spec;
    spec.frames = a.frames;
    spec.dim = a.dim;
    spec.walk_step = a.walk_step;
    spec.seed = g.seed;
    const int n = a.controlled;
    data = [spec, n](Pairing) { return controlled_splits(spec, n, n / 5, n / 5); };
  } else {
    if (a.manifest_train.empty() || a.manifest_dev.empty() || a.manifest_eval.empty()) {
      throw ConfigError("matrix: give --controlled N or all of --manifest-train/--manifest-dev/--manifest-eval");
    }
    data = [&a](Pairing p) {
      DataSplits d;
      d.train = features_for(a.manifest_train, p, a.cache, !a.no_extract);
      d.dev = features_for(a.manifest_dev, p, a.cache, !a.no_extract);
      d.eval = features_for(a.manifest_eval, p, a.cache, !a.no_extract);
      return d;
    };
  }
  const MatrixReport r = run_matrix(fws, ps, a.seeds, data, base, operating_point(a.asv_op), log_line);
  const std::string text = format_matrix(r);
  std::printf("%s", text.c_str());
  if (!a.out.empty()) write_text_file(a.out, text);
  if (!a.csv.empty()) write_text_file(a.csv, format_matrix_csv(r));
  return 0;
}

// --------------------------------------------------------------- selftest

void add_selftest(CLI::App& app) {
  app.add_subcommand("selftest", "Gradient checks and metric oracle comparisons; exit 1 on any failure");
}

int run_selftest(const Globals& g) {
  std::vector<oracle::CheckResult> all = oracle::layer_grad_checks(g.seed);
  all.push_back(oracle::framework_c_grad_check(g.seed));
  all.push_back(oracle::mutation_control(g.seed));
  all.push_back(oracle::eer_oracle_check(200, g.seed));
  all.push_back(oracle::tdcf_oracle_check(200, g.seed));
  bool ok = true;
  for (const auto& c : all) {
    std::printf("%s %-22s value=%.3e threshold=%.1e %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.threshold, c.detail.c_str());
    ok = ok && c.pass;
  }
  std::printf("%s\n", ok ? "selftest passed" : "selftest FAILED");
  return ok ? 0 : 1;
}

int run(int argc, char** argv) {
  CLI::App app{"phasefuse: phase-aware spoofed speech detection toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config; CLI flags override it, it overrides defaults");

  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every random draw of the run")->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Single-threaded, bit-reproducible execution");
  app.add_option("--run-manifest", g.run_manifest,
                 "Write the resolved configuration as JSON (train defaults to OUT/run.json)");

  SynthArgs synth;
  ExtractArgs extract;
  EntropyArgs entropy;
  TrainArgs train_args;
  EvalArgs eval;
  ScoreArgs score;
  MatrixArgs matrix;
  add_synth(app, synth);
  add_extract(app, extract);
  add_entropy(app, entropy);
  add_train(app, train_args);
  add_eval(app, eval);
  add_score(app, score);
  add_matrix(app, matrix);
  add_selftest(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  // The engine never spawns threads; pin Eigen as well so results cannot
  // depend on the host.
  Eigen::setNbThreads(1);

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  std::string manifest_path = g.run_manifest;
  if (manifest_path.empty() && name == "train") manifest_path = (fs::path(train_args.out) / "run.json").string();
  if (!manifest_path.empty()) write_run_manifest(app, *sub, manifest_path);

  if (name == "synth") return run_synth(synth, g, seed_opt->count() > 0);
  if (name == "extract") return run_extract(extract);
  if (name == "entropy") return run_entropy(entropy, g);
  if (name == "train") return run_train(train_args, g);
  if (name == "eval") return run_eval(eval);
  if (name == "score") return run_score(score);
  if (name == "matrix") return run_matrix_cmd(matrix, g);
  return run_selftest(g);
}

}  // namespace
}  // namespace phasefuse

int main(int argc, char** argv) {
  try {
    return phasefuse::run(argc, argv);
  } catch (const phasefuse::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", phasefuse::to_string(e.category()).data(), e.what());
    return e.category() == phasefuse::ErrorCategory::config ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [runtime]: %s\n", e.what());
    return 1;
  }
}
