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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned
// below; the training criterion takes tens of minutes on one core.

#include "checks.hpp"

#include "phasefuse/binary_io.hpp"
#include "phasefuse/checkpoint.hpp"
#include "phasefuse/dataset_io.hpp"
#include "phasefuse/dsp.hpp"
#include "phasefuse/entropy.hpp"
#include "phasefuse/featmap.hpp"
#include "phasefuse/metrics.hpp"
#include "phasefuse/models.hpp"
#include "phasefuse/random.hpp"
#include "phasefuse/train_eval.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;
using namespace phasefuse;

namespace {

// Pinned thresholds.
constexpr double kNoiseGapMax = 0.15;        // bits, E(noise) - E(phase)
constexpr double kPhaseOverMagMin = 1.0;     // bits, E(phase) - E(magnitude, voiced)
constexpr double kProcessedDropMin = 1.0;    // bits, raw phase minus phase-network output
constexpr std::size_t kPhaseNetMin = 150, kPhaseNetMax = 300;
constexpr double kPaperScaleMin = 0.756e6, kPaperScaleMax = 0.924e6;
constexpr double kChanceLo = 0.40, kChanceHi = 0.60;
constexpr double kPhaseNetEerMax = 0.10;
constexpr int kPhaseNetSeedsNeeded = 2;
constexpr double kTrainingBudgetS = 30.0 * 60.0;
constexpr double kAggregateTol = 1e-12;

int n_fail = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++n_fail;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean_entropy(const FeatureMap& m, const std::vector<bool>* mask = nullptr) {
  const EntropyCurve c = frame_entropy(global_minmax_normalize(m), EntropyConfig{32});
  return mask ? c.masked_mean(*mask) : c.mean();
}

struct EntropyTriple {
  double noise, phase, magnitude;
};

EntropyTriple harmonic_entropies(std::uint64_t seed) {
  HarmonicParams p;
  p.f0 = 150.0;
  p.amplitudes = {1.0, 0.5, 0.33, 0.25, 0.2};
  Rng rng(seed);
  for (int k = 0; k < 5; ++k) p.start_phases.push_back(rng.uniform(-kPi, kPi));
  p.snr_db = 30.0;
  p.duration_s = 3.0;
  const Waveform w = synth_harmonic(p, derive_seed(seed, 1), "harmonic");
  const ComplexSpectrogram s = cqt(w);
  const FeatureMap mag = log_power(s);
  const FeatureMap ph = phase(s);
  const auto voiced = voiced_frame_mask(mag);
  return {mean_entropy(random_noise_map(ph.frames(), ph.dim(), derive_seed(seed, 2))), mean_entropy(ph),
          mean_entropy(mag, &voiced)};
}

void criterion_1() {
  // Pass/fail is decided on one fixed utterance; the spread over 20 others
  // is printed alongside because the margin depends on the noise draw.
  const EntropyTriple e = harmonic_entropies(11);
  double lo = 1e9, hi = -1e9, sum = 0.0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const EntropyTriple o = harmonic_entropies(seed);
    lo = std::min(lo, o.phase - o.magnitude);
    hi = std::max(hi, o.phase - o.magnitude);
    sum += o.phase - o.magnitude;
  }
  const bool pass = e.noise - e.phase <= kNoiseGapMax && e.phase - e.magnitude >= kPhaseOverMagMin;
  report(1, pass,
         fmt("E(noise)=%.3f E(phase)=%.3f E(mag,voiced)=%.3f; noise-phase=%.3f (<= %.2f), phase-mag=%.3f (>= %.1f); "
             "phase-mag over 20 other utterances: mean %.3f, range [%.3f, %.3f]",
             e.noise, e.phase, e.magnitude, e.noise - e.phase, kNoiseGapMax, e.phase - e.magnitude,
             kPhaseOverMagMin, sum / 20.0, lo, hi));
}

void criterion_3() {
  const PairingDims d = default_dims(Pairing::cqt);
  const auto net = build_phase_network<float>(PhaseNetConfig::for_pairing(Pairing::cqt, d.magnitude));
  const std::size_t phase_net = nn::param_count(*net);
  bool diff_ok = true;
  for (Pairing p : {Pairing::lps, Pairing::cqt, Pairing::lfcc}) {
    const PairingDims pd = default_dims(p);
    for (const char* preset : {"lite", "paper_scale"}) {
      const auto b = framework_param_count(
          ModelConfig::make(FrameworkKind::B_raw_concat, p, pd.magnitude, pd.phase, preset));
      const auto c = framework_param_count(
          ModelConfig::make(FrameworkKind::C_phase_network_concat, p, pd.magnitude, pd.phase, preset));
      diff_ok = diff_ok && c - b == phase_net;
    }
  }
  const auto big = framework_param_count(
      ModelConfig::make(FrameworkKind::C_phase_network_concat, Pairing::cqt, d.magnitude, d.phase, "paper_scale"));
  const bool pass = phase_net >= kPhaseNetMin && phase_net <= kPhaseNetMax && diff_ok &&
                    double(big) >= kPaperScaleMin && double(big) <= kPaperScaleMax;
  report(3, pass,
         fmt("phase network %zu params [%zu, %zu]; C-B equals it for every pairing/preset: %s; "
             "paper_scale C %zu [%.0f, %.0f]",
             phase_net, kPhaseNetMin, kPhaseNetMax, diff_ok ? "yes" : "no", big, kPaperScaleMin, kPaperScaleMax));
}

// Criteria 4 and 2 share the trained framework-C checkpoints.
void criteria_4_and_2() {
  FeatureCorpusSpec spec;
  spec.frames = 400;
  spec.dim = 16;
  spec.walk_step = 0.1;
  spec.seed = 0;
  const auto t0 = std::chrono::steady_clock::now();
  const DataSplits data = controlled_splits(spec, 2000, 400, 400);

  TrainConfig base;
  base.epochs = 30;
  base.batch_size = 32;
  base.lr = 1e-3;
  base.backend_preset = "lite";
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> eer[3];
  std::vector<Checkpoint> c_models;
  const FrameworkKind kinds[3] = {FrameworkKind::A_magnitude_only, FrameworkKind::B_raw_concat,
                                  FrameworkKind::C_phase_network_concat};
  for (int k = 0; k < 3; ++k) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.framework = kinds[k];
      cfg.pairing = Pairing::cqt;
      const TrainResult r = train(data.train, data.dev, cfg, seed);
      eer[k].push_back(compute_eer(evaluate(r.checkpoint, data.eval)).eer);
      std::printf("  %s seed %llu: eval EER %.4f (best dev epoch %d)\n", to_string(kinds[k]).c_str(),
                  static_cast<unsigned long long>(seed), eer[k].back(), r.checkpoint.epoch_of_best);
      std::fflush(stdout);
      if (k == 2) c_models.push_back(r.checkpoint);
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  const bool a_ok = std::all_of(eer[0].begin(), eer[0].end(), [](double e) { return e >= kChanceLo && e <= kChanceHi; });
  const int c_good = int(std::count_if(eer[2].begin(), eer[2].end(), [](double e) { return e <= kPhaseNetEerMax; }));
  const bool pass = a_ok && c_good >= kPhaseNetSeedsNeeded && mean(eer[2]) < mean(eer[1]) && secs <= kTrainingBudgetS;
  report(4, pass,
         fmt("A EER %.3f/%.3f/%.3f in [%.2f, %.2f]; C <= %.2f on %d seeds (need %d); mean C %.3f < mean B %.3f; "
             "%.0f s (<= %.0f)",
             eer[0][0], eer[0][1], eer[0][2], kChanceLo, kChanceHi, kPhaseNetEerMax, c_good, kPhaseNetSeedsNeeded,
             mean(eer[2]), mean(eer[1]), secs, kTrainingBudgetS));

  // Entropy of the phase-network output against the raw phase, eval split.
  std::string detail;
  bool all_ok = true;
  for (std::size_t i = 0; i < c_models.size(); ++i) {
    FrameworkModel<float> model(c_models[i].model);
    restore_checkpoint(c_models[i], model);
    double raw = 0.0, processed = 0.0;
    for (const auto& it : data.eval) {
      raw += mean_entropy(it.phase);
      const auto y = model.phase_network()->forward(stack_channels<float>(it.phase.values, nullptr), nn::Mode::eval);
      FeatureMap out;
      out.kind = ChannelKind::phase;
      out.values = Eigen::Map<const MatrixX<float>>(y.ptr(), y.h(), y.w()).cast<double>();
      processed += mean_entropy(out);
    }
    raw /= double(data.eval.size());
    processed /= double(data.eval.size());
    all_ok = all_ok && processed <= raw - kProcessedDropMin;
    detail += fmt("seed %llu raw %.3f processed %.3f; ", static_cast<unsigned long long>(seeds[i]), raw, processed);
  }
  report(2, all_ok, detail + fmt("need a drop >= %.1f bit", kProcessedDropMin));
}

void criterion_5() {
  std::vector<oracle::CheckResult> checks = oracle::layer_grad_checks(0);
  checks.push_back(oracle::framework_c_grad_check(0));
  double worst = 0.0;
  std::string worst_name;
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.pass;
    if (c.value >= worst) {
      worst = c.value;
      worst_name = c.name;
    }
  }
  const oracle::CheckResult mut = oracle::mutation_control(0);
  report(5, ok && mut.pass,
         fmt("%zu checks, worst %s %.2e (< %.0e); mutated conv caught at %.2e (> %.0e)", checks.size(),
             worst_name.c_str(), worst, oracle::kGradCheckTol, mut.value, oracle::kMutationFloor));
}

void criterion_6() {
  const oracle::CheckResult e = oracle::eer_oracle_check(1000, 2026);
  const oracle::CheckResult t = oracle::tdcf_oracle_check(1000, 2026);
  report(6, e.pass && t.value == 0.0,
         fmt("1000 sets: max |EER - oracle| %.2e (<= %.0e); max |min t-DCF - oracle| %.2e (bit-exact)", e.value,
             oracle::kEerOracleTol, t.value));
}

void criterion_7() {
  FeatureCorpusSpec spec;
  spec.n_per_class = 1;
  spec.frames = 900;
  spec.dim = 16;
  spec.seed = 5;
  const auto items = synth_feature_corpus(spec);
  const ModelConfig mc = ModelConfig::make(FrameworkKind::C_phase_network_concat, Pairing::cqt, 16, 16, "lite");
  FrameworkModel<float> model(mc);
  model.reset_parameters(9);

  const FeatureMap ext = extend_to_multiple(items[0].magnitude);
  const auto starts = segment_starts(ext.frames());
  const SegmentedCorpus corpus = segment_corpus({items[0]});
  const double score = evaluate(model, corpus)[0].score;
  // Independent path: cut the segments by hand and run them as one batch.
  const FeatureMap ext_ph = extend_to_multiple(items[0].phase);
  const Eigen::Index n = static_cast<Eigen::Index>(starts.size());
  nn::Tensor4<float> mag(n, 1, kSegmentFrames, 16), ph(n, 1, kSegmentFrames, 16);
  for (Eigen::Index k = 0; k < n; ++k) {
    mag.plane(k, 0) = ext.values.middleRows(starts[k], kSegmentFrames).cast<float>();
    ph.plane(k, 0) = ext_ph.values.middleRows(starts[k], kSegmentFrames).cast<float>();
  }
  const std::vector<double> seg = nn::log_softmax_column(model.forward(mag, ph, nn::Mode::eval), 1);
  double sum = 0.0;
  for (double v : seg) sum += v;
  const double mean = sum / double(starts.size());
  const double err = std::abs(score - mean);
  report(7, ext.frames() == 1200 && starts.size() == 5 && corpus.segments.size() == 5 && err <= kAggregateTol,
         fmt("T=900 -> %lld frames, %zu segments; |score - segment mean| %.2e (<= %.0e)",
             static_cast<long long>(ext.frames()), starts.size(), err, kAggregateTol));
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + PHASEFUSE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_8() {
  const fs::path dir = fs::temp_directory_path() / "phasefuse_acceptance_c8";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text_file(dir / "spec.json", R"({"n_per_class": 24, "frames": 400, "dim": 16})");
  bool ok = cli("--seed 1 synth --domain features --spec " + (dir / "spec.json").string() + " --out " +
                (dir / "data").string()) == 0;
  const std::string m = (dir / "data" / "manifest.json").string();
  for (const char* run : {"r1", "r2"}) {
    ok = ok && cli("--deterministic --seed 7 train --framework c --epochs 2 --batch-size 16 --manifest-train " + m +
                   " --manifest-dev " + m + " --cache " + (dir / "data" / "features").string() +
                   " --no-extract --out " + (dir / run).string()) == 0;
  }
  bool same_ckpt = false, same_scores = false;
  if (ok) {
    same_ckpt = read_file(dir / "r1" / "model.ckpt") == read_file(dir / "r2" / "model.ckpt");
    same_scores = read_file(dir / "r1" / "dev_scores.txt") == read_file(dir / "r2" / "dev_scores.txt");
  }
  report(8, ok && same_ckpt && same_scores,
         fmt("two 'train --deterministic --seed 7' runs: commands %s, checkpoint bytes %s, ScoreFile bytes %s",
             ok ? "ok" : "failed", same_ckpt ? "identical" : "differ", same_scores ? "identical" : "differ"));
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::setNbThreads(1);
  // --quick skips the training run behind criteria 2 and 4.
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  try {
    criterion_1();
    criterion_3();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    if (quick) {
      std::printf("criteria 2 and 4: SKIPPED (--quick)\n");
    } else {
      criteria_4_and_2();
    }
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d criterion(s) failing\n", n_fail ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", n_fail);
  return n_fail ? 1 : 0;
}
