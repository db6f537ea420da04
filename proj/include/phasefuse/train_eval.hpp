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

#include "phasefuse/checkpoint.hpp"
#include "phasefuse/featmap.hpp"
#include "phasefuse/metrics.hpp"

#include <functional>

namespace phasefuse {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr = 1e-3;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  FrameworkKind framework = FrameworkKind::C_phase_network_concat;
  Pairing pairing = Pairing::cqt;
  Scenario scenario = Scenario::known_kind;
  std::string backend_preset = "lite";

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_eer = 0.0;
};

using EpochLogger = std::function<void(const EpochRecord&)>;

struct TrainResult {
  Checkpoint checkpoint;  // parameters of the lowest-dev-EER epoch
  std::vector<EpochRecord> history;
};

/// Seeded shuffle of all training segments each epoch, Adam minibatch
/// updates, utterance-level dev EER after every epoch. The first epoch
/// reaching the minimum dev EER is kept.
TrainResult train(const std::vector<LabeledFeatures>& train_set, const std::vector<LabeledFeatures>& dev_set,
                  const TrainConfig& cfg, std::uint64_t seed, const EpochLogger& log = {});

/// Bonafide log-probability of every segment, in corpus.segments order.
std::vector<double> segment_scores(FrameworkModel<float>& model, const SegmentedCorpus& corpus, int batch_size = 64);

/// One row per utterance: mean of its segment scores.
ScoreFile evaluate(FrameworkModel<float>& model, const SegmentedCorpus& corpus, int batch_size = 64);
ScoreFile evaluate(const Checkpoint& ckpt, const std::vector<LabeledFeatures>& items, int batch_size = 64);

/// Throws ConfigError when the features cannot feed the checkpoint's model.
void check_compatible(const ModelConfig& model, const std::vector<LabeledFeatures>& items);

struct DataSplits {
  std::vector<LabeledFeatures> train, dev, eval;
};

/// Controlled feature-domain corpus split three ways. Counts are totals
/// (half bonafide, half spoof); each split draws from its own seed stream
/// of base.seed and gets its own id prefix.
DataSplits controlled_splits(const FeatureCorpusSpec& base, int n_train, int n_dev, int n_eval);

struct MatrixEntry {
  FrameworkKind framework = FrameworkKind::A_magnitude_only;
  Pairing pairing = Pairing::cqt;
  std::vector<std::uint64_t> seeds;
  std::vector<double> eer;  // fraction, per seed
  std::vector<double> min_tdcf;
};

struct MatrixReport {
  std::vector<MatrixEntry> rows;
};

/// "avg(best)" with two decimals; best = minimum.
std::string format_avg_best(std::span<const double> values);

/// One line per (framework, pairing): EER in percent and min t-DCF.
std::string format_matrix(const MatrixReport& report);
std::string format_matrix_csv(const MatrixReport& report);

using MatrixLogger = std::function<void(const std::string&)>;

MatrixReport run_matrix(const std::vector<FrameworkKind>& frameworks, const std::vector<Pairing>& pairings,
                        const std::vector<std::uint64_t>& seeds, const std::function<DataSplits(Pairing)>& data,
                        const TrainConfig& base, const AsvOperatingPoint& op, const MatrixLogger& log = {});

}  // namespace phasefuse
