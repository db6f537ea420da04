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

#include "phasefuse/dataset_io.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace phasefuse {

/// One evaluated utterance. Higher score = more bonafide.
struct ScoreRow {
  std::string utterance_id;
  std::string attack_id = "-";
  Label label = Label::bonafide;
  double score = 0.0;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

using ScoreFile = std::vector<ScoreRow>;

/// "utt_id attack_id label score" per line.
std::string format_scores(const ScoreFile& scores);
ScoreFile parse_scores(std::string_view text);
void save_scores(const ScoreFile& scores, const std::filesystem::path& path);
ScoreFile load_scores(const std::filesystem::path& path);

void split_by_label(const ScoreFile& scores, std::vector<double>& bonafide, std::vector<double>& spoof);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  bool inverted = false;  // eer > 0.5: scores point the wrong way
};

/// Operating points are every distinct score (accept when score >= tau)
/// plus +inf. FRR counts rejected bonafide, FAR accepted spoofs. The EER
/// is read where FRR - FAR first becomes >= 0, interpolating linearly
/// between the two bracketing points when there is no exact crossing.
EerResult compute_eer(std::span<const double> bonafide, std::span<const double> spoof);
EerResult compute_eer(const ScoreFile& scores);

/// ASV operating point for the 2019 tandem detection cost.
struct AsvOperatingPoint {
  double p_target = 0.95 * 0.99;
  double p_nontarget = 0.95 * 0.01;
  double p_spoof = 0.05;
  double c_miss_asv = 1.0;
  double c_fa_asv = 10.0;
  double c_miss_cm = 1.0;
  double c_fa_cm = 10.0;
  double p_miss_asv = 0.0;
  double p_fa_asv = 0.0;
  double p_miss_spoof_asv = 0.0;

  void validate() const;
  double c1() const;
  double c2() const;
};

AsvOperatingPoint asv_op_from_json(const std::string& json_text);
std::string asv_op_to_json(const AsvOperatingPoint& op);
/// Shipped default; see configs/asv_op_default.json.
AsvOperatingPoint default_asv_operating_point();

struct TdcfResult {
  double min_tdcf = 0.0;  // normalised by min(C1, C2)
  double threshold = 0.0;  // may be +/-inf
};

/// Normalised t-DCF at a single threshold (accept when score >= tau).
double normalized_tdcf(std::span<const double> bonafide, std::span<const double> spoof,
                       const AsvOperatingPoint& op, double tau);

/// Minimum over -inf, every distinct score, and +inf.
TdcfResult compute_min_tdcf(std::span<const double> bonafide, std::span<const double> spoof,
                            const AsvOperatingPoint& op);
TdcfResult compute_min_tdcf(const ScoreFile& scores, const AsvOperatingPoint& op);

struct AttackRow {
  std::string attack_id;
  std::size_t n_spoof = 0;
  double eer = 0.0;
};

struct Breakdown {
  std::vector<AttackRow> attacks;  // sorted by attack id
  double pooled_eer = 0.0;
  double pooled_min_tdcf = 0.0;
  std::vector<std::string> warnings;
};

/// Per-attack EER uses every bonafide row against that attack's spoofs.
/// Attacks listed in `expected` but absent from the scores are skipped
/// with a warning.
Breakdown per_attack_breakdown(const ScoreFile& scores, const AsvOperatingPoint& op,
                               const std::vector<std::string>& expected = {});

std::string format_breakdown_text(const Breakdown& b);
std::string format_breakdown_csv(const Breakdown& b);

}  // namespace phasefuse
