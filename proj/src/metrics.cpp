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

#include "phasefuse/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace phasefuse {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_both_classes(std::span<const double> bonafide, std::span<const double> spoof) {
  if (bonafide.empty() || spoof.empty()) {
    throw DataError("metric needs at least one bonafide and one spoof score");
  }
}

// Sorted copies plus helpers that count rejected bonafide / accepted spoofs
// for a threshold using the accept rule score >= tau.
struct SortedScores {
  std::vector<double> bona, spoof, distinct;

  SortedScores(std::span<const double> b, std::span<const double> s) : bona(b.begin(), b.end()), spoof(s.begin(), s.end()) {
    std::sort(bona.begin(), bona.end());
    std::sort(spoof.begin(), spoof.end());
    distinct.reserve(bona.size() + spoof.size());
    std::merge(bona.begin(), bona.end(), spoof.begin(), spoof.end(), std::back_inserter(distinct));
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  }

  double frr(double tau) const {
    const auto rejected = std::lower_bound(bona.begin(), bona.end(), tau) - bona.begin();
    return static_cast<double>(rejected) / static_cast<double>(bona.size());
  }
  double far(double tau) const {
    const auto accepted = spoof.end() - std::lower_bound(spoof.begin(), spoof.end(), tau);
    return static_cast<double>(accepted) / static_cast<double>(spoof.size());
  }
};

}  // namespace

// ------------------------------------------------------------ Score files

std::string format_scores(const ScoreFile& scores) {
  std::string out;
  char buf[64];
  for (const auto& r : scores) {
    std::snprintf(buf, sizeof buf, " %.17g\n", r.score);
    out += r.utterance_id + ' ' + r.attack_id + ' ' + std::string(to_string(r.label)) + buf;
  }
  return out;
}

ScoreFile parse_scores(std::string_view text) {
  ScoreFile out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    ScoreRow r;
    std::string label;
    if (!(fields >> r.utterance_id)) continue;
    if (!(fields >> r.attack_id >> label >> r.score)) {
      throw DataError("score line " + std::to_string(lineno) + ": expected 'utt attack label score'");
    }
    r.label = label_from_string(label);
    if (!std::isfinite(r.score)) throw DataError("score line " + std::to_string(lineno) + ": non-finite score");
    out.push_back(std::move(r));
  }
  return out;
}

void save_scores(const ScoreFile& scores, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << format_scores(scores);
}

ScoreFile load_scores(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scores(ss.str());
}

void split_by_label(const ScoreFile& scores, std::vector<double>& bonafide, std::vector<double>& spoof) {
  bonafide.clear();
  spoof.clear();
  for (const auto& r : scores) (r.label == Label::bonafide ? bonafide : spoof).push_back(r.score);
}

// -------------------------------------------------------------------- EER

EerResult compute_eer(std::span<const double> bonafide, std::span<const double> spoof) {
  require_both_classes(bonafide, spoof);
  const SortedScores s(bonafide, spoof);

  std::vector<double> taus = s.distinct;
  taus.push_back(kInf);
  double prev_frr = 0.0, prev_far = 1.0, prev_tau = -kInf;
  for (std::size_t j = 0; j < taus.size(); ++j) {
    const double tau = taus[j];
    const double frr = s.frr(tau), far = s.far(tau);
    if (frr - far >= 0.0) {
      EerResult r;
      if (frr == far || j == 0) {
        r.eer = frr;
        r.threshold = std::isfinite(tau) ? tau : s.distinct.back();
      } else {
        const double d_frr = frr - prev_frr, d_far = far - prev_far;
        const double lambda = (prev_far - prev_frr) / (d_frr - d_far);
        r.eer = prev_frr + lambda * d_frr;
        r.threshold = std::isfinite(tau) ? 0.5 * (prev_tau + tau) : prev_tau;
      }
      r.inverted = r.eer > 0.5;
      return r;
    }
    prev_frr = frr;
    prev_far = far;
    prev_tau = tau;
  }
  return {1.0, s.distinct.back(), true};  // unreachable: FRR(+inf) = 1 >= FAR(+inf) = 0
}

EerResult compute_eer(const ScoreFile& scores) {
  std::vector<double> b, s;
  split_by_label(scores, b, s);
  return compute_eer(b, s);
}

// ------------------------------------------------------------------ t-DCF

void AsvOperatingPoint::validate() const {
  if (std::abs(p_target + p_nontarget + p_spoof - 1.0) > 1e-12) {
    throw ConfigError("asv operating point: priors must sum to 1");
  }
  for (double p : {p_target, p_nontarget, p_spoof, p_miss_asv, p_fa_asv, p_miss_spoof_asv}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("asv operating point: probabilities must lie in [0, 1]");
  }
  for (double c : {c_miss_asv, c_fa_asv, c_miss_cm, c_fa_cm}) {
    if (!(c > 0.0)) throw ConfigError("asv operating point: costs must be positive");
  }
  if (!(c1() > 0.0) || !(c2() > 0.0)) {
    throw ConfigError("asv operating point: degenerate t-DCF (C1 or C2 <= 0)");
  }
}

double AsvOperatingPoint::c1() const {
  return p_target * (c_miss_cm - c_miss_asv * p_miss_asv) - p_nontarget * c_fa_asv * p_fa_asv;
}

double AsvOperatingPoint::c2() const { return c_fa_cm * p_spoof * (1.0 - p_miss_spoof_asv); }

AsvOperatingPoint asv_op_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("asv operating point: ") + e.what());
  }
  AsvOperatingPoint op;
  op.p_target = j.value("p_target", op.p_target);
  op.p_nontarget = j.value("p_nontarget", op.p_nontarget);
  op.p_spoof = j.value("p_spoof", op.p_spoof);
  op.c_miss_asv = j.value("C_miss_asv", op.c_miss_asv);
  op.c_fa_asv = j.value("C_fa_asv", op.c_fa_asv);
  op.c_miss_cm = j.value("C_miss_cm", op.c_miss_cm);
  op.c_fa_cm = j.value("C_fa_cm", op.c_fa_cm);
  op.p_miss_asv = j.value("p_miss_asv", op.p_miss_asv);
  op.p_fa_asv = j.value("p_fa_asv", op.p_fa_asv);
  op.p_miss_spoof_asv = j.value("p_miss_spoof_asv", op.p_miss_spoof_asv);
  op.validate();
  return op;
}

std::string asv_op_to_json(const AsvOperatingPoint& op) {
  nlohmann::json j = {{"p_target", op.p_target},     {"p_nontarget", op.p_nontarget},
                      {"p_spoof", op.p_spoof},       {"C_miss_asv", op.c_miss_asv},
                      {"C_fa_asv", op.c_fa_asv},     {"C_miss_cm", op.c_miss_cm},
                      {"C_fa_cm", op.c_fa_cm},       {"p_miss_asv", op.p_miss_asv},
                      {"p_fa_asv", op.p_fa_asv},     {"p_miss_spoof_asv", op.p_miss_spoof_asv}};
  return j.dump(2);
}

AsvOperatingPoint default_asv_operating_point() {
  AsvOperatingPoint op;
  // Illustrative ASV error rates at its EER threshold; absolute t-DCF values
  // depend on these and should be recomputed from a real ASV system.
  op.p_miss_asv = 0.0242;
  op.p_fa_asv = 0.0242;
  op.p_miss_spoof_asv = 0.0541;
  return op;
}

double normalized_tdcf(std::span<const double> bonafide, std::span<const double> spoof,
                       const AsvOperatingPoint& op, double tau) {
  require_both_classes(bonafide, spoof);
  const SortedScores s(bonafide, spoof);
  const double c1 = op.c1(), c2 = op.c2();
  return (c1 * s.frr(tau) + c2 * s.far(tau)) / std::min(c1, c2);
}

TdcfResult compute_min_tdcf(std::span<const double> bonafide, std::span<const double> spoof,
                            const AsvOperatingPoint& op) {
  op.validate();
  require_both_classes(bonafide, spoof);
  const SortedScores s(bonafide, spoof);
  const double c1 = op.c1(), c2 = op.c2();
  const double norm = std::min(c1, c2);

  std::vector<double> taus;
  taus.reserve(s.distinct.size() + 2);
  taus.push_back(-kInf);
  taus.insert(taus.end(), s.distinct.begin(), s.distinct.end());
  taus.push_back(kInf);

  TdcfResult best{kInf, 0.0};
  for (double tau : taus) {
    const double cost = (c1 * s.frr(tau) + c2 * s.far(tau)) / norm;
    if (cost < best.min_tdcf) best = {cost, tau};
  }
  return best;
}

TdcfResult compute_min_tdcf(const ScoreFile& scores, const AsvOperatingPoint& op) {
  std::vector<double> b, s;
  split_by_label(scores, b, s);
  return compute_min_tdcf(b, s, op);
}

// -------------------------------------------------------------- Breakdown

Breakdown per_attack_breakdown(const ScoreFile& scores, const AsvOperatingPoint& op,
                               const std::vector<std::string>& expected) {
  std::vector<double> bona, all_spoof;
  std::map<std::string, std::vector<double>> by_attack;
  for (const auto& r : scores) {
    if (r.label == Label::bonafide) {
      bona.push_back(r.score);
    } else {
      all_spoof.push_back(r.score);
      by_attack[r.attack_id].push_back(r.score);
    }
  }
  Breakdown b;
  for (const auto& id : expected) {
    if (!by_attack.contains(id)) b.warnings.push_back("attack " + id + " has no scored rows; skipped");
  }
  for (const auto& [id, spoof] : by_attack) {
    b.attacks.push_back({id, spoof.size(), compute_eer(bona, spoof).eer});
  }
  b.pooled_eer = compute_eer(bona, all_spoof).eer;
  b.pooled_min_tdcf = compute_min_tdcf(bona, all_spoof, op).min_tdcf;
  return b;
}

std::string format_breakdown_text(const Breakdown& b) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s %8s %10s\n", "attack", "n_spoof", "EER(%)");
  out += buf;
  for (const auto& a : b.attacks) {
    std::snprintf(buf, sizeof buf, "%-12s %8zu %10.2f\n", a.attack_id.c_str(), a.n_spoof, 100.0 * a.eer);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "pooled min t-DCF (P1) %.3f\npooled EER%% (P2)      %.2f\n", b.pooled_min_tdcf,
                100.0 * b.pooled_eer);
  out += buf;
  for (const auto& w : b.warnings) out += "warning: " + w + "\n";
  return out;
}

std::string format_breakdown_csv(const Breakdown& b) {
  std::string out = "attack,n_spoof,eer\n";
  char buf[128];
  for (const auto& a : b.attacks) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f\n", a.attack_id.c_str(), a.n_spoof, a.eer);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "P1_min_tdcf,,%.6f\nP2_pooled_eer,,%.6f\n", b.pooled_min_tdcf, b.pooled_eer);
  out += buf;
  return out;
}

}  // namespace phasefuse
