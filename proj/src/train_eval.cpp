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

#include "phasefuse/train_eval.hpp"

#include "phasefuse/random.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace phasefuse {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (seeds.empty()) throw ConfigError("train: need at least one seed");
  BackendConfig::from_preset(backend_preset, 1);
}

void check_compatible(const ModelConfig& model, const std::vector<LabeledFeatures>& items) {
  for (const auto& it : items) {
    if (it.magnitude.dim() != model.magnitude_dim) {
      throw ConfigError("config mismatch: model expects magnitude dim " + std::to_string(model.magnitude_dim) +
                        ", utterance '" + it.record.utterance_id + "' has " + std::to_string(it.magnitude.dim()));
    }
    if (model.framework != FrameworkKind::A_magnitude_only && it.phase.dim() != model.phase_dim) {
      throw ConfigError("config mismatch: model expects phase dim " + std::to_string(model.phase_dim) +
                        ", utterance '" + it.record.utterance_id + "' has " + std::to_string(it.phase.dim()));
    }
  }
}

namespace {

bool needs_phase(const ModelConfig& m) { return m.framework != FrameworkKind::A_magnitude_only; }

void require_both_classes(const std::vector<LabeledFeatures>& items, const char* what) {
  bool b = false, s = false;
  for (const auto& it : items) (it.record.label == Label::bonafide ? b : s) = true;
  if (!b || !s) throw DataError(std::string(what) + " set needs both bonafide and spoof utterances");
}

}  // namespace

std::vector<double> segment_scores(FrameworkModel<float>& model, const SegmentedCorpus& corpus, int batch_size) {
  std::vector<double> out;
  out.reserve(corpus.segments.size());
  const bool with_phase = needs_phase(model.config());
  const std::span<const SegmentRef> all(corpus.segments);
  for (std::size_t i = 0; i < all.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto refs = all.subspan(i, std::min<std::size_t>(static_cast<std::size_t>(batch_size), all.size() - i));
    const auto batch = make_batch<float>(corpus, refs, with_phase);
    const auto logits = model.forward(batch.magnitude, batch.phase, nn::Mode::eval);
    const auto s = nn::log_softmax_column(logits, 1);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

ScoreFile evaluate(FrameworkModel<float>& model, const SegmentedCorpus& corpus, int batch_size) {
  const auto seg = segment_scores(model, corpus, batch_size);
  std::vector<std::vector<double>> per_item(corpus.items.size());
  for (std::size_t k = 0; k < seg.size(); ++k) per_item[corpus.segments[k].item].push_back(seg[k]);
  ScoreFile out;
  out.reserve(corpus.items.size());
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    const auto& rec = corpus.items[i].record;
    out.push_back({rec.utterance_id, rec.attack_id, rec.label, aggregate_scores(per_item[i])});
    if (!std::isfinite(out.back().score)) throw DataError("non-finite score for '" + rec.utterance_id + "'");
  }
  return out;
}

ScoreFile evaluate(const Checkpoint& ckpt, const std::vector<LabeledFeatures>& items, int batch_size) {
  if (items.empty()) throw DataError("evaluate: empty manifest");
  check_compatible(ckpt.model, items);
  FrameworkModel<float> model(ckpt.model);
  restore_checkpoint(ckpt, model);
  return evaluate(model, segment_corpus(items), batch_size);
}

TrainResult train(const std::vector<LabeledFeatures>& train_set, const std::vector<LabeledFeatures>& dev_set,
                  const TrainConfig& cfg, std::uint64_t seed, const EpochLogger& log) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training manifest");
  if (dev_set.empty()) throw DataError("train: empty development manifest");
  require_both_classes(dev_set, "development");

  const auto& first = train_set.front();
  const Eigen::Index phase_dim = first.phase.dim() > 0 ? first.phase.dim() : first.magnitude.dim();
  ModelConfig mc = ModelConfig::make(cfg.framework, cfg.pairing, first.magnitude.dim(), phase_dim,
                                     cfg.backend_preset);
  check_compatible(mc, train_set);
  check_compatible(mc, dev_set);

  const SegmentedCorpus train_corpus = segment_corpus(train_set);
  const SegmentedCorpus dev_corpus = segment_corpus(dev_set);

  FrameworkModel<float> model(mc);
  model.reset_parameters(derive_seed(seed, 0));
  auto params = model.collect().params;
  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  auto adam = nn::make_adam(params, ac);
  Rng shuffle_rng(derive_seed(seed, 1));
  const bool with_phase = needs_phase(mc);

  TrainResult result;
  bool have_best = false;
  std::vector<SegmentRef> order = train_corpus.segments;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
      const std::span<const SegmentRef> refs(order.data() + i,
                                             std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                                   order.size() - i));
      const auto batch = make_batch<float>(train_corpus, refs, with_phase);
      for (auto& p : params) p.param->grad.setZero();
      const auto logits = model.forward(batch.magnitude, batch.phase, nn::Mode::train);
      nn::Tensor4<float> grad;
      const float loss = nn::softmax_xent<float>(logits, batch.labels, &grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCategory::runtime, "training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      model.backward(grad);
      nn::adam_step(params, adam);
      loss_sum += loss;
      ++n_batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_batches);
    rec.dev_eer = compute_eer(evaluate(model, dev_corpus)).eer;
    result.history.push_back(rec);
    if (!have_best || rec.dev_eer < result.checkpoint.best_dev_eer) {
      result.checkpoint = capture_checkpoint(model, &adam);
      result.checkpoint.best_dev_eer = rec.dev_eer;
      result.checkpoint.epoch_of_best = epoch;
      result.checkpoint.seed = seed;
      have_best = true;
    }
    if (log) log(rec);
  }
  return result;
}

DataSplits controlled_splits(const FeatureCorpusSpec& base, int n_train, int n_dev, int n_eval) {
  auto make = [&](int n, std::uint64_t stream, const char* prefix) {
    if (n < 2 || n % 2) throw ConfigError("controlled corpus: split sizes must be even and >= 2");
    FeatureCorpusSpec s = base;
    s.n_per_class = n / 2;
    s.seed = derive_seed(base.seed, stream);
    s.id_prefix = base.id_prefix + prefix;
    return synth_feature_corpus(s);
  };
  DataSplits out;
  out.train = make(n_train, 100, "T");
  out.dev = make(n_dev, 101, "D");
  out.eval = make(n_eval, 102, "E");
  return out;
}

std::string format_avg_best(std::span<const double> values) {
  if (values.empty()) throw DataError("format_avg_best: no values");
  const double avg = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  const double best = *std::min_element(values.begin(), values.end());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f(%.2f)", avg, best);
  return buf;
}

namespace {

std::vector<double> scaled(const std::vector<double>& v, double k) {
  std::vector<double> out(v);
  for (auto& x : out) x *= k;
  return out;
}

std::string framework_label(FrameworkKind k) {
  std::string s = to_string(k);
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return "Res2Net-" + s;
}

}  // namespace

std::string format_matrix(const MatrixReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-8s %-16s %-16s\n", "model", "feature", "EER(%)", "min t-DCF");
  out += line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-12s %-8s %-16s %-16s\n", framework_label(r.framework).c_str(),
                  to_string(r.pairing).c_str(), format_avg_best(scaled(r.eer, 100.0)).c_str(),
                  format_avg_best(r.min_tdcf).c_str());
    out += line;
  }
  return out;
}

std::string format_matrix_csv(const MatrixReport& report) {
  std::string out = "framework,pairing,seed,eer,min_tdcf\n";
  char line[256];
  for (const auto& r : report.rows) {
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
      std::snprintf(line, sizeof line, "%s,%s,%llu,%.17g,%.17g\n", to_string(r.framework).c_str(),
                    to_string(r.pairing).c_str(), static_cast<unsigned long long>(r.seeds[i]), r.eer[i],
                    r.min_tdcf[i]);
      out += line;
    }
  }
  return out;
}

MatrixReport run_matrix(const std::vector<FrameworkKind>& frameworks, const std::vector<Pairing>& pairings,
                        const std::vector<std::uint64_t>& seeds, const std::function<DataSplits(Pairing)>& data,
                        const TrainConfig& base, const AsvOperatingPoint& op, const MatrixLogger& log) {
  if (seeds.empty()) throw ConfigError("matrix: need at least one seed");
  op.validate();
  MatrixReport report;
  for (Pairing p : pairings) {
    const DataSplits splits = data(p);
    for (FrameworkKind fw : frameworks) {
      MatrixEntry e;
      e.framework = fw;
      e.pairing = p;
      for (std::uint64_t seed : seeds) {
        TrainConfig cfg = base;
        cfg.framework = fw;
        cfg.pairing = p;
        const TrainResult tr = train(splits.train, splits.dev, cfg, seed);
        const ScoreFile scores = evaluate(tr.checkpoint, splits.eval);
        e.seeds.push_back(seed);
        e.eer.push_back(compute_eer(scores).eer);
        e.min_tdcf.push_back(compute_min_tdcf(scores, op).min_tdcf);
        if (log) {
          char buf[200];
          std::snprintf(buf, sizeof buf, "%s %s seed %llu: best dev EER %.4f (epoch %d), eval EER %.4f",
                        framework_label(fw).c_str(), to_string(p).c_str(), static_cast<unsigned long long>(seed),
                        tr.checkpoint.best_dev_eer, tr.checkpoint.epoch_of_best, e.eer.back());
          log(buf);
        }
      }
      report.rows.push_back(std::move(e));
    }
  }
  return report;
}

}  // namespace phasefuse
