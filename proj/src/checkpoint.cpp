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

#include "phasefuse/checkpoint.hpp"

#include "phasefuse/binary_io.hpp"

namespace phasefuse {

namespace {

constexpr char kMagic[8] = {'P', 'F', 'C', 'K', 'P', 'T', '\0', '\1'};

NamedArray to_array(const std::string& name, const std::vector<Eigen::Index>& shape, const VectorX<float>& v) {
  NamedArray a;
  a.name = name;
  a.shape.assign(shape.begin(), shape.end());
  a.values.assign(v.data(), v.data() + v.size());
  return a;
}

void from_array(const NamedArray& a, const std::string& name, Eigen::Index size, VectorX<float>& dst) {
  if (a.name != name) throw DataError("checkpoint: expected tensor '" + name + "', found '" + a.name + "'");
  if (static_cast<Eigen::Index>(a.values.size()) != size) {
    throw DataError("checkpoint: tensor '" + name + "' has " + std::to_string(a.values.size()) +
                    " values, model expects " + std::to_string(size));
  }
  dst = Eigen::Map<const VectorX<float>>(a.values.data(), size);
}

void write_array(ByteWriter& w, const NamedArray& a) {
  w.str(a.name);
  w.u32(static_cast<std::uint32_t>(a.shape.size()));
  for (auto d : a.shape) w.i64(d);
  for (float v : a.values) w.f32(v);
}

NamedArray read_array(ByteReader& r) {
  NamedArray a;
  a.name = r.str();
  const std::uint32_t nd = r.u32();
  if (nd > 8) throw IoError("checkpoint: bad tensor rank");
  std::int64_t n = 1;
  for (std::uint32_t i = 0; i < nd; ++i) {
    a.shape.push_back(r.i64());
    if (a.shape.back() < 0 || a.shape.back() > (1LL << 32)) throw IoError("checkpoint: bad tensor dims");
    n *= a.shape.back();
  }
  if (static_cast<std::size_t>(n) > r.remaining() / 4) throw IoError("checkpoint: truncated tensor '" + a.name + "'");
  a.values.resize(static_cast<std::size_t>(n));
  for (auto& v : a.values) v = r.f32();
  return a;
}

void write_list(ByteWriter& w, const std::vector<NamedArray>& v) {
  for (const auto& a : v) write_array(w, a);
}

std::vector<NamedArray> read_list(ByteReader& r, std::uint32_t n) {
  std::vector<NamedArray> v;
  for (std::uint32_t i = 0; i < n; ++i) v.push_back(read_array(r));
  return v;
}

}  // namespace

Checkpoint capture_checkpoint(FrameworkModel<float>& model, const nn::AdamState<float>* adam) {
  Checkpoint c;
  c.model = model.config();
  auto coll = model.collect();
  for (const auto& p : coll.params) c.params.push_back(to_array(p.name, p.param->shape, p.param->value));
  for (const auto& b : coll.buffers) c.buffers.push_back(to_array(b.name, {b.value->size()}, *b.value));
  if (adam) {
    c.adam_step = adam->step;
    c.adam = adam->config;
    for (std::size_t i = 0; i < coll.params.size(); ++i) {
      c.adam_m.push_back(to_array(coll.params[i].name, coll.params[i].param->shape, adam->m[i]));
      c.adam_v.push_back(to_array(coll.params[i].name, coll.params[i].param->shape, adam->v[i]));
    }
  }
  return c;
}

void restore_checkpoint(const Checkpoint& ckpt, FrameworkModel<float>& model, nn::AdamState<float>* adam) {
  auto coll = model.collect();
  if (ckpt.params.size() != coll.params.size() || ckpt.buffers.size() != coll.buffers.size()) {
    throw DataError("checkpoint: tensor count does not match the model");
  }
  for (std::size_t i = 0; i < coll.params.size(); ++i) {
    from_array(ckpt.params[i], coll.params[i].name, coll.params[i].param->size(), coll.params[i].param->value);
  }
  for (std::size_t i = 0; i < coll.buffers.size(); ++i) {
    from_array(ckpt.buffers[i], coll.buffers[i].name, coll.buffers[i].value->size(), *coll.buffers[i].value);
  }
  if (adam) {
    *adam = nn::make_adam(coll.params, ckpt.adam);
    adam->step = ckpt.adam_step;
    if (!ckpt.adam_m.empty()) {
      if (ckpt.adam_m.size() != coll.params.size() || ckpt.adam_v.size() != coll.params.size()) {
        throw DataError("checkpoint: optimizer state does not match the model");
      }
      for (std::size_t i = 0; i < coll.params.size(); ++i) {
        from_array(ckpt.adam_m[i], coll.params[i].name, coll.params[i].param->size(), adam->m[i]);
        from_array(ckpt.adam_v[i], coll.params[i].name, coll.params[i].param->size(), adam->v[i]);
      }
    }
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(model_config_to_json(c.model));
  w.f64(c.best_dev_eer);
  w.i64(c.epoch_of_best);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.params.size()));
  write_list(w, c.params);
  w.u32(static_cast<std::uint32_t>(c.buffers.size()));
  write_list(w, c.buffers);
  w.i64(c.adam_step);
  for (double v : {c.adam.lr, c.adam.beta1, c.adam.beta2, c.adam.eps, c.adam.weight_decay}) w.f64(v);
  w.u32(static_cast<std::uint32_t>(c.adam_m.size()));
  write_list(w, c.adam_m);
  write_list(w, c.adam_v);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "checkpoint");
  r.expect_magic(kMagic, sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.model = model_config_from_json(r.str());
  c.best_dev_eer = r.f64();
  c.epoch_of_best = static_cast<int>(r.i64());
  c.seed = r.u64();
  c.params = read_list(r, r.u32());
  c.buffers = read_list(r, r.u32());
  c.adam_step = r.i64();
  c.adam.lr = r.f64();
  c.adam.beta1 = r.f64();
  c.adam.beta2 = r.f64();
  c.adam.eps = r.f64();
  c.adam.weight_decay = r.f64();
  const std::uint32_t n = r.u32();
  c.adam_m = read_list(r, n);
  c.adam_v = read_list(r, n);
  if (r.remaining() != 0) throw IoError("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace phasefuse
