// Copyright 2026 The disco-asr Authors.
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

#include "disco/checkpoint.h"

#include <bit>
#include <fstream>

#include "binary_io.h"
#include "disco/random.h"
#include "disco/vocabulary.h"

namespace disco {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[] = "DISCOCKP";
constexpr std::uint8_t kFloat32 = 0;

void put_array(std::ostream& os, const Tensor<float>& t) {
  io::put_uint<std::uint8_t>(os, kFloat32);
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (Index d : t.shape()) io::put_uint<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  for (Index i = 0; i < t.numel(); ++i) io::put_f32(os, t[i]);
}

Tensor<float> get_array(std::istream& is) {
  const auto dtype = io::get_uint<std::uint8_t>(is);
  if (dtype != kFloat32) throw io::FormatError("unsupported dtype tag " + std::to_string(dtype));
  const auto rank = io::get_uint<std::uint32_t>(is);
  if (rank > 8) throw io::FormatError("implausible array rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t n = 1;
  for (auto& d : shape) {
    d = static_cast<Index>(io::get_uint<std::uint64_t>(is));
    n *= static_cast<std::uint64_t>(d);
    if (n > (std::uint64_t{1} << 34)) throw io::FormatError("implausible array size");
  }
  Tensor<float> t(shape);
  for (Index i = 0; i < t.numel(); ++i) t[i] = io::get_f32(is);
  return t;
}

}  // namespace

std::uint64_t Checkpoint::content_digest() const {
  std::uint64_t h = fnv1a("params");
  for (const auto& p : params) {
    h = fnv1a(p.name, h);
    for (Index d : p.value.shape()) h = mix64(h ^ static_cast<std::uint64_t>(d));
    for (Index i = 0; i < p.value.numel(); ++i) {
      h = mix64(h ^ std::bit_cast<std::uint32_t>(p.value[i]));
    }
  }
  return h;
}

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& c, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write to a sibling and rename so readers never see a partial file.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw CheckpointError("cannot write " + tmp.string());
    io::put_magic(os, kMagic, 8);
    io::put_uint<std::uint32_t>(os, kCheckpointVersion);
    io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(c.kind));
    io::put_uint<std::uint64_t>(os, c.config_digest());
    io::put_string(os, c.config.canonical_text());
    io::put_string(os, c.vocabulary);
    io::put_uint<std::uint64_t>(os, static_cast<std::uint64_t>(c.step));
    io::put_uint<std::uint64_t>(os, c.base_digest);
    io::put_string(os, c.meta);
    io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(c.params.size()));
    for (const auto& p : c.params) {
      io::put_string(os, p.name);
      put_array(os, p.value);
    }
    io::put_uint<std::uint8_t>(os, c.has_optimizer ? 1 : 0);
    if (c.has_optimizer) {
      const auto& o = c.optimizer;
      io::put_uint<std::uint64_t>(os, static_cast<std::uint64_t>(o.step));
      io::put_f64(os, o.config.beta1);
      io::put_f64(os, o.config.beta2);
      io::put_f64(os, o.config.eps);
      io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(o.names.size()));
      for (std::size_t i = 0; i < o.names.size(); ++i) {
        io::put_string(os, o.names[i]);
        put_array(os, o.m[i]);
        put_array(os, o.v[i]);
      }
    }
    if (!os) throw CheckpointError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  Checkpoint c;
  try {
    io::expect_magic(is, kMagic, 8, "checkpoint");
    const auto version = io::get_uint<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
      throw io::FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto kind = io::get_uint<std::uint32_t>(is);
    if (kind > 1) throw io::FormatError("unknown checkpoint kind " + std::to_string(kind));
    c.kind = static_cast<CheckpointKind>(kind);
    const auto digest = io::get_uint<std::uint64_t>(is);
    c.config = ModelConfig::parse_canonical(io::get_string(is));
    if (c.config.digest() != digest) throw io::FormatError("config digest does not match config text");
    c.vocabulary = io::get_string(is);
    c.step = static_cast<std::int64_t>(io::get_uint<std::uint64_t>(is));
    c.base_digest = io::get_uint<std::uint64_t>(is);
    c.meta = io::get_string(is);
    const auto n = io::get_uint<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n; ++i) {
      NamedArray a;
      a.name = io::get_string(is, 4096);
      a.value = get_array(is);
      c.params.push_back(std::move(a));
    }
    c.has_optimizer = io::get_uint<std::uint8_t>(is) != 0;
    if (c.has_optimizer) {
      auto& o = c.optimizer;
      o.step = static_cast<std::int64_t>(io::get_uint<std::uint64_t>(is));
      o.config.beta1 = io::get_f64(is);
      o.config.beta2 = io::get_f64(is);
      o.config.eps = io::get_f64(is);
      const auto count = io::get_uint<std::uint32_t>(is);
      for (std::uint32_t i = 0; i < count; ++i) {
        o.names.push_back(io::get_string(is, 4096));
        o.m.push_back(get_array(is));
        o.v.push_back(get_array(is));
      }
    }
    if (is.peek() != std::char_traits<char>::eof()) throw io::FormatError("trailing bytes");
  } catch (const io::FormatError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return c;
}

Checkpoint snapshot(const DisConformer<float>& model, std::int64_t step, std::string meta) {
  Checkpoint c;
  c.config = model.config();
  c.vocabulary = Vocabulary::standard().symbols();
  c.step = step;
  c.meta = std::move(meta);
  for (const auto& p : model.params()) c.params.push_back({p.name, p.value});
  return c;
}

void load_into(DisConformer<float>& model, const Checkpoint& c) {
  if (c.kind != CheckpointKind::kModel) {
    throw CheckpointError("speaker delta checkpoints must be applied over their base model");
  }
  if (c.config_digest() != model.config().digest()) {
    throw CheckpointError("config digest mismatch: checkpoint " + digest_hex(c.config_digest()) +
                          ", model " + digest_hex(model.config().digest()));
  }
  if (c.vocabulary != Vocabulary::standard().symbols()) {
    throw CheckpointError("vocabulary mismatch");
  }
  auto& store = model.params();
  if (static_cast<int>(c.params.size()) != store.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(c.params.size()) +
                          " arrays, model has " + std::to_string(store.size()));
  }
  for (const auto& a : c.params) {
    const auto id = store.find(a.name);
    if (!id) throw CheckpointError("unknown parameter " + a.name);
    if (store[*id].value.shape() != a.value.shape()) {
      throw CheckpointError("shape mismatch for " + a.name);
    }
  }
  for (const auto& a : c.params) store[store.id(a.name)].value = a.value;
}

DisConformer<float> model_from(const Checkpoint& c) {
  DisConformer<float> model(c.config);
  load_into(model, c);
  return model;
}

}  // namespace disco
