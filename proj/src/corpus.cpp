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

#include "disco/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.h"
#include "disco/model_config.h"
#include "disco/random.h"

namespace disco {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- Corpus ---

std::vector<std::string> Corpus::target_speakers() const {
  std::set<std::string> out;
  for (const auto& u : utterances) {
    if (split_rank(u.split) >= 0 || u.split == kValid || u.split == kTest) {
      out.insert(u.speaker);
    }
  }
  return {out.begin(), out.end()};
}

int Corpus::split_rank(const std::string& split) const {
  auto it = std::find(train_splits.begin(), train_splits.end(), split);
  return it == train_splits.end() ? -1 : static_cast<int>(it - train_splits.begin());
}

std::vector<const Utterance*> Corpus::speaker_train(const std::string& speaker,
                                                    const std::string& split) const {
  const int rank = split_rank(split);
  if (rank < 0) throw std::invalid_argument("unknown train split '" + split + "'");
  std::vector<const Utterance*> out;
  for (const auto& u : utterances) {
    if (u.speaker != speaker) continue;
    const int r = split_rank(u.split);
    if (r >= 0 && r <= rank) out.push_back(&u);
  }
  return out;
}

std::vector<const Utterance*> Corpus::with_tag(const std::string& tag,
                                               const std::string& speaker) const {
  std::vector<const Utterance*> out;
  for (const auto& u : utterances) {
    if (u.split == tag && (speaker.empty() || u.speaker == speaker)) out.push_back(&u);
  }
  return out;
}

SpeakerCorpus Corpus::speaker_corpus(const std::string& speaker) const {
  SpeakerCorpus sc;
  sc.speaker = speaker;
  auto ids = [](const std::vector<const Utterance*>& us) {
    std::vector<std::string> out;
    for (const auto* u : us) out.push_back(u->id);
    return out;
  };
  for (const auto& split : train_splits) sc.train.push_back(ids(speaker_train(speaker, split)));
  sc.valid = ids(with_tag(kValid, speaker));
  sc.test = ids(with_tag(kTest, speaker));
  return sc;
}

// --------------------------------------------------------- feature files ---

void write_features(const fs::path& path, const Tensor<float>& x) {
  if (x.rank() != 2) throw std::invalid_argument("features must be 2-D");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  io::put_magic(os, "DFEA", 4);
  io::put_uint<std::uint32_t>(os, kFeatureFileVersion);
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(x.dim(0)));
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(x.dim(1)));
  for (Index i = 0; i < x.numel(); ++i) io::put_f32(os, x[i]);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Tensor<float> read_features(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open feature file " + path.string());
  try {
    io::expect_magic(is, "DFEA", 4, "feature");
    const auto version = io::get_uint<std::uint32_t>(is);
    if (version != kFeatureFileVersion) {
      throw io::FormatError("unsupported feature file version " + std::to_string(version));
    }
    const Index rows = io::get_uint<std::uint32_t>(is);
    const Index cols = io::get_uint<std::uint32_t>(is);
    Tensor<float> x(Shape{rows, cols});
    for (Index i = 0; i < x.numel(); ++i) x[i] = io::get_f32(is);
    return x;
  } catch (const io::FormatError& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }
}

// -------------------------------------------------------------- manifest ---

namespace {

const std::vector<std::string> kKnownFields{"id",         "speaker", "split",   "transcript",
                                            "frames",     "features", "feature_data"};

json record_json(const Utterance& u) {
  json j;
  j["id"] = u.id;
  j["speaker"] = u.speaker;
  j["split"] = u.split;
  j["transcript"] = u.transcript;
  j["frames"] = u.frames;
  if (!u.feature_path.empty()) {
    j["features"] = u.feature_path;
  } else if (!u.features.empty()) {
    json rows = json::array();
    for (Index t = 0; t < u.features.dim(0); ++t) {
      json row = json::array();
      for (Index f = 0; f < u.features.dim(1); ++f) row.push_back(u.features.at(t, f));
      rows.push_back(std::move(row));
    }
    j["feature_data"] = std::move(rows);
  }
  for (const auto& [key, value] : u.extra) j[key] = json::parse(value);
  return j;
}

Tensor<float> inline_features(const json& rows) {
  if (!rows.is_array()) throw ManifestError("feature_data must be an array of rows");
  const Index t = static_cast<Index>(rows.size());
  const Index f = t == 0 ? 0 : static_cast<Index>(rows[0].size());
  Tensor<float> x(Shape{t, f});
  for (Index i = 0; i < t; ++i) {
    if (!rows[i].is_array() || static_cast<Index>(rows[i].size()) != f) {
      throw ManifestError("feature_data rows must have equal length");
    }
    for (Index k = 0; k < f; ++k) x.at(i, k) = rows[i][k].get<float>();
  }
  return x;
}

template <typename V>
V required(const json& j, const char* key) {
  if (!j.contains(key)) throw ManifestError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ManifestError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

void write_manifest(const std::vector<Utterance>& utterances, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& u : utterances) os << record_json(u).dump() << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Utterance> read_manifest(const fs::path& path, bool load_features,
                                     const Vocabulary& vocab) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open manifest " + path.string());
  std::vector<Utterance> out;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ManifestError(std::string("malformed record: ") + e.what());
      }
      if (!j.is_object()) throw ManifestError("record is not an object");
      Utterance u;
      u.id = required<std::string>(j, "id");
      u.speaker = required<std::string>(j, "speaker");
      u.split = required<std::string>(j, "split");
      u.transcript = required<std::string>(j, "transcript");
      u.frames = required<Index>(j, "frames");
      if (u.frames < 0) throw ManifestError("negative frame count");
      if (!seen.insert(u.id).second) throw ManifestError("duplicate utterance id '" + u.id + "'");
      try {
        vocab.encode(u.transcript);
      } catch (const VocabularyError& e) {
        throw ManifestError(std::string("transcript: ") + e.what());
      }
      if (j.contains("features")) {
        u.feature_path = required<std::string>(j, "features");
        if (load_features) u.features = read_features(path.parent_path() / u.feature_path);
      } else if (j.contains("feature_data")) {
        u.features = inline_features(j["feature_data"]);
      }
      if (!u.features.empty() && u.features.dim(0) != u.frames) {
        throw ManifestError("frame count " + std::to_string(u.frames) + " does not match " +
                            std::to_string(u.features.dim(0)) + " feature rows");
      }
      for (const auto& [key, value] : j.items()) {
        if (std::find(kKnownFields.begin(), kKnownFields.end(), key) == kKnownFields.end()) {
          u.extra.emplace_back(key, value.dump());
        }
      }
      out.push_back(std::move(u));
    } catch (const ManifestError& e) {
      throw ManifestError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& u : corpus.utterances) {
    if (!u.feature_path.empty() && !u.features.empty()) {
      write_features(dir / u.feature_path, u.features);
    }
  }
  write_manifest(corpus.utterances, dir / "manifest.jsonl");
  json meta;
  meta["format_version"] = kManifestVersion;
  meta["train_splits"] = corpus.train_splits;
  meta["config_digest"] = digest_hex(corpus.config_digest);
  meta["provenance"] = json::parse(corpus.provenance);
  std::ofstream os(dir / "corpus.json", std::ios::binary);
  os << meta.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + (dir / "corpus.json").string());
}

Corpus load_corpus(const fs::path& dir, bool load_features) {
  Corpus c;
  std::ifstream is(dir / "corpus.json");
  if (!is) throw std::runtime_error("cannot open " + (dir / "corpus.json").string());
  json meta;
  try {
    meta = json::parse(is);
    if (meta.at("format_version").get<int>() != kManifestVersion) {
      throw ManifestError("unsupported corpus format version");
    }
    c.train_splits = meta.at("train_splits").get<std::vector<std::string>>();
    c.config_digest = std::stoull(meta.at("config_digest").get<std::string>(), nullptr, 16);
    if (meta.contains("provenance")) c.provenance = meta["provenance"].dump();
  } catch (const json::exception& e) {
    throw ManifestError((dir / "corpus.json").string() + ": " + e.what());
  }
  c.utterances = read_manifest(dir / "manifest.jsonl", load_features);
  return c;
}

// ------------------------------------------------------------- generator ---

const std::vector<std::string>& word_list() {
  static const std::vector<std::string> words{
      "the",  "a",    "of",   "and",  "to",   "in",   "he",   "she",  "it's", "was",
      "for",  "on",   "with", "his",  "her",  "they", "we",   "you",  "not",  "but",
      "all",  "from", "had",  "one",  "out",  "up",   "day",  "old",  "king", "room",
      "quiet", "jump", "box",  "zeal", "very", "good", "made", "light", "over", "water"};
  return words;
}

void GeneratorConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("datagen.") + name + " must be >= 1");
  };
  positive(feature_dim, "feature_dim");
  positive(original_speakers, "original_speakers");
  positive(original_train_per_speaker, "original_train_per_speaker");
  positive(original_dev_per_speaker, "original_dev_per_speaker");
  positive(original_test_per_speaker, "original_test_per_speaker");
  positive(target_speakers, "target_speakers");
  positive(valid_per_speaker, "valid_per_speaker");
  positive(test_per_speaker, "test_per_speaker");
  positive(min_words, "min_words");
  positive(frames_per_symbol, "frames_per_symbol");
  if (max_words < min_words) throw std::invalid_argument("datagen.max_words < min_words");
  if (duration_jitter < 0) throw std::invalid_argument("datagen.duration_jitter must be >= 0");
  if (noise < 0 || shift_strength < 0 || max_duration_stretch < 0) {
    throw std::invalid_argument("datagen noise/shift/stretch must be >= 0");
  }
  if (train_splits.empty()) throw std::invalid_argument("datagen needs at least one train split");
  int prev = 0;
  std::set<std::string> names;
  for (const auto& s : train_splits) {
    if (s.utterances <= prev) {
      throw std::invalid_argument("train split '" + s.name +
                                  "' must hold more utterances than the previous split");
    }
    if (s.name.empty() || s.name == kValid || s.name == kTest ||
        s.name.rfind("orig-", 0) == 0 || !names.insert(s.name).second) {
      throw std::invalid_argument("invalid train split name '" + s.name + "'");
    }
    prev = s.utterances;
  }
}

std::string GeneratorConfig::canonical_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "feature_dim=" << feature_dim << '\n'
     << "original_speakers=" << original_speakers << '\n'
     << "original_train_per_speaker=" << original_train_per_speaker << '\n'
     << "original_dev_per_speaker=" << original_dev_per_speaker << '\n'
     << "original_test_per_speaker=" << original_test_per_speaker << '\n'
     << "target_speakers=" << target_speakers << '\n';
  for (const auto& s : train_splits) os << "train_split=" << s.name << ':' << s.utterances << '\n';
  os << "valid_per_speaker=" << valid_per_speaker << '\n'
     << "test_per_speaker=" << test_per_speaker << '\n'
     << "min_words=" << min_words << '\n'
     << "max_words=" << max_words << '\n'
     << "frames_per_symbol=" << frames_per_symbol << '\n'
     << "duration_jitter=" << duration_jitter << '\n'
     << "noise=" << noise << '\n'
     << "shift_strength=" << shift_strength << '\n'
     << "max_duration_stretch=" << max_duration_stretch << '\n';
  return os.str();
}

std::uint64_t GeneratorConfig::digest() const { return fnv1a(canonical_text()); }

namespace {

struct SpeakerShift {
  std::vector<double> a;  // F x F, row-major
  std::vector<double> b;
  double stretch = 1.0;
};

SpeakerShift identity_shift(int f) {
  SpeakerShift s;
  s.a.assign(static_cast<std::size_t>(f) * f, 0.0);
  for (int i = 0; i < f; ++i) s.a[i * f + i] = 1.0;
  s.b.assign(f, 0.0);
  return s;
}

// A = I + s R / sqrt(F), b = s n, stretch = 1 + s u max_stretch.
SpeakerShift target_shift(const GeneratorConfig& c, std::uint64_t seed, int speaker) {
  const int f = c.feature_dim;
  SpeakerShift s = identity_shift(f);
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(speaker)}, "speaker-shift"));
  const double scale = c.shift_strength / std::sqrt(static_cast<double>(f));
  for (auto& v : s.a) v += scale * rng.normal();
  for (auto& v : s.b) v = c.shift_strength * rng.normal();
  s.stretch = 1.0 + c.shift_strength * c.max_duration_stretch * rng.uniform();
  return s;
}

class Renderer {
 public:
  Renderer(const GeneratorConfig& c, std::uint64_t seed) : config_(c) {
    const Vocabulary& v = Vocabulary::standard();
    Rng rng(derive_seed(seed, {}, "prototypes"));
    prototypes_.assign(v.size(), std::vector<double>(c.feature_dim, 0.0));
    for (int s = 1; s < v.size(); ++s) {
      for (auto& x : prototypes_[s]) x = rng.normal();
    }
  }

  Utterance render(std::uint64_t utt_seed, const SpeakerShift& shift) const {
    Rng rng(utt_seed);
    const auto& words = word_list();
    const int n = config_.min_words +
                  static_cast<int>(rng.uniform_int(config_.max_words - config_.min_words + 1));
    Utterance u;
    for (int w = 0; w < n; ++w) {
      if (w > 0) u.transcript += ' ';
      u.transcript += words[rng.uniform_int(words.size())];
    }
    const Vocabulary& v = Vocabulary::standard();
    const int f = config_.feature_dim;
    std::vector<float> data;
    std::vector<double> clean(f);
    for (char ch : u.transcript) {
      const auto& proto = prototypes_[v.index(ch)];
      const int base = config_.frames_per_symbol +
                       static_cast<int>(rng.uniform_int(config_.duration_jitter + 1));
      const int dur = std::max(1, static_cast<int>(std::lround(base * shift.stretch)));
      for (int t = 0; t < dur; ++t) {
        for (int i = 0; i < f; ++i) clean[i] = proto[i] + config_.noise * rng.normal();
        for (int i = 0; i < f; ++i) {
          double acc = shift.b[i];
          for (int k = 0; k < f; ++k) acc += shift.a[i * f + k] * clean[k];
          data.push_back(static_cast<float>(acc));
        }
      }
    }
    u.frames = static_cast<Index>(data.size()) / f;
    u.features = Tensor<float>(Shape{u.frames, f}, std::move(data));
    return u;
  }

 private:
  const GeneratorConfig& config_;
  std::vector<std::vector<double>> prototypes_;
};

std::string two_digit(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", i);
  return buf;
}

std::string four_digit(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

}  // namespace

Corpus generate_corpus(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  Corpus corpus;
  corpus.config_digest = config.digest();
  for (const auto& s : config.train_splits) corpus.train_splits.push_back(s.name);
  const Renderer renderer(config, seed);

  auto emit = [&](Utterance u, const std::string& speaker, int index, const std::string& split) {
    u.speaker = speaker;
    u.id = speaker + "-" + four_digit(index);
    u.split = split;
    u.feature_path = "feats/" + u.id + ".f32";
    corpus.utterances.push_back(std::move(u));
  };

  const SpeakerShift identity = identity_shift(config.feature_dim);
  for (int s = 0; s < config.original_speakers; ++s) {
    const std::string speaker = "orig-" + two_digit(s);
    int index = 0;
    auto run = [&](int count, const char* split) {
      for (int i = 0; i < count; ++i, ++index) {
        const auto us = derive_seed(seed, {0, static_cast<std::uint64_t>(s),
                                           static_cast<std::uint64_t>(index)}, "utterance");
        emit(renderer.render(us, identity), speaker, index, split);
      }
    };
    run(config.original_train_per_speaker, kOrigTrain);
    run(config.original_dev_per_speaker, kOrigDev);
    run(config.original_test_per_speaker, kOrigTest);
  }

  for (int s = 0; s < config.target_speakers; ++s) {
    const std::string speaker = "spk-" + two_digit(s);
    const SpeakerShift shift = target_shift(config, seed, s);
    int index = 0;
    auto one = [&](const std::string& split) {
      const auto us = derive_seed(seed, {1, static_cast<std::uint64_t>(s),
                                         static_cast<std::uint64_t>(index)}, "utterance");
      emit(renderer.render(us, shift), speaker, index, split);
      ++index;
    };
    int prev = 0;
    for (const auto& split : config.train_splits) {
      for (int i = prev; i < split.utterances; ++i) one(split.name);
      prev = split.utterances;
    }
    for (int i = 0; i < config.valid_per_speaker; ++i) one(kValid);
    for (int i = 0; i < config.test_per_speaker; ++i) one(kTest);
  }
  return corpus;
}

// ----------------------------------------------------------------- stats ---

SampleStats summarize(const std::vector<double>& values) {
  SampleStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::vector<SplitStats> corpus_stats(const Corpus& corpus) {
  const auto speakers = corpus.target_speakers();
  std::vector<SplitStats> out;
  auto add = [&](const std::string& name, auto select) {
    std::vector<double> hours, counts;
    for (const auto& spk : speakers) {
      const std::vector<const Utterance*> us = select(spk);
      double h = 0.0;
      for (const auto* u : us) h += u->hours();
      hours.push_back(h);
      counts.push_back(static_cast<double>(us.size()));
    }
    out.push_back({name, static_cast<int>(speakers.size()), summarize(hours), summarize(counts)});
  };
  for (const auto& split : corpus.train_splits) {
    add(split, [&](const std::string& spk) { return corpus.speaker_train(spk, split); });
  }
  add(kValid, [&](const std::string& spk) { return corpus.with_tag(kValid, spk); });
  add(kTest, [&](const std::string& spk) { return corpus.with_tag(kTest, spk); });
  return out;
}

}  // namespace disco
