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

#pragma once

// Utterance records, the on-disk manifest/feature formats and the synthetic
// multi-speaker corpus generator.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "disco/tensor.h"
#include "disco/vocabulary.h"

namespace disco {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kOrigTrain[] = "orig-train";
inline constexpr char kOrigDev[] = "orig-dev";
inline constexpr char kOrigTest[] = "orig-test";
inline constexpr char kValid[] = "valid";
inline constexpr char kTest[] = "test";
inline constexpr double kFrameShiftSeconds = 0.01;
inline constexpr int kManifestVersion = 1;
inline constexpr int kFeatureFileVersion = 1;

struct Utterance {
  std::string id;
  std::string speaker;
  /// For target speakers: the smallest train split containing the utterance,
  /// or valid/test. For the original domain: orig-train/dev/test.
  std::string split;
  std::string transcript;
  Index frames = 0;
  /// Path of the feature file relative to the manifest directory. Empty when
  /// the features are stored inline in the manifest.
  std::string feature_path;
  /// [frames x feature_dim]; empty until materialized.
  Tensor<float> features;
  /// Unrecognized manifest fields, in file order, as serialized JSON values.
  std::vector<std::pair<std::string, std::string>> extra;

  double hours() const { return frames * kFrameShiftSeconds / 3600.0; }
};

/// A target speaker's view of the corpus, as utterance ids.
struct SpeakerCorpus {
  std::string speaker;
  /// train[i] is the i-th nested split, smallest first.
  std::vector<std::vector<std::string>> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;
};

struct Corpus {
  /// Nested train split names, smallest first.
  std::vector<std::string> train_splits;
  std::vector<Utterance> utterances;
  /// Digest of the generator settings (0 for hand-built corpora).
  std::uint64_t config_digest = 0;
  /// JSON object recorded in corpus.json (e.g. the run config digest).
  std::string provenance = "{}";

  /// Sorted ids of speakers that own train/valid/test utterances.
  std::vector<std::string> target_speakers() const;
  /// Utterances of `speaker` in nested split `split` (all tags up to it).
  std::vector<const Utterance*> speaker_train(const std::string& speaker,
                                              const std::string& split) const;
  /// Utterances with this exact split tag, optionally for one speaker.
  std::vector<const Utterance*> with_tag(const std::string& tag,
                                         const std::string& speaker = {}) const;
  SpeakerCorpus speaker_corpus(const std::string& speaker) const;
  int split_rank(const std::string& split) const;
};

// Feature file: "DFEA", u32 version, u32 rows, u32 cols, rows*cols float32,
// all little-endian.
void write_features(const std::filesystem::path& path, const Tensor<float>& x);
Tensor<float> read_features(const std::filesystem::path& path);

/// One JSON object per line: id, speaker, split, transcript, frames, then
/// either "features" (relative path) or "feature_data" (nested array), then
/// unknown fields. Feature files are not written here.
void write_manifest(const std::vector<Utterance>& utterances,
                    const std::filesystem::path& path);

/// Parses and validates a manifest. With `load_features`, feature files are
/// read relative to the manifest directory and checked against `frames`.
std::vector<Utterance> read_manifest(const std::filesystem::path& path,
                                     bool load_features = true,
                                     const Vocabulary& vocab = Vocabulary::standard());

/// Writes dir/manifest.jsonl, dir/corpus.json and every feature file.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir, bool load_features = true);

struct TrainSplitSpec {
  std::string name;
  /// Cumulative utterances per speaker.
  int utterances = 0;
};

struct GeneratorConfig {
  int feature_dim = 16;
  int original_speakers = 8;
  int original_train_per_speaker = 40;
  int original_dev_per_speaker = 4;
  int original_test_per_speaker = 6;
  int target_speakers = 4;
  std::vector<TrainSplitSpec> train_splits{
      {"train-10min", 4}, {"train-1hr", 12}, {"train-10hr", 40}};
  int valid_per_speaker = 6;
  int test_per_speaker = 10;
  int min_words = 2;
  int max_words = 3;
  int frames_per_symbol = 4;
  /// Extra frames drawn uniformly from [0, duration_jitter] per symbol.
  int duration_jitter = 1;
  double noise = 0.35;
  /// Scale of the per-speaker affine transform and duration stretch.
  double shift_strength = 1.0;
  /// Largest per-speaker duration stretch at shift_strength 1.
  double max_duration_stretch = 0.5;

  void validate() const;
  std::string canonical_text() const;
  std::uint64_t digest() const;
};

/// Deterministic in (config, seed). Features are materialized and assigned
/// feature paths under "feats/".
Corpus generate_corpus(const GeneratorConfig& config, std::uint64_t seed);

/// Built-in word list used for transcripts.
const std::vector<std::string>& word_list();

struct SampleStats {
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for a single value.
  double std = 0.0;
};

SampleStats summarize(const std::vector<double>& values);

struct SplitStats {
  std::string split;
  int speakers = 0;
  SampleStats hours;
  SampleStats utterances;
};

/// Per target-speaker split statistics (train splits counted cumulatively).
std::vector<SplitStats> corpus_stats(const Corpus& corpus);

}  // namespace disco
