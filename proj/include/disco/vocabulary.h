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

#include <stdexcept>
#include <string>
#include <vector>

namespace disco {

/// Label indices excluding blank.
using LabelSequence = std::vector<int>;

class VocabularyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Character vocabulary. Index 0 is the CTC blank; the remaining entries map
/// one-to-one onto characters. The standard table is
///   0 blank, 1 ' ', 2 '\'', 3..28 'a'..'z', 29 '#' (reserved, never emitted
///   by the corpus generator).
class Vocabulary {
 public:
  static constexpr int kBlank = 0;

  Vocabulary();
  /// `symbols[i]` is the character of index i; symbols[0] is a placeholder
  /// for blank.
  explicit Vocabulary(std::string symbols);

  static const Vocabulary& standard();

  int size() const { return static_cast<int>(symbols_.size()); }
  int blank() const { return kBlank; }
  char symbol(int index) const;
  int index(char c) const;
  bool contains(char c) const;

  /// Throws VocabularyError naming the first character outside the table.
  LabelSequence encode(const std::string& text) const;
  std::string decode(const LabelSequence& labels) const;

  /// Serialized form stored in checkpoints.
  const std::string& symbols() const { return symbols_; }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::string symbols_;
  int lookup_[256];
};

}  // namespace disco
