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

#include "disco/vocabulary.h"

#include <algorithm>

namespace disco {

namespace {

std::string standard_symbols() {
  std::string s = "_ '";
  for (char c = 'a'; c <= 'z'; ++c) s += c;
  s += '#';
  return s;
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(standard_symbols()) {}

Vocabulary::Vocabulary(std::string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2) {
    throw VocabularyError("vocabulary needs blank plus at least one symbol");
  }
  std::fill(std::begin(lookup_), std::end(lookup_), -1);
  for (int i = 1; i < size(); ++i) {
    const auto c = static_cast<unsigned char>(symbols_[i]);
    if (lookup_[c] >= 0) {
      throw VocabularyError(std::string("duplicate vocabulary symbol '") +
                            symbols_[i] + "'");
    }
    lookup_[c] = i;
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary v;
  return v;
}

char Vocabulary::symbol(int index) const {
  if (index <= 0 || index >= size()) {
    throw VocabularyError("no symbol for label index " + std::to_string(index));
  }
  return symbols_[index];
}

bool Vocabulary::contains(char c) const {
  return lookup_[static_cast<unsigned char>(c)] >= 0;
}

int Vocabulary::index(char c) const {
  const int i = lookup_[static_cast<unsigned char>(c)];
  if (i < 0) {
    throw VocabularyError(std::string("symbol '") + c +
                          "' is not in the vocabulary");
  }
  return i;
}

LabelSequence Vocabulary::encode(const std::string& text) const {
  LabelSequence out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (contains(text[i])) {
      out.push_back(index(text[i]));
      continue;
    }
    // Name the whole UTF-8 sequence rather than its lead byte.
    std::size_t n = 1;
    while (i + n < text.size() && (static_cast<unsigned char>(text[i + n]) & 0xC0) == 0x80) ++n;
    throw VocabularyError("symbol '" + text.substr(i, n) + "' at offset " + std::to_string(i) +
                          " is not in the vocabulary");
  }
  return out;
}

std::string Vocabulary::decode(const LabelSequence& labels) const {
  std::string out;
  out.reserve(labels.size());
  for (int l : labels) out += symbol(l);
  return out;
}

}  // namespace disco
