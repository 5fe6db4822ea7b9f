// Copyright 2026 The FedBandit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDBANDIT_RANDOM_H_
#define FEDBANDIT_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fedbandit {

using Rng = std::mt19937_64;

// Tags that separate independent random streams derived from one run seed.
enum class StreamPurpose : uint32_t {
  kContexts = 1,
  kRewards = 2,
  kPrivacyNoise = 3,
  kShuffler = 4,
  kInstance = 5,
};

// Builds an engine whose state is a deterministic function of the run seed,
// the stream purpose and any number of integer coordinates (silo, round, ...).
// Distinct inputs give statistically independent streams.
inline Rng MakeStream(uint64_t seed, StreamPurpose purpose,
                      std::initializer_list<uint64_t> coordinates = {}) {
  std::vector<uint32_t> words;
  words.reserve(3 + 2 * coordinates.size());
  words.push_back(static_cast<uint32_t>(seed));
  words.push_back(static_cast<uint32_t>(seed >> 32));
  words.push_back(static_cast<uint32_t>(purpose));
  for (uint64_t c : coordinates) {
    words.push_back(static_cast<uint32_t>(c));
    words.push_back(static_cast<uint32_t>(c >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace fedbandit

#endif  // FEDBANDIT_RANDOM_H_
