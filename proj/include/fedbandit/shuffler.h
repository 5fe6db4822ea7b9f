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

#ifndef FEDBANDIT_SHUFFLER_H_
#define FEDBANDIT_SHUFFLER_H_

#include <algorithm>
#include <vector>

#include "fedbandit/privacy_accounting.h"
#include "fedbandit/random.h"

namespace fedbandit {

// The third party between randomizers and analyzer. Shuffle-model modes
// apply a uniformly random permutation; the others pass messages through in
// arrival order. The multiset of messages is never altered.
template <typename Message>
std::vector<Message> Shuffler(std::vector<Message> messages, PrivacyMode mode,
                              Rng& rng) {
  if (mode == PrivacyMode::kSdpAmplify || mode == PrivacyMode::kSdpVecSum) {
    std::shuffle(messages.begin(), messages.end(), rng);
  }
  return messages;
}

}  // namespace fedbandit

#endif  // FEDBANDIT_SHUFFLER_H_
