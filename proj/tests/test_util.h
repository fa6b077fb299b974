// Copyright 2026 The envadv Authors.
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

// Helpers shared by the test binaries.

#ifndef ENVADV_TESTS_TEST_UTIL_H_
#define ENVADV_TESTS_TEST_UTIL_H_

#include <bit>
#include <cstdint>
#include <random>
#include <utility>

#include "envadv/env.h"

namespace envadv::testing {

inline bool SameBits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

inline EnvConfig Cfg(EnvKind kind, double difficulty, std::uint64_t seed) {
  EnvConfig cfg;
  cfg.kind = kind;
  cfg.difficulty = difficulty;
  cfg.time_limit = DefaultTimeLimit(kind);
  cfg.seed = seed;
  return cfg;
}

// Random reachable state: reset then a few uniformly random actions.
inline EnvState RandomState(EnvKind kind, double difficulty,
                            std::mt19937_64& rng) {
  auto [state, obs] = Reset(Cfg(kind, difficulty, rng()));
  const int steps = std::uniform_int_distribution<int>(0, 40)(rng);
  std::uniform_int_distribution<int> act(0, NumActions(kind) - 1);
  for (int t = 0; t < steps; ++t) {
    auto [next, result] = Step(state, act(rng));
    if (result.done) break;
    state = std::move(next);
  }
  return state;
}

}  // namespace envadv::testing

#endif  // ENVADV_TESTS_TEST_UTIL_H_
