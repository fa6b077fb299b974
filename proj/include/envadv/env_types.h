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

// Shared environment vocabulary: configuration, observations, masks and step
// results. Concrete simulators live in highway.h and flappy.h; env.h wraps
// them behind a single value type.

#ifndef ENVADV_ENV_TYPES_H_
#define ENVADV_ENV_TYPES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "envadv/net.h"

namespace envadv {

enum class EnvKind { kHighway, kFlappy };

std::string EnvKindName(EnvKind kind);
EnvKind ParseEnvKind(const std::string& name);

// Normalized feature vector in [-1, 1]^d. Networks only ever see this.
using Observation = Vector;

// true = feature can be realized by modifying the environment state.
using FeatureMask = std::vector<bool>;

struct EnvConfig {
  EnvKind kind = EnvKind::kFlappy;
  // Traffic density multiplier (highway) or obstacle gap in pixels (flappy).
  double difficulty = 150.0;
  int time_limit = 1000;
  std::uint64_t seed = 0;

  // Throws ConfigError on a non-positive density, a gap outside the screen
  // or a non-positive time limit.
  void Validate() const;
  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

enum class TerminalCause { kNone, kCollision, kTimeLimit };

struct StepInfo {
  double distance_traveled = 0.0;  // highway, meters since reset
  int survived_steps = 0;          // steps taken since reset
  TerminalCause cause = TerminalCause::kNone;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

}  // namespace envadv

#endif  // ENVADV_ENV_TYPES_H_
