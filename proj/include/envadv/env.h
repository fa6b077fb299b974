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

// Environment-agnostic facade over the highway and flappy simulators. States
// are plain values; every operation returns a new state.

#ifndef ENVADV_ENV_H_
#define ENVADV_ENV_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "envadv/env_types.h"
#include "envadv/flappy.h"
#include "envadv/highway.h"

namespace envadv {

using EnvState = std::variant<highway::HighwayState, flappy::FlappyState>;

EnvKind KindOf(const EnvState& state);
int NumActions(EnvKind kind);
int ObservationSize(EnvKind kind);
int DefaultTimeLimit(EnvKind kind);
// Density 1.0 / gap 150 and density 2.0 / gap 100.
double BaseDifficulty(EnvKind kind);
double TargetDifficulty(EnvKind kind);

std::pair<EnvState, Observation> Reset(const EnvConfig& cfg);
std::pair<EnvState, StepResult> Step(const EnvState& state, int action);
Observation Observe(const EnvState& state);

FeatureMask DefaultMask(EnvKind kind);
// Subset of DefaultMask that the modifier can realize in this state.
FeatureMask RealizableMask(const EnvState& state);

EnvState ApplyModifier(const EnvState& state, const Observation& x_adv,
                       const FeatureMask& mask);
EnvState ProjectToValid(const EnvState& state);
std::optional<std::string> CheckInvariants(const EnvState& state);

// Distance in meters (highway) or survived steps (flappy).
double EpisodeMetric(EnvKind kind, const StepInfo& info);
std::string EpisodeMetricName(EnvKind kind);

// Per-step debug trace: step,action,reward,done,distance.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out);
  void Row(int step, int action, const StepResult& result);

 private:
  std::ostream& out_;
};

}  // namespace envadv

#endif  // ENVADV_ENV_H_
