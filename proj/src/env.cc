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

#include "envadv/env.h"

#include <cmath>
#include <ostream>

#include "envadv/errors.h"

namespace envadv {

std::string EnvKindName(EnvKind kind) {
  return kind == EnvKind::kHighway ? "highway" : "flappy";
}

EnvKind ParseEnvKind(const std::string& name) {
  if (name == "highway") return EnvKind::kHighway;
  if (name == "flappy") return EnvKind::kFlappy;
  throw ConfigError("unknown environment '" + name + "'");
}

void EnvConfig::Validate() const {
  if (!std::isfinite(difficulty)) throw ConfigError("difficulty must be finite");
  if (kind == EnvKind::kHighway && difficulty <= 0.0) {
    throw ConfigError("traffic density must be positive");
  }
  if (kind == EnvKind::kFlappy &&
      !(difficulty > 0.0 && difficulty < flappy::kScreenHeight)) {
    throw ConfigError("gap size must lie strictly inside the screen height");
  }
  if (time_limit <= 0) throw ConfigError("time limit must be positive");
}

EnvKind KindOf(const EnvState& state) {
  return std::holds_alternative<highway::HighwayState>(state) ? EnvKind::kHighway
                                                              : EnvKind::kFlappy;
}

int NumActions(EnvKind kind) {
  return kind == EnvKind::kHighway ? highway::kNumActions : flappy::kNumActions;
}

int ObservationSize(EnvKind kind) {
  return kind == EnvKind::kHighway ? highway::kObservationSize
                                   : flappy::kObservationSize;
}

int DefaultTimeLimit(EnvKind kind) {
  return kind == EnvKind::kHighway ? highway::kDefaultTimeLimit
                                   : flappy::kDefaultTimeLimit;
}

double BaseDifficulty(EnvKind kind) {
  return kind == EnvKind::kHighway ? 1.0 : flappy::kBaseGapSize;
}

double TargetDifficulty(EnvKind kind) {
  return kind == EnvKind::kHighway ? 2.0 : flappy::kTargetGapSize;
}

std::pair<EnvState, Observation> Reset(const EnvConfig& cfg) {
  if (cfg.kind == EnvKind::kHighway) {
    auto [s, x] = highway::Reset(cfg);
    return {EnvState(std::move(s)), std::move(x)};
  }
  auto [s, x] = flappy::Reset(cfg);
  return {EnvState(std::move(s)), std::move(x)};
}

std::pair<EnvState, StepResult> Step(const EnvState& state, int action) {
  return std::visit(
      [action](const auto& s) -> std::pair<EnvState, StepResult> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, highway::HighwayState>) {
          auto [next, r] = highway::Step(s, action);
          return {EnvState(std::move(next)), std::move(r)};
        } else {
          auto [next, r] = flappy::Step(s, action);
          return {EnvState(std::move(next)), std::move(r)};
        }
      },
      state);
}

Observation Observe(const EnvState& state) {
  return std::visit(
      [](const auto& s) -> Observation {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, highway::HighwayState>) {
          return highway::Observe(s);
        } else {
          return flappy::Observe(s);
        }
      },
      state);
}

FeatureMask DefaultMask(EnvKind kind) {
  return kind == EnvKind::kHighway ? highway::DefaultMask() : flappy::DefaultMask();
}

FeatureMask RealizableMask(const EnvState& state) {
  if (const auto* h = std::get_if<highway::HighwayState>(&state)) {
    return highway::RealizableMask(*h);
  }
  return flappy::RealizableMask(std::get<flappy::FlappyState>(state));
}

EnvState ApplyModifier(const EnvState& state, const Observation& x_adv,
                       const FeatureMask& mask) {
  if (const auto* h = std::get_if<highway::HighwayState>(&state)) {
    return highway::ApplyModifier(*h, x_adv, mask);
  }
  return flappy::ApplyModifier(std::get<flappy::FlappyState>(state), x_adv, mask);
}

EnvState ProjectToValid(const EnvState& state) {
  if (const auto* h = std::get_if<highway::HighwayState>(&state)) {
    return highway::ProjectToValid(*h);
  }
  return flappy::ProjectToValid(std::get<flappy::FlappyState>(state));
}

std::optional<std::string> CheckInvariants(const EnvState& state) {
  if (const auto* h = std::get_if<highway::HighwayState>(&state)) {
    return highway::CheckInvariants(*h);
  }
  return flappy::CheckInvariants(std::get<flappy::FlappyState>(state));
}

double EpisodeMetric(EnvKind kind, const StepInfo& info) {
  return kind == EnvKind::kHighway ? info.distance_traveled
                                   : static_cast<double>(info.survived_steps);
}

std::string EpisodeMetricName(EnvKind kind) {
  return kind == EnvKind::kHighway ? "distance" : "survived_steps";
}

TraceWriter::TraceWriter(std::ostream& out) : out_(out) {
  out_ << "step,action,reward,done,distance\n";
}

void TraceWriter::Row(int step, int action, const StepResult& result) {
  out_ << step << ',' << action << ',' << result.reward << ','
       << (result.done ? 1 : 0) << ',' << result.info.distance_traveled << '\n';
}

}  // namespace envadv
