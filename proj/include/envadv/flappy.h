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

// Side-scrolling flappy-bird game. The bird flies at a fixed horizontal
// position while evenly spaced pipe pairs scroll towards it. Heights are
// measured in pixels above the ground, y pointing up.
//
// Observation layout (6 features, all in [-1, 1]):
//   0  bird altitude over the screen height
//   1  bird vertical velocity / kMaxFallSpeed
//   2  relative horizontal position of the nearest pipe / kLookAhead
//   3  gap center of the nearest pipe over the screen height
//   4  relative horizontal position of the second pipe / kLookAhead
//   5  gap center of the second pipe over the screen height

#ifndef ENVADV_FLAPPY_H_
#define ENVADV_FLAPPY_H_

#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "envadv/env_types.h"

namespace envadv::flappy {

inline constexpr double kScreenHeight = 512.0;
inline constexpr double kBirdX = 60.0;
inline constexpr double kBirdHalfWidth = 17.0;
inline constexpr double kBirdHalfHeight = 12.0;
inline constexpr double kGravity = 1.0;
inline constexpr double kFlapVelocity = 9.0;
inline constexpr double kMaxFallSpeed = 10.0;
inline constexpr double kPipeWidth = 52.0;
inline constexpr double kPipeSpacing = 160.0;
inline constexpr double kScrollSpeed = 4.0;
inline constexpr double kFirstPipeOffset = 200.0;
inline constexpr double kLookAhead = 300.0;
// Gap centers are drawn from this band for every gap size, so difficulty
// only changes through the gap height.
inline constexpr double kGapCenterMin = 160.0;
inline constexpr double kGapCenterMax = 352.0;
inline constexpr int kNumObstacles = 3;
inline constexpr double kBaseGapSize = 150.0;
inline constexpr double kTargetGapSize = 100.0;
inline constexpr int kDefaultTimeLimit = 1000;

inline constexpr int kNumActions = 2;
inline constexpr int kObservationSize = 6;

enum Action : int { kNoop = 0, kFlap = 1 };

struct Bird {
  double altitude = 0.5 * kScreenHeight;
  double vertical_velocity = 0.0;
  friend bool operator==(const Bird&, const Bird&) = default;
};

struct Obstacle {
  double horizontal_pos = 0.0;  // left edge of the pipe column
  double gap_center = 0.5 * kScreenHeight;
  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

struct FlappyState {
  Bird bird;
  std::vector<Obstacle> obstacles;  // sorted, kPipeSpacing apart
  double gap_size = kBaseGapSize;
  int elapsed_steps = 0;
  bool crashed = false;
  int time_limit = kDefaultTimeLimit;
  std::mt19937_64 rng;
  friend bool operator==(const FlappyState&, const FlappyState&) = default;
};

// Bird box overlaps a pipe or the ground.
bool Collides(const Bird& bird, const std::vector<Obstacle>& obstacles,
              double gap_size);

std::pair<FlappyState, Observation> Reset(const EnvConfig& cfg);
std::pair<FlappyState, StepResult> Step(FlappyState state, int action);
Observation Observe(const FlappyState& state);

FeatureMask DefaultMask();
// DefaultMask minus gaps of pipes the bird has already entered.
FeatureMask RealizableMask(const FlappyState& state);

FlappyState ApplyModifier(const FlappyState& state, const Observation& x_adv,
                          const FeatureMask& mask);
FlappyState ProjectToValid(FlappyState state);

std::optional<std::string> CheckInvariants(const FlappyState& state);

}  // namespace envadv::flappy

#endif  // ENVADV_FLAPPY_H_
