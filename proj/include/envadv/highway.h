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

// Four-lane one-way highway. The ego vehicle picks one of five meta-actions
// per one-second step; exo vehicles hold a cruise speed and brake to match
// the vehicle ahead when the gap drops below kSafeGap.
//
// Observation layout (14 features, all in [-1, 1]):
//   0  ego lateral offset across the road width
//   1  ego velocity over [kMinSpeed, kMaxSpeed]
//   2 + 2*slot      neighbor relative longitudinal position / kSensingRange
//   2 + 2*slot + 1  neighbor relative velocity / kRelSpeedScale
// with slots ordered same-lane front, same-lane back, left front, left back,
// right front, right back ("left" is the lower lane index). A missing
// neighbor reads (+1, 0) for front slots and (-1, 0) for back slots.

#ifndef ENVADV_HIGHWAY_H_
#define ENVADV_HIGHWAY_H_

#include <array>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "envadv/env_types.h"

namespace envadv::highway {

inline constexpr int kNumLanes = 4;
inline constexpr double kLaneWidth = 4.0;
inline constexpr double kRoadWidth = kNumLanes * kLaneWidth;
inline constexpr double kVehicleLength = 5.0;  // same-lane |dx| below this is a crash
inline constexpr double kMinGap = 10.0;        // between exo vehicles
inline constexpr double kSafeGap = 25.0;       // exo braking distance
inline constexpr double kMinSpeed = 10.0;
inline constexpr double kMaxSpeed = 40.0;
inline constexpr double kSpeedStep = 5.0;
inline constexpr double kEgoStartSpeed = 25.0;
inline constexpr double kCruiseMin = 20.0;
inline constexpr double kCruiseMax = 30.0;
inline constexpr double kSensingRange = 100.0;
inline constexpr double kRelSpeedScale = kMaxSpeed - kMinSpeed;
inline constexpr double kStepSeconds = 1.0;
inline constexpr int kSubsteps = 10;
// Vehicles at density 1.0, spawned in [ego + kSpawnBehind, ego + kSpawnAhead].
inline constexpr int kBaseVehicleCount = 10;
inline constexpr double kSpawnBehind = -100.0;
inline constexpr double kSpawnAhead = 300.0;
// Vehicles leaving [ego + kRecycleBehind, ego + kRecycleAhead] re-enter at
// the opposite end of the window.
inline constexpr double kRecycleBehind = -150.0;
inline constexpr double kRecycleAhead = 350.0;
inline constexpr int kDefaultTimeLimit = 600;

inline constexpr int kNumActions = 5;
inline constexpr int kObservationSize = 14;
inline constexpr int kNumNeighborSlots = 6;

enum Action : int {
  kLaneLeft = 0,
  kIdle = 1,
  kLaneRight = 2,
  kFaster = 3,
  kSlower = 4,
};

struct EgoVehicle {
  double lane_offset = 0.0;  // meters from the left road edge
  int lane_index = 0;
  double longitudinal_pos = 0.0;
  double velocity = kEgoStartSpeed;
  friend bool operator==(const EgoVehicle&, const EgoVehicle&) = default;
};

struct ExoVehicle {
  int lane_index = 0;
  double longitudinal_pos = 0.0;
  double velocity = 0.0;
  double cruise_velocity = 0.0;
  friend bool operator==(const ExoVehicle&, const ExoVehicle&) = default;
};

struct HighwayState {
  EgoVehicle ego;
  std::vector<ExoVehicle> exo;
  int elapsed_steps = 0;
  double distance_traveled = 0.0;
  bool crashed = false;
  double traffic_density = 1.0;
  int time_limit = kDefaultTimeLimit;
  std::mt19937_64 rng;
  friend bool operator==(const HighwayState&, const HighwayState&) = default;
};

double LaneCenter(int lane_index);
int VehicleCountForDensity(double density);

std::pair<HighwayState, Observation> Reset(const EnvConfig& cfg);
std::pair<HighwayState, StepResult> Step(HighwayState state, int action);
Observation Observe(const HighwayState& state);

// Index into state.exo of the vehicle in each neighbor slot, or -1.
std::array<int, kNumNeighborSlots> NeighborSlots(const HighwayState& state);

FeatureMask DefaultMask();
// DefaultMask restricted to slots that currently hold a vehicle.
FeatureMask RealizableMask(const HighwayState& state);

HighwayState ApplyModifier(const HighwayState& state, const Observation& x_adv,
                           const FeatureMask& mask);
HighwayState ProjectToValid(HighwayState state);

// Empty when every invariant holds, otherwise a description of the first
// violation.
std::optional<std::string> CheckInvariants(const HighwayState& state);

}  // namespace envadv::highway

#endif  // ENVADV_HIGHWAY_H_
