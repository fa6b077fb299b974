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

#include "envadv/highway.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "envadv/errors.h"

namespace envadv::highway {
namespace {

constexpr int kSpawnAttempts = 1000;
constexpr int kRecycleAttempts = 50;

double Clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

bool SlotIsFront(int slot) { return slot % 2 == 0; }

// True when a vehicle may be placed at (lane, pos) with at least kMinGap to
// every other vehicle in that lane. `skip` excludes one exo index.
bool PlacementFree(const HighwayState& state, int lane, double pos, int skip) {
  if (state.ego.lane_index == lane &&
      std::abs(state.ego.longitudinal_pos - pos) < kMinGap) {
    return false;
  }
  for (int i = 0; i < static_cast<int>(state.exo.size()); ++i) {
    if (i == skip) continue;
    const ExoVehicle& v = state.exo[i];
    if (v.lane_index == lane && std::abs(v.longitudinal_pos - pos) < kMinGap) {
      return false;
    }
  }
  return true;
}

bool TryPlace(HighwayState& state, int index, double lo, double hi,
              int attempts) {
  std::uniform_int_distribution<int> lane_dist(0, kNumLanes - 1);
  std::uniform_real_distribution<double> pos_dist(lo, hi);
  std::uniform_real_distribution<double> cruise_dist(kCruiseMin, kCruiseMax);
  for (int a = 0; a < attempts; ++a) {
    const int lane = lane_dist(state.rng);
    const double pos = state.ego.longitudinal_pos + pos_dist(state.rng);
    if (!PlacementFree(state, lane, pos, index)) continue;
    ExoVehicle& v = state.exo[index];
    v.lane_index = lane;
    v.longitudinal_pos = pos;
    v.cruise_velocity = cruise_dist(state.rng);
    v.velocity = v.cruise_velocity;
    return true;
  }
  return false;
}

bool EgoCollides(const HighwayState& state) {
  for (const ExoVehicle& v : state.exo) {
    if (v.lane_index == state.ego.lane_index &&
        std::abs(v.longitudinal_pos - state.ego.longitudinal_pos) < kVehicleLength) {
      return true;
    }
  }
  return false;
}

// Exo indices per lane sorted front to back.
std::array<std::vector<int>, kNumLanes> LaneOrder(const HighwayState& state) {
  std::array<std::vector<int>, kNumLanes> lanes;
  for (int i = 0; i < static_cast<int>(state.exo.size()); ++i) {
    lanes[state.exo[i].lane_index].push_back(i);
  }
  for (auto& lane : lanes) {
    std::sort(lane.begin(), lane.end(), [&](int a, int b) {
      const double pa = state.exo[a].longitudinal_pos;
      const double pb = state.exo[b].longitudinal_pos;
      return pa != pb ? pa > pb : a < b;
    });
  }
  return lanes;
}

void UpdateExoVelocities(HighwayState& state,
                         const std::array<std::vector<int>, kNumLanes>& lanes) {
  const EgoVehicle& ego = state.ego;
  for (int lane = 0; lane < kNumLanes; ++lane) {
    const std::vector<int>& order = lanes[lane];
    for (size_t k = 0; k < order.size(); ++k) {
      ExoVehicle& v = state.exo[order[k]];
      double front_pos = std::numeric_limits<double>::infinity();
      double front_vel = 0.0;
      if (k > 0) {
        front_pos = state.exo[order[k - 1]].longitudinal_pos;
        front_vel = state.exo[order[k - 1]].velocity;
      }
      if (ego.lane_index == lane && ego.longitudinal_pos >= v.longitudinal_pos &&
          ego.longitudinal_pos < front_pos) {
        front_pos = ego.longitudinal_pos;
        front_vel = ego.velocity;
      }
      const double gap = front_pos - v.longitudinal_pos;
      v.velocity = gap < kSafeGap ? std::min(v.cruise_velocity, front_vel)
                                  : v.cruise_velocity;
    }
  }
}

void Recycle(HighwayState& state) {
  for (int i = 0; i < static_cast<int>(state.exo.size()); ++i) {
    const double dx = state.exo[i].longitudinal_pos - state.ego.longitudinal_pos;
    if (dx < kRecycleBehind) {
      TryPlace(state, i, kSpawnAhead - 100.0, kSpawnAhead, kRecycleAttempts);
    } else if (dx > kRecycleAhead) {
      TryPlace(state, i, kRecycleBehind, kSpawnBehind, kRecycleAttempts);
    }
  }
}

}  // namespace

double LaneCenter(int lane_index) { return (lane_index + 0.5) * kLaneWidth; }

int VehicleCountForDensity(double density) {
  return static_cast<int>(std::lround(kBaseVehicleCount * density));
}

std::pair<HighwayState, Observation> Reset(const EnvConfig& cfg) {
  cfg.Validate();
  if (cfg.kind != EnvKind::kHighway) throw ConfigError("highway reset with non-highway config");
  HighwayState state;
  state.traffic_density = cfg.difficulty;
  state.time_limit = cfg.time_limit;
  state.rng.seed(cfg.seed);
  std::uniform_int_distribution<int> lane_dist(0, kNumLanes - 1);
  state.ego.lane_index = lane_dist(state.rng);
  state.ego.lane_offset = LaneCenter(state.ego.lane_index);
  state.ego.longitudinal_pos = 0.0;
  state.ego.velocity = kEgoStartSpeed;

  const int count = VehicleCountForDensity(cfg.difficulty);
  state.exo.reserve(count);
  for (int i = 0; i < count; ++i) {
    state.exo.emplace_back();
    // Keep the newcomer out of the gap checks until placed.
    state.exo.back().lane_index = -1;
    if (!TryPlace(state, i, kSpawnBehind, kSpawnAhead, kSpawnAttempts)) {
      throw ConfigError("traffic density too high to place " +
                        std::to_string(count) + " vehicles");
    }
  }
  Observation obs = Observe(state);
  return {std::move(state), std::move(obs)};
}

std::pair<HighwayState, StepResult> Step(HighwayState state, int action) {
  if (action < 0 || action >= kNumActions) {
    throw InputError("highway action " + std::to_string(action) + " out of range");
  }
  if (state.crashed || state.elapsed_steps >= state.time_limit) {
    throw InputError("step called on a finished highway episode");
  }
  EgoVehicle& ego = state.ego;
  switch (action) {
    case kLaneLeft:
      ego.lane_index = std::max(0, ego.lane_index - 1);
      break;
    case kLaneRight:
      ego.lane_index = std::min(kNumLanes - 1, ego.lane_index + 1);
      break;
    case kFaster:
      ego.velocity = std::min(kMaxSpeed, ego.velocity + kSpeedStep);
      break;
    case kSlower:
      ego.velocity = std::max(kMinSpeed, ego.velocity - kSpeedStep);
      break;
    default:
      break;
  }
  ego.lane_offset = LaneCenter(ego.lane_index);

  state.crashed = EgoCollides(state);
  if (!state.crashed) {
    // Within a lane nobody overtakes, so the ordering holds for the step.
    const auto lanes = LaneOrder(state);
    const double dt = kStepSeconds / kSubsteps;
    for (int s = 0; s < kSubsteps && !state.crashed; ++s) {
      UpdateExoVelocities(state, lanes);
      for (ExoVehicle& v : state.exo) v.longitudinal_pos += v.velocity * dt;
      ego.longitudinal_pos += ego.velocity * dt;
      state.distance_traveled += ego.velocity * dt;
      state.crashed = EgoCollides(state);
    }
  }
  if (!state.crashed) Recycle(state);
  ++state.elapsed_steps;

  StepResult result;
  result.done = state.crashed || state.elapsed_steps >= state.time_limit;
  result.reward = state.crashed ? 0.0 : ego.velocity / kMaxSpeed;
  result.info.distance_traveled = state.distance_traveled;
  result.info.survived_steps = state.elapsed_steps;
  if (state.crashed) {
    result.info.cause = TerminalCause::kCollision;
  } else if (result.done) {
    result.info.cause = TerminalCause::kTimeLimit;
  }
  result.observation = Observe(state);
  return {std::move(state), std::move(result)};
}

std::array<int, kNumNeighborSlots> NeighborSlots(const HighwayState& state) {
  std::array<int, kNumNeighborSlots> slots;
  slots.fill(-1);
  std::array<double, kNumNeighborSlots> best;
  for (int s = 0; s < kNumNeighborSlots; ++s) {
    best[s] = SlotIsFront(s) ? kSensingRange : -kSensingRange;
  }
  const EgoVehicle& ego = state.ego;
  for (int i = 0; i < static_cast<int>(state.exo.size()); ++i) {
    const ExoVehicle& v = state.exo[i];
    const int delta = v.lane_index - ego.lane_index;
    if (delta < -1 || delta > 1) continue;
    const int base = delta == 0 ? 0 : (delta < 0 ? 2 : 4);
    const double dx = v.longitudinal_pos - ego.longitudinal_pos;
    if (dx >= 0.0) {
      if (dx < best[base]) {
        best[base] = dx;
        slots[base] = i;
      }
    } else if (dx > best[base + 1]) {
      best[base + 1] = dx;
      slots[base + 1] = i;
    }
  }
  return slots;
}

Observation Observe(const HighwayState& state) {
  Observation x(kObservationSize);
  const EgoVehicle& ego = state.ego;
  x[0] = Clamp1((ego.lane_offset - 0.5 * kRoadWidth) / (0.5 * kRoadWidth));
  x[1] = Clamp1((ego.velocity - 0.5 * (kMinSpeed + kMaxSpeed)) /
                (0.5 * (kMaxSpeed - kMinSpeed)));
  const auto slots = NeighborSlots(state);
  for (int s = 0; s < kNumNeighborSlots; ++s) {
    const int f = 2 + 2 * s;
    if (slots[s] < 0) {
      x[f] = SlotIsFront(s) ? 1.0 : -1.0;
      x[f + 1] = 0.0;
      continue;
    }
    const ExoVehicle& v = state.exo[slots[s]];
    x[f] = Clamp1((v.longitudinal_pos - ego.longitudinal_pos) / kSensingRange);
    x[f + 1] = Clamp1((v.velocity - ego.velocity) / kRelSpeedScale);
  }
  return x;
}

FeatureMask DefaultMask() {
  FeatureMask mask(kObservationSize, true);
  mask[0] = mask[1] = false;
  return mask;
}

FeatureMask RealizableMask(const HighwayState& state) {
  FeatureMask mask = DefaultMask();
  const auto slots = NeighborSlots(state);
  for (int s = 0; s < kNumNeighborSlots; ++s) {
    if (slots[s] < 0) mask[2 + 2 * s] = mask[3 + 2 * s] = false;
  }
  return mask;
}

HighwayState ApplyModifier(const HighwayState& state, const Observation& x_adv,
                           const FeatureMask& mask) {
  if (x_adv.size() != kObservationSize || mask.size() != kObservationSize) {
    throw InputError("highway modifier expects 14 features and a 14-entry mask");
  }
  HighwayState out = state;
  const auto slots = NeighborSlots(state);
  const Observation current = Observe(state);
  const EgoVehicle& ego = state.ego;
  // Features equal to the current observation leave their source untouched.
  for (int s = 0; s < kNumNeighborSlots; ++s) {
    if (slots[s] < 0) continue;
    const int f = 2 + 2 * s;
    ExoVehicle& v = out.exo[slots[s]];
    if (mask[f] && x_adv[f] != current[f]) {
      v.longitudinal_pos = ego.longitudinal_pos + x_adv[f] * kSensingRange;
    }
    if (mask[f + 1] && x_adv[f + 1] != current[f + 1]) {
      v.velocity = ego.velocity + x_adv[f + 1] * kRelSpeedScale;
      v.cruise_velocity = v.velocity;
    }
  }
  return ProjectToValid(std::move(out));
}

HighwayState ProjectToValid(HighwayState state) {
  EgoVehicle& ego = state.ego;
  ego.velocity = std::clamp(ego.velocity, kMinSpeed, kMaxSpeed);
  for (ExoVehicle& v : state.exo) {
    v.lane_index = std::clamp(v.lane_index, 0, kNumLanes - 1);
    v.velocity = std::clamp(v.velocity, kMinSpeed, kMaxSpeed);
    v.cruise_velocity = std::clamp(v.cruise_velocity, kMinSpeed, kMaxSpeed);
  }
  const auto lanes = LaneOrder(state);
  for (int lane = 0; lane < kNumLanes; ++lane) {
    const std::vector<int>& order = lanes[lane];
    // Rear vehicles are pushed back to restore the minimum gap.
    for (size_t k = 1; k < order.size(); ++k) {
      const double limit = state.exo[order[k - 1]].longitudinal_pos - kMinGap;
      double& pos = state.exo[order[k]].longitudinal_pos;
      pos = std::min(pos, limit);
    }
    if (lane != ego.lane_index || state.crashed) continue;
    // Nothing may overlap the ego: vehicles ahead move forward, vehicles
    // behind move back, each chain keeping the minimum gap.
    std::vector<int> ahead, behind;
    for (int i : order) {
      (state.exo[i].longitudinal_pos >= ego.longitudinal_pos ? ahead : behind)
          .push_back(i);
    }
    double floor = ego.longitudinal_pos + kVehicleLength;
    for (auto it = ahead.rbegin(); it != ahead.rend(); ++it) {
      double& pos = state.exo[*it].longitudinal_pos;
      pos = std::max(pos, floor);
      floor = pos + kMinGap;
    }
    double ceiling = ego.longitudinal_pos - kVehicleLength;
    for (int i : behind) {
      double& pos = state.exo[i].longitudinal_pos;
      pos = std::min(pos, ceiling);
      ceiling = pos - kMinGap;
    }
  }
  return state;
}

std::optional<std::string> CheckInvariants(const HighwayState& state) {
  std::ostringstream err;
  const EgoVehicle& ego = state.ego;
  if (ego.lane_index < 0 || ego.lane_index >= kNumLanes) {
    err << "ego lane " << ego.lane_index << " out of range";
    return err.str();
  }
  if (ego.lane_offset != LaneCenter(ego.lane_index)) return "ego lane offset off-center";
  if (!(ego.velocity >= kMinSpeed && ego.velocity <= kMaxSpeed)) {
    err << "ego velocity " << ego.velocity << " out of range";
    return err.str();
  }
  for (size_t i = 0; i < state.exo.size(); ++i) {
    const ExoVehicle& v = state.exo[i];
    if (v.lane_index < 0 || v.lane_index >= kNumLanes) {
      err << "exo " << i << " lane out of range";
      return err.str();
    }
    if (!(v.velocity >= kMinSpeed && v.velocity <= kMaxSpeed) ||
        !std::isfinite(v.longitudinal_pos)) {
      err << "exo " << i << " velocity " << v.velocity << " out of range";
      return err.str();
    }
    for (size_t j = i + 1; j < state.exo.size(); ++j) {
      const ExoVehicle& w = state.exo[j];
      if (w.lane_index == v.lane_index &&
          std::abs(w.longitudinal_pos - v.longitudinal_pos) < kMinGap - 1e-9) {
        err << "exo " << i << " and " << j << " closer than the minimum gap";
        return err.str();
      }
    }
    if (!state.crashed && v.lane_index == ego.lane_index &&
        std::abs(v.longitudinal_pos - ego.longitudinal_pos) < kVehicleLength) {
      err << "exo " << i << " overlaps the ego vehicle";
      return err.str();
    }
  }
  return std::nullopt;
}

}  // namespace envadv::highway
