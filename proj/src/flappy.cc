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

#include "envadv/flappy.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "envadv/errors.h"

namespace envadv::flappy {
namespace {

constexpr double kHalfScreen = 0.5 * kScreenHeight;

double Clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

double SampleGapCenter(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(kGapCenterMin, kGapCenterMax)(rng);
}

bool Passed(const Obstacle& o) {
  return o.horizontal_pos + kPipeWidth < kBirdX - kBirdHalfWidth;
}

// Feature index of each attackable gap center.
constexpr int kGapFeature[2] = {3, 5};

}  // namespace

bool Collides(const Bird& bird, const std::vector<Obstacle>& obstacles,
              double gap_size) {
  const double top = bird.altitude + kBirdHalfHeight;
  const double bottom = bird.altitude - kBirdHalfHeight;
  if (bottom <= 0.0) return true;
  for (const Obstacle& o : obstacles) {
    const bool overlaps_column = kBirdX + kBirdHalfWidth > o.horizontal_pos &&
                                 kBirdX - kBirdHalfWidth < o.horizontal_pos + kPipeWidth;
    if (!overlaps_column) continue;
    if (top > o.gap_center + 0.5 * gap_size || bottom < o.gap_center - 0.5 * gap_size) {
      return true;
    }
  }
  return false;
}

std::pair<FlappyState, Observation> Reset(const EnvConfig& cfg) {
  cfg.Validate();
  if (cfg.kind != EnvKind::kFlappy) throw ConfigError("flappy reset with non-flappy config");
  FlappyState state;
  state.gap_size = cfg.difficulty;
  state.time_limit = cfg.time_limit;
  state.rng.seed(cfg.seed);
  for (int i = 0; i < kNumObstacles; ++i) {
    Obstacle o;
    o.horizontal_pos = kBirdX + kFirstPipeOffset + i * kPipeSpacing;
    o.gap_center = SampleGapCenter(state.rng);
    state.obstacles.push_back(o);
  }
  Observation obs = Observe(state);
  return {std::move(state), std::move(obs)};
}

std::pair<FlappyState, StepResult> Step(FlappyState state, int action) {
  if (action < 0 || action >= kNumActions) {
    throw InputError("flappy action " + std::to_string(action) + " out of range");
  }
  if (state.crashed || state.elapsed_steps >= state.time_limit) {
    throw InputError("step called on a finished flappy episode");
  }
  Bird& bird = state.bird;
  if (action == kFlap) {
    bird.vertical_velocity = kFlapVelocity;
  } else {
    bird.vertical_velocity = std::max(bird.vertical_velocity - kGravity, -kMaxFallSpeed);
  }
  bird.altitude += bird.vertical_velocity;
  if (bird.altitude > kScreenHeight - kBirdHalfHeight) {
    bird.altitude = kScreenHeight - kBirdHalfHeight;
    bird.vertical_velocity = std::min(bird.vertical_velocity, 0.0);
  }
  for (Obstacle& o : state.obstacles) o.horizontal_pos -= kScrollSpeed;
  while (Passed(state.obstacles.front())) {
    Obstacle next;
    next.horizontal_pos = state.obstacles.back().horizontal_pos + kPipeSpacing;
    next.gap_center = SampleGapCenter(state.rng);
    state.obstacles.erase(state.obstacles.begin());
    state.obstacles.push_back(next);
  }
  state.crashed = Collides(bird, state.obstacles, state.gap_size);
  ++state.elapsed_steps;

  StepResult result;
  result.done = state.crashed || state.elapsed_steps >= state.time_limit;
  result.reward = state.crashed ? 0.0 : 1.0;
  result.info.survived_steps = state.elapsed_steps;
  if (state.crashed) {
    result.info.cause = TerminalCause::kCollision;
  } else if (result.done) {
    result.info.cause = TerminalCause::kTimeLimit;
  }
  result.observation = Observe(state);
  return {std::move(state), std::move(result)};
}

Observation Observe(const FlappyState& state) {
  Observation x(kObservationSize);
  x[0] = Clamp1((state.bird.altitude - kHalfScreen) / kHalfScreen);
  x[1] = Clamp1(state.bird.vertical_velocity / kMaxFallSpeed);
  for (int k = 0; k < 2; ++k) {
    const Obstacle& o = state.obstacles[k];
    x[2 + 2 * k] = Clamp1((o.horizontal_pos - kBirdX) / kLookAhead);
    x[3 + 2 * k] = Clamp1((o.gap_center - kHalfScreen) / kHalfScreen);
  }
  return x;
}

FeatureMask DefaultMask() {
  FeatureMask mask(kObservationSize, false);
  for (int f : kGapFeature) mask[f] = true;
  return mask;
}

FeatureMask RealizableMask(const FlappyState& state) {
  FeatureMask mask = DefaultMask();
  // A pipe already overlapping the bird's column cannot be moved through it.
  for (int k = 0; k < 2; ++k) {
    const Obstacle& o = state.obstacles[k];
    if (kBirdX + kBirdHalfWidth > o.horizontal_pos) mask[kGapFeature[k]] = false;
  }
  return mask;
}

FlappyState ApplyModifier(const FlappyState& state, const Observation& x_adv,
                          const FeatureMask& mask) {
  if (x_adv.size() != kObservationSize || mask.size() != kObservationSize) {
    throw InputError("flappy modifier expects 6 features and a 6-entry mask");
  }
  FlappyState out = state;
  const Observation current = Observe(state);
  for (int k = 0; k < 2; ++k) {
    const int f = kGapFeature[k];
    if (mask[f] && x_adv[f] != current[f]) out.obstacles[k].gap_center = kHalfScreen + x_adv[f] * kHalfScreen;
  }
  return ProjectToValid(std::move(out));
}

FlappyState ProjectToValid(FlappyState state) {
  const double half_gap = 0.5 * state.gap_size;
  for (Obstacle& o : state.obstacles) {
    o.gap_center = std::clamp(o.gap_center, half_gap, kScreenHeight - half_gap);
  }
  state.bird.vertical_velocity =
      std::clamp(state.bird.vertical_velocity, -kMaxFallSpeed, kFlapVelocity);
  return state;
}

std::optional<std::string> CheckInvariants(const FlappyState& state) {
  std::ostringstream err;
  if (!(state.gap_size > 0.0 && state.gap_size < kScreenHeight)) return "gap size out of range";
  if (state.obstacles.size() != kNumObstacles) return "wrong obstacle count";
  const double half_gap = 0.5 * state.gap_size;
  for (size_t i = 0; i < state.obstacles.size(); ++i) {
    const Obstacle& o = state.obstacles[i];
    if (!(o.gap_center >= half_gap && o.gap_center <= kScreenHeight - half_gap)) {
      err << "obstacle " << i << " gap center " << o.gap_center << " leaves the screen";
      return err.str();
    }
    if (i > 0 && std::abs(o.horizontal_pos - state.obstacles[i - 1].horizontal_pos -
                          kPipeSpacing) > 1e-9) {
      err << "obstacle " << i << " not evenly spaced";
      return err.str();
    }
  }
  const double v = state.bird.vertical_velocity;
  if (!(v >= -kMaxFallSpeed && v <= kFlapVelocity)) return "bird velocity out of range";
  if (!(state.bird.altitude <= kScreenHeight - kBirdHalfHeight)) return "bird above the ceiling";
  return std::nullopt;
}

}  // namespace envadv::flappy
