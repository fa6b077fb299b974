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

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "doctest.h"
#include "envadv/env.h"
#include "envadv/errors.h"
#include "test_util.h"

namespace envadv {
namespace {

using testing::Cfg;
using testing::RandomState;
using testing::SameBits;

TEST_CASE("config validation") {
  CHECK_THROWS_AS(Reset(Cfg(EnvKind::kHighway, 0.0, 1)), ConfigError);
  CHECK_THROWS_AS(Reset(Cfg(EnvKind::kFlappy, 600.0, 1)), ConfigError);
  CHECK_THROWS_AS(Reset(Cfg(EnvKind::kFlappy, 0.0, 1)), ConfigError);
  EnvConfig bad = Cfg(EnvKind::kFlappy, 150.0, 1);
  bad.time_limit = 0;
  CHECK_THROWS_AS(Reset(bad), ConfigError);
}

TEST_CASE("reset is deterministic") {
  auto [a, xa] = Reset(Cfg(EnvKind::kFlappy, 150.0, 42));
  auto [b, xb] = Reset(Cfg(EnvKind::kFlappy, 150.0, 42));
  CHECK(a == b);
  CHECK(xa == xb);
  auto [c, xc] = Reset(Cfg(EnvKind::kHighway, 1.0, 42));
  auto [d, xd] = Reset(Cfg(EnvKind::kHighway, 1.0, 42));
  CHECK(c == d);
}

TEST_CASE("highway vehicle count scales with density") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto [s1, x1] = highway::Reset(Cfg(EnvKind::kHighway, 1.0, seed));
    auto [s2, x2] = highway::Reset(Cfg(EnvKind::kHighway, 2.0, seed));
    CHECK(s2.exo.size() == 2 * s1.exo.size());
    for (const auto& v : s2.exo) {
      const double dx = v.longitudinal_pos - s2.ego.longitudinal_pos;
      CHECK(dx >= highway::kSpawnBehind);
      CHECK(dx <= highway::kSpawnAhead);
    }
  }
}

TEST_CASE("highway reset respects the minimum gap, ego included") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto [s, x] = highway::Reset(Cfg(EnvKind::kHighway, 1.0, seed));
    CHECK_FALSE(highway::CheckInvariants(s).has_value());
    for (size_t i = 0; i < s.exo.size(); ++i) {
      if (s.exo[i].lane_index == s.ego.lane_index) {
        CHECK(std::abs(s.exo[i].longitudinal_pos - s.ego.longitudinal_pos) >=
              highway::kMinGap);
      }
      for (size_t j = i + 1; j < s.exo.size(); ++j) {
        if (s.exo[i].lane_index != s.exo[j].lane_index) continue;
        CHECK(std::abs(s.exo[i].longitudinal_pos - s.exo[j].longitudinal_pos) >=
              highway::kMinGap);
      }
    }
  }
}

TEST_CASE("highway acceleration steps by 5 m/s and clamps") {
  auto [s, x] = highway::Reset(Cfg(EnvKind::kHighway, 1.0, 3));
  s.exo.clear();
  s.ego.velocity = 20.0;
  auto [s1, r1] = highway::Step(s, highway::kFaster);
  auto [s2, r2] = highway::Step(s1, highway::kFaster);
  CHECK(s2.ego.velocity == 30.0);
  CHECK(r2.reward == doctest::Approx(30.0 / 40.0));
  CHECK(r2.info.distance_traveled == doctest::Approx(25.0 + 30.0));
  highway::HighwayState fast = s2;
  for (int i = 0; i < 4; ++i) fast = highway::Step(fast, highway::kFaster).first;
  CHECK(fast.ego.velocity == highway::kMaxSpeed);
  highway::HighwayState slow = s;
  for (int i = 0; i < 4; ++i) slow = highway::Step(slow, highway::kSlower).first;
  CHECK(slow.ego.velocity == highway::kMinSpeed);
}

TEST_CASE("highway lane changes clamp at the road edges") {
  auto [s, x] = highway::Reset(Cfg(EnvKind::kHighway, 1.0, 3));
  s.exo.clear();
  s.ego.lane_index = 0;
  s.ego.lane_offset = highway::LaneCenter(0);
  auto [left, r] = highway::Step(s, highway::kLaneLeft);
  CHECK(left.ego.lane_index == 0);
  auto [right, r2] = highway::Step(s, highway::kLaneRight);
  CHECK(right.ego.lane_index == 1);
  CHECK(right.ego.lane_offset == highway::LaneCenter(1));
}

TEST_CASE("highway rear-end collision ends the episode") {
  auto [s, x] = highway::Reset(Cfg(EnvKind::kHighway, 1.0, 3));
  s.exo.clear();
  s.ego.velocity = 40.0;
  highway::ExoVehicle slow;
  slow.lane_index = s.ego.lane_index;
  slow.longitudinal_pos = s.ego.longitudinal_pos + 20.0;
  slow.velocity = slow.cruise_velocity = 10.0;
  s.exo.push_back(slow);
  auto [next, r] = highway::Step(s, highway::kIdle);
  CHECK(r.done);
  CHECK(r.info.cause == TerminalCause::kCollision);
  CHECK(r.reward == 0.0);
  CHECK_THROWS_AS(highway::Step(next, highway::kIdle), InputError);
}

TEST_CASE("invalid actions are rejected") {
  auto [h, hx] = Reset(Cfg(EnvKind::kHighway, 1.0, 1));
  CHECK_THROWS_AS(Step(h, 5), InputError);
  CHECK_THROWS_AS(Step(h, -1), InputError);
  auto [f, fx] = Reset(Cfg(EnvKind::kFlappy, 150.0, 1));
  CHECK_THROWS_AS(Step(f, 2), InputError);
}

TEST_CASE("flappy pays one per surviving step") {
  auto [s, x] = Reset(Cfg(EnvKind::kFlappy, 150.0, 8));
  std::mt19937_64 rng(1);
  int steps = 0;
  while (true) {
    auto [next, r] = Step(s, static_cast<int>(rng() % 2));
    ++steps;
    if (r.done) {
      CHECK(r.info.cause != TerminalCause::kNone);
      CHECK(r.info.survived_steps == steps);
      break;
    }
    CHECK(r.reward == 1.0);
    s = std::move(next);
  }
}

TEST_CASE("flappy collision at one pixel of overlap") {
  auto [s, x] = flappy::Reset(Cfg(EnvKind::kFlappy, 150.0, 2));
  auto& pipe = s.obstacles[0];
  // After the scroll the pipe column covers the bird.
  pipe.horizontal_pos = flappy::kBirdX - 10.0 + flappy::kScrollSpeed;
  pipe.gap_center = 256.0;
  const double gap_bottom = pipe.gap_center - 0.5 * s.gap_size;
  s.bird.vertical_velocity = 0.0;  // a no-op moves the bird down by kGravity

  flappy::FlappyState overlap = s;
  overlap.bird.altitude = gap_bottom + flappy::kBirdHalfHeight - 1.0 + flappy::kGravity;
  auto [o, ro] = flappy::Step(overlap, flappy::kNoop);
  CHECK(ro.done);
  CHECK(ro.info.cause == TerminalCause::kCollision);

  flappy::FlappyState touching = s;
  touching.bird.altitude = gap_bottom + flappy::kBirdHalfHeight + flappy::kGravity;
  auto [t, rt] = flappy::Step(touching, flappy::kNoop);
  CHECK_FALSE(rt.done);
  CHECK(rt.reward == 1.0);
}

TEST_CASE("flappy flap sets the impulse and gravity pulls down") {
  auto [s, x] = flappy::Reset(Cfg(EnvKind::kFlappy, 150.0, 2));
  auto [up, r1] = flappy::Step(s, flappy::kFlap);
  CHECK(up.bird.vertical_velocity == flappy::kFlapVelocity);
  CHECK(up.bird.altitude == s.bird.altitude + flappy::kFlapVelocity);
  auto [down, r2] = flappy::Step(s, flappy::kNoop);
  CHECK(down.bird.vertical_velocity == -flappy::kGravity);
  CHECK(down.obstacles[0].horizontal_pos ==
        s.obstacles[0].horizontal_pos - flappy::kScrollSpeed);
}

TEST_CASE("observation sentinels and midpoints") {
  auto [h, hx] = highway::Reset(Cfg(EnvKind::kHighway, 1.0, 5));
  h.exo.clear();
  Observation x = highway::Observe(h);
  for (int s = 0; s < highway::kNumNeighborSlots; ++s) {
    CHECK(x[2 + 2 * s] == (s % 2 == 0 ? 1.0 : -1.0));
    CHECK(x[3 + 2 * s] == 0.0);
  }
  auto [f, fx] = flappy::Reset(Cfg(EnvKind::kFlappy, 150.0, 5));
  f.bird.altitude = 0.5 * flappy::kScreenHeight;
  f.bird.vertical_velocity = 0.0;
  Observation y = flappy::Observe(f);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
}

TEST_CASE("highway features invert to true relative positions") {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto h = std::get<highway::HighwayState>(RandomState(EnvKind::kHighway, 1.5, rng));
    Observation x = highway::Observe(h);
    const auto& ego = h.ego;
    // Brute-force neighbor search, independent of NeighborSlots.
    for (int slot = 0; slot < highway::kNumNeighborSlots; ++slot) {
      const int lane = ego.lane_index + (slot < 2 ? 0 : (slot < 4 ? -1 : 1));
      const bool front = slot % 2 == 0;
      const highway::ExoVehicle* best = nullptr;
      for (const auto& v : h.exo) {
        const double dx = v.longitudinal_pos - ego.longitudinal_pos;
        if (v.lane_index != lane || std::abs(dx) >= highway::kSensingRange) continue;
        if (front != (dx >= 0.0)) continue;
        if (best == nullptr ||
            std::abs(dx) < std::abs(best->longitudinal_pos - ego.longitudinal_pos)) {
          best = &v;
        }
      }
      const int f = 2 + 2 * slot;
      if (best == nullptr) {
        CHECK(x[f] == (front ? 1.0 : -1.0));
        continue;
      }
      ++checked;
      CHECK(std::abs(x[f] * highway::kSensingRange -
                     (best->longitudinal_pos - ego.longitudinal_pos)) < 1e-9);
      CHECK(std::abs(x[f + 1] * highway::kRelSpeedScale - (best->velocity - ego.velocity)) <
            1e-9);
    }
  }
  CHECK(checked > 300);
}

TEST_CASE("modifier fixed point and projection clamp") {
  std::mt19937_64 rng(23);
  for (EnvKind kind : {EnvKind::kHighway, EnvKind::kFlappy}) {
    for (int t = 0; t < 50; ++t) {
      EnvState s = RandomState(kind, BaseDifficulty(kind), rng);
      EnvState m = ApplyModifier(s, Observe(s), DefaultMask(kind));
      CHECK(Observe(m) == Observe(s));
      CHECK(m == ProjectToValid(s));
    }
  }
  auto [f, fx] = flappy::Reset(Cfg(EnvKind::kFlappy, 150.0, 1));
  Observation adv = fx;
  adv[3] = -0.9;  // gap center 25.6 px, below gap_size / 2
  flappy::FlappyState m = flappy::ApplyModifier(f, adv, flappy::DefaultMask());
  CHECK(m.obstacles[0].gap_center == 75.0);
  CHECK(m.bird == f.bird);
}

TEST_CASE("flappy pipes the bird has entered are not attackable") {
  auto [f, fx] = flappy::Reset(Cfg(EnvKind::kFlappy, 150.0, 2));
  CHECK(flappy::RealizableMask(f) == flappy::DefaultMask());
  f.obstacles[0].horizontal_pos = flappy::kBirdX + flappy::kBirdHalfWidth;
  CHECK(flappy::RealizableMask(f) == flappy::DefaultMask());
  f.obstacles[0].horizontal_pos -= 1.0;
  const FeatureMask m = flappy::RealizableMask(f);
  CHECK_FALSE(m[3]);
  CHECK(m[5]);
  Observation adv = flappy::Observe(f);
  adv[3] += 0.1;
  adv[5] += 0.1;
  const EnvState out = ApplyModifier(EnvState(f), adv, RealizableMask(EnvState(f)));
  const auto& g = std::get<flappy::FlappyState>(out);
  CHECK(g.obstacles[0].gap_center == f.obstacles[0].gap_center);
  CHECK(g.obstacles[1].gap_center != f.obstacles[1].gap_center);
}

TEST_CASE("highway modifier round trip for a front vehicle moved closer") {
  auto [s, x] = highway::Reset(Cfg(EnvKind::kHighway, 1.0, 5));
  s.exo.clear();
  highway::ExoVehicle front;
  front.lane_index = s.ego.lane_index;
  front.longitudinal_pos = s.ego.longitudinal_pos + 40.0;
  front.velocity = front.cruise_velocity = 22.0;
  s.exo.push_back(front);
  Observation obs = highway::Observe(s);
  Observation adv = obs;
  adv[2] -= 3.0 / highway::kSensingRange;
  adv[3] -= 0.05;
  FeatureMask mask = highway::DefaultMask();
  highway::HighwayState m = highway::ApplyModifier(s, adv, mask);
  Observation back = highway::Observe(m);
  for (int f = 0; f < highway::kObservationSize; ++f) {
    if (mask[f]) CHECK(std::abs(back[f] - adv[f]) < 1e-9);
  }
  CHECK(m.exo[0].longitudinal_pos == doctest::Approx(s.exo[0].longitudinal_pos - 3.0));
}

TEST_CASE("round trip on valid-region perturbations, ego and bird untouched") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> small(-0.03, 0.03);
  int round_trips = 0;
  for (EnvKind kind : {EnvKind::kHighway, EnvKind::kFlappy}) {
    for (int t = 0; t < 1000; ++t) {
      EnvState s = RandomState(kind, BaseDifficulty(kind), rng);
      FeatureMask mask = RealizableMask(s);
      Observation x = Observe(s);
      Observation adv = x;
      for (int f = 0; f < adv.size(); ++f) {
        if (mask[f]) adv[f] = std::clamp(adv[f] + small(rng), -1.0, 1.0);
      }
      EnvState m = ApplyModifier(s, adv, mask);
      CHECK_FALSE(CheckInvariants(m).has_value());
      if (kind == EnvKind::kHighway) {
        const auto& a = std::get<highway::HighwayState>(s).ego;
        const auto& b = std::get<highway::HighwayState>(m).ego;
        CHECK(SameBits(a.lane_offset, b.lane_offset));
        CHECK(a.lane_index == b.lane_index);
        CHECK(SameBits(a.longitudinal_pos, b.longitudinal_pos));
        CHECK(SameBits(a.velocity, b.velocity));
      } else {
        const auto& a = std::get<flappy::FlappyState>(s).bird;
        const auto& b = std::get<flappy::FlappyState>(m).bird;
        CHECK(SameBits(a.altitude, b.altitude));
        CHECK(SameBits(a.vertical_velocity, b.vertical_velocity));
      }
      // Valid region: the modified state needed no projection and kept its
      // neighbor assignment.
      bool valid_region = true;
      if (kind == EnvKind::kHighway) {
        const auto& hs = std::get<highway::HighwayState>(s);
        highway::HighwayState raw = hs;
        const auto slots = highway::NeighborSlots(hs);
        for (int slot = 0; slot < highway::kNumNeighborSlots; ++slot) {
          if (slots[slot] < 0) continue;
          auto& v = raw.exo[slots[slot]];
          v.longitudinal_pos = hs.ego.longitudinal_pos + adv[2 + 2 * slot] * highway::kSensingRange;
          v.velocity = hs.ego.velocity + adv[3 + 2 * slot] * highway::kRelSpeedScale;
        }
        valid_region = !highway::CheckInvariants(raw).has_value() &&
                       highway::NeighborSlots(raw) == slots;
      } else {
        const auto& fs = std::get<flappy::FlappyState>(s);
        for (int k = 0; k < 2; ++k) {
          const double gc = 256.0 + 256.0 * adv[3 + 2 * k];
          valid_region &= gc >= 0.5 * fs.gap_size && gc <= 512.0 - 0.5 * fs.gap_size;
        }
      }
      if (!valid_region) continue;
      ++round_trips;
      Observation back = Observe(m);
      for (int f = 0; f < adv.size(); ++f) {
        if (mask[f]) CHECK(std::abs(back[f] - adv[f]) < 1e-9);
      }
    }
  }
  CHECK(round_trips > 1000);
}

TEST_CASE("projection clamps and is idempotent") {
  auto [s, x] = highway::Reset(Cfg(EnvKind::kHighway, 1.0, 9));
  CHECK(highway::ProjectToValid(s) == s);
  highway::HighwayState fast = s;
  fast.exo[0].velocity = 55.0;
  CHECK(highway::ProjectToValid(fast).exo[0].velocity == 40.0);

  std::mt19937_64 rng(13);
  std::normal_distribution<double> jitter(0.0, 15.0);
  for (int t = 0; t < 1000; ++t) {
    const EnvKind kind = t % 2 == 0 ? EnvKind::kHighway : EnvKind::kFlappy;
    EnvState cand = RandomState(kind, BaseDifficulty(kind), rng);
    if (auto* h = std::get_if<highway::HighwayState>(&cand)) {
      for (auto& v : h->exo) {
        v.longitudinal_pos += jitter(rng);
        v.velocity += jitter(rng);
      }
    } else {
      auto& fs = std::get<flappy::FlappyState>(cand);
      for (auto& o : fs.obstacles) o.gap_center += 10.0 * jitter(rng);
    }
    EnvState once = ProjectToValid(cand);
    CHECK_FALSE(CheckInvariants(once).has_value());
    CHECK(ProjectToValid(once) == once);
  }
}

TEST_CASE("episodes are reproducible and every state is valid") {
  for (EnvKind kind : {EnvKind::kHighway, EnvKind::kFlappy}) {
    std::vector<double> rewards[2];
    for (int run = 0; run < 2; ++run) {
      std::mt19937_64 policy(99);
      auto [s, x] = Reset(Cfg(kind, BaseDifficulty(kind), 1234));
      for (int t = 0; t < 3000; ++t) {
        CHECK_FALSE(CheckInvariants(s).has_value());
        auto [next, r] = Step(s, static_cast<int>(policy() % NumActions(kind)));
        rewards[run].push_back(r.reward);
        if (r.done) {
          s = Reset(Cfg(kind, BaseDifficulty(kind), 1234 + t)).first;
        } else {
          s = std::move(next);
        }
      }
    }
    CHECK(rewards[0] == rewards[1]);
  }
}

}  // namespace
}  // namespace envadv
