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

// Gradient-based perturbations of the agent's observation, either realized
// in the environment through the state modifier or handed to the agent
// directly.
//
//   critic gradient:  eta = -eps * grad V(x) / ||grad V(x)||
//   actor saliency:   H[i] = sum_{j != d} dPi_j/dx_i - dPi_d/dx_i over the
//                     logits, d = argmax, eta = eps * H / ||H||
//
// Both are first-order steepest steps under the L2 norm. The four named
// methods are EACN/EAAN (environment mode) and OACN/OAAN (observation mode).

#ifndef ENVADV_ATTACKS_H_
#define ENVADV_ATTACKS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>

#include "envadv/env.h"
#include "envadv/net.h"
#include "envadv/ppo.h"

namespace envadv {

enum class AttackKind { kCriticGradient, kActorSaliency };
enum class AttackMode { kEnvironment, kObservation };

enum class AttackMethod { kEACN, kEAAN, kOACN, kOAAN };

std::string AttackMethodName(AttackMethod method);
std::string AttackKindName(AttackKind kind);
std::string AttackModeName(AttackMode mode);

struct AttackConfig {
  AttackKind kind = AttackKind::kCriticGradient;
  AttackMode mode = AttackMode::kEnvironment;
  double epsilon = 0.05;  // L2 budget in normalized observation space
  std::optional<FeatureMask> feature_mask;  // required in environment mode
  double attack_probability = 1.0;

  // Throws ConfigError unless epsilon > 0, the probability lies in [0, 1]
  // and environment mode carries a mask.
  void Validate() const;
};

// Environment-mode methods get the environment's default mask.
AttackConfig MakeAttackConfig(AttackMethod method, double epsilon, EnvKind env);

struct Perturbation {
  Vector eta;
  bool degenerate = false;  // zero (masked) gradient, eta == 0
};

// Saliency map H over the actor's logits; `dominant` receives argmax.
Vector SaliencyMap(const FeedForwardNet& actor, const Observation& x,
                   int* dominant = nullptr);

Perturbation EaanPerturbation(const FeedForwardNet& actor, const Observation& x,
                              double epsilon, const FeatureMask* mask = nullptr);
Perturbation EacnPerturbation(const FeedForwardNet& critic, const Observation& x,
                              double epsilon, const FeatureMask* mask = nullptr);

struct CraftedObservation {
  Observation x_adv;        // clamp(x + eta, -1, 1)
  bool clamped = false;
  double effective_norm = 0.0;  // ||x_adv - x||
};

CraftedObservation CraftAdversarialObservation(const Observation& x,
                                               const Vector& eta);

struct AttackDiagnostics {
  bool attacked = false;
  double eta_norm = 0.0;
  double value_delta = 0.0;          // V(agent obs) - V(x)
  double dominant_prob_delta = 0.0;  // pi_d(agent obs) - pi_d(x)
  bool degenerate = false;
  bool clamped = false;
  bool state_changed = false;
};

struct AttackOutcome {
  EnvState state;
  Observation agent_obs;
  AttackDiagnostics diagnostics;
};

// One attack step. Requires x == Observe(state). Environment mode returns
// ApplyModifier(state, x') and its observation; observation mode returns the
// state untouched and x'.
AttackOutcome ApplyAttack(const AttackConfig& cfg, const ActorCritic& agent,
                          const EnvState& state, const Observation& x,
                          std::mt19937_64& rng);

struct AttackSummary {
  std::int64_t steps = 0;
  std::int64_t attacked = 0;
  std::int64_t degenerate = 0;
  std::int64_t clamped = 0;
  std::int64_t state_changed = 0;
  double eta_norm_sum = 0.0;
  double value_delta_sum = 0.0;

  void Add(const AttackDiagnostics& d);
};

// Rollout hook that attacks the live agent at every step. The agent is held
// by reference so training updates are picked up immediately.
class AttackDisturbance : public Disturbance {
 public:
  AttackDisturbance(AttackConfig cfg, const ActorCritic& agent);

  void BeforeAct(EnvState& state, Observation& agent_obs,
                 std::mt19937_64& rng) override;

  // Per-step rows: step,kind,mode,eta_norm,value_delta,degenerate_flag,clamped_flag
  void set_log(std::ostream* log);
  const AttackSummary& summary() const { return summary_; }
  const AttackConfig& config() const { return cfg_; }

 private:
  AttackConfig cfg_;
  const ActorCritic& agent_;
  AttackSummary summary_;
  std::ostream* log_ = nullptr;
};

}  // namespace envadv

#endif  // ENVADV_ATTACKS_H_
