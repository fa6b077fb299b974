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

// Adversary-agent baselines. A learned adversary disturbs the environment
// through the same state modifier as the gradient attacks, with the same L2
// budget: eta = eps * u / max(1, ||u||) on the attackable features.
//
// Schedules:
//   RARL  adversary phase (protagonist frozen), then protagonist phase.
//   FSP   as RARL, with a supervised average-strategy model mixed in per
//         episode during the protagonist phase.
//   CO-FSP  FSP with the two agents alternating in fixed blocks.

#ifndef ENVADV_ADVERSARIES_H_
#define ENVADV_ADVERSARIES_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "envadv/env.h"
#include "envadv/net.h"
#include "envadv/ppo.h"

namespace envadv {

int CountMask(const FeatureMask& mask);

struct AdversaryAgent {
  ActorCritic policy;  // Gaussian head, one output per attackable feature
  double epsilon = 0.05;

  void Validate(const FeatureMask& mask) const;
};

AdversaryAgent MakeAdversary(EnvKind kind, double epsilon,
                             const std::vector<int>& hidden, std::mt19937_64& rng);

struct Disturbed {
  EnvState state;
  Vector eta;  // full observation length, zero off the mask
  double eta_norm = 0.0;
};

// Deterministic core of the adversary step for a given action u in [-1,1]^k.
Disturbed DisturbWithAction(const EnvState& state, const Vector& u,
                            const FeatureMask& mask, double epsilon);

// Samples u from the adversary policy and applies it. `sampled` receives the
// draw when non-null.
Disturbed AdversaryDisturb(const AdversaryAgent& adv, const EnvState& state,
                           const FeatureMask& mask, std::mt19937_64& rng,
                           ActResult* sampled = nullptr);

struct CooperationConfig {
  double alpha = 0.0;  // 0 is zero-sum
  double cooperative_reward_scale = 1.0;

  void Validate() const;
};

// alpha * R_c - (1 - alpha) * r_p with R_c = scale * (1 - eta_norm / eps).
double AdversaryReward(double r_protagonist, double eta_norm, double epsilon,
                       const CooperationConfig& coop);

// Supervised model of the adversary's historical actions: tanh(net(x))
// regressed onto stored actions, with a reservoir-sampled buffer.
class AverageStrategyModel {
 public:
  AverageStrategyModel(int obs_dim, int action_dim, const std::vector<int>& hidden,
                       std::size_t capacity, std::mt19937_64& rng,
                       double learning_rate = 1e-3);

  void Add(const Observation& x, const Vector& u, std::mt19937_64& rng);

  // Epochs of shuffled minibatch Adam steps on the mean squared error.
  // Returns the full-buffer loss after each epoch. Throws ConfigError on an
  // empty buffer.
  std::vector<double> Fit(int epochs, int minibatch_size, std::mt19937_64& rng);

  double Loss() const;
  Vector Predict(const Observation& x) const;

  const FeedForwardNet& net() const { return net_; }
  std::size_t buffer_size() const { return inputs_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::int64_t seen() const { return seen_; }

 private:
  FeedForwardNet net_;
  std::size_t capacity_;
  double learning_rate_;
  AdamState opt_;
  std::vector<Observation> inputs_;
  std::vector<Vector> targets_;
  std::int64_t seen_ = 0;
};

enum class AttackerModel { kRL, kSL };

// RL with probability mix_probability.
AttackerModel FspSampleAttacker(std::mt19937_64& rng, double mix_probability);

// Rollout hook driven by an adversary policy. In recording mode every RL
// step becomes a transition of the adversary's own trajectory, rewarded with
// AdversaryReward after the environment step.
class AdversaryDisturbance : public Disturbance {
 public:
  AdversaryDisturbance(const ActorCritic& policy, double epsilon, FeatureMask mask,
                       CooperationConfig coop);

  void BeforeAct(EnvState& state, Observation& agent_obs,
                 std::mt19937_64& rng) override;
  void AfterStep(const StepResult& result) override;

  // Recording collects PPO transitions (RL model only) and, when a model
  // is attached, (x, u) pairs for the average strategy.
  void set_recording(bool on) { recording_ = on; }
  // Per-episode RL/SL mixing; nullptr disables the SL model.
  void set_average_strategy(AverageStrategyModel* model, double mix_probability);
  void set_record_pairs(AverageStrategyModel* model) { pair_sink_ = model; }

  Trajectory TakeTrajectory();

  struct Totals {
    std::int64_t steps = 0;
    std::int64_t sl_steps = 0;
    double adversary_reward = 0.0;
    double protagonist_reward = 0.0;
  };
  Totals TakeTotals();

 private:
  const ActorCritic& policy_;
  double epsilon_;
  FeatureMask mask_;
  CooperationConfig coop_;
  bool recording_ = false;
  AverageStrategyModel* sl_model_ = nullptr;
  AverageStrategyModel* pair_sink_ = nullptr;
  double mix_probability_ = 1.0;
  bool episode_start_ = true;
  AttackerModel current_ = AttackerModel::kRL;
  bool pending_ = false;
  double pending_eta_norm_ = 0.0;
  Transition pending_tr_;
  Trajectory traj_;
  Totals totals_;
};

enum class ScheduleKind { kRarlSequential, kFspSequential, kCoFspAlternating };

std::string ScheduleKindName(ScheduleKind kind);

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::kRarlSequential;
  std::int64_t adversary_steps = 75000;
  std::int64_t protagonist_steps = 75000;
  std::int64_t block_steps = 10000;  // CO-FSP alternation block
  double epsilon = 0.05;
  CooperationConfig coop;
  double fsp_mix_probability = 0.5;
  std::size_t sl_capacity = 50000;
  int sl_epochs = 2;
  int sl_minibatch = 64;
  std::vector<int> adversary_hidden = {64, 64};
  PPOHyperparams adversary_hp;

  void Validate() const;
};

struct ScheduleLogRow {
  std::string phase;
  std::string agent;  // the agent being trained
  std::int64_t steps = 0;
  double mean_adversary_reward = 0.0;
  double mean_protagonist_reward = 0.0;
  bool frozen_ok = true;  // the other agent stayed bitwise constant
};

void WriteScheduleLog(std::ostream& out, const std::vector<ScheduleLogRow>& rows);

struct ScheduleResult {
  PpoTrainer protagonist;
  PpoTrainer adversary;
  std::optional<AverageStrategyModel> average_strategy;
  std::vector<ScheduleLogRow> log;
  std::vector<CurvePoint> curve;  // protagonist training episodes
};

// Trains from a pretrained protagonist. Throws ConfigError when `pretrained`
// is null. With zero adversary steps no disturbance is applied.
ScheduleResult RunSchedule(const ScheduleConfig& cfg, const PpoTrainer* pretrained,
                           const EnvConfig& env, std::mt19937_64& rng);

}  // namespace envadv

#endif  // ENVADV_ADVERSARIES_H_
