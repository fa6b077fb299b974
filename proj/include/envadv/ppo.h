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

// Actor-critic PPO: clipped surrogate, value regression, entropy bonus and
// GAE advantages. The same trainer drives the discrete protagonist and the
// Gaussian adversaries.

#ifndef ENVADV_PPO_H_
#define ENVADV_PPO_H_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "envadv/env.h"
#include "envadv/net.h"

namespace envadv {

enum class PolicyHead : std::uint8_t { kCategorical = 0, kGaussian = 1 };

struct ActorCritic {
  FeedForwardNet actor;   // logits, or Gaussian means before tanh squashing
  FeedForwardNet critic;  // scalar value
  PolicyHead head = PolicyHead::kCategorical;
  Vector log_std;         // per action dimension, Gaussian head only

  int obs_dim() const { return actor.input_dim(); }
  int action_dim() const { return actor.output_dim(); }
  void Validate() const;
  friend bool operator==(const ActorCritic& a, const ActorCritic& b);
};

ActorCritic MakeActorCritic(int obs_dim, int action_dim, PolicyHead head,
                            const std::vector<int>& hidden,
                            std::mt19937_64& rng, double init_log_std = -0.5);

// Discrete index, or the pre-tanh Gaussian sample together with its squashed
// value in [-1, 1].
struct Action {
  int discrete = -1;
  Vector raw;
  Vector squashed;
};

struct ActResult {
  Action action;
  double log_prob = 0.0;
  double value = 0.0;
};

// Samples from the policy. Throws NumericError on non-finite network output.
ActResult Act(const ActorCritic& ac, const Observation& x, std::mt19937_64& rng);
// Argmax of the logits, or tanh of the mean.
Action GreedyAction(const ActorCritic& ac, const Observation& x);
double LogProb(const ActorCritic& ac, const Observation& x, const Action& action);
double Value(const ActorCritic& ac, const Observation& x);

struct Transition {
  Observation obs;
  Action action;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;  // episode ended here; the advantage chain is cut
  // V(x_{t+1}) used when done or at the end of the trajectory: 0 for a
  // terminal state, the critic estimate for a truncation.
  double bootstrap_value = 0.0;
};

struct Trajectory {
  std::vector<Transition> steps;
};

struct PPOHyperparams {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  double learning_rate = 3e-4;
  int epochs_per_update = 4;
  int minibatch_size = 64;
  int rollout_length = 2048;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;  // per network; <= 0 disables clipping

  void Validate() const;
  friend bool operator==(const PPOHyperparams&, const PPOHyperparams&) = default;
};

struct GaeResult {
  std::vector<double> advantages;  // raw, not normalized
  std::vector<double> returns;     // advantages + values
};

GaeResult ComputeGae(const Trajectory& traj, const PPOHyperparams& hp);

// Minibatch view used by the loss.
struct PpoBatch {
  Matrix obs;  // (obs_dim, n)
  std::vector<Action> actions;
  Vector old_log_probs;
  Vector advantages;  // already normalized
  Vector returns;
};

struct PpoLoss {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

struct PpoGradients {
  Gradient actor;
  Gradient critic;
  Vector log_std;
};

PpoLoss EvaluateLoss(const ActorCritic& ac, const PpoBatch& batch,
                     const PPOHyperparams& hp);
// Gradients of PpoLoss::total.
PpoGradients LossGradients(const ActorCritic& ac, const PpoBatch& batch,
                           const PPOHyperparams& hp, PpoLoss* loss = nullptr);

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t steps = 0;
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Adam step on a flat parameter vector.
void AdamStep(Vector& params, const Vector& grad, AdamState& state, double lr);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
};

// Owns one ActorCritic and its optimizer moments.
class PpoTrainer {
 public:
  PpoTrainer(ActorCritic ac, PPOHyperparams hp);

  // Epochs of shuffled minibatch updates over `traj`. Throws NumericError
  // when a loss or gradient is not finite.
  UpdateStats Update(const Trajectory& traj, std::mt19937_64& rng);

  const ActorCritic& agent() const { return ac_; }
  ActorCritic& mutable_agent() { return ac_; }
  const PPOHyperparams& hyperparams() const { return hp_; }
  PPOHyperparams& mutable_hyperparams() { return hp_; }

  // Versioned binary checkpoint: both nets, log-std and Adam moments.
  void Save(std::ostream& out) const;
  static PpoTrainer Load(std::istream& in, PPOHyperparams hp);

  friend bool operator==(const PpoTrainer& a, const PpoTrainer& b);

 private:
  void ApplyGradients(const PpoGradients& grads);

  ActorCritic ac_;
  PPOHyperparams hp_;
  AdamState actor_opt_;
  AdamState critic_opt_;
  AdamState log_std_opt_;
};

// Environment or observation disturbance injected into rollouts. BeforeAct
// sees the true observation in `agent_obs` (== Observe(state)) and may
// rewrite the state, the observation handed to the protagonist, or both.
class Disturbance {
 public:
  virtual ~Disturbance() = default;
  virtual void BeforeAct(EnvState& state, Observation& agent_obs,
                         std::mt19937_64& rng) = 0;
  virtual void AfterStep(const StepResult& /*result*/) {}
};

struct EpisodeStats {
  double total_return = 0.0;
  double metric = 0.0;  // distance or survived steps
  int length = 0;
};

// Persistent cursor over a stream of episodes. Episode i is reset with a
// seed derived from (cfg.seed, i).
class RolloutCollector {
 public:
  explicit RolloutCollector(EnvConfig cfg);

  Trajectory Collect(const ActorCritic& ac, int steps, std::mt19937_64& rng,
                     Disturbance* disturbance = nullptr);

  // Episodes finished since the last call.
  std::vector<EpisodeStats> TakeFinishedEpisodes();
  const EnvConfig& config() const { return cfg_; }

 private:
  void StartEpisode();

  EnvConfig cfg_;
  EnvState state_;
  Observation obs_;
  std::uint64_t episode_index_ = 0;
  EpisodeStats current_;
  std::vector<EpisodeStats> finished_;
};

std::uint64_t EpisodeSeed(std::uint64_t base_seed, std::uint64_t episode);

// Greedy evaluation over `episodes` episodes; episode i uses
// EpisodeSeed(cfg.seed, i).
std::vector<EpisodeStats> EvaluatePolicy(const ActorCritic& ac,
                                         const EnvConfig& cfg, int episodes,
                                         std::mt19937_64& rng,
                                         Disturbance* disturbance = nullptr);

// One point of a training curve: episodes finished during one update window.
struct CurvePoint {
  std::int64_t step = 0;  // environment steps consumed so far
  int episodes = 0;
  double mean_return = 0.0;
  double mean_metric = 0.0;
};

// Runs `steps` environment steps of PPO in rollout-length windows, updating
// after each window. Appends one curve point per window when `curve` is set.
// Returns the step counter after training (step_offset + steps).
std::int64_t TrainPpo(PpoTrainer& trainer, RolloutCollector& collector,
                      std::int64_t steps, std::mt19937_64& rng,
                      Disturbance* disturbance = nullptr,
                      std::vector<CurvePoint>* curve = nullptr,
                      std::int64_t step_offset = 0);

}  // namespace envadv

#endif  // ENVADV_PPO_H_
