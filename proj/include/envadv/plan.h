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

// Experiment plans: every knob of a run, loadable from an INI file with
// sections, and a canonical text form whose hash identifies the run.

#ifndef ENVADV_PLAN_H_
#define ENVADV_PLAN_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "envadv/env.h"
#include "envadv/ppo.h"

namespace envadv {

enum class Method {
  kBaseline,
  kTarget,
  kEACN,
  kEAAN,
  kOACN,
  kOAAN,
  kRARL,
  kFSP,
  kCoFSP,
};

std::string MethodName(Method method);
// Accepts the names printed by MethodName, case-insensitively, with '_' for '-'.
Method ParseMethod(std::string_view name);
bool IsGradientMethod(Method method);
bool IsAdversaryMethod(Method method);

enum class Profile { kDesk, kFull };

Profile ParseProfile(std::string_view name);
std::string ProfileName(Profile profile);

struct ExperimentPlan {
  EnvConfig env;  // base environment; env.seed is replaced per seed
  double target_difficulty = 0.0;

  Method method = Method::kBaseline;
  double epsilon = 0.05;
  double alpha = 0.0;
  double attack_probability = 1.0;
  std::vector<double> epsilon_grid;
  std::vector<double> alpha_grid;

  std::vector<std::uint64_t> seeds;
  std::int64_t pretrain_steps = 0;
  std::int64_t train_steps = 0;
  std::vector<int> hidden;
  PPOHyperparams ppo;

  std::int64_t block_steps = 0;  // CO-FSP alternation block
  double fsp_mix = 0.5;
  std::int64_t sl_capacity = 50000;
  int sl_epochs = 2;
  double cooperative_reward_scale = 1.0;

  int eval_episodes = 200;
  std::vector<double> difficulty_grid;
  std::vector<Method> sweep_methods;
  // Per-method budget for the sweep (e.g. from a grid search); methods not
  // listed use `epsilon`.
  std::vector<std::pair<Method, double>> sweep_epsilons;
  std::vector<Method> attack_methods;
  std::vector<double> attack_epsilons;  // attack-eval grid, may include 0
  bool attack_log = true;  // per-step attack diagnostics during training

  // Throws ConfigError on any inconsistent field.
  void Validate() const;
  friend bool operator==(const ExperimentPlan&, const ExperimentPlan&) = default;
};

ExperimentPlan DefaultPlan(EnvKind kind, Profile profile);

double SweepEpsilon(const ExperimentPlan& plan, Method method);

// INI text over the defaults of `profile` for the environment named by
// [env] kind (flappy when absent). Unknown sections or keys are rejected.
ExperimentPlan ParsePlan(std::istream& in, Profile profile);
ExperimentPlan LoadPlanFile(const std::string& path, Profile profile);

// Every field in a fixed order and full precision; ParsePlan inverts it.
std::string CanonicalPlan(const ExperimentPlan& plan);

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double value);

std::uint64_t Fnv1a64(std::string_view text);
std::string HexDigest(std::uint64_t value);
std::string ConfigHash(const ExperimentPlan& plan);

}  // namespace envadv

#endif  // ENVADV_PLAN_H_
