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

// The command-line operations as library calls. Each command writes its
// outputs to <out>/<run-id>/ where the run id is derived from the command,
// its arguments and the plan hash, so reruns overwrite identical files.
//
// Output files (fixed headers):
//   curves.csv       label,epsilon,alpha,seed,step,episodes,mean_return,mean_metric
//   eval.csv         label,epsilon,alpha,difficulty,n_seeds,seed,episodes,
//                    mean_return,mean_metric,ci_return,ci_metric,config_hash
//   grid.csv         as eval.csv, one report per epsilon at the target difficulty
//   sweep.csv        as eval.csv, one report per (method, difficulty)
//   attack_eval.csv  attack,epsilon,alpha,difficulty,n_seeds,seed,episodes,
//                    mean_return,mean_metric,ci_return,ci_metric,
//                    attacked_steps,state_changed_steps,config_hash
//   attacks-seed-S.csv   step,kind,mode,eta_norm,value_delta,degenerate_flag,clamped_flag
//   schedule-seed-S.csv  phase,agent,steps,mean_adversary_reward,
//                        mean_protagonist_reward,frozen_ok
//   manifest.json    run id, command, config hash, seeds, versions, outputs

#ifndef ENVADV_COMMANDS_H_
#define ENVADV_COMMANDS_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "envadv/plan.h"

namespace envadv {

inline constexpr char kVersion[] = "0.1.0";

struct CommandContext {
  std::filesystem::path out_dir = "results";
  Profile profile = Profile::kDesk;
  std::ostream* log = nullptr;  // progress lines
};

struct CommandOutput {
  std::string run_id;
  std::filesystem::path run_dir;
  std::vector<std::string> files;
};

// Pretrains one agent per seed and caches the checkpoints.
CommandOutput CommandPretrain(const ExperimentPlan& plan, const CommandContext& ctx);
// Trains plan.method (with plan.epsilon / plan.alpha) from the cached
// pretrained checkpoints; ConfigError when they are missing.
CommandOutput CommandTrain(const ExperimentPlan& plan, const CommandContext& ctx);
// Evaluates the trained plan.method checkpoints at `difficulty`.
CommandOutput CommandEval(const ExperimentPlan& plan, double difficulty,
                          const CommandContext& ctx);
// Trains (or reuses) plan.method for every epsilon of the grid and picks the
// best mean metric at the target difficulty.
CommandOutput CommandGrid(const ExperimentPlan& plan, const CommandContext& ctx);
// Every sweep method over the difficulty grid.
CommandOutput CommandSweep(const ExperimentPlan& plan, const CommandContext& ctx);
// Attacks the trained baseline agents with every attack method and budget.
CommandOutput CommandAttackEval(const ExperimentPlan& plan, const CommandContext& ctx);

}  // namespace envadv

#endif  // ENVADV_COMMANDS_H_
