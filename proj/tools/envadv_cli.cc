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

// envadv: command-line front end for the experiment runner.
//
//   envadv [--config PATH] [--seed S] [--out DIR] [--profile desk|full] <command>
//
//   pretrain
//   train --method M [--epsilon E] [--alpha A]
//   eval [--method M] [--epsilon E] [--alpha A] [--difficulty D] [--episodes N]
//   grid --method M
//   sweep
//   attack-eval

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "envadv/commands.h"
#include "envadv/errors.h"
#include "envadv/plan.h"

namespace {

using envadv::ExperimentPlan;

struct MethodFlags {
  std::optional<std::string> method;
  std::optional<double> epsilon;
  std::optional<double> alpha;

  void Add(CLI::App* cmd, bool method_required) {
    auto* opt = cmd->add_option("--method", method,
                                "baseline|target|eacn|eaan|oacn|oaan|rarl|fsp|co-fsp");
    if (method_required) opt->required();
    cmd->add_option("--epsilon", epsilon, "perturbation budget");
    cmd->add_option("--alpha", alpha, "cooperation coefficient");
  }

  void Apply(ExperimentPlan& plan) const {
    if (method) plan.method = envadv::ParseMethod(*method);
    if (epsilon) plan.epsilon = *epsilon;
    if (alpha) plan.alpha = *alpha;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Environment-dynamics adversarial training experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "results";
  std::string profile_name = "desk";
  std::string env_name;
  app.add_option("--config", config_path, "plan file (INI)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "first seed; the plan's seed count is kept");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--profile", profile_name, "desk or full budgets")->capture_default_str();
  app.add_option("--env", env_name, "flappy or highway when no config is given");

  auto* pretrain = app.add_subcommand("pretrain", "pretrain one agent per seed");
  auto* train = app.add_subcommand("train", "train one method from the pretrained agents");
  MethodFlags train_flags;
  train_flags.Add(train, true);

  auto* eval = app.add_subcommand("eval", "evaluate trained agents");
  MethodFlags eval_flags;
  eval_flags.Add(eval, false);
  std::optional<double> difficulty;
  std::optional<int> episodes;
  eval->add_option("--difficulty", difficulty, "density (highway) or gap (flappy)");
  eval->add_option("--episodes", episodes, "episodes per seed");

  auto* grid = app.add_subcommand("grid", "epsilon grid search for one method");
  MethodFlags grid_flags;
  grid_flags.Add(grid, true);
  auto* sweep = app.add_subcommand("sweep", "robustness sweep over the difficulty grid");
  auto* attack_eval = app.add_subcommand("attack-eval", "attack the baseline agents");

  CLI11_PARSE(app, argc, argv);

  try {
    const envadv::Profile profile = envadv::ParseProfile(profile_name);
    ExperimentPlan plan;
    if (!config_path.empty()) {
      plan = envadv::LoadPlanFile(config_path, profile);
    } else {
      plan = envadv::DefaultPlan(
          env_name.empty() ? envadv::EnvKind::kFlappy : envadv::ParseEnvKind(env_name),
          profile);
    }
    if (!config_path.empty() && !env_name.empty() &&
        envadv::ParseEnvKind(env_name) != plan.env.kind) {
      throw envadv::ConfigError("--env disagrees with the config file");
    }
    if (seed) {
      for (std::size_t i = 0; i < plan.seeds.size(); ++i) plan.seeds[i] = *seed + i;
    }
    envadv::CommandContext ctx;
    ctx.out_dir = out_dir;
    ctx.profile = profile;
    ctx.log = &std::cerr;

    envadv::CommandOutput out;
    if (*pretrain) {
      out = envadv::CommandPretrain(plan, ctx);
    } else if (*train) {
      train_flags.Apply(plan);
      plan.Validate();
      out = envadv::CommandTrain(plan, ctx);
    } else if (*eval) {
      eval_flags.Apply(plan);
      if (episodes) plan.eval_episodes = *episodes;
      plan.Validate();
      out = envadv::CommandEval(plan, difficulty.value_or(plan.env.difficulty), ctx);
    } else if (*grid) {
      grid_flags.Apply(plan);
      plan.Validate();
      out = envadv::CommandGrid(plan, ctx);
    } else if (*sweep) {
      out = envadv::CommandSweep(plan, ctx);
    } else if (*attack_eval) {
      out = envadv::CommandAttackEval(plan, ctx);
    }
    std::cout << out.run_dir.string() << '\n';
  } catch (const envadv::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
