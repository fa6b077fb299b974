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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "envadv/commands.h"
#include "envadv/errors.h"
#include "envadv/runner.h"

namespace envadv {
namespace {

namespace fs = std::filesystem;

ExperimentPlan TinyPlan(EnvKind kind = EnvKind::kFlappy) {
  ExperimentPlan plan = DefaultPlan(kind, Profile::kDesk);
  plan.seeds = {1, 2};
  plan.pretrain_steps = 256;
  plan.train_steps = 256;
  plan.hidden = {8};
  plan.ppo.rollout_length = 128;
  plan.ppo.minibatch_size = 64;
  plan.ppo.epochs_per_update = 1;
  plan.block_steps = 64;
  plan.eval_episodes = 2;
  plan.sl_capacity = 200;
  plan.sl_epochs = 1;
  return plan;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string FirstLine(const std::string& text) { return text.substr(0, text.find('\n')); }

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("envadv_runner_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST_CASE("Student-t critical values match the table") {
  const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262};
  for (int n = 2; n <= 10; ++n) {
    CHECK(StudentTCritical(n - 1) == doctest::Approx(table[n - 2]).epsilon(1e-3));
  }
  CHECK_THROWS_AS(StudentTCritical(0), ConfigError);
}

TEST_CASE("confidence intervals over seed means") {
  const Interval i = StudentTInterval({1, 2, 3, 4, 5});
  CHECK(i.mean == doctest::Approx(3.0));
  REQUIRE(i.half_width.has_value());
  CHECK(*i.half_width == doctest::Approx(1.963).epsilon(1e-3));

  const Interval flat = StudentTInterval({0.1, 0.1, 0.1});
  CHECK(flat.half_width == 0.0);
  CHECK(flat.mean == 0.1);

  const Interval single = StudentTInterval({7.0});
  CHECK(single.mean == 7.0);
  CHECK_FALSE(single.half_width.has_value());
}

TEST_CASE("best epsilon: argmax with ties to the smaller budget") {
  auto report = [](double eps, double metric) {
    return MakeReport("eacn", eps, 0.0, 100.0, {SeedEval{1, 1, metric, metric}}, "h");
  };
  CHECK(BestEpsilonIndex({report(0.05, 3.0)}) == 0);
  CHECK(BestEpsilonIndex({report(0.1, 2.0), report(0.05, 5.0), report(0.2, 4.0)}) == 1);
  CHECK(BestEpsilonIndex({report(0.1, 5.0), report(0.05, 5.0)}) == 1);
  CHECK_THROWS_AS(BestEpsilonIndex({}), ConfigError);
}

TEST_CASE("plan defaults and difficulty grids") {
  const ExperimentPlan h = DefaultPlan(EnvKind::kHighway, Profile::kDesk);
  CHECK(h.difficulty_grid == std::vector<double>{1.0, 1.25, 1.5, 1.75, 2.0});
  CHECK(h.seeds.size() == 5);
  CHECK(h.eval_episodes == 200);
  CHECK(h.pretrain_steps == 75000);
  CHECK(h.train_steps == 150000);
  const ExperimentPlan f = DefaultPlan(EnvKind::kFlappy, Profile::kFull);
  CHECK(f.difficulty_grid.front() == 150.0);
  CHECK(f.difficulty_grid.back() == 100.0);
  CHECK(f.difficulty_grid.size() == 5);
  CHECK(f.pretrain_steps == 1000000);
  CHECK(f.train_steps == 2000000);
  CHECK(f.epsilon_grid == std::vector<double>{0.01, 0.02, 0.05, 0.1, 0.2});
}

TEST_CASE("plan files round trip and reject unknown keys") {
  std::istringstream text(
      "[env]\nkind = highway\n\n[method]\nname = co_fsp\nalpha = 0.2\n"
      "[training]\nseeds = 3, 4\nhidden = 32,32\n"
      "[eval]\nsweep_epsilons = eacn:0.05, oaan:0.1\n");
  const ExperimentPlan plan = ParsePlan(text, Profile::kDesk);
  CHECK(plan.env.kind == EnvKind::kHighway);
  CHECK(plan.env.difficulty == 1.0);
  CHECK(plan.method == Method::kCoFSP);
  CHECK(plan.alpha == 0.2);
  CHECK(plan.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(SweepEpsilon(plan, Method::kOAAN) == 0.1);
  CHECK(SweepEpsilon(plan, Method::kEAAN) == plan.epsilon);

  std::istringstream canonical(CanonicalPlan(plan));
  const ExperimentPlan again = ParsePlan(canonical, Profile::kFull);
  CHECK(again == plan);
  CHECK(ConfigHash(again) == ConfigHash(plan));

  std::istringstream unknown("[training]\nlearning_rte = 0.1\n");
  CHECK_THROWS_AS(ParsePlan(unknown, Profile::kDesk), ConfigError);
  std::istringstream section("[bogus]\nseeds = 1\n");
  CHECK_THROWS_AS(ParsePlan(section, Profile::kDesk), ConfigError);
  std::istringstream bad_value("[method]\nepsilon = abc\n");
  CHECK_THROWS_AS(ParsePlan(bad_value, Profile::kDesk), ConfigError);
  std::istringstream no_seeds("[training]\nseeds =\n");
  CHECK_THROWS_AS(ParsePlan(no_seeds, Profile::kDesk), ConfigError);
  CHECK_THROWS_AS(ParseMethod("pgd"), ConfigError);
}

TEST_CASE("pretraining is deterministic and zero steps keeps the initialization") {
  ExperimentPlan plan = TinyPlan();
  std::ostringstream a, b;
  RunPretrain(plan, 1).trainer.Save(a);
  RunPretrain(plan, 1).trainer.Save(b);
  CHECK(a.str() == b.str());

  plan.pretrain_steps = 0;
  const PretrainResult zero = RunPretrain(plan, 1);
  std::mt19937_64 rng(StreamSeed(1, "pretrain"));
  const ActorCritic init = MakeActorCritic(6, 2, PolicyHead::kCategorical, plan.hidden, rng);
  CHECK(zero.trainer == PpoTrainer(init, plan.ppo));
  CHECK(zero.curve.empty());
}

TEST_CASE("method dispatch and arm purity") {
  const ExperimentPlan plan = TinyPlan();
  const PpoTrainer pretrained = RunPretrain(plan, 1).trainer;
  CHECK_THROWS_AS(RunAdversarialTraining(plan, {Method::kBaseline}, 1, nullptr), ConfigError);

  const TrainResult baseline = RunAdversarialTraining(plan, {Method::kBaseline}, 1, &pretrained);
  CHECK_FALSE(baseline.attacks_applied);
  CHECK(baseline.difficulty == plan.env.difficulty);
  // The baseline arm is plain continued PPO.
  PpoTrainer manual = pretrained;
  std::mt19937_64 rng(StreamSeed(1, "train"));
  RolloutCollector collector(EnvAt(plan, plan.env.difficulty, StreamSeed(1, "train-env")));
  TrainPpo(manual, collector, plan.train_steps, rng);
  CHECK(manual == baseline.trainer);

  const TrainResult target = RunAdversarialTraining(plan, {Method::kTarget}, 1, &pretrained);
  CHECK(target.difficulty == 100.0);
  CHECK_FALSE(target.attacks_applied);

  std::ostringstream log;
  const TrainResult eacn =
      RunAdversarialTraining(plan, {Method::kEACN, 0.05}, 1, &pretrained, &log);
  REQUIRE(eacn.attack.has_value());
  CHECK(eacn.attack->steps == plan.train_steps);
  CHECK(eacn.attack->attacked == plan.train_steps);
  CHECK(eacn.attack->degenerate == 0);
  CHECK(FirstLine(log.str()) ==
        "step,kind,mode,eta_norm,value_delta,degenerate_flag,clamped_flag");

  const TrainResult rarl =
      RunAdversarialTraining(plan, {Method::kRARL, 0.05, 0.2}, 1, &pretrained);
  CHECK(rarl.adversary.has_value());
  CHECK(rarl.schedule_log.size() == 2);
  for (const ScheduleLogRow& row : rarl.schedule_log) CHECK(row.frozen_ok);
}

TEST_CASE("request normalization shares keys across ignored fields") {
  const ExperimentPlan plan = TinyPlan();
  CheckpointStore store("/tmp/store");
  CHECK(store.TrainPath(plan, {Method::kBaseline, 0.1, 0.3}, 1) ==
        store.TrainPath(plan, {Method::kBaseline, 0.0, 0.0}, 1));
  CHECK(store.TrainPath(plan, {Method::kEACN, 0.1, 0.3}, 1) ==
        store.TrainPath(plan, {Method::kEACN, 0.1, 0.0}, 1));
  CHECK(store.TrainPath(plan, {Method::kEACN, 0.1}, 1) !=
        store.TrainPath(plan, {Method::kEACN, 0.2}, 1));
  CHECK(store.TrainPath(plan, {Method::kRARL, 0.1, 0.1}, 1) !=
        store.TrainPath(plan, {Method::kRARL, 0.1, 0.2}, 1));
  CHECK(store.PretrainPath(plan, 1) != store.PretrainPath(plan, 2));
}

TEST_CASE("attack efficiency table: zero budget equals the clean agent") {
  ExperimentPlan plan = TinyPlan();
  plan.attack_epsilons = {0.0, 0.1};
  plan.attack_methods = {Method::kEACN, Method::kOACN, Method::kRARL};
  std::vector<ActorCritic> agents;
  for (std::uint64_t seed : plan.seeds) agents.push_back(RunPretrain(plan, seed).trainer.agent());
  const std::vector<AttackEvalRow> rows = AttackEfficiencyEval(plan, agents);
  REQUIRE(rows.size() == 6);
  for (const AttackEvalRow& row : rows) {
    if (row.report.epsilon == 0.0) {
      CHECK(row.report.metric.mean == rows[0].report.metric.mean);
      CHECK(row.attacked_steps == 0);
    }
    if (row.attack == Method::kOACN) CHECK(row.state_changed_steps == 0);
  }
  std::ostringstream csv;
  WriteAttackEvalCsv(csv, rows);
  CHECK(FirstLine(csv.str()) ==
        "attack,epsilon,alpha,difficulty,n_seeds,seed,episodes,mean_return,mean_metric,"
        "ci_return,ci_metric,attacked_steps,state_changed_steps,config_hash");
  std::istringstream lines(csv.str());
  for (std::string line; std::getline(lines, line);) {
    CHECK(std::count(line.begin(), line.end(), ',') == 13);
  }
}

TEST_CASE("commands: pipeline, missing prerequisites and reproducible outputs") {
  ExperimentPlan plan = TinyPlan();
  plan.method = Method::kEACN;
  plan.epsilon = 0.05;
  plan.epsilon_grid = {0.02, 0.05};
  plan.sweep_methods = {Method::kBaseline, Method::kEACN};
  plan.difficulty_grid = {150.0, 100.0};
  plan.attack_methods = {Method::kEACN};
  plan.attack_epsilons = {0.0, 0.05};

  const fs::path dir = TempDir("pipeline");
  CommandContext ctx;
  ctx.out_dir = dir;
  CHECK_THROWS_AS(CommandTrain(plan, ctx), ConfigError);
  CHECK_THROWS_AS(CommandEval(plan, 100.0, ctx), ConfigError);

  const CommandOutput pre = CommandPretrain(plan, ctx);
  CHECK(FirstLine(Slurp(pre.run_dir / "curves.csv")) ==
        "label,epsilon,alpha,seed,step,episodes,mean_return,mean_metric");
  const CommandOutput train = CommandTrain(plan, ctx);
  const std::string train_curves = Slurp(train.run_dir / "curves.csv");
  CHECK(fs::exists(train.run_dir / "attacks-seed-1.csv"));
  const CommandOutput eval = CommandEval(plan, 100.0, ctx);
  const std::string eval_csv = Slurp(eval.run_dir / "eval.csv");
  CHECK(FirstLine(eval_csv) ==
        "label,epsilon,alpha,difficulty,n_seeds,seed,episodes,mean_return,mean_metric,"
        "ci_return,ci_metric,config_hash");
  const CommandOutput grid = CommandGrid(plan, ctx);
  const CommandOutput sweep = CommandSweep(plan, ctx);
  const CommandOutput attack = CommandAttackEval(plan, ctx);
  const std::string manifest = Slurp(train.run_dir / "manifest.json");
  CHECK(manifest.find("\"arm_purity\": true") != std::string::npos);
  CHECK(manifest.find(ConfigHash(plan)) != std::string::npos);
  CHECK(Slurp(grid.run_dir / "manifest.json").find("best_epsilon") != std::string::npos);
  // 2 methods x 2 difficulties x (2 seed rows + summary) + header
  const std::string sweep_csv = Slurp(sweep.run_dir / "sweep.csv");
  CHECK(std::count(sweep_csv.begin(), sweep_csv.end(), '\n') == 13);

  // Rerunning reproduces every file byte for byte.
  const std::string grid_csv = Slurp(grid.run_dir / "grid.csv");
  const std::string attack_csv = Slurp(attack.run_dir / "attack_eval.csv");
  CHECK(Slurp(CommandTrain(plan, ctx).run_dir / "curves.csv") == train_curves);
  CHECK(Slurp(CommandEval(plan, 100.0, ctx).run_dir / "eval.csv") == eval_csv);
  CHECK(Slurp(CommandGrid(plan, ctx).run_dir / "grid.csv") == grid_csv);
  CHECK(Slurp(CommandAttackEval(plan, ctx).run_dir / "attack_eval.csv") == attack_csv);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace envadv
