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

#include "envadv/commands.h"

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "envadv/errors.h"
#include "envadv/runner.h"
#include "json.hpp"

namespace envadv {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

class Run {
 public:
  Run(const std::string& command, const std::string& tag, const ExperimentPlan& plan,
      const CommandContext& ctx)
      : plan_(plan), ctx_(ctx), store_(ctx.out_dir) {
    plan.Validate();
    const std::string digest =
        HexDigest(Fnv1a64(CanonicalPlan(plan) + "|" + command + "|" + tag));
    out_.run_id = command + "-" + EnvKindName(plan.env.kind) + (tag.empty() ? "" : "-" + tag) +
                  "-" + digest.substr(0, 10);
    out_.run_dir = ctx.out_dir / out_.run_id;
    fs::create_directories(out_.run_dir);
    manifest_["run_id"] = out_.run_id;
    manifest_["command"] = command;
    manifest_["config_hash"] = ConfigHash(plan);
    manifest_["profile"] = ProfileName(ctx.profile);
    manifest_["env"] = EnvKindName(plan.env.kind);
    manifest_["seeds"] = plan.seeds;
    manifest_["versions"] = {
        {"envadv", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"boost", BOOST_LIB_VERSION},
        {"compiler", __VERSION__}};
    manifest_["config"] = CanonicalPlan(plan);
  }

  const CheckpointStore& store() const { return store_; }
  Json& manifest() { return manifest_; }

  void Log(const std::string& line) const {
    if (ctx_.log != nullptr) *ctx_.log << "[" << out_.run_id << "] " << line << std::endl;
  }

  void Write(const std::string& name, const std::string& content) {
    std::ofstream out(out_.run_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + (out_.run_dir / name).string());
    out << content;
    out_.files.push_back(name);
  }

  CommandOutput Finish() {
    manifest_["outputs"] = out_.files;
    std::ofstream out(out_.run_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest_.dump(2) << '\n';
    out_.files.push_back("manifest.json");
    Log("wrote " + out_.run_dir.string());
    return out_;
  }

  PpoTrainer LoadPretrained(std::uint64_t seed) const {
    const fs::path path = store_.PretrainPath(plan_, seed);
    if (!fs::exists(path)) {
      throw ConfigError("no pretrained checkpoint for seed " + std::to_string(seed) +
                        " (expected " + path.string() + "); run pretrain first");
    }
    return store_.Load(path, plan_.ppo);
  }

  // Cached trained checkpoint, training it first when absent.
  PpoTrainer Trained(const TrainRequest& req, std::uint64_t seed) const {
    const fs::path path = store_.TrainPath(plan_, req, seed);
    if (fs::exists(path)) return store_.Load(path, plan_.ppo);
    Log("training " + MethodName(req.method) + " eps=" + FormatDouble(req.epsilon) +
        " seed=" + std::to_string(seed));
    const PpoTrainer pretrained = LoadPretrained(seed);
    TrainResult result = RunAdversarialTraining(plan_, req, seed, &pretrained);
    store_.Save(path, result.trainer);
    return std::move(result.trainer);
  }

 private:
  const ExperimentPlan& plan_;
  const CommandContext& ctx_;
  CheckpointStore store_;
  CommandOutput out_;
  Json manifest_;
};

std::string RequestTag(const TrainRequest& req) {
  std::string tag = MethodName(req.method);
  if (IsGradientMethod(req.method) || IsAdversaryMethod(req.method)) {
    tag += "-e" + FormatDouble(req.epsilon);
  }
  if (IsAdversaryMethod(req.method)) tag += "-a" + FormatDouble(req.alpha);
  return tag;
}

TrainRequest PlanRequest(const ExperimentPlan& plan) {
  return TrainRequest{plan.method, plan.epsilon, plan.alpha}.Normalized();
}

// Baseline and target arms never see an attack and train at their own
// difficulty; anything else is a wiring bug.
void CheckArmPurity(const ExperimentPlan& plan, Method method, const TrainResult& r) {
  if (method != Method::kBaseline && method != Method::kTarget) return;
  if (r.attacks_applied) throw std::logic_error(MethodName(method) + " arm applied attacks");
  if (r.difficulty != TrainingDifficulty(plan, method)) {
    throw std::logic_error(MethodName(method) + " arm trained at the wrong difficulty");
  }
}

}  // namespace

CommandOutput CommandPretrain(const ExperimentPlan& plan, const CommandContext& ctx) {
  Run run("pretrain", "", plan, ctx);
  std::ostringstream curves;
  std::vector<SeedEval> evals;
  bool header = true;
  for (std::uint64_t seed : plan.seeds) {
    run.Log("pretraining seed " + std::to_string(seed));
    PretrainResult r = RunPretrain(plan, seed);
    run.store().Save(run.store().PretrainPath(plan, seed), r.trainer);
    WriteCurvesCsv(curves, "pretrain", 0.0, 0.0, seed, r.curve, header);
    header = false;
    evals.push_back(EvaluateSeed(r.trainer.agent(), plan, plan.env.difficulty, seed));
  }
  std::ostringstream eval;
  WriteEvalCsv(eval, {MakeReport("pretrain", 0.0, 0.0, plan.env.difficulty, evals,
                                 ConfigHash(plan))});
  run.Write("curves.csv", curves.str());
  run.Write("eval.csv", eval.str());
  run.manifest()["pretrain_steps"] = plan.pretrain_steps;
  return run.Finish();
}

CommandOutput CommandTrain(const ExperimentPlan& plan, const CommandContext& ctx) {
  const TrainRequest req = PlanRequest(plan);
  Run run("train", RequestTag(req), plan, ctx);
  std::ostringstream curves;
  Json coverage = Json::array();
  bool header = true;
  for (std::uint64_t seed : plan.seeds) {
    const PpoTrainer pretrained = run.LoadPretrained(seed);
    run.Log("training " + MethodName(req.method) + " seed " + std::to_string(seed));
    std::ostringstream attack_log;
    const bool log_attacks = IsGradientMethod(req.method) && plan.attack_log;
    TrainResult r = RunAdversarialTraining(plan, req, seed, &pretrained,
                                           log_attacks ? &attack_log : nullptr);
    CheckArmPurity(plan, req.method, r);
    const fs::path path = run.store().TrainPath(plan, req, seed);
    run.store().Save(path, r.trainer);
    if (r.adversary) run.store().Save(path.string() + ".adversary", *r.adversary);
    WriteCurvesCsv(curves, MethodName(req.method), req.epsilon, req.alpha, seed, r.curve,
                   header);
    header = false;
    const std::string suffix = "-seed-" + std::to_string(seed) + ".csv";
    if (log_attacks) run.Write("attacks" + suffix, attack_log.str());
    if (!r.schedule_log.empty()) {
      std::ostringstream sched;
      WriteScheduleLog(sched, r.schedule_log);
      run.Write("schedule" + suffix, sched.str());
    }
    Json cell = {{"seed", seed}, {"difficulty", r.difficulty},
                 {"attacks_applied", r.attacks_applied}};
    if (r.attack) {
      cell["steps"] = r.attack->steps;
      cell["attacked"] = r.attack->attacked;
      cell["degenerate"] = r.attack->degenerate;
      cell["clamped"] = r.attack->clamped;
      cell["state_changed"] = r.attack->state_changed;
    }
    coverage.push_back(cell);
  }
  run.Write("curves.csv", curves.str());
  run.manifest()["method"] = MethodName(req.method);
  run.manifest()["epsilon"] = req.epsilon;
  run.manifest()["alpha"] = req.alpha;
  run.manifest()["arm_purity"] = true;
  run.manifest()["cells"] = coverage;
  return run.Finish();
}

CommandOutput CommandEval(const ExperimentPlan& plan, double difficulty,
                          const CommandContext& ctx) {
  const TrainRequest req = PlanRequest(plan);
  Run run("eval", RequestTag(req) + "-d" + FormatDouble(difficulty), plan, ctx);
  std::vector<SeedEval> evals;
  for (std::uint64_t seed : plan.seeds) {
    const fs::path path = run.store().TrainPath(plan, req, seed);
    if (!fs::exists(path)) {
      throw ConfigError("no trained checkpoint for " + RequestTag(req) + " seed " +
                        std::to_string(seed) + "; run train first");
    }
    const PpoTrainer trainer = run.store().Load(path, plan.ppo);
    evals.push_back(EvaluateSeed(trainer.agent(), plan, difficulty, seed));
  }
  const EvalReport report = MakeReport(MethodName(req.method), req.epsilon, req.alpha,
                                       difficulty, evals, ConfigHash(plan));
  if (!report.metric.half_width) run.Log("fewer than two seeds: confidence interval omitted");
  std::ostringstream eval;
  WriteEvalCsv(eval, {report});
  run.Write("eval.csv", eval.str());
  run.manifest()["difficulty"] = difficulty;
  run.manifest()["episodes"] = plan.eval_episodes;
  return run.Finish();
}

CommandOutput CommandGrid(const ExperimentPlan& plan, const CommandContext& ctx) {
  if (!IsGradientMethod(plan.method) && !IsAdversaryMethod(plan.method)) {
    throw ConfigError("grid search needs an attack or adversary method");
  }
  Run run("grid", MethodName(plan.method), plan, ctx);
  std::vector<EvalReport> reports;
  for (double eps : plan.epsilon_grid) {
    const TrainRequest req = TrainRequest{plan.method, eps, plan.alpha}.Normalized();
    std::vector<SeedEval> evals;
    for (std::uint64_t seed : plan.seeds) {
      const PpoTrainer trainer = run.Trained(req, seed);
      evals.push_back(EvaluateSeed(trainer.agent(), plan, plan.target_difficulty, seed));
    }
    reports.push_back(MakeReport(MethodName(plan.method), eps, req.alpha,
                                 plan.target_difficulty, evals, ConfigHash(plan)));
    run.Log("eps=" + FormatDouble(eps) + " mean=" + FormatDouble(reports.back().metric.mean));
  }
  const std::size_t best = BestEpsilonIndex(reports);
  std::ostringstream grid;
  WriteEvalCsv(grid, reports);
  run.Write("grid.csv", grid.str());
  run.manifest()["method"] = MethodName(plan.method);
  run.manifest()["best_epsilon"] = reports[best].epsilon;
  return run.Finish();
}

CommandOutput CommandSweep(const ExperimentPlan& plan, const CommandContext& ctx) {
  Run run("sweep", "", plan, ctx);
  std::vector<EvalReport> reports;
  for (Method method : plan.sweep_methods) {
    const TrainRequest req =
        TrainRequest{method, SweepEpsilon(plan, method), plan.alpha}.Normalized();
    std::vector<PpoTrainer> trainers;
    for (std::uint64_t seed : plan.seeds) trainers.push_back(run.Trained(req, seed));
    for (double difficulty : plan.difficulty_grid) {
      std::vector<SeedEval> evals;
      for (std::size_t i = 0; i < plan.seeds.size(); ++i) {
        evals.push_back(EvaluateSeed(trainers[i].agent(), plan, difficulty, plan.seeds[i]));
      }
      reports.push_back(MakeReport(MethodName(method), req.epsilon, req.alpha, difficulty,
                                   evals, ConfigHash(plan)));
    }
    run.Log("swept " + RequestTag(req));
  }
  std::ostringstream sweep;
  WriteEvalCsv(sweep, reports);
  run.Write("sweep.csv", sweep.str());
  return run.Finish();
}

CommandOutput CommandAttackEval(const ExperimentPlan& plan, const CommandContext& ctx) {
  Run run("attack-eval", "", plan, ctx);
  std::vector<ActorCritic> agents;
  for (std::uint64_t seed : plan.seeds) {
    agents.push_back(run.Trained(TrainRequest{Method::kBaseline, 0.0, 0.0}, seed).agent());
  }
  std::ostringstream progress;
  const std::vector<AttackEvalRow> rows = AttackEfficiencyEval(plan, agents, &progress);
  std::istringstream lines(progress.str());
  for (std::string line; std::getline(lines, line);) run.Log(line);
  std::ostringstream table;
  WriteAttackEvalCsv(table, rows);
  run.Write("attack_eval.csv", table.str());
  return run.Finish();
}

}  // namespace envadv
