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

// Experiment orchestration: pretraining, per-method training, evaluation
// with Student-t intervals over seeds, epsilon grid search, robustness sweeps
// and the attack-efficiency table.

#ifndef ENVADV_RUNNER_H_
#define ENVADV_RUNNER_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "envadv/adversaries.h"
#include "envadv/attacks.h"
#include "envadv/plan.h"
#include "envadv/ppo.h"

namespace envadv {

// Independent deterministic stream per (seed, purpose).
std::uint64_t StreamSeed(std::uint64_t seed, std::string_view purpose);

EnvConfig EnvAt(const ExperimentPlan& plan, double difficulty, std::uint64_t seed);

// Training difficulty of a method: the target difficulty for the target arm,
// the base difficulty for everything else.
double TrainingDifficulty(const ExperimentPlan& plan, Method method);

struct PretrainResult {
  PpoTrainer trainer;
  std::vector<CurvePoint> curve;
};

PretrainResult RunPretrain(const ExperimentPlan& plan, std::uint64_t seed);

struct TrainRequest {
  Method method = Method::kBaseline;
  double epsilon = 0.0;  // ignored by baseline and target
  double alpha = 0.0;    // adversary methods only

  // Zeroes the fields the method ignores so equal runs share a key.
  TrainRequest Normalized() const;
};

struct TrainResult {
  PpoTrainer trainer;
  std::vector<CurvePoint> curve;
  double difficulty = 0.0;
  bool attacks_applied = false;
  std::optional<AttackSummary> attack;
  std::vector<ScheduleLogRow> schedule_log;
  std::optional<PpoTrainer> adversary;
};

// Continues from `pretrained`; throws ConfigError when it is null.
// `attack_log` receives per-step attack diagnostics for gradient methods.
TrainResult RunAdversarialTraining(const ExperimentPlan& plan, const TrainRequest& request,
                                   std::uint64_t seed, const PpoTrainer* pretrained,
                                   std::ostream* attack_log = nullptr);

struct SeedEval {
  std::uint64_t seed = 0;
  int episodes = 0;
  double mean_return = 0.0;
  double mean_metric = 0.0;
};

// Greedy evaluation on plan.eval_episodes episodes whose seeds depend only
// on (seed, difficulty), so every method faces the same episodes.
SeedEval EvaluateSeed(const ActorCritic& agent, const ExperimentPlan& plan,
                      double difficulty, std::uint64_t seed,
                      Disturbance* disturbance = nullptr);

// t quantile at 0.975 with `dof` degrees of freedom.
double StudentTCritical(int dof);

struct Interval {
  int n = 0;
  double mean = 0.0;
  std::optional<double> half_width;  // absent for fewer than two values
  double lower() const { return mean - half_width.value_or(0.0); }
  double upper() const { return mean + half_width.value_or(0.0); }
};

Interval StudentTInterval(const std::vector<double>& values);

struct EvalReport {
  std::string label;  // method name, or attack name in the attack table
  double epsilon = 0.0;
  double alpha = 0.0;
  double difficulty = 0.0;
  std::vector<SeedEval> per_seed;
  Interval ret;
  Interval metric;
  std::string config_hash;
};

EvalReport MakeReport(std::string label, double epsilon, double alpha, double difficulty,
                      std::vector<SeedEval> per_seed, std::string config_hash);

// Per-seed rows followed by one summary row (seed "all") per report.
void WriteEvalCsv(std::ostream& out, const std::vector<EvalReport>& reports);
void WriteCurvesCsv(std::ostream& out, const std::string& label, double epsilon,
                    double alpha, std::uint64_t seed,
                    const std::vector<CurvePoint>& curve, bool header);

// Index of the best mean metric; ties go to the smaller epsilon.
std::size_t BestEpsilonIndex(const std::vector<EvalReport>& reports);

// Checkpoints cached under <root>/checkpoints, keyed by the hash of every
// setting that influences the trained weights.
class CheckpointStore {
 public:
  explicit CheckpointStore(std::filesystem::path root);

  std::filesystem::path PretrainPath(const ExperimentPlan& plan, std::uint64_t seed) const;
  std::filesystem::path TrainPath(const ExperimentPlan& plan, const TrainRequest& request,
                                  std::uint64_t seed) const;

  void Save(const std::filesystem::path& path, const PpoTrainer& trainer) const;
  PpoTrainer Load(const std::filesystem::path& path, const PPOHyperparams& hp) const;

 private:
  std::filesystem::path root_;
};

struct AttackEvalRow {
  Method attack = Method::kEACN;
  EvalReport report;
  std::int64_t attacked_steps = 0;
  std::int64_t state_changed_steps = 0;
};

// Frozen agents (one per plan seed) evaluated at the base difficulty under
// every attack method and budget in the plan. Adversary rows train an
// adversary against each frozen agent first.
std::vector<AttackEvalRow> AttackEfficiencyEval(const ExperimentPlan& plan,
                                                const std::vector<ActorCritic>& agents,
                                                std::ostream* progress = nullptr);

void WriteAttackEvalCsv(std::ostream& out, const std::vector<AttackEvalRow>& rows);

}  // namespace envadv

#endif  // ENVADV_RUNNER_H_
