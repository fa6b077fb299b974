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

#include "envadv/runner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <utility>

#include <boost/math/distributions/students_t.hpp>

#include "envadv/errors.h"

namespace envadv {
namespace {

AttackMethod ToAttackMethod(Method method) {
  switch (method) {
    case Method::kEACN: return AttackMethod::kEACN;
    case Method::kEAAN: return AttackMethod::kEAAN;
    case Method::kOACN: return AttackMethod::kOACN;
    case Method::kOAAN: return AttackMethod::kOAAN;
    default: break;
  }
  throw ConfigError(MethodName(method) + " is not a gradient attack");
}

ScheduleKind ToScheduleKind(Method method) {
  switch (method) {
    case Method::kRARL: return ScheduleKind::kRarlSequential;
    case Method::kFSP: return ScheduleKind::kFspSequential;
    case Method::kCoFSP: return ScheduleKind::kCoFspAlternating;
    default: break;
  }
  throw ConfigError(MethodName(method) + " is not an adversary method");
}

ScheduleConfig MakeScheduleConfig(const ExperimentPlan& plan, Method method,
                                  double epsilon, double alpha,
                                  std::int64_t adversary_steps,
                                  std::int64_t protagonist_steps) {
  ScheduleConfig cfg;
  cfg.kind = ToScheduleKind(method);
  cfg.adversary_steps = adversary_steps;
  cfg.protagonist_steps = protagonist_steps;
  cfg.block_steps = plan.block_steps;
  cfg.epsilon = epsilon;
  cfg.coop.alpha = alpha;
  cfg.coop.cooperative_reward_scale = plan.cooperative_reward_scale;
  cfg.fsp_mix_probability = plan.fsp_mix;
  cfg.sl_capacity = static_cast<std::size_t>(plan.sl_capacity);
  cfg.sl_epochs = plan.sl_epochs;
  cfg.adversary_hidden = plan.hidden;
  cfg.adversary_hp = plan.ppo;
  return cfg;
}

// Text of every setting that shapes pretrained weights.
std::string PretrainKeyText(const ExperimentPlan& plan) {
  std::ostringstream out;
  const PPOHyperparams& hp = plan.ppo;
  out << EnvKindName(plan.env.kind) << '|' << FormatDouble(plan.env.difficulty) << '|'
      << plan.env.time_limit << '|' << plan.pretrain_steps << '|';
  for (int h : plan.hidden) out << h << ',';
  out << '|' << FormatDouble(hp.gamma) << ',' << FormatDouble(hp.gae_lambda) << ','
      << FormatDouble(hp.clip_ratio) << ',' << FormatDouble(hp.learning_rate) << ','
      << hp.epochs_per_update << ',' << hp.minibatch_size << ',' << hp.rollout_length
      << ',' << FormatDouble(hp.entropy_coef) << ',' << FormatDouble(hp.value_coef) << ','
      << FormatDouble(hp.max_grad_norm);
  return out.str();
}

std::string Csv(double v) { return FormatDouble(v); }

std::string OptionalCsv(const std::optional<double>& v) {
  return v ? FormatDouble(*v) : std::string();
}

void WriteReportRows(std::ostream& out, const EvalReport& r, const std::string& extra_seed,
                     const std::string& extra_summary) {
  const std::size_t n = r.per_seed.size();
  int episodes = 0;
  for (const SeedEval& s : r.per_seed) {
    episodes += s.episodes;
    out << r.label << ',' << Csv(r.epsilon) << ',' << Csv(r.alpha) << ','
        << Csv(r.difficulty) << ',' << n << ',' << s.seed << ',' << s.episodes << ','
        << Csv(s.mean_return) << ',' << Csv(s.mean_metric) << ",," << extra_seed
        << ',' << r.config_hash << '\n';
  }
  out << r.label << ',' << Csv(r.epsilon) << ',' << Csv(r.alpha) << ','
      << Csv(r.difficulty) << ',' << n << ",all," << episodes << ',' << Csv(r.ret.mean)
      << ',' << Csv(r.metric.mean) << ',' << OptionalCsv(r.ret.half_width) << ','
      << OptionalCsv(r.metric.half_width) << extra_summary << ',' << r.config_hash << '\n';
}

}  // namespace

std::uint64_t StreamSeed(std::uint64_t seed, std::string_view purpose) {
  return EpisodeSeed(seed, Fnv1a64(purpose));
}

EnvConfig EnvAt(const ExperimentPlan& plan, double difficulty, std::uint64_t seed) {
  EnvConfig cfg = plan.env;
  cfg.difficulty = difficulty;
  cfg.seed = seed;
  cfg.Validate();
  return cfg;
}

double TrainingDifficulty(const ExperimentPlan& plan, Method method) {
  return method == Method::kTarget ? plan.target_difficulty : plan.env.difficulty;
}

PretrainResult RunPretrain(const ExperimentPlan& plan, std::uint64_t seed) {
  plan.Validate();
  std::mt19937_64 rng(StreamSeed(seed, "pretrain"));
  const EnvKind kind = plan.env.kind;
  PretrainResult result{
      PpoTrainer(MakeActorCritic(ObservationSize(kind), NumActions(kind),
                                 PolicyHead::kCategorical, plan.hidden, rng),
                 plan.ppo),
      {}};
  RolloutCollector collector(
      EnvAt(plan, plan.env.difficulty, StreamSeed(seed, "pretrain-env")));
  TrainPpo(result.trainer, collector, plan.pretrain_steps, rng, nullptr, &result.curve);
  return result;
}

TrainRequest TrainRequest::Normalized() const {
  TrainRequest r = *this;
  if (!IsGradientMethod(method) && !IsAdversaryMethod(method)) r.epsilon = 0.0;
  if (!IsAdversaryMethod(method)) r.alpha = 0.0;
  return r;
}

TrainResult RunAdversarialTraining(const ExperimentPlan& plan, const TrainRequest& request,
                                   std::uint64_t seed, const PpoTrainer* pretrained,
                                   std::ostream* attack_log) {
  plan.Validate();
  if (pretrained == nullptr) {
    throw ConfigError("training needs a pretrained checkpoint; run pretrain first");
  }
  const TrainRequest req = request.Normalized();
  const double difficulty = TrainingDifficulty(plan, req.method);
  std::mt19937_64 rng(StreamSeed(seed, "train"));
  const EnvConfig env = EnvAt(plan, difficulty, StreamSeed(seed, "train-env"));
  TrainResult result{*pretrained, {}, difficulty, false, std::nullopt, {}, std::nullopt};

  if (IsAdversaryMethod(req.method)) {
    const std::int64_t adversary_steps = plan.train_steps / 2;
    const ScheduleConfig cfg =
        MakeScheduleConfig(plan, req.method, req.epsilon, req.alpha, adversary_steps,
                           plan.train_steps - adversary_steps);
    ScheduleResult sched = RunSchedule(cfg, pretrained, env, rng);
    result.trainer = std::move(sched.protagonist);
    result.adversary = std::move(sched.adversary);
    result.curve = std::move(sched.curve);
    result.schedule_log = std::move(sched.log);
    result.attacks_applied = adversary_steps > 0;
    return result;
  }

  RolloutCollector collector(env);
  if (IsGradientMethod(req.method)) {
    AttackConfig cfg = MakeAttackConfig(ToAttackMethod(req.method), req.epsilon, env.kind);
    cfg.attack_probability = plan.attack_probability;
    AttackDisturbance disturbance(cfg, result.trainer.agent());
    disturbance.set_log(attack_log);
    TrainPpo(result.trainer, collector, plan.train_steps, rng, &disturbance, &result.curve);
    result.attack = disturbance.summary();
    result.attacks_applied = result.attack->attacked > 0;
  } else {
    TrainPpo(result.trainer, collector, plan.train_steps, rng, nullptr, &result.curve);
  }
  return result;
}

SeedEval EvaluateSeed(const ActorCritic& agent, const ExperimentPlan& plan,
                      double difficulty, std::uint64_t seed, Disturbance* disturbance) {
  std::mt19937_64 rng(StreamSeed(seed, "eval-rng"));
  const std::vector<EpisodeStats> episodes =
      EvaluatePolicy(agent, EnvAt(plan, difficulty, StreamSeed(seed, "eval")),
                     plan.eval_episodes, rng, disturbance);
  SeedEval out;
  out.seed = seed;
  out.episodes = static_cast<int>(episodes.size());
  for (const EpisodeStats& e : episodes) {
    out.mean_return += e.total_return;
    out.mean_metric += e.metric;
  }
  out.mean_return /= static_cast<double>(episodes.size());
  out.mean_metric /= static_cast<double>(episodes.size());
  return out;
}

double StudentTCritical(int dof) {
  if (dof < 1) throw ConfigError("Student-t needs at least one degree of freedom");
  boost::math::students_t_distribution<double> dist(dof);
  return boost::math::quantile(dist, 0.975);
}

Interval StudentTInterval(const std::vector<double>& values) {
  Interval out;
  out.n = static_cast<int>(values.size());
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / out.n;
  if (out.n < 2) return out;
  const bool constant =
      std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
  if (constant) {
    out.mean = values[0];
    out.half_width = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / (out.n - 1));
  out.half_width = StudentTCritical(out.n - 1) * sd / std::sqrt(static_cast<double>(out.n));
  return out;
}

EvalReport MakeReport(std::string label, double epsilon, double alpha, double difficulty,
                      std::vector<SeedEval> per_seed, std::string config_hash) {
  EvalReport r;
  r.label = std::move(label);
  r.epsilon = epsilon;
  r.alpha = alpha;
  r.difficulty = difficulty;
  std::vector<double> returns, metrics;
  for (const SeedEval& s : per_seed) {
    returns.push_back(s.mean_return);
    metrics.push_back(s.mean_metric);
  }
  r.per_seed = std::move(per_seed);
  r.ret = StudentTInterval(returns);
  r.metric = StudentTInterval(metrics);
  r.config_hash = std::move(config_hash);
  return r;
}

void WriteEvalCsv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "label,epsilon,alpha,difficulty,n_seeds,seed,episodes,mean_return,"
         "mean_metric,ci_return,ci_metric,config_hash\n";
  for (const EvalReport& r : reports) WriteReportRows(out, r, "", "");
}

void WriteCurvesCsv(std::ostream& out, const std::string& label, double epsilon,
                    double alpha, std::uint64_t seed,
                    const std::vector<CurvePoint>& curve, bool header) {
  if (header) out << "label,epsilon,alpha,seed,step,episodes,mean_return,mean_metric\n";
  for (const CurvePoint& p : curve) {
    out << label << ',' << Csv(epsilon) << ',' << Csv(alpha) << ',' << seed << ','
        << p.step << ',' << p.episodes << ',' << Csv(p.mean_return) << ','
        << Csv(p.mean_metric) << '\n';
  }
}

std::size_t BestEpsilonIndex(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ConfigError("grid search needs at least one result");
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const double m = reports[i].metric.mean;
    const double b = reports[best].metric.mean;
    if (m > b || (m == b && reports[i].epsilon < reports[best].epsilon)) best = i;
  }
  return best;
}

CheckpointStore::CheckpointStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path CheckpointStore::PretrainPath(const ExperimentPlan& plan,
                                                    std::uint64_t seed) const {
  const std::string key = HexDigest(Fnv1a64(PretrainKeyText(plan)));
  return root_ / "checkpoints" / EnvKindName(plan.env.kind) / ("pretrain-" + key) /
         ("seed-" + std::to_string(seed) + ".ckpt");
}

std::filesystem::path CheckpointStore::TrainPath(const ExperimentPlan& plan,
                                                 const TrainRequest& request,
                                                 std::uint64_t seed) const {
  const TrainRequest req = request.Normalized();
  std::ostringstream text;
  text << PretrainKeyText(plan) << '|' << plan.train_steps << '|'
       << FormatDouble(plan.target_difficulty) << '|' << MethodName(req.method) << '|'
       << FormatDouble(req.epsilon) << '|' << FormatDouble(req.alpha);
  if (IsGradientMethod(req.method)) text << '|' << FormatDouble(plan.attack_probability);
  if (IsAdversaryMethod(req.method)) {
    text << '|' << plan.block_steps << '|' << FormatDouble(plan.fsp_mix) << '|'
         << plan.sl_capacity << '|' << plan.sl_epochs << '|'
         << FormatDouble(plan.cooperative_reward_scale);
  }
  const std::string dir = MethodName(req.method) + "-e" + FormatDouble(req.epsilon) +
                          "-a" + FormatDouble(req.alpha) + "-" +
                          HexDigest(Fnv1a64(text.str()));
  return root_ / "checkpoints" / EnvKindName(plan.env.kind) / dir /
         ("seed-" + std::to_string(seed) + ".ckpt");
}

void CheckpointStore::Save(const std::filesystem::path& path,
                           const PpoTrainer& trainer) const {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + tmp.string());
    trainer.Save(out);
    if (!out) throw ConfigError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

PpoTrainer CheckpointStore::Load(const std::filesystem::path& path,
                                 const PPOHyperparams& hp) const {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing checkpoint " + path.string());
  return PpoTrainer::Load(in, hp);
}

std::vector<AttackEvalRow> AttackEfficiencyEval(const ExperimentPlan& plan,
                                                const std::vector<ActorCritic>& agents,
                                                std::ostream* progress) {
  plan.Validate();
  if (agents.size() != plan.seeds.size()) {
    throw ConfigError("one frozen agent per seed is required");
  }
  const double difficulty = plan.env.difficulty;
  const std::string hash = ConfigHash(plan);
  const FeatureMask mask = DefaultMask(plan.env.kind);

  std::vector<SeedEval> clean;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    clean.push_back(EvaluateSeed(agents[i], plan, difficulty, plan.seeds[i]));
  }

  std::vector<AttackEvalRow> rows;
  for (Method method : plan.attack_methods) {
    const double alpha = IsAdversaryMethod(method) ? plan.alpha : 0.0;
    for (double eps : plan.attack_epsilons) {
      AttackEvalRow row;
      row.attack = method;
      std::vector<SeedEval> per_seed;
      for (std::size_t i = 0; i < agents.size(); ++i) {
        const std::uint64_t seed = plan.seeds[i];
        if (eps == 0.0) {
          per_seed.push_back(clean[i]);
          continue;
        }
        if (IsGradientMethod(method)) {
          AttackConfig cfg = MakeAttackConfig(ToAttackMethod(method), eps, plan.env.kind);
          cfg.attack_probability = plan.attack_probability;
          AttackDisturbance disturbance(cfg, agents[i]);
          per_seed.push_back(EvaluateSeed(agents[i], plan, difficulty, seed, &disturbance));
          row.attacked_steps += disturbance.summary().attacked;
          row.state_changed_steps += disturbance.summary().state_changed;
        } else {
          const PpoTrainer frozen(agents[i], plan.ppo);
          std::mt19937_64 rng(StreamSeed(seed, "attack-adversary"));
          const ScheduleConfig cfg =
              MakeScheduleConfig(plan, method, eps, alpha, plan.train_steps / 2, 0);
          ScheduleResult sched = RunSchedule(
              cfg, &frozen, EnvAt(plan, difficulty, StreamSeed(seed, "attack-adversary-env")),
              rng);
          AdversaryDisturbance disturbance(sched.adversary.agent(), eps, mask, cfg.coop);
          if (sched.average_strategy) {
            disturbance.set_average_strategy(&*sched.average_strategy, plan.fsp_mix);
          }
          per_seed.push_back(EvaluateSeed(agents[i], plan, difficulty, seed, &disturbance));
          const auto totals = disturbance.TakeTotals();
          row.attacked_steps += totals.steps;
        }
      }
      row.report = MakeReport(MethodName(method), eps, alpha, difficulty,
                              std::move(per_seed), hash);
      if (progress != nullptr) {
        *progress << "attack-eval " << MethodName(method) << " eps=" << eps
                  << " metric=" << row.report.metric.mean << '\n';
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void WriteAttackEvalCsv(std::ostream& out, const std::vector<AttackEvalRow>& rows) {
  out << "attack,epsilon,alpha,difficulty,n_seeds,seed,episodes,mean_return,"
         "mean_metric,ci_return,ci_metric,attacked_steps,state_changed_steps,config_hash\n";
  for (const AttackEvalRow& row : rows) {
    WriteReportRows(out, row.report, ",,",
                    "," + std::to_string(row.attacked_steps) + "," +
                        std::to_string(row.state_changed_steps));
  }
}

}  // namespace envadv
