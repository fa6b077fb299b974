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

#include "envadv/adversaries.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <utility>

#include "envadv/errors.h"

namespace envadv {
namespace {

FeatureMask AndMasks(const FeatureMask& a, const FeatureMask& b) {
  FeatureMask out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

// Initial weights come from the environment seed so that building the
// adversary never perturbs the caller's training stream.
std::mt19937_64 InitStream(const EnvConfig& env) {
  return std::mt19937_64(EpisodeSeed(env.seed, 0xad7e55a5ULL));
}

double Mean(double sum, std::int64_t n) {
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

int CountMask(const FeatureMask& mask) {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

void AdversaryAgent::Validate(const FeatureMask& mask) const {
  policy.Validate();
  if (policy.head != PolicyHead::kGaussian) {
    throw ConfigError("adversary policy must be Gaussian");
  }
  if (policy.action_dim() != CountMask(mask)) {
    throw ConfigError("adversary output dimension does not match the mask");
  }
  if (!(epsilon > 0.0)) throw ConfigError("adversary epsilon must be positive");
}

AdversaryAgent MakeAdversary(EnvKind kind, double epsilon,
                             const std::vector<int>& hidden, std::mt19937_64& rng) {
  AdversaryAgent adv;
  adv.policy = MakeActorCritic(ObservationSize(kind), CountMask(DefaultMask(kind)),
                               PolicyHead::kGaussian, hidden, rng);
  adv.epsilon = epsilon;
  adv.Validate(DefaultMask(kind));
  return adv;
}

Disturbed DisturbWithAction(const EnvState& state, const Vector& u,
                            const FeatureMask& mask, double epsilon) {
  const int k = CountMask(mask);
  const Observation x = Observe(state);
  if (u.size() != k || static_cast<Eigen::Index>(mask.size()) != x.size()) {
    throw ConfigError("adversary action does not match the feature mask");
  }
  Disturbed out;
  out.eta = Vector::Zero(x.size());
  const double scale = epsilon / std::max(1.0, u.norm());
  for (Eigen::Index f = 0, j = 0; f < x.size(); ++f) {
    if (mask[f]) out.eta[f] = scale * u[j++];
  }
  out.eta_norm = out.eta.norm();
  const Observation x_adv = (x + out.eta).cwiseMax(-1.0).cwiseMin(1.0);
  out.state = ApplyModifier(state, x_adv, AndMasks(mask, RealizableMask(state)));
  return out;
}

Disturbed AdversaryDisturb(const AdversaryAgent& adv, const EnvState& state,
                           const FeatureMask& mask, std::mt19937_64& rng,
                           ActResult* sampled) {
  adv.Validate(mask);
  ActResult r = Act(adv.policy, Observe(state), rng);
  Disturbed out = DisturbWithAction(state, r.action.squashed, mask, adv.epsilon);
  if (sampled != nullptr) *sampled = std::move(r);
  return out;
}

void CooperationConfig::Validate() const {
  if (!(alpha >= 0.0 && alpha <= 0.5)) {
    throw ConfigError("cooperation coefficient must lie in [0, 0.5]");
  }
  if (!(cooperative_reward_scale >= 0.0)) {
    throw ConfigError("cooperative reward scale must be non-negative");
  }
}

double AdversaryReward(double r_protagonist, double eta_norm, double epsilon,
                       const CooperationConfig& coop) {
  if (coop.alpha == 0.0) return -r_protagonist;
  const double cooperative = coop.cooperative_reward_scale * (1.0 - eta_norm / epsilon);
  return coop.alpha * cooperative - (1.0 - coop.alpha) * r_protagonist;
}

AverageStrategyModel::AverageStrategyModel(int obs_dim, int action_dim,
                                           const std::vector<int>& hidden,
                                           std::size_t capacity,
                                           std::mt19937_64& rng,
                                           double learning_rate)
    : capacity_(capacity), learning_rate_(learning_rate) {
  if (capacity == 0) throw ConfigError("average strategy buffer needs capacity");
  std::vector<int> sizes = {obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  net_ = MakeNet(sizes, OutputHead::kGaussianMean, 1.0, rng);
}

void AverageStrategyModel::Add(const Observation& x, const Vector& u,
                               std::mt19937_64& rng) {
  if (x.size() != net_.input_dim() || u.size() != net_.output_dim()) {
    throw ShapeError("average strategy sample has the wrong shape");
  }
  ++seen_;
  if (inputs_.size() < capacity_) {
    inputs_.push_back(x);
    targets_.push_back(u);
    return;
  }
  const auto j = std::uniform_int_distribution<std::int64_t>(0, seen_ - 1)(rng);
  if (static_cast<std::size_t>(j) < capacity_) {
    inputs_[static_cast<std::size_t>(j)] = x;
    targets_[static_cast<std::size_t>(j)] = u;
  }
}

Vector AverageStrategyModel::Predict(const Observation& x) const {
  return Forward(net_, x).array().tanh();
}

double AverageStrategyModel::Loss() const {
  if (inputs_.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < inputs_.size(); ++i) {
    total += (Predict(inputs_[i]) - targets_[i]).squaredNorm();
  }
  return total / static_cast<double>(inputs_.size() * net_.output_dim());
}

std::vector<double> AverageStrategyModel::Fit(int epochs, int minibatch_size,
                                              std::mt19937_64& rng) {
  if (inputs_.empty()) throw ConfigError("average strategy buffer is empty");
  if (minibatch_size < 1) throw ConfigError("minibatch size must be >= 1");
  const size_t n = inputs_.size();
  const int k = net_.output_dim();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < n; start += static_cast<size_t>(minibatch_size)) {
      const auto m = static_cast<Eigen::Index>(
          std::min<size_t>(static_cast<size_t>(minibatch_size), n - start));
      Matrix inputs(net_.input_dim(), m);
      Matrix targets(k, m);
      for (Eigen::Index j = 0; j < m; ++j) {
        inputs.col(j) = inputs_[order[start + static_cast<size_t>(j)]];
        targets.col(j) = targets_[order[start + static_cast<size_t>(j)]];
      }
      const Matrix out = ForwardBatch(net_, inputs).array().tanh();
      // d/dz mean((tanh z - u)^2) = 2 (tanh z - u)(1 - tanh^2 z) / (m k)
      const Matrix upstream = (2.0 / static_cast<double>(m * k)) *
                              ((out - targets).array() * (1.0 - out.array().square())).matrix();
      const Gradient grad = ParamGradientBatch(net_, inputs, upstream);
      Vector params = FlattenParams(net_);
      AdamStep(params, FlattenGradient(grad), opt_, learning_rate_);
      AssignParams(net_, params);
    }
    losses.push_back(Loss());
  }
  return losses;
}

AttackerModel FspSampleAttacker(std::mt19937_64& rng, double mix_probability) {
  if (!(mix_probability >= 0.0 && mix_probability <= 1.0)) {
    throw ConfigError("mix probability must lie in [0, 1]");
  }
  return std::bernoulli_distribution(mix_probability)(rng) ? AttackerModel::kRL
                                                           : AttackerModel::kSL;
}

AdversaryDisturbance::AdversaryDisturbance(const ActorCritic& policy, double epsilon,
                                           FeatureMask mask, CooperationConfig coop)
    : policy_(policy), epsilon_(epsilon), mask_(std::move(mask)), coop_(coop) {
  AdversaryAgent{policy_, epsilon_}.Validate(mask_);
  coop_.Validate();
}

void AdversaryDisturbance::set_average_strategy(AverageStrategyModel* model,
                                                double mix_probability) {
  sl_model_ = model;
  mix_probability_ = mix_probability;
  if (model == nullptr) current_ = AttackerModel::kRL;
}

void AdversaryDisturbance::BeforeAct(EnvState& state, Observation& agent_obs,
                                     std::mt19937_64& rng) {
  if (episode_start_) {
    current_ = sl_model_ != nullptr ? FspSampleAttacker(rng, mix_probability_)
                                    : AttackerModel::kRL;
    episode_start_ = false;
  }
  const Observation x = agent_obs;
  Vector u;
  if (current_ == AttackerModel::kSL) {
    u = sl_model_->Predict(x);
    ++totals_.sl_steps;
  } else {
    ActResult r = Act(policy_, x, rng);
    u = r.action.squashed;
    if (pair_sink_ != nullptr) pair_sink_->Add(x, u, rng);
    if (recording_) {
      pending_tr_ = Transition{};
      pending_tr_.obs = x;
      pending_tr_.action = std::move(r.action);
      pending_tr_.log_prob = r.log_prob;
      pending_tr_.value = r.value;
      pending_ = true;
    }
  }
  Disturbed d = DisturbWithAction(state, u, mask_, epsilon_);
  pending_eta_norm_ = d.eta_norm;
  state = std::move(d.state);
  agent_obs = Observe(state);
}

void AdversaryDisturbance::AfterStep(const StepResult& result) {
  const double reward = AdversaryReward(result.reward, pending_eta_norm_, epsilon_, coop_);
  ++totals_.steps;
  totals_.adversary_reward += reward;
  totals_.protagonist_reward += result.reward;
  if (pending_) {
    pending_tr_.reward = reward;
    pending_tr_.done = result.done;
    const bool crashed = result.done && result.info.cause == TerminalCause::kCollision;
    pending_tr_.bootstrap_value = crashed ? 0.0 : Value(policy_, result.observation);
    traj_.steps.push_back(std::move(pending_tr_));
    pending_ = false;
  }
  if (result.done) episode_start_ = true;
}

Trajectory AdversaryDisturbance::TakeTrajectory() {
  Trajectory out;
  std::swap(out, traj_);
  return out;
}

AdversaryDisturbance::Totals AdversaryDisturbance::TakeTotals() {
  Totals out = totals_;
  totals_ = Totals{};
  return out;
}

std::string ScheduleKindName(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kRarlSequential: return "rarl";
    case ScheduleKind::kFspSequential: return "fsp";
    case ScheduleKind::kCoFspAlternating: return "co-fsp";
  }
  return "?";
}

void ScheduleConfig::Validate() const {
  if (adversary_steps < 0 || protagonist_steps < 0) {
    throw ConfigError("schedule budgets must be non-negative");
  }
  if (block_steps < 1) throw ConfigError("block size must be >= 1");
  if (!(epsilon > 0.0)) throw ConfigError("adversary epsilon must be positive");
  coop.Validate();
  if (!(fsp_mix_probability >= 0.0 && fsp_mix_probability <= 1.0)) {
    throw ConfigError("mix probability must lie in [0, 1]");
  }
  if (sl_capacity == 0 || sl_epochs < 0 || sl_minibatch < 1) {
    throw ConfigError("invalid average strategy settings");
  }
  adversary_hp.Validate();
}

void WriteScheduleLog(std::ostream& out, const std::vector<ScheduleLogRow>& rows) {
  out << "phase,agent,steps,mean_adversary_reward,mean_protagonist_reward,frozen_ok\n";
  for (const ScheduleLogRow& r : rows) {
    out << r.phase << ',' << r.agent << ',' << r.steps << ',' << r.mean_adversary_reward
        << ',' << r.mean_protagonist_reward << ',' << (r.frozen_ok ? 1 : 0) << '\n';
  }
}

ScheduleResult RunSchedule(const ScheduleConfig& cfg, const PpoTrainer* pretrained,
                           const EnvConfig& env, std::mt19937_64& rng) {
  cfg.Validate();
  env.Validate();
  if (pretrained == nullptr) {
    throw ConfigError("adversarial schedules need a pretrained protagonist checkpoint");
  }
  std::mt19937_64 init = InitStream(env);
  const FeatureMask mask = DefaultMask(env.kind);
  ScheduleResult result{
      *pretrained,
      PpoTrainer(MakeAdversary(env.kind, cfg.epsilon, cfg.adversary_hidden, init).policy,
                 cfg.adversary_hp),
      std::nullopt, {}, {}};
  PpoTrainer& prot = result.protagonist;
  PpoTrainer& adv = result.adversary;
  const bool fsp = cfg.kind != ScheduleKind::kRarlSequential;
  if (fsp) {
    result.average_strategy.emplace(ObservationSize(env.kind), CountMask(mask),
                                    cfg.adversary_hidden, cfg.sl_capacity, init);
  }
  AverageStrategyModel* sl = fsp ? &*result.average_strategy : nullptr;

  RolloutCollector collector(env);
  AdversaryDisturbance dist(adv.agent(), cfg.epsilon, mask, cfg.coop);
  std::int64_t prot_steps = 0;

  auto adversary_block = [&](std::int64_t steps, const std::string& phase) {
    const ActorCritic frozen = prot.agent();
    dist.set_average_strategy(nullptr, 1.0);
    dist.set_recording(true);
    dist.set_record_pairs(sl);
    const std::int64_t window = adv.hyperparams().rollout_length;
    for (std::int64_t done = 0; done < steps;) {
      const int n = static_cast<int>(std::min(window, steps - done));
      collector.Collect(prot.agent(), n, rng, &dist);
      adv.Update(dist.TakeTrajectory(), rng);
      collector.TakeFinishedEpisodes();
      done += n;
    }
    dist.set_recording(false);
    dist.set_record_pairs(nullptr);
    if (sl != nullptr && sl->buffer_size() > 0 && cfg.sl_epochs > 0) {
      sl->Fit(cfg.sl_epochs, cfg.sl_minibatch, rng);
    }
    const auto totals = dist.TakeTotals();
    result.log.push_back({phase, "adversary", steps, Mean(totals.adversary_reward, totals.steps),
                          Mean(totals.protagonist_reward, totals.steps),
                          prot.agent() == frozen});
  };

  auto protagonist_block = [&](std::int64_t steps, const std::string& phase) {
    const ActorCritic frozen = adv.agent();
    const std::optional<FeedForwardNet> frozen_sl =
        sl != nullptr ? std::optional<FeedForwardNet>(sl->net()) : std::nullopt;
    Disturbance* disturbance = cfg.adversary_steps > 0 ? &dist : nullptr;
    dist.set_average_strategy(sl, cfg.fsp_mix_probability);
    prot_steps = TrainPpo(prot, collector, steps, rng, disturbance, &result.curve, prot_steps);
    dist.set_average_strategy(nullptr, 1.0);
    const auto totals = dist.TakeTotals();
    const bool frozen_ok = adv.agent() == frozen && (!frozen_sl || sl->net() == *frozen_sl);
    result.log.push_back({phase, "protagonist", steps,
                          Mean(totals.adversary_reward, totals.steps),
                          Mean(totals.protagonist_reward, totals.steps), frozen_ok});
  };

  if (cfg.kind == ScheduleKind::kCoFspAlternating) {
    std::int64_t adv_left = cfg.adversary_steps;
    std::int64_t prot_left = cfg.protagonist_steps;
    for (int block = 0; adv_left > 0 || prot_left > 0; ++block) {
      const std::string phase = "block-" + std::to_string(block);
      if (adv_left > 0) {
        const std::int64_t n = std::min(cfg.block_steps, adv_left);
        adversary_block(n, phase);
        adv_left -= n;
      }
      if (prot_left > 0) {
        const std::int64_t n = std::min(cfg.block_steps, prot_left);
        protagonist_block(n, phase);
        prot_left -= n;
      }
    }
  } else {
    if (cfg.adversary_steps > 0) adversary_block(cfg.adversary_steps, "adversary-phase");
    if (cfg.protagonist_steps > 0) {
      protagonist_block(cfg.protagonist_steps, "protagonist-phase");
    }
  }
  return result;
}

}  // namespace envadv
