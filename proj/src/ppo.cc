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

#include "envadv/ppo.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "envadv/errors.h"

namespace envadv {
namespace {

constexpr char kCheckpointMagic[8] = {'E', 'N', 'V', 'A', 'D', 'V', 'A', 'C'};
constexpr std::uint64_t kCheckpointVersion = 1;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// log(1 - tanh(u)^2), stable for large |u|.
double LogTanhJacobian(double u) {
  const double a = std::abs(u);
  return 2.0 * (std::log(2.0) - a - std::log1p(std::exp(-2.0 * a)));
}

double GaussianLogProb(const Vector& mean, const Vector& log_std, const Vector& raw) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double z = (raw[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kLogSqrt2Pi - LogTanhJacobian(raw[i]);
  }
  return lp;
}

void RequireFinite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    std::ostringstream msg;
    msg << what << " is not finite: " << v.transpose();
    throw NumericError(msg.str());
  }
}

void ClipNorm(Vector& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void WriteAdam(std::ostream& out, const AdamState& s) {
  WriteDoubles(out, s.m);
  WriteDoubles(out, s.v);
  WriteU64(out, static_cast<std::uint64_t>(s.steps));
}

AdamState ReadAdam(std::istream& in) {
  AdamState s;
  s.m = ReadDoubles(in);
  s.v = ReadDoubles(in);
  s.steps = static_cast<std::int64_t>(ReadU64(in));
  return s;
}

AdamState FreshAdam(Eigen::Index n) {
  return AdamState{Vector::Zero(n), Vector::Zero(n), 0};
}

}  // namespace

void ActorCritic::Validate() const {
  actor.Validate();
  critic.Validate();
  if (actor.input_dim() != critic.input_dim()) {
    throw ShapeError("actor and critic input dims differ");
  }
  if (critic.output_dim() != 1) throw ShapeError("critic must be scalar");
  if (head == PolicyHead::kGaussian && log_std.size() != actor.output_dim()) {
    throw ShapeError("log_std size must match the action dimension");
  }
  if (head == PolicyHead::kCategorical && actor.output_dim() < 2) {
    throw ShapeError("categorical actor needs at least two actions");
  }
}

bool operator==(const ActorCritic& a, const ActorCritic& b) {
  return a.head == b.head && a.actor == b.actor && a.critic == b.critic &&
         a.log_std.size() == b.log_std.size() && a.log_std == b.log_std;
}

ActorCritic MakeActorCritic(int obs_dim, int action_dim, PolicyHead head,
                            const std::vector<int>& hidden,
                            std::mt19937_64& rng, double init_log_std) {
  std::vector<int> actor_sizes{obs_dim};
  actor_sizes.insert(actor_sizes.end(), hidden.begin(), hidden.end());
  std::vector<int> critic_sizes = actor_sizes;
  actor_sizes.push_back(action_dim);
  critic_sizes.push_back(1);
  ActorCritic ac;
  ac.head = head;
  ac.actor = MakeNet(actor_sizes,
                     head == PolicyHead::kCategorical ? OutputHead::kLogits
                                                      : OutputHead::kGaussianMean,
                     0.01, rng);
  ac.critic = MakeNet(critic_sizes, OutputHead::kValue, 1.0, rng);
  if (head == PolicyHead::kGaussian) ac.log_std = Vector::Constant(action_dim, init_log_std);
  ac.Validate();
  return ac;
}

ActResult Act(const ActorCritic& ac, const Observation& x, std::mt19937_64& rng) {
  const Vector out = Forward(ac.actor, x);
  RequireFinite(out, "actor output");
  ActResult r;
  r.value = Forward(ac.critic, x)[0];
  if (!std::isfinite(r.value)) throw NumericError("critic output is not finite");
  if (ac.head == PolicyHead::kCategorical) {
    const Vector logp = LogSoftmax(out);
    const Vector p = logp.array().exp();
    std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
    r.action.discrete = dist(rng);
    r.log_prob = logp[r.action.discrete];
    return r;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  r.action.raw.resize(out.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    r.action.raw[i] = out[i] + std::exp(ac.log_std[i]) * normal(rng);
  }
  r.action.squashed = r.action.raw.array().tanh();
  r.log_prob = GaussianLogProb(out, ac.log_std, r.action.raw);
  return r;
}

Action GreedyAction(const ActorCritic& ac, const Observation& x) {
  const Vector out = Forward(ac.actor, x);
  RequireFinite(out, "actor output");
  Action a;
  if (ac.head == PolicyHead::kCategorical) {
    Eigen::Index best;
    out.maxCoeff(&best);
    a.discrete = static_cast<int>(best);
  } else {
    a.raw = out;
    a.squashed = out.array().tanh();
  }
  return a;
}

double LogProb(const ActorCritic& ac, const Observation& x, const Action& action) {
  const Vector out = Forward(ac.actor, x);
  if (ac.head == PolicyHead::kCategorical) return LogSoftmax(out)[action.discrete];
  return GaussianLogProb(out, ac.log_std, action.raw);
}

double Value(const ActorCritic& ac, const Observation& x) {
  return Forward(ac.critic, x)[0];
}

void PPOHyperparams::Validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (!(clip_ratio > 0.0)) throw ConfigError("clip_ratio must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (epochs_per_update < 1 || minibatch_size < 1 || rollout_length < 1) {
    throw ConfigError("epochs, minibatch size and rollout length must be >= 1");
  }
  if (entropy_coef < 0.0 || value_coef < 0.0) throw ConfigError("loss coefficients must be >= 0");
}

GaeResult ComputeGae(const Trajectory& traj, const PPOHyperparams& hp) {
  const auto& s = traj.steps;
  const size_t n = s.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (size_t i = n; i-- > 0;) {
    const bool cut = s[i].done || i + 1 == n;
    const double next_value = cut ? s[i].bootstrap_value : s[i + 1].value;
    const double delta = s[i].reward + hp.gamma * next_value - s[i].value;
    running = delta + (cut ? 0.0 : hp.gamma * hp.gae_lambda * running);
    out.advantages[i] = running;
    out.returns[i] = running + s[i].value;
  }
  return out;
}

PpoGradients LossGradients(const ActorCritic& ac, const PpoBatch& batch,
                           const PPOHyperparams& hp, PpoLoss* loss) {
  const Eigen::Index n = batch.obs.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix out = ForwardBatch(ac.actor, batch.obs);
  const Matrix values = ForwardBatch(ac.critic, batch.obs);

  PpoLoss l;
  Matrix actor_up(out.rows(), n);
  PpoGradients grads;
  grads.log_std = Vector::Zero(ac.log_std.size());
  const Vector std_dev = ac.log_std.array().exp();
  for (Eigen::Index c = 0; c < n; ++c) {
    const Action& a = batch.actions[c];
    double new_logp = 0.0;
    double entropy = 0.0;
    Vector logp, p, diff;
    if (ac.head == PolicyHead::kCategorical) {
      logp = LogSoftmax(out.col(c));
      p = logp.array().exp();
      new_logp = logp[a.discrete];
      entropy = -(p.array() * logp.array()).sum();
    } else {
      new_logp = GaussianLogProb(out.col(c), ac.log_std, a.raw);
      diff = a.raw - out.col(c);
      entropy = (ac.log_std.array() + 0.5 + kLogSqrt2Pi).sum();
    }
    const double adv = batch.advantages[c];
    const double log_ratio = new_logp - batch.old_log_probs[c];
    const double ratio = std::exp(log_ratio);
    const double clipped = std::clamp(ratio, 1.0 - hp.clip_ratio, 1.0 + hp.clip_ratio);
    const double surr1 = ratio * adv;
    const double surr2 = clipped * adv;
    l.policy -= std::min(surr1, surr2) * inv_n;
    l.entropy += entropy * inv_n;
    l.clip_fraction += (ratio != clipped ? 1.0 : 0.0) * inv_n;
    l.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
    // d(min(surr1, surr2)) / d(new_logp); zero when the clipped branch binds.
    const double dobj = surr1 <= surr2 ? surr1 : 0.0;

    if (ac.head == PolicyHead::kCategorical) {
      Vector dlogp_dz = -p;
      dlogp_dz[a.discrete] += 1.0;
      const Vector dent_dz = -(p.array() * (logp.array() + entropy)).matrix();
      actor_up.col(c) = (-dobj * dlogp_dz - hp.entropy_coef * dent_dz) * inv_n;
    } else {
      const Vector var = std_dev.array().square();
      actor_up.col(c) = (-dobj * inv_n) * (diff.array() / var.array()).matrix();
      const Vector z2 = (diff.array() / std_dev.array()).square();
      grads.log_std += (-dobj * inv_n) * (z2.array() - 1.0).matrix();
    }
  }
  if (ac.head == PolicyHead::kGaussian) {
    grads.log_std.array() -= hp.entropy_coef;
  }

  const Eigen::RowVectorXd err = values.row(0) - batch.returns.transpose();
  l.value = err.squaredNorm() * inv_n;
  const Matrix critic_up = (hp.value_coef * 2.0 * inv_n) * err;
  l.total = l.policy + hp.value_coef * l.value - hp.entropy_coef * l.entropy;

  grads.actor = ParamGradientBatch(ac.actor, batch.obs, actor_up);
  grads.critic = ParamGradientBatch(ac.critic, batch.obs, critic_up);
  if (loss != nullptr) *loss = l;
  return grads;
}

PpoLoss EvaluateLoss(const ActorCritic& ac, const PpoBatch& batch,
                     const PPOHyperparams& hp) {
  PpoLoss l;
  LossGradients(ac, batch, hp, &l);
  return l;
}

void AdamStep(Vector& params, const Vector& grad, AdamState& state, double lr) {
  if (state.m.size() != params.size()) state = FreshAdam(params.size());
  ++state.steps;
  state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grad;
  state.v = kAdamBeta2 * state.v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.steps));
  params.array() -= lr * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + kAdamEps);
}

PpoTrainer::PpoTrainer(ActorCritic ac, PPOHyperparams hp)
    : ac_(std::move(ac)), hp_(hp) {
  ac_.Validate();
  hp_.Validate();
  actor_opt_ = FreshAdam(ac_.actor.num_params());
  critic_opt_ = FreshAdam(ac_.critic.num_params());
  log_std_opt_ = FreshAdam(ac_.log_std.size());
}

void PpoTrainer::ApplyGradients(const PpoGradients& grads) {
  Vector actor_grad = FlattenGradient(grads.actor);
  Vector critic_grad = FlattenGradient(grads.critic);
  Vector log_std_grad = grads.log_std;
  if (!actor_grad.allFinite() || !critic_grad.allFinite() || !log_std_grad.allFinite()) {
    throw NumericError("non-finite PPO gradient");
  }
  // The policy norm covers the mean network and the log-std together.
  const double policy_norm =
      std::sqrt(actor_grad.squaredNorm() + log_std_grad.squaredNorm());
  if (hp_.max_grad_norm > 0.0 && policy_norm > hp_.max_grad_norm) {
    const double scale = hp_.max_grad_norm / policy_norm;
    actor_grad *= scale;
    log_std_grad *= scale;
  }
  ClipNorm(critic_grad, hp_.max_grad_norm);

  Vector actor_params = FlattenParams(ac_.actor);
  AdamStep(actor_params, actor_grad, actor_opt_, hp_.learning_rate);
  AssignParams(ac_.actor, actor_params);
  Vector critic_params = FlattenParams(ac_.critic);
  AdamStep(critic_params, critic_grad, critic_opt_, hp_.learning_rate);
  AssignParams(ac_.critic, critic_params);
  if (ac_.head == PolicyHead::kGaussian) {
    AdamStep(ac_.log_std, log_std_grad, log_std_opt_, hp_.learning_rate);
  }
}

UpdateStats PpoTrainer::Update(const Trajectory& traj, std::mt19937_64& rng) {
  const size_t n = traj.steps.size();
  UpdateStats stats;
  if (n == 0) return stats;
  const GaeResult gae = ComputeGae(traj, hp_);
  Vector adv = Eigen::Map<const Vector>(gae.advantages.data(), static_cast<Eigen::Index>(n));
  const double mean = adv.mean();
  const double stddev = std::sqrt((adv.array() - mean).square().mean());
  adv = (adv.array() - mean) / (stddev + 1e-8);

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int obs_dim = ac_.obs_dim();
  for (int epoch = 0; epoch < hp_.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < n; start += hp_.minibatch_size) {
      const size_t m = std::min<size_t>(hp_.minibatch_size, n - start);
      PpoBatch batch;
      batch.obs.resize(obs_dim, static_cast<Eigen::Index>(m));
      batch.old_log_probs.resize(static_cast<Eigen::Index>(m));
      batch.advantages.resize(static_cast<Eigen::Index>(m));
      batch.returns.resize(static_cast<Eigen::Index>(m));
      batch.actions.reserve(m);
      for (size_t j = 0; j < m; ++j) {
        const size_t i = order[start + j];
        const Transition& tr = traj.steps[i];
        batch.obs.col(static_cast<Eigen::Index>(j)) = tr.obs;
        batch.actions.push_back(tr.action);
        batch.old_log_probs[static_cast<Eigen::Index>(j)] = tr.log_prob;
        batch.advantages[static_cast<Eigen::Index>(j)] = adv[static_cast<Eigen::Index>(i)];
        batch.returns[static_cast<Eigen::Index>(j)] = gae.returns[i];
      }
      PpoLoss loss;
      const PpoGradients grads = LossGradients(ac_, batch, hp_, &loss);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "PPO loss is not finite (policy=" << loss.policy
            << " value=" << loss.value << " entropy=" << loss.entropy
            << " epoch=" << epoch << " batch_start=" << start << ")";
        throw NumericError(msg.str());
      }
      ApplyGradients(grads);
      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.clip_fraction += loss.clip_fraction;
      stats.approx_kl += loss.approx_kl;
      ++stats.minibatches;
    }
  }
  const double k = 1.0 / stats.minibatches;
  stats.policy_loss *= k;
  stats.value_loss *= k;
  stats.entropy *= k;
  stats.clip_fraction *= k;
  stats.approx_kl *= k;
  return stats;
}

void PpoTrainer::Save(std::ostream& out) const {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  WriteU64(out, kCheckpointVersion);
  WriteU64(out, static_cast<std::uint64_t>(ac_.head));
  WriteNet(out, ac_.actor);
  WriteNet(out, ac_.critic);
  WriteDoubles(out, ac_.log_std);
  WriteAdam(out, actor_opt_);
  WriteAdam(out, critic_opt_);
  WriteAdam(out, log_std_opt_);
}

PpoTrainer PpoTrainer::Load(std::istream& in, PPOHyperparams hp) {
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw InputError("not an actor-critic checkpoint");
  }
  if (ReadU64(in) != kCheckpointVersion) throw InputError("unsupported checkpoint version");
  const std::uint64_t head = ReadU64(in);
  if (head > 1) throw InputError("unknown policy head in checkpoint");
  ActorCritic ac;
  ac.head = static_cast<PolicyHead>(head);
  ac.actor = ReadNet(in);
  ac.critic = ReadNet(in);
  ac.log_std = ReadDoubles(in);
  PpoTrainer trainer(std::move(ac), hp);
  trainer.actor_opt_ = ReadAdam(in);
  trainer.critic_opt_ = ReadAdam(in);
  trainer.log_std_opt_ = ReadAdam(in);
  return trainer;
}

bool operator==(const PpoTrainer& a, const PpoTrainer& b) {
  return a.ac_ == b.ac_ && a.actor_opt_ == b.actor_opt_ &&
         a.critic_opt_ == b.critic_opt_ && a.log_std_opt_ == b.log_std_opt_;
}

std::uint64_t EpisodeSeed(std::uint64_t base_seed, std::uint64_t episode) {
  return SplitMix64(base_seed ^ SplitMix64(episode));
}

RolloutCollector::RolloutCollector(EnvConfig cfg) : cfg_(cfg) {
  cfg_.Validate();
  StartEpisode();
}

void RolloutCollector::StartEpisode() {
  EnvConfig episode_cfg = cfg_;
  episode_cfg.seed = EpisodeSeed(cfg_.seed, episode_index_++);
  auto [state, obs] = Reset(episode_cfg);
  state_ = std::move(state);
  obs_ = std::move(obs);
  current_ = EpisodeStats{};
}

Trajectory RolloutCollector::Collect(const ActorCritic& ac, int steps,
                                     std::mt19937_64& rng,
                                     Disturbance* disturbance) {
  if (ac.head != PolicyHead::kCategorical) {
    throw ConfigError("rollouts drive a categorical protagonist");
  }
  Trajectory traj;
  traj.steps.reserve(static_cast<size_t>(std::max(steps, 0)));
  for (int t = 0; t < steps; ++t) {
    Observation agent_obs = obs_;
    if (disturbance != nullptr) disturbance->BeforeAct(state_, agent_obs, rng);
    ActResult act = Act(ac, agent_obs, rng);
    auto [next, result] = Step(state_, act.action.discrete);
    if (disturbance != nullptr) disturbance->AfterStep(result);

    Transition tr;
    tr.obs = std::move(agent_obs);
    tr.action = std::move(act.action);
    tr.log_prob = act.log_prob;
    tr.reward = result.reward;
    tr.value = act.value;
    tr.done = result.done;
    current_.total_return += result.reward;
    current_.length += 1;
    current_.metric = EpisodeMetric(cfg_.kind, result.info);
    if (result.done) {
      if (result.info.cause == TerminalCause::kTimeLimit) {
        tr.bootstrap_value = Value(ac, result.observation);
      }
      finished_.push_back(current_);
      StartEpisode();
    } else {
      state_ = std::move(next);
      obs_ = std::move(result.observation);
    }
    traj.steps.push_back(std::move(tr));
  }
  if (!traj.steps.empty() && !traj.steps.back().done) {
    traj.steps.back().bootstrap_value = Value(ac, obs_);
  }
  return traj;
}

std::vector<EpisodeStats> RolloutCollector::TakeFinishedEpisodes() {
  std::vector<EpisodeStats> out;
  out.swap(finished_);
  return out;
}

std::vector<EpisodeStats> EvaluatePolicy(const ActorCritic& ac,
                                         const EnvConfig& cfg, int episodes,
                                         std::mt19937_64& rng,
                                         Disturbance* disturbance) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  std::vector<EpisodeStats> out;
  out.reserve(static_cast<size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    EnvConfig episode_cfg = cfg;
    episode_cfg.seed = EpisodeSeed(cfg.seed, static_cast<std::uint64_t>(e));
    auto [state, obs] = Reset(episode_cfg);
    EpisodeStats stats;
    while (true) {
      Observation agent_obs = obs;
      if (disturbance != nullptr) disturbance->BeforeAct(state, agent_obs, rng);
      const int action = GreedyAction(ac, agent_obs).discrete;
      auto [next, result] = Step(state, action);
      if (disturbance != nullptr) disturbance->AfterStep(result);
      stats.total_return += result.reward;
      stats.length += 1;
      stats.metric = EpisodeMetric(cfg.kind, result.info);
      if (result.done) break;
      state = std::move(next);
      obs = std::move(result.observation);
    }
    out.push_back(stats);
  }
  return out;
}

std::int64_t TrainPpo(PpoTrainer& trainer, RolloutCollector& collector,
                      std::int64_t steps, std::mt19937_64& rng,
                      Disturbance* disturbance, std::vector<CurvePoint>* curve,
                      std::int64_t step_offset) {
  if (steps < 0) throw ConfigError("training steps must be non-negative");
  const std::int64_t window = trainer.hyperparams().rollout_length;
  std::int64_t done = 0;
  while (done < steps) {
    const int n = static_cast<int>(std::min(window, steps - done));
    const Trajectory traj = collector.Collect(trainer.agent(), n, rng, disturbance);
    trainer.Update(traj, rng);
    done += n;
    const std::vector<EpisodeStats> episodes = collector.TakeFinishedEpisodes();
    if (curve != nullptr) {
      CurvePoint point;
      point.step = step_offset + done;
      point.episodes = static_cast<int>(episodes.size());
      for (const EpisodeStats& e : episodes) {
        point.mean_return += e.total_return;
        point.mean_metric += e.metric;
      }
      if (!episodes.empty()) {
        point.mean_return /= static_cast<double>(episodes.size());
        point.mean_metric /= static_cast<double>(episodes.size());
      }
      curve->push_back(point);
    }
  }
  return step_offset + steps;
}

}  // namespace envadv
