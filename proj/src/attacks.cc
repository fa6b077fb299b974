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

#include "envadv/attacks.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "envadv/errors.h"

namespace envadv {
namespace {

void ApplyMask(Vector& v, const FeatureMask* mask) {
  if (mask == nullptr) return;
  if (static_cast<Eigen::Index>(mask->size()) != v.size()) {
    throw ShapeError("feature mask length does not match the observation");
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(*mask)[i]) v[i] = 0.0;
  }
}

// eta = scale * direction / ||direction||, or a degenerate zero step.
Perturbation Normalized(Vector direction, double epsilon, double sign) {
  Perturbation p;
  const double norm = direction.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    p.eta = Vector::Zero(direction.size());
    p.degenerate = true;
    return p;
  }
  p.eta = (sign * epsilon / norm) * direction;
  return p;
}

FeatureMask AndMasks(const FeatureMask& a, const FeatureMask& b) {
  if (a.size() != b.size()) throw ShapeError("feature mask length mismatch");
  FeatureMask out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

}  // namespace

std::string AttackMethodName(AttackMethod method) {
  switch (method) {
    case AttackMethod::kEACN: return "eacn";
    case AttackMethod::kEAAN: return "eaan";
    case AttackMethod::kOACN: return "oacn";
    case AttackMethod::kOAAN: return "oaan";
  }
  return "?";
}

std::string AttackKindName(AttackKind kind) {
  return kind == AttackKind::kCriticGradient ? "critic" : "actor";
}

std::string AttackModeName(AttackMode mode) {
  return mode == AttackMode::kEnvironment ? "environment" : "observation";
}

void AttackConfig::Validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("attack epsilon must be positive");
  }
  if (!(attack_probability >= 0.0 && attack_probability <= 1.0)) {
    throw ConfigError("attack probability must lie in [0, 1]");
  }
  if (mode == AttackMode::kEnvironment && !feature_mask.has_value()) {
    throw ConfigError("environment attacks need a feature mask");
  }
}

AttackConfig MakeAttackConfig(AttackMethod method, double epsilon, EnvKind env) {
  AttackConfig cfg;
  cfg.epsilon = epsilon;
  cfg.kind = (method == AttackMethod::kEACN || method == AttackMethod::kOACN)
                 ? AttackKind::kCriticGradient
                 : AttackKind::kActorSaliency;
  cfg.mode = (method == AttackMethod::kEACN || method == AttackMethod::kEAAN)
                 ? AttackMode::kEnvironment
                 : AttackMode::kObservation;
  if (cfg.mode == AttackMode::kEnvironment) cfg.feature_mask = DefaultMask(env);
  cfg.Validate();
  return cfg;
}

Vector SaliencyMap(const FeedForwardNet& actor, const Observation& x,
                   int* dominant) {
  if (actor.output_dim() < 2) throw ShapeError("saliency needs at least two logits");
  Eigen::Index d;
  Forward(actor, x).maxCoeff(&d);
  if (dominant != nullptr) *dominant = static_cast<int>(d);
  // sum_{j != d} J_j - J_d as a single vector-Jacobian product.
  Vector weights = Vector::Ones(actor.output_dim());
  weights[d] = -1.0;
  return InputGradient(actor, x, weights);
}

Perturbation EaanPerturbation(const FeedForwardNet& actor, const Observation& x,
                              double epsilon, const FeatureMask* mask) {
  Vector h = SaliencyMap(actor, x);
  ApplyMask(h, mask);
  return Normalized(std::move(h), epsilon, 1.0);
}

Perturbation EacnPerturbation(const FeedForwardNet& critic, const Observation& x,
                              double epsilon, const FeatureMask* mask) {
  if (critic.output_dim() != 1) throw ShapeError("critic must be scalar-valued");
  Vector g = InputGradient(critic, x, Vector::Ones(1));
  ApplyMask(g, mask);
  return Normalized(std::move(g), epsilon, -1.0);
}

CraftedObservation CraftAdversarialObservation(const Observation& x,
                                               const Vector& eta) {
  if (x.size() != eta.size()) throw ShapeError("perturbation length mismatch");
  CraftedObservation out;
  const Vector raw = x + eta;
  out.x_adv = raw.cwiseMax(-1.0).cwiseMin(1.0);
  out.clamped = out.x_adv != raw;
  out.effective_norm = (out.x_adv - x).norm();
  return out;
}

AttackOutcome ApplyAttack(const AttackConfig& cfg, const ActorCritic& agent,
                          const EnvState& state, const Observation& x,
                          std::mt19937_64& rng) {
  cfg.Validate();
  AttackOutcome out{state, x, {}};
  if (cfg.attack_probability < 1.0 &&
      !std::bernoulli_distribution(cfg.attack_probability)(rng)) {
    return out;
  }
  std::optional<FeatureMask> mask;
  if (cfg.mode == AttackMode::kEnvironment) {
    mask = AndMasks(*cfg.feature_mask, RealizableMask(state));
  }
  const FeatureMask* mask_ptr = mask ? &*mask : nullptr;
  const Perturbation p = cfg.kind == AttackKind::kCriticGradient
                             ? EacnPerturbation(agent.critic, x, cfg.epsilon, mask_ptr)
                             : EaanPerturbation(agent.actor, x, cfg.epsilon, mask_ptr);
  AttackDiagnostics& diag = out.diagnostics;
  diag.attacked = true;
  diag.degenerate = p.degenerate;
  diag.eta_norm = p.eta.norm();
  if (p.degenerate) return out;

  const CraftedObservation crafted = CraftAdversarialObservation(x, p.eta);
  diag.clamped = crafted.clamped;
  if (cfg.mode == AttackMode::kEnvironment) {
    out.state = ApplyModifier(state, crafted.x_adv, *mask);
    out.agent_obs = Observe(out.state);
    diag.state_changed = !(out.state == state);
  } else {
    out.agent_obs = crafted.x_adv;
  }
  diag.value_delta = Value(agent, out.agent_obs) - Value(agent, x);
  const Vector p_before = Softmax(Forward(agent.actor, x));
  const Vector p_after = Softmax(Forward(agent.actor, out.agent_obs));
  Eigen::Index d;
  p_before.maxCoeff(&d);
  diag.dominant_prob_delta = p_after[d] - p_before[d];
  return out;
}

void AttackSummary::Add(const AttackDiagnostics& d) {
  ++steps;
  attacked += d.attacked;
  degenerate += d.degenerate;
  clamped += d.clamped;
  state_changed += d.state_changed;
  eta_norm_sum += d.eta_norm;
  value_delta_sum += d.value_delta;
}

AttackDisturbance::AttackDisturbance(AttackConfig cfg, const ActorCritic& agent)
    : cfg_(std::move(cfg)), agent_(agent) {
  cfg_.Validate();
}

void AttackDisturbance::set_log(std::ostream* log) {
  log_ = log;
  if (log_ != nullptr) {
    *log_ << "step,kind,mode,eta_norm,value_delta,degenerate_flag,clamped_flag\n";
  }
}

void AttackDisturbance::BeforeAct(EnvState& state, Observation& agent_obs,
                                  std::mt19937_64& rng) {
  AttackOutcome out = ApplyAttack(cfg_, agent_, state, agent_obs, rng);
  if (log_ != nullptr) {
    const AttackDiagnostics& d = out.diagnostics;
    *log_ << summary_.steps << ',' << AttackKindName(cfg_.kind) << ','
          << AttackModeName(cfg_.mode) << ',' << d.eta_norm << ',' << d.value_delta
          << ',' << (d.degenerate ? 1 : 0) << ',' << (d.clamped ? 1 : 0) << '\n';
  }
  summary_.Add(out.diagnostics);
  state = std::move(out.state);
  agent_obs = std::move(out.agent_obs);
}

}  // namespace envadv
