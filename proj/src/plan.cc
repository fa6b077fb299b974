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

#include "envadv/plan.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "envadv/errors.h"

namespace envadv {
namespace {

std::string Trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> SplitList(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T ParseNumber(const std::string& raw, const std::string& what) {
  const std::string text = Trim(raw);
  T value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ConfigError("invalid value '" + raw + "' for " + what);
  }
  return value;
}

bool ParseBool(const std::string& raw, const std::string& what) {
  const std::string v = Lower(Trim(raw));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean '" + raw + "' for " + what);
}

template <typename T>
std::string JoinNumbers(const std::vector<T>& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += FormatDouble(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

template <typename T>
std::vector<T> ParseNumbers(const std::string& raw, const std::string& what) {
  std::vector<T> out;
  for (const std::string& item : SplitList(raw)) out.push_back(ParseNumber<T>(item, what));
  return out;
}

std::string JoinMethods(const std::vector<Method>& methods) {
  std::string out;
  for (size_t i = 0; i < methods.size(); ++i) {
    if (i > 0) out += ", ";
    out += MethodName(methods[i]);
  }
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentPlan&)> get;
  std::function<void(ExperimentPlan&, const std::string&)> set;
};

#define ENVADV_DOUBLE(sec, name, member)                                      \
  Field{sec, name, [](const ExperimentPlan& p) { return FormatDouble(p.member); }, \
        [](ExperimentPlan& p, const std::string& v) {                         \
          p.member = ParseNumber<double>(v, std::string(sec) + "." + name);    \
        }}
#define ENVADV_INT(sec, name, member, type)                                   \
  Field{sec, name, [](const ExperimentPlan& p) { return std::to_string(p.member); }, \
        [](ExperimentPlan& p, const std::string& v) {                         \
          p.member = ParseNumber<type>(v, std::string(sec) + "." + name);      \
        }}
#define ENVADV_LIST(sec, name, member, type)                                  \
  Field{sec, name, [](const ExperimentPlan& p) { return JoinNumbers(p.member); }, \
        [](ExperimentPlan& p, const std::string& v) {                         \
          p.member = ParseNumbers<type>(v, std::string(sec) + "." + name);     \
        }}
#define ENVADV_METHODS(sec, name, member)                                     \
  Field{sec, name, [](const ExperimentPlan& p) { return JoinMethods(p.member); }, \
        [](ExperimentPlan& p, const std::string& v) {                         \
          p.member.clear();                                                   \
          for (const std::string& m : SplitList(v)) p.member.push_back(ParseMethod(m)); \
        }}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      Field{"env", "kind", [](const ExperimentPlan& p) { return EnvKindName(p.env.kind); },
            [](ExperimentPlan& p, const std::string& v) { p.env.kind = ParseEnvKind(Trim(v)); }},
      ENVADV_DOUBLE("env", "base_difficulty", env.difficulty),
      ENVADV_DOUBLE("env", "target_difficulty", target_difficulty),
      ENVADV_INT("env", "time_limit", env.time_limit, int),

      Field{"method", "name", [](const ExperimentPlan& p) { return MethodName(p.method); },
            [](ExperimentPlan& p, const std::string& v) { p.method = ParseMethod(Trim(v)); }},
      ENVADV_DOUBLE("method", "epsilon", epsilon),
      ENVADV_DOUBLE("method", "alpha", alpha),
      ENVADV_DOUBLE("method", "attack_probability", attack_probability),
      ENVADV_LIST("method", "epsilon_grid", epsilon_grid, double),
      ENVADV_LIST("method", "alpha_grid", alpha_grid, double),

      ENVADV_LIST("training", "seeds", seeds, std::uint64_t),
      ENVADV_INT("training", "pretrain_steps", pretrain_steps, std::int64_t),
      ENVADV_INT("training", "train_steps", train_steps, std::int64_t),
      ENVADV_LIST("training", "hidden", hidden, int),
      ENVADV_DOUBLE("training", "gamma", ppo.gamma),
      ENVADV_DOUBLE("training", "gae_lambda", ppo.gae_lambda),
      ENVADV_DOUBLE("training", "clip_ratio", ppo.clip_ratio),
      ENVADV_DOUBLE("training", "learning_rate", ppo.learning_rate),
      ENVADV_INT("training", "epochs", ppo.epochs_per_update, int),
      ENVADV_INT("training", "minibatch_size", ppo.minibatch_size, int),
      ENVADV_INT("training", "rollout_length", ppo.rollout_length, int),
      ENVADV_DOUBLE("training", "entropy_coef", ppo.entropy_coef),
      ENVADV_DOUBLE("training", "value_coef", ppo.value_coef),
      ENVADV_DOUBLE("training", "max_grad_norm", ppo.max_grad_norm),

      ENVADV_INT("adversary", "block_steps", block_steps, std::int64_t),
      ENVADV_DOUBLE("adversary", "fsp_mix", fsp_mix),
      ENVADV_INT("adversary", "sl_capacity", sl_capacity, std::int64_t),
      ENVADV_INT("adversary", "sl_epochs", sl_epochs, int),
      ENVADV_DOUBLE("adversary", "cooperative_reward_scale", cooperative_reward_scale),

      ENVADV_INT("eval", "episodes", eval_episodes, int),
      ENVADV_LIST("eval", "difficulty_grid", difficulty_grid, double),
      ENVADV_METHODS("eval", "sweep_methods", sweep_methods),
      Field{"eval", "sweep_epsilons",
            [](const ExperimentPlan& p) {
              std::string out;
              for (size_t i = 0; i < p.sweep_epsilons.size(); ++i) {
                if (i > 0) out += ", ";
                out += MethodName(p.sweep_epsilons[i].first) + ":" +
                       FormatDouble(p.sweep_epsilons[i].second);
              }
              return out;
            },
            [](ExperimentPlan& p, const std::string& v) {
              p.sweep_epsilons.clear();
              for (const std::string& item : SplitList(v)) {
                const size_t colon = item.find(':');
                if (colon == std::string::npos) {
                  throw ConfigError("sweep_epsilons entries look like method:epsilon");
                }
                p.sweep_epsilons.emplace_back(
                    ParseMethod(item.substr(0, colon)),
                    ParseNumber<double>(item.substr(colon + 1), "eval.sweep_epsilons"));
              }
            }},
      ENVADV_METHODS("eval", "attack_methods", attack_methods),
      ENVADV_LIST("eval", "attack_epsilons", attack_epsilons, double),
      Field{"eval", "attack_log",
            [](const ExperimentPlan& p) { return std::string(p.attack_log ? "true" : "false"); },
            [](ExperimentPlan& p, const std::string& v) {
              p.attack_log = ParseBool(v, "eval.attack_log");
            }},
  };
  return fields;
}

#undef ENVADV_DOUBLE
#undef ENVADV_INT
#undef ENVADV_LIST
#undef ENVADV_METHODS

const Field* FindField(const std::string& section, const std::string& key) {
  for (const Field& f : Fields()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

std::vector<double> EvenGrid(double from, double to, int points) {
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) {
    grid.push_back(from + (to - from) * i / (points - 1));
  }
  return grid;
}

}  // namespace

std::string MethodName(Method method) {
  switch (method) {
    case Method::kBaseline: return "baseline";
    case Method::kTarget: return "target";
    case Method::kEACN: return "eacn";
    case Method::kEAAN: return "eaan";
    case Method::kOACN: return "oacn";
    case Method::kOAAN: return "oaan";
    case Method::kRARL: return "rarl";
    case Method::kFSP: return "fsp";
    case Method::kCoFSP: return "co-fsp";
  }
  return "?";
}

Method ParseMethod(std::string_view name) {
  std::string key = Lower(Trim(name));
  std::replace(key.begin(), key.end(), '_', '-');
  for (Method m : {Method::kBaseline, Method::kTarget, Method::kEACN, Method::kEAAN,
                   Method::kOACN, Method::kOAAN, Method::kRARL, Method::kFSP,
                   Method::kCoFSP}) {
    if (key == MethodName(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

bool IsGradientMethod(Method method) {
  return method == Method::kEACN || method == Method::kEAAN ||
         method == Method::kOACN || method == Method::kOAAN;
}

bool IsAdversaryMethod(Method method) {
  return method == Method::kRARL || method == Method::kFSP || method == Method::kCoFSP;
}

Profile ParseProfile(std::string_view name) {
  const std::string key = Lower(Trim(name));
  if (key == "desk") return Profile::kDesk;
  if (key == "full") return Profile::kFull;
  throw ConfigError("unknown profile '" + std::string(name) + "'");
}

std::string ProfileName(Profile profile) {
  return profile == Profile::kDesk ? "desk" : "full";
}

void ExperimentPlan::Validate() const {
  env.Validate();
  EnvConfig target = env;
  target.difficulty = target_difficulty;
  target.Validate();
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(alpha >= 0.0 && alpha <= 0.5)) throw ConfigError("alpha must lie in [0, 0.5]");
  if (!(attack_probability >= 0.0 && attack_probability <= 1.0)) {
    throw ConfigError("attack_probability must lie in [0, 1]");
  }
  if (epsilon_grid.empty()) throw ConfigError("epsilon_grid must not be empty");
  for (double e : epsilon_grid) {
    if (!(e > 0.0)) throw ConfigError("epsilon_grid values must be positive");
  }
  if (alpha_grid.empty()) throw ConfigError("alpha_grid must not be empty");
  for (double a : alpha_grid) {
    if (!(a >= 0.0 && a <= 0.5)) throw ConfigError("alpha_grid values must lie in [0, 0.5]");
  }
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (pretrain_steps < 0 || train_steps < 0) throw ConfigError("step budgets must be >= 0");
  if (hidden.empty()) throw ConfigError("hidden layer sizes must not be empty");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
  }
  ppo.Validate();
  if (block_steps < 1) throw ConfigError("block_steps must be >= 1");
  if (!(fsp_mix >= 0.0 && fsp_mix <= 1.0)) throw ConfigError("fsp_mix must lie in [0, 1]");
  if (sl_capacity < 1 || sl_epochs < 0) throw ConfigError("invalid average strategy settings");
  if (!(cooperative_reward_scale >= 0.0)) {
    throw ConfigError("cooperative_reward_scale must be >= 0");
  }
  if (eval_episodes < 1) throw ConfigError("eval episodes must be >= 1");
  if (difficulty_grid.empty()) throw ConfigError("difficulty_grid must not be empty");
  for (double d : difficulty_grid) {
    EnvConfig c = env;
    c.difficulty = d;
    c.Validate();
  }
  if (sweep_methods.empty()) throw ConfigError("sweep_methods must not be empty");
  for (const auto& [m, e] : sweep_epsilons) {
    if (!(e > 0.0)) throw ConfigError("sweep epsilon for " + MethodName(m) + " must be positive");
  }
  for (Method m : attack_methods) {
    if (m == Method::kBaseline || m == Method::kTarget) {
      throw ConfigError("attack_methods only takes attack or adversary methods");
    }
  }
  if (attack_epsilons.empty()) throw ConfigError("attack_epsilons must not be empty");
  for (double e : attack_epsilons) {
    if (!(e >= 0.0)) throw ConfigError("attack_epsilons must be >= 0");
  }
}

ExperimentPlan DefaultPlan(EnvKind kind, Profile profile) {
  ExperimentPlan plan;
  plan.env.kind = kind;
  plan.env.difficulty = BaseDifficulty(kind);
  plan.env.time_limit = DefaultTimeLimit(kind);
  plan.env.seed = 0;
  plan.target_difficulty = TargetDifficulty(kind);
  plan.epsilon_grid = {0.01, 0.02, 0.05, 0.1, 0.2};
  plan.alpha_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  plan.seeds = {1, 2, 3, 4, 5};
  // The full profile keeps the original 1M pretraining / 2M training budget.
  plan.pretrain_steps = profile == Profile::kDesk ? 75000 : 1000000;
  plan.train_steps = profile == Profile::kDesk ? 150000 : 2000000;
  plan.block_steps = profile == Profile::kDesk ? 2048 : 10000;
  plan.hidden = {64, 64};
  plan.difficulty_grid = EvenGrid(plan.env.difficulty, plan.target_difficulty, 5);
  plan.sweep_methods = {Method::kBaseline, Method::kTarget, Method::kEACN,
                        Method::kEAAN,     Method::kOACN,   Method::kOAAN,
                        Method::kRARL,     Method::kFSP,    Method::kCoFSP};
  plan.attack_methods = {Method::kEACN, Method::kEAAN, Method::kOACN, Method::kOAAN};
  plan.attack_epsilons = {0.0, 0.01, 0.02, 0.05, 0.1, 0.2};
  return plan;
}

double SweepEpsilon(const ExperimentPlan& plan, Method method) {
  for (const auto& [m, e] : plan.sweep_epsilons) {
    if (m == method) return e;
  }
  return plan.epsilon;
}

ExperimentPlan ParsePlan(std::istream& in, Profile profile) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse plan: ") + e.what());
  }
  EnvKind kind = EnvKind::kFlappy;
  if (auto env = tree.get_child_optional("env")) {
    if (auto k = env->get_optional<std::string>("kind")) kind = ParseEnvKind(Trim(*k));
  }
  ExperimentPlan plan = DefaultPlan(kind, profile);
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (!body.data().empty()) throw ConfigError("key outside a section: " + section);
      const bool known = std::any_of(Fields().begin(), Fields().end(),
                                     [&](const Field& f) { return section == f.section; });
      if (!known) throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    for (const auto& [key, value] : body) {
      const Field* field = FindField(section, key);
      if (field == nullptr) throw ConfigError("unknown key [" + section + "] " + key);
      field->set(plan, value.data());
    }
  }
  plan.Validate();
  return plan;
}

ExperimentPlan LoadPlanFile(const std::string& path, Profile profile) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan file " + path);
  return ParsePlan(in, profile);
}

std::string CanonicalPlan(const ExperimentPlan& plan) {
  std::string out;
  std::string section;
  for (const Field& f : Fields()) {
    if (section != f.section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(plan) + "\n";
  }
  return out;
}

std::string FormatDouble(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

std::uint64_t Fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexDigest(std::uint64_t value) {
  static const char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[static_cast<size_t>(i)] = kDigits[value & 0xf];
  return out;
}

std::string ConfigHash(const ExperimentPlan& plan) {
  return HexDigest(Fnv1a64(CanonicalPlan(plan)));
}

}  // namespace envadv
