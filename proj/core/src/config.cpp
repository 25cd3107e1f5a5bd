#include "pgg/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pgg/envs.hpp"
#include "pgg/error.hpp"

extern char** environ;

namespace pgg {

namespace {

enum class FieldType { kString, kInt, kFloat, kBool };

const char* type_name(FieldType t) {
  switch (t) {
    case FieldType::kString: return "string";
    case FieldType::kInt: return "int";
    case FieldType::kFloat: return "float";
    case FieldType::kBool: return "bool";
  }
  return "?";
}

struct Field {
  const char* name;
  FieldType type;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::int64_t parse_int(const std::string& field, const std::string& v) {
  std::int64_t out = 0;
  // Accept scientific shorthand such as 5e5 when it is integral.
  if (v.find_first_of("eE.") != std::string::npos) {
    double d = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec != std::errc() || p != v.data() + v.size() || d != static_cast<double>(static_cast<std::int64_t>(d))) {
      throw Error(field + ": expected int, got '" + v + "'");
    }
    return static_cast<std::int64_t>(d);
  }
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(field + ": expected int, got '" + v + "'");
  }
  return out;
}

double parse_float(const std::string& field, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(field + ": expected float, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& field, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw Error(field + ": expected bool (true/false), got '" + v + "'");
}

std::string format_float(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

#define PGG_INT_FIELD(member)                                                              \
  Field {                                                                                  \
    #member, FieldType::kInt,                                                              \
        [](TrainConfig& c, const std::string& v) { c.member = parse_int(#member, v); },    \
        [](const TrainConfig& c) { return std::to_string(c.member); }                      \
  }
#define PGG_FLOAT_FIELD(member)                                                            \
  Field {                                                                                  \
    #member, FieldType::kFloat,                                                            \
        [](TrainConfig& c, const std::string& v) { c.member = parse_float(#member, v); },  \
        [](const TrainConfig& c) { return format_float(c.member); }                        \
  }
#define PGG_BOOL_FIELD(member)                                                             \
  Field {                                                                                  \
    #member, FieldType::kBool,                                                             \
        [](TrainConfig& c, const std::string& v) { c.member = parse_bool(#member, v); },   \
        [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }      \
  }

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      Field{"env", FieldType::kString,
            [](TrainConfig& c, const std::string& v) { c.env = v; },
            [](const TrainConfig& c) { return c.env; }},
      PGG_INT_FIELD(total_timesteps),
      PGG_INT_FIELD(stop_timesteps),
      PGG_FLOAT_FIELD(gamma_train),
      PGG_FLOAT_FIELD(p_drop),
      PGG_BOOL_FIELD(dropout_per_minibatch),
      PGG_FLOAT_FIELD(learning_rate),
      PGG_BOOL_FIELD(anneal_lr),
      PGG_INT_FIELD(num_envs),
      PGG_INT_FIELD(num_steps),
      PGG_INT_FIELD(update_epochs),
      PGG_INT_FIELD(num_minibatches),
      PGG_FLOAT_FIELD(clip_coef),
      PGG_BOOL_FIELD(clip_vloss),
      PGG_FLOAT_FIELD(ent_coef),
      PGG_FLOAT_FIELD(vf_coef),
      PGG_FLOAT_FIELD(max_grad_norm),
      PGG_FLOAT_FIELD(discount),
      PGG_FLOAT_FIELD(gae_lambda),
      PGG_BOOL_FIELD(norm_adv),
      PGG_FLOAT_FIELD(adam_eps),
      PGG_INT_FIELD(seed),
      PGG_INT_FIELD(checkpoint_interval),
      PGG_BOOL_FIELD(normalize_obs),
      PGG_BOOL_FIELD(normalize_reward),
  };
  return fields;
}

#undef PGG_INT_FIELD
#undef PGG_FLOAT_FIELD
#undef PGG_BOOL_FIELD

const Field& find_field(const std::string& name) {
  for (const auto& f : schema()) {
    if (name == f.name) return f;
  }
  throw Error(name + ": unknown config key");
}

}  // namespace

TrainConfig TrainConfig::defaults_for(const std::string& env) {
  TrainConfig c;
  c.env = env;
  if (env.empty()) return c;
  if (env_is_discrete(env)) return c;
  c.total_timesteps = 1000000;
  c.learning_rate = 3e-4;
  c.num_envs = 1;
  c.num_steps = 2048;
  c.update_epochs = 10;
  c.num_minibatches = 32;
  c.ent_coef = 0.0;
  c.checkpoint_interval = 200000;
  c.normalize_obs = true;
  c.normalize_reward = true;
  return c;
}

void TrainConfig::validate() const {
  if (env.empty()) throw Error("env: required");
  const auto names = env_names();
  if (std::find(names.begin(), names.end(), env) == names.end()) {
    throw Error("env: unknown environment '" + env + "'");
  }
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw Error(std::string(name) + ": must be positive");
  };
  positive("total_timesteps", static_cast<double>(total_timesteps));
  if (stop_timesteps < 0) throw Error("stop_timesteps: must be non-negative");
  if (!std::isfinite(gamma_train)) throw Error("gamma_train: must be finite");
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw Error("p_drop: must lie in [0, 1]");
  positive("learning_rate", learning_rate);
  positive("num_envs", static_cast<double>(num_envs));
  positive("num_steps", static_cast<double>(num_steps));
  positive("update_epochs", static_cast<double>(update_epochs));
  positive("num_minibatches", static_cast<double>(num_minibatches));
  if (batch_size() % num_minibatches != 0 || minibatch_size() < 2) {
    throw Error("num_minibatches: must divide num_envs * num_steps into minibatches of >= 2");
  }
  positive("clip_coef", clip_coef);
  if (ent_coef < 0.0) throw Error("ent_coef: must be non-negative");
  if (vf_coef < 0.0) throw Error("vf_coef: must be non-negative");
  positive("max_grad_norm", max_grad_norm);
  if (!(discount >= 0.0 && discount <= 1.0)) throw Error("discount: must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw Error("gae_lambda: must lie in [0, 1]");
  positive("adam_eps", adam_eps);
  if (seed < 0) throw Error("seed: must be non-negative");
  positive("checkpoint_interval", static_cast<double>(checkpoint_interval));
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  for (const auto& f : schema()) {
    os << f.name << ": " << type_name(f.type) << " = " << f.get(*this) << '\n';
  }
  return os.str();
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(to_text()); }

TrainConfig parse_config(const std::string& text) {
  struct Entry {
    std::string type;
    std::string value;
  };
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto colon = stripped.find(':');
    const auto eq = stripped.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
      throw Error("config line " + std::to_string(lineno) +
                  ": expected 'name: type = value', got '" + stripped + "'");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, colon));
    const std::string type = trim(std::string_view(stripped).substr(colon + 1, eq - colon - 1));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const Field& field = find_field(key);
    if (type != type_name(field.type)) {
      throw Error(key + ": declared type '" + type + "' but field is " + type_name(field.type));
    }
    if (!entries.emplace(key, Entry{type, value}).second) {
      throw Error(key + ": duplicate key");
    }
  }
  const auto env_it = entries.find("env");
  if (env_it == entries.end() || env_it->second.value.empty()) throw Error("env: required");
  const auto names = env_names();
  if (std::find(names.begin(), names.end(), env_it->second.value) == names.end()) {
    throw Error("env: unknown environment '" + env_it->second.value + "'");
  }
  TrainConfig config = TrainConfig::defaults_for(env_it->second.value);
  for (const auto& [key, entry] : entries) find_field(key).set(config, entry.value);
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void set_config_field(TrainConfig& config, const std::string& name, const std::string& value) {
  find_field(name).set(config, value);
}

void apply_env_overrides(TrainConfig& config, const std::map<std::string, std::string>& env_vars) {
  for (const auto& [var, value] : env_vars) {
    if (!var.starts_with("PGG_")) continue;
    std::string field = var.substr(4);
    std::transform(field.begin(), field.end(), field.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    try {
      set_config_field(config, field, value);
    } catch (const Error& e) {
      throw Error(var + ": " + e.what());
    }
  }
}

std::map<std::string, std::string> process_env_overrides() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    if (!kv.starts_with("PGG_")) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> config_field_names() {
  std::vector<std::string> out;
  for (const auto& f : schema()) out.emplace_back(f.name);
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pgg
