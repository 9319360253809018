#include "flock/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flock/errors.hpp"

namespace flock {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned())
        throw ConfigError(where + "." + key + ": expected a non-negative integer");
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Arch read_arch(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": architecture must be a string");
  try {
    return parse_arch(v.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void read_flocking(const json& j, FlockingConfig& f) {
  const std::string w = "flocking";
  reject_unknown(j, w,
                 {"n_agents", "sampling_time", "duration", "comm_radius", "max_accel",
                  "vel_range", "bias_range", "min_init_dist", "potential_cutoff",
                  "placement_spacing"});
  read(j, "n_agents", f.n_agents, w);
  read(j, "sampling_time", f.sampling_time, w);
  read(j, "duration", f.duration, w);
  read(j, "comm_radius", f.comm_radius, w);
  read(j, "max_accel", f.max_accel, w);
  read(j, "vel_range", f.vel_range, w);
  read(j, "bias_range", f.bias_range, w);
  read(j, "min_init_dist", f.min_init_dist, w);
  read(j, "potential_cutoff", f.potential_cutoff, w);
  read(j, "placement_spacing", f.placement_spacing, w);
}

void read_training(const json& j, TrainConfig& t) {
  const std::string w = "training";
  reject_unknown(j, w,
                 {"epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2",
                  "adam_epsilon", "validation_interval", "tap_gain"});
  read(j, "epochs", t.epochs, w);
  read(j, "batch_size", t.batch_size, w);
  read(j, "learning_rate", t.learning_rate, w);
  read(j, "adam_beta1", t.adam_beta1, w);
  read(j, "adam_beta2", t.adam_beta2, w);
  read(j, "adam_epsilon", t.adam_epsilon, w);
  read(j, "validation_interval", t.validation_interval, w);
  read(j, "tap_gain", t.tap_gain, w);
}

void read_experiment(const json& j, RunConfig& c) {
  const std::string w = "experiment";
  reject_unknown(j, w,
                 {"archs", "features_grid", "taps_grid", "velocity_grid", "radius_grid",
                  "transfer_grid", "best", "realizations"});
  if (const auto it = j.find("archs"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("experiment.archs: expected an array");
    c.archs.clear();
    for (const json& a : *it) c.archs.push_back(read_arch(a, "experiment.archs"));
  }
  read(j, "features_grid", c.features_grid, w);
  read(j, "taps_grid", c.taps_grid, w);
  read(j, "velocity_grid", c.velocity_grid, w);
  read(j, "radius_grid", c.radius_grid, w);
  read(j, "transfer_grid", c.transfer_grid, w);
  read(j, "realizations", c.realizations, w);
  if (const auto it = j.find("best"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("experiment.best: expected an object");
    for (const auto& [name, hp] : it->items()) {
      const std::string where = "experiment.best." + name;
      const Arch arch = read_arch(json(name), where);
      reject_unknown(hp, where, {"features", "taps"});
      Hyperparams h = c.best[arch];
      read(hp, "features", h.features, where);
      read(hp, "taps", h.taps, where);
      c.best[arch] = h;
    }
  }
}

std::filesystem::path resolve(const json& j, const char* key,
                              const std::filesystem::path& base) {
  const auto it = j.find(key);
  if (it == j.end()) return {};
  if (!it->is_string()) throw ConfigError(std::string("paths.") + key + ": expected a string");
  std::filesystem::path p = it->get<std::string>();
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

}  // namespace

void RunConfig::apply_desk() {
  n_train = 40;
  n_valid = 10;
  n_test = 20;
  realizations = 3;
  training.epochs = 10;
  training.batch_size = 2;
  training.learning_rate = 5e-3;
}

ExperimentSpec RunConfig::experiment(ExperimentKind kind) const {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.archs = archs;
  spec.features_grid = features_grid;
  spec.taps_grid = taps_grid;
  switch (kind) {
    case ExperimentKind::VelocityRobustness:
      spec.grid = velocity_grid;
      break;
    case ExperimentKind::RadiusRobustness:
      spec.grid = radius_grid;
      break;
    case ExperimentKind::Transfer:
      spec.grid = transfer_grid;
      break;
    case ExperimentKind::Sweep:
      break;
  }
  spec.best = best;
  spec.realizations = realizations;
  spec.n_train = n_train;
  spec.n_valid = n_valid;
  spec.n_test = n_test;
  spec.seed = seed;
  spec.flocking = flocking;
  spec.flocking.seed = seed;
  spec.training = training;
  spec.training.seed = seed;
  return spec;
}

void RunConfig::validate() const {
  flocking.validate();
  training.validate();
  if (n_train == 0 || n_valid == 0 || n_test == 0)
    throw ConfigError("every dataset split needs at least one trajectory");
  if (features == 0 || taps == 0) throw ConfigError("features and taps must be positive");
  if (archs.empty()) throw ConfigError("no architectures selected");
  if (realizations == 0) throw ConfigError("need at least one realization");
  for (const auto& [arch, hp] : best)
    if (hp.features == 0 || hp.taps == 0)
      throw ConfigError("best hyperparameters must be positive for " +
                        std::string(to_string(arch)));
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, "config",
                 {"version", "seed", "flocking", "training", "dataset", "model", "experiment",
                  "paths"});
  const auto v = j.find("version");
  if (v == j.end()) throw ConfigError("config: missing 'version'");
  if (!v->is_number_integer() || v->get<long long>() != kConfigVersion)
    throw ConfigError("config: unsupported version " + v->dump());

  RunConfig c;
  read(j, "seed", c.seed, "config");
  if (const auto it = j.find("flocking"); it != j.end()) read_flocking(*it, c.flocking);
  if (const auto it = j.find("training"); it != j.end()) read_training(*it, c.training);
  if (const auto it = j.find("dataset"); it != j.end()) {
    reject_unknown(*it, "dataset", {"n_train", "n_valid", "n_test"});
    read(*it, "n_train", c.n_train, "dataset");
    read(*it, "n_valid", c.n_valid, "dataset");
    read(*it, "n_test", c.n_test, "dataset");
  }
  if (const auto it = j.find("model"); it != j.end()) {
    reject_unknown(*it, "model", {"arch", "features", "taps"});
    if (const auto a = it->find("arch"); a != it->end()) c.arch = read_arch(*a, "model.arch");
    read(*it, "features", c.features, "model");
    read(*it, "taps", c.taps, "model");
  }
  if (const auto it = j.find("experiment"); it != j.end()) read_experiment(*it, c);
  if (const auto it = j.find("paths"); it != j.end()) {
    reject_unknown(*it, "paths", {"dataset", "checkpoint", "out_dir"});
    c.paths.dataset = resolve(*it, "dataset", base_dir);
    c.paths.checkpoint = resolve(*it, "checkpoint", base_dir);
    c.paths.out_dir = resolve(*it, "out_dir", base_dir);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), std::filesystem::absolute(path).parent_path());
}

}  // namespace flock
