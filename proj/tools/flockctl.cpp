// flockctl: dataset generation, training, evaluation and the experiment
// drivers. Exit status 0 on success, 1 on bad input or IO failure, 2 when
// the gradient check fails.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flock/config.hpp"
#include "flock/errors.hpp"
#include "flock/experiments.hpp"
#include "flock/io.hpp"
#include "flock/training.hpp"

namespace fs = std::filesystem;
using namespace flock;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool desk = false;
  std::optional<std::size_t> n_train, n_valid, n_test, n_agents, epochs, realizations;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", f.out, "Output file or directory");
  cmd->add_flag("--desk", f.desk, "Laptop-scale trajectory counts, epochs and realizations");
  cmd->add_option("--n-train", f.n_train);
  cmd->add_option("--n-valid", f.n_valid);
  cmd->add_option("--n-test", f.n_test);
  cmd->add_option("--n-agents", f.n_agents);
  cmd->add_option("--epochs", f.epochs);
  cmd->add_option("--realizations", f.realizations);
}

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.desk) c.apply_desk();
  if (f.seed) c.seed = *f.seed;
  if (f.n_train) c.n_train = *f.n_train;
  if (f.n_valid) c.n_valid = *f.n_valid;
  if (f.n_test) c.n_test = *f.n_test;
  if (f.n_agents) c.flocking.n_agents = *f.n_agents;
  if (f.epochs) c.training.epochs = *f.epochs;
  if (f.realizations) c.realizations = *f.realizations;
  c.flocking.seed = c.seed;
  c.training.seed = c.seed;
  c.validate();
  return c;
}

fs::path pick(const std::string& flag, const fs::path& from_config, const char* what) {
  if (!flag.empty()) return fs::absolute(flag);
  if (!from_config.empty()) return from_config;
  throw ConfigError(std::string("no ") + what + " path given");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ofstream open_out(const fs::path& p) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<double> expert_costs(const std::vector<SwarmState>& starts,
                                 const FlockingConfig& fc) {
  std::vector<double> out;
  for (const SwarmState& s : starts) {
    ExpertSource e(fc.potential_cutoff);
    out.push_back(rollout(e, s, fc).cost.total);
  }
  return out;
}

int cmd_generate(const CommonFlags& f) {
  const RunConfig c = resolve_config(f);
  const fs::path out = pick(f.out, c.paths.dataset, "dataset");
  const Dataset ds = generate_dataset(c.flocking, c.n_train, c.n_valid, c.n_test, c.seed);
  ensure_parent(out);
  save_dataset(out, ds);
  std::vector<double> costs;
  for (const TrajectoryRecord& tr : ds.test) {
    double total = 0.0;
    for (const Matrix& v : tr.velocities) total += cost(v);
    costs.push_back(total);
  }
  std::cout << "wrote " << out.string() << '\n'
            << "train " << ds.train.size() << "  valid " << ds.valid.size() << "  test "
            << ds.test.size() << "  N " << c.flocking.n_agents << "  T " << c.flocking.steps()
            << '\n'
            << std::fixed << std::setprecision(2) << "expert test cost " << mean_of(costs)
            << " (+-" << std_of(costs) << ")\n";
  return 0;
}

struct ModelFlags {
  std::string arch;
  std::optional<std::size_t> features, taps;
  std::string dataset, checkpoint, log;
};

int cmd_train(const CommonFlags& f, const ModelFlags& m) {
  RunConfig c = resolve_config(f);
  if (!m.arch.empty()) c.arch = parse_arch(m.arch);
  if (m.features) c.features = *m.features;
  if (m.taps) c.taps = *m.taps;
  c.validate();
  const fs::path data = pick(m.dataset, c.paths.dataset, "dataset");
  const fs::path out = pick(f.out, c.paths.checkpoint, "checkpoint");
  const fs::path log = m.log.empty() ? fs::path(out.string() + ".log") : fs::absolute(m.log);

  const Dataset ds = load_dataset(data);
  const TrainResult r = train(c.arch, ds, c.training, c.features, c.taps);
  ensure_parent(out);
  save_checkpoint(out, r.best);

  // The log holds only deterministic quantities; wall time goes to stdout.
  std::ofstream lf = open_out(log);
  lf << "# arch " << to_string(c.arch) << " G " << c.features << " K " << c.taps << " seed "
     << c.seed << '\n'
     << "epoch train_loss valid_loss\n"
     << std::setprecision(17);
  for (const EpochLog& e : r.log) {
    lf << e.epoch << ' ' << e.train_loss << ' ' << e.valid_loss << '\n';
    std::cout << "epoch " << std::setw(3) << e.epoch << "  train " << std::setprecision(6)
              << e.train_loss << "  valid " << e.valid_loss << "  (" << std::setprecision(3)
              << e.wall_seconds << " s)\n";
  }
  lf << "# best_epoch " << r.best_epoch << " best_valid_loss " << r.best_valid_loss << '\n';
  std::cout << "best epoch " << r.best_epoch << ", checkpoint " << out.string() << '\n';
  return 0;
}

int cmd_eval(const CommonFlags& f, const ModelFlags& m, const std::string& controller) {
  const RunConfig c = resolve_config(f);
  std::optional<ControllerParams> params;
  if (controller == "policy") {
    params = load_checkpoint(pick(m.checkpoint, c.paths.checkpoint, "checkpoint"));
    if (!m.arch.empty() && parse_arch(m.arch) != params->arch)
      throw ConfigError("checkpoint holds " + std::string(to_string(params->arch)) +
                        ", not " + m.arch);
    if (m.features && *m.features != static_cast<std::size_t>(params->features()))
      throw ConfigError("checkpoint G differs from --features");
    if (m.taps && *m.taps != params->taps()) throw ConfigError("checkpoint K differs from --taps");
  }
  const FlockingConfig& fc = c.flocking;
  const auto starts = sample_test_states(fc, c.n_test, c.seed);
  const std::vector<double> expert = expert_costs(starts, fc);
  std::vector<double> costs;
  for (const SwarmState& s : starts) {
    if (controller == "policy") {
      PolicySource p(*params, s.agents());
      costs.push_back(rollout(p, s, fc).cost.total);
    } else if (controller == "expert") {
      ExpertSource e(fc.potential_cutoff);
      costs.push_back(rollout(e, s, fc).cost.total);
    } else {
      ZeroSource z;
      costs.push_back(rollout(z, s, fc).cost.total);
    }
  }

  std::cout << std::fixed << std::setprecision(2) << controller;
  if (params)
    std::cout << ' ' << to_string(params->arch) << " G " << params->features() << " K "
              << params->taps();
  std::cout << "  N " << fc.n_agents << "  cost " << mean_of(costs) << " (+-" << std_of(costs)
            << ")  expert " << mean_of(expert) << " (+-" << std_of(expert) << ")\n";
  if (!f.out.empty()) {
    std::ofstream out = open_out(fs::absolute(f.out));
    out << "trajectory,N,cost,expert_cost,relative_cost\n" << std::setprecision(17);
    for (std::size_t i = 0; i < costs.size(); ++i)
      out << i << ',' << fc.n_agents << ',' << costs[i] << ',' << expert[i] << ','
          << costs[i] / expert[i] << '\n';
  }
  return 0;
}

void emit(const CostReport& report, const fs::path& dir, const std::string& stem,
          const std::string& title, bool svg) {
  fs::create_directories(dir);
  {
    std::ofstream out = open_out(dir / (stem + ".csv"));
    write_csv(out, report);
  }
  {
    std::ofstream out = open_out(dir / (stem + ".txt"));
    write_table(out, report);
  }
  if (svg) {
    std::ofstream out = open_out(dir / (stem + ".svg"));
    write_svg(out, report, title);
  }
  std::cout << title << '\n';
  write_table(std::cout, report);
}

fs::path out_dir(const CommonFlags& f, const RunConfig& c) {
  if (!f.out.empty()) return fs::absolute(f.out);
  if (!c.paths.out_dir.empty()) return c.paths.out_dir;
  return fs::current_path() / "results";
}

void apply_archs(RunConfig& c, const std::vector<std::string>& names) {
  if (names.empty()) return;
  c.archs.clear();
  for (const std::string& n : names) c.archs.push_back(parse_arch(n));
}

int cmd_sweep(const CommonFlags& f, const std::vector<std::string>& archs) {
  RunConfig c = resolve_config(f);
  apply_archs(c, archs);
  const CostReport report = run_sweep(c.experiment(ExperimentKind::Sweep));
  emit(report, out_dir(f, c), "sweep", "Cost over (G, K)", false);
  for (Arch a : c.archs) {
    const CostCell& b = report.best_cell(a);
    std::cout << "best " << to_string(a) << ": G " << b.features << " K " << b.taps << '\n';
  }
  return 0;
}

int cmd_robustness(const CommonFlags& f, const std::vector<std::string>& archs,
                   const std::string& which) {
  RunConfig c = resolve_config(f);
  apply_archs(c, archs);
  const TrainedModels models = train_best_models(c.experiment(ExperimentKind::Sweep));
  const fs::path dir = out_dir(f, c);
  if (which == "velocity" || which == "both")
    emit(run_robustness(c.experiment(ExperimentKind::VelocityRobustness), models), dir,
         "robustness_velocity", "Relative cost vs initial velocity range (m/s)", true);
  if (which == "radius" || which == "both")
    emit(run_robustness(c.experiment(ExperimentKind::RadiusRobustness), models), dir,
         "robustness_radius", "Relative cost vs communication radius (m)", true);
  return 0;
}

int cmd_transfer(const CommonFlags& f, const std::vector<std::string>& archs) {
  RunConfig c = resolve_config(f);
  apply_archs(c, archs);
  const TrainedModels models = train_best_models(c.experiment(ExperimentKind::Sweep));
  emit(run_transfer(c.experiment(ExperimentKind::Transfer), models), out_dir(f, c), "transfer",
       "Cost vs team size", true);
  return 0;
}

int cmd_gradcheck(double perturbation, std::uint64_t seed) {
  constexpr double threshold = 1e-5;
  bool ok = true;
  GradCheckOptions opt;
  opt.perturbation = perturbation;
  for (Arch a : {Arch::GC, Arch::GCNN, Arch::GRNN}) {
    const GradCheckReport r = gradient_check(a, 4, 3, 5, 4, seed, opt);
    const bool pass = r.max_relative_error <= threshold;
    ok = ok && pass;
    std::cout << std::left << std::setw(5) << to_string(a) << std::right << " max relative error "
              << std::scientific << std::setprecision(3) << r.max_relative_error
              << (pass ? "  ok" : "  FAIL") << '\n';
    for (const TensorCheck& t : r.tensors)
      std::cout << "      " << std::left << std::setw(16) << t.name << std::right << ' '
                << t.relative_error << '\n';
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized flocking with delayed graph neural controllers"};
  app.require_subcommand(1);

  CommonFlags common;
  ModelFlags model;
  std::vector<std::string> archs;
  std::string controller = "policy";
  std::string which = "both";
  double perturbation = 0.0;
  std::uint64_t gc_seed = 7;

  auto* gen = app.add_subcommand("generate", "Simulate expert trajectories into a dataset file");
  add_common(gen, common);

  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--arch", model.arch, "gc, gcnn or grnn");
    cmd->add_option("--features,-G", model.features);
    cmd->add_option("--taps,-K", model.taps);
  };
  auto* tr = app.add_subcommand("train", "Imitation-learn a controller from a dataset");
  add_common(tr, common);
  add_model(tr);
  tr->add_option("--dataset", model.dataset, "Dataset file");
  tr->add_option("--log", model.log, "Training log (default: <out>.log)");

  auto* ev = app.add_subcommand("eval", "Closed-loop cost on freshly sampled initial states");
  add_common(ev, common);
  add_model(ev);
  ev->add_option("--checkpoint", model.checkpoint, "Checkpoint file");
  ev->add_option("--controller", controller, "policy, expert or zero")
      ->check(CLI::IsMember({"policy", "expert", "zero"}));

  auto* sw = app.add_subcommand("sweep", "Cost over the (G, K) grid");
  auto* rb = app.add_subcommand("robustness", "Relative cost vs velocity range or radius");
  auto* tf = app.add_subcommand("transfer", "Cost vs team size, trained at the base size");
  for (CLI::App* cmd : {sw, rb, tf}) {
    add_common(cmd, common);
    cmd->add_option("--archs", archs, "Architectures to run")->delimiter(',');
  }
  rb->add_option("--sweep", which, "velocity, radius or both")
      ->check(CLI::IsMember({"velocity", "radius", "both"}));

  auto* gc = app.add_subcommand("gradcheck", "Backward pass against finite differences");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--perturb", perturbation)->group("");  // test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_generate(common);
    if (*tr) return cmd_train(common, model);
    if (*ev) return cmd_eval(common, model, controller);
    if (*sw) return cmd_sweep(common, archs);
    if (*rb) return cmd_robustness(common, archs, which);
    if (*tf) return cmd_transfer(common, archs);
    if (*gc) return cmd_gradcheck(perturbation, gc_seed);
  } catch (const std::exception& e) {
    std::cerr << "flockctl: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
