#include "flock/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "flock/errors.hpp"
#include "flock/work_queue.hpp"

namespace flock {

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Sweep:
      return "sweep";
    case ExperimentKind::VelocityRobustness:
      return "velocity";
    case ExperimentKind::RadiusRobustness:
      return "radius";
    case ExperimentKind::Transfer:
      return "transfer";
  }
  return "unknown";
}

void ExperimentSpec::validate() const {
  if (archs.empty()) throw ConfigError("no architectures selected");
  if (realizations == 0) throw ConfigError("need at least one realization");
  if (n_train == 0 || n_valid == 0 || n_test == 0)
    throw ConfigError("every dataset split needs at least one trajectory");
  if (kind == ExperimentKind::Sweep && (features_grid.empty() || taps_grid.empty()))
    throw ConfigError("sweep grid is empty");
  if (kind != ExperimentKind::Sweep && grid.empty())
    throw ConfigError("experiment grid is empty");
  flocking.validate();
  training.validate();
}

void CostCell::summarize() {
  std::vector<double> values = costs;
  if (relative)
    for (std::size_t r = 0; r < values.size(); ++r) values[r] = costs[r] / expert_costs[r];
  if (values.empty()) {
    mean = stddev = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double n = static_cast<double>(values.size());
  mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  stddev = std::sqrt(ss / n);
}

const CostCell& CostReport::best_cell(Arch arch) const {
  for (const CostCell& c : cells)
    if (c.arch == arch && c.best) return c;
  throw InvalidState("no best cell recorded for " + std::string(to_string(arch)));
}

std::vector<SwarmState> initial_states(const std::vector<TrajectoryRecord>& trajectories,
                                       double sampling_time) {
  std::vector<SwarmState> out;
  out.reserve(trajectories.size());
  for (const TrajectoryRecord& tr : trajectories)
    out.push_back({tr.positions.front(), tr.velocities.front(), 0, sampling_time});
  return out;
}

double evaluate_controller(const ControllerParams& params,
                           const std::vector<SwarmState>& starts,
                           const FlockingConfig& config) {
  std::vector<double> costs(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    PolicySource policy(params, starts[i].agents());
    costs[i] = rollout(policy, starts[i], config).cost.total;
  });
  return std::accumulate(costs.begin(), costs.end(), 0.0) /
         static_cast<double>(costs.size());
}

double evaluate_expert(const std::vector<SwarmState>& starts, const FlockingConfig& config) {
  std::vector<double> costs(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    ExpertSource expert(config.potential_cutoff);
    costs[i] = rollout(expert, starts[i], config).cost.total;
  });
  return std::accumulate(costs.begin(), costs.end(), 0.0) /
         static_cast<double>(costs.size());
}

namespace {

TrainConfig realization_training(const ExperimentSpec& spec, std::uint64_t seed) {
  TrainConfig tc = spec.training;
  tc.seed = seed;
  return tc;
}

ControllerParams train_cell(const ExperimentSpec& spec, const Dataset& ds, Arch arch,
                            std::size_t g, std::size_t k, std::uint64_t seed) {
  const TrainConfig tc = realization_training(spec, seed);
  return train_from(init_params(arch, g, k, seed, tc.tap_gain), ds, tc).best;
}

}  // namespace

CostReport run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  CostReport report;
  report.kind = ExperimentKind::Sweep;
  for (Arch arch : spec.archs)
    for (std::size_t g : spec.features_grid)
      for (std::size_t k : spec.taps_grid) {
        CostCell cell;
        cell.arch = arch;
        cell.features = g;
        cell.taps = k;
        cell.agents = spec.flocking.n_agents;
        report.cells.push_back(cell);
      }

  for (std::size_t r = 0; r < spec.realizations; ++r) {
    const std::uint64_t seed = spec.realization_seed(r);
    const Dataset ds =
        generate_dataset(spec.flocking, spec.n_train, spec.n_valid, spec.n_test, seed);
    const auto starts = initial_states(ds.test, spec.flocking.sampling_time);
    const double expert = evaluate_expert(starts, spec.flocking);
    std::vector<double> costs(report.cells.size());
    parallel_for(report.cells.size(), [&](std::size_t c) {
      const CostCell& cell = report.cells[c];
      const ControllerParams p =
          train_cell(spec, ds, cell.arch, cell.features, cell.taps, seed);
      costs[c] = evaluate_controller(p, starts, spec.flocking);
    });
    for (std::size_t c = 0; c < report.cells.size(); ++c) {
      report.cells[c].seeds.push_back(seed);
      report.cells[c].costs.push_back(costs[c]);
      report.cells[c].expert_costs.push_back(expert);
    }
  }

  for (CostCell& cell : report.cells) cell.summarize();
  for (Arch arch : spec.archs) {
    CostCell* best = nullptr;
    for (CostCell& cell : report.cells)
      if (cell.arch == arch && (!best || cell.mean < best->mean)) best = &cell;
    if (best) best->best = true;
  }
  return report;
}

TrainedModels train_best_models(const ExperimentSpec& spec) {
  spec.validate();
  TrainedModels models(spec.realizations);
  for (std::size_t r = 0; r < spec.realizations; ++r) {
    const std::uint64_t seed = spec.realization_seed(r);
    const Dataset ds =
        generate_dataset(spec.flocking, spec.n_train, spec.n_valid, spec.n_test, seed);
    std::vector<ControllerParams> trained(spec.archs.size());
    parallel_for(spec.archs.size(), [&](std::size_t a) {
      const Arch arch = spec.archs[a];
      const auto it = spec.best.find(arch);
      if (it == spec.best.end())
        throw ConfigError("no hyperparameters given for " + std::string(to_string(arch)));
      trained[a] = train_cell(spec, ds, arch, it->second.features, it->second.taps, seed);
    });
    for (std::size_t a = 0; a < spec.archs.size(); ++a)
      models[r].emplace(spec.archs[a], std::move(trained[a]));
  }
  return models;
}

namespace {

// Evaluates every (arch, grid value, realization) on fresh test states drawn
// from the realization's test stream under the modified condition.
CostReport run_zero_shot(const ExperimentSpec& spec, const TrainedModels& models,
                         ExperimentKind kind, bool relative) {
  spec.validate();
  if (models.size() < spec.realizations)
    throw ConfigError("fewer trained model sets than realizations");
  CostReport report;
  report.kind = kind;
  for (Arch arch : spec.archs)
    for (double value : spec.grid) {
      CostCell cell;
      cell.arch = arch;
      cell.grid_value = value;
      cell.relative = relative;
      report.cells.push_back(cell);
    }

  auto condition = [&](double value) {
    FlockingConfig fc = spec.flocking;
    switch (kind) {
      case ExperimentKind::VelocityRobustness:
        fc.vel_range = value;
        fc.bias_range = value;
        break;
      case ExperimentKind::RadiusRobustness:
        fc.comm_radius = value;
        break;
      case ExperimentKind::Transfer:
        if (value < 2 || value != std::floor(value))
          throw ConfigError("team size must be an integer of at least 2");
        fc.n_agents = static_cast<std::size_t>(value);
        break;
      case ExperimentKind::Sweep:
        break;
    }
    return fc;
  };

  for (std::size_t r = 0; r < spec.realizations; ++r) {
    const std::uint64_t seed = spec.realization_seed(r);
    for (std::size_t v = 0; v < spec.grid.size(); ++v) {
      const FlockingConfig fc = condition(spec.grid[v]);
      const auto starts = sample_test_states(fc, spec.n_test, seed);
      const double expert = evaluate_expert(starts, fc);
      for (CostCell& cell : report.cells) {
        if (cell.grid_value != spec.grid[v]) continue;
        const auto it = models[r].find(cell.arch);
        if (it == models[r].end())
          throw ConfigError("no trained model for " + std::string(to_string(cell.arch)));
        cell.features = static_cast<std::size_t>(it->second.features());
        cell.taps = it->second.taps();
        cell.agents = fc.n_agents;
        cell.seeds.push_back(seed);
        cell.costs.push_back(evaluate_controller(it->second, starts, fc));
        cell.expert_costs.push_back(expert);
      }
    }
  }
  for (CostCell& cell : report.cells) cell.summarize();
  return report;
}

}  // namespace

CostReport run_robustness(const ExperimentSpec& spec, const TrainedModels& models) {
  if (spec.kind != ExperimentKind::VelocityRobustness &&
      spec.kind != ExperimentKind::RadiusRobustness)
    throw ConfigError("run_robustness needs a velocity or radius experiment");
  return run_zero_shot(spec, models, spec.kind, true);
}

CostReport run_transfer(const ExperimentSpec& spec, const TrainedModels& models) {
  if (spec.kind != ExperimentKind::Transfer)
    throw ConfigError("run_transfer needs a transfer experiment");
  return run_zero_shot(spec, models, ExperimentKind::Transfer, false);
}

void write_csv(std::ostream& out, const CostReport& report) {
  out << "experiment,arch,G,K,N,grid_value,realization,seed,cost,expert_cost,relative_cost\n";
  out << std::setprecision(17);
  for (const CostCell& c : report.cells)
    for (std::size_t r = 0; r < c.costs.size(); ++r)
      out << to_string(report.kind) << ',' << to_string(c.arch) << ',' << c.features << ','
          << c.taps << ',' << c.agents << ',' << c.grid_value << ',' << r << ','
          << c.seeds[r] << ',' << c.costs[r] << ',' << c.expert_costs[r] << ','
          << c.costs[r] / c.expert_costs[r] << '\n';
}

namespace {
std::string mean_std(const CostCell& c) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(c.relative ? 2 : 0) << c.mean << " (+-" << c.stddev
    << ")" << (c.best ? " *" : "");
  return s.str();
}
}  // namespace

void write_table(std::ostream& out, const CostReport& report) {
  std::vector<Arch> archs;
  for (const CostCell& c : report.cells)
    if (std::find(archs.begin(), archs.end(), c.arch) == archs.end()) archs.push_back(c.arch);

  for (Arch arch : archs) {
    out << to_string(arch) << '\n';
    if (report.kind == ExperimentKind::Sweep) {
      std::vector<std::size_t> gs, ks;
      for (const CostCell& c : report.cells) {
        if (c.arch != arch) continue;
        if (std::find(gs.begin(), gs.end(), c.features) == gs.end()) gs.push_back(c.features);
        if (std::find(ks.begin(), ks.end(), c.taps) == ks.end()) ks.push_back(c.taps);
      }
      out << std::setw(8) << "G/K";
      for (std::size_t k : ks) out << std::setw(18) << k;
      out << '\n';
      for (std::size_t g : gs) {
        out << std::setw(8) << g;
        for (std::size_t k : ks)
          for (const CostCell& c : report.cells)
            if (c.arch == arch && c.features == g && c.taps == k)
              out << std::setw(18) << mean_std(c);
        out << '\n';
      }
    } else {
      for (const CostCell& c : report.cells)
        if (c.arch == arch)
          out << std::setw(10) << c.grid_value << std::setw(20) << mean_std(c) << '\n';
    }
  }
}

void write_svg(std::ostream& out, const CostReport& report, const std::string& title) {
  constexpr double width = 640, height = 400, left = 70, right = 130, top = 40, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_max = 0.0;
  for (const CostCell& c : report.cells) {
    x_min = std::min(x_min, c.grid_value);
    x_max = std::max(x_max, c.grid_value);
    if (std::isfinite(c.mean)) y_max = std::max(y_max, c.mean + c.stddev);
  }
  if (!(x_max > x_min)) x_max = x_min + 1.0;
  if (!(y_max > 0.0)) y_max = 1.0;
  y_max *= 1.1;
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return top + plot_h - y / y_max * plot_h; };

  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = y_max * i / 4.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">"
        << y << "</text>\n";
  }
  std::vector<double> xs;
  for (const CostCell& c : report.cells)
    if (std::find(xs.begin(), xs.end(), c.grid_value) == xs.end()) xs.push_back(c.grid_value);
  for (double x : xs)
    out << "<text x=\"" << px(x) << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\">" << x << "</text>\n";

  std::vector<Arch> archs;
  for (const CostCell& c : report.cells)
    if (std::find(archs.begin(), archs.end(), c.arch) == archs.end()) archs.push_back(c.arch);
  for (std::size_t a = 0; a < archs.size(); ++a) {
    const char* color = colors[a % 4];
    std::vector<const CostCell*> series;
    for (const CostCell& c : report.cells)
      if (c.arch == archs[a]) series.push_back(&c);
    std::sort(series.begin(), series.end(),
              [](const CostCell* l, const CostCell* r) { return l->grid_value < r->grid_value; });
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const CostCell* c : series) out << px(c->grid_value) << ',' << py(c->mean) << ' ';
    out << "\"/>\n";
    for (const CostCell* c : series) {
      out << "<line x1=\"" << px(c->grid_value) << "\" y1=\"" << py(c->mean - c->stddev)
          << "\" x2=\"" << px(c->grid_value) << "\" y2=\"" << py(c->mean + c->stddev)
          << "\" stroke=\"" << color << "\"/>\n";
      out << "<circle cx=\"" << px(c->grid_value) << "\" cy=\"" << py(c->mean)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = top + 20.0 * static_cast<double>(a);
    out << "<line x1=\"" << left + plot_w + 15 << "\" y1=\"" << ly << "\" x2=\""
        << left + plot_w + 40 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << left + plot_w + 46 << "\" y=\"" << ly + 4 << "\">"
        << to_string(archs[a]) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace flock
