#include "latmpc/pso.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "latmpc/rng.hpp"

namespace latmpc {

void PsoConfig::validate() const {
  if (n_gen < 1 || n_pop < 1) throw std::invalid_argument("PsoConfig: n_gen and n_pop must be >= 1");
  if (!(w_max > w_min) || !(w_min > 0.0))
    throw std::invalid_argument("PsoConfig: need w_max > w_min > 0");
  if (bounds.empty()) throw std::invalid_argument("PsoConfig: bounds not set");
  for (const auto& [lo, hi] : bounds)
    if (!(lo < hi)) throw std::invalid_argument("PsoConfig: bound lo must be < hi");
}

std::vector<std::pair<double, double>> default_search_bounds() {
  return {{10.0, 60.0}, {2.0, 15.0}, {0.1, 100.0}, {0.001, 1.0}};
}

double inertia_weight(int g, const PsoConfig& cfg) {
  const double ratio = static_cast<double>(g) / cfg.n_gen;
  return cfg.w_min +
         std::exp(cfg.w_max - cfg.lambda1 * (cfg.w_max + cfg.w_min) * ratio) / cfg.lambda2;
}

std::pair<double, double> update_accelerations(double c1, double c2, int g,
                                               const PsoConfig& cfg) {
  const double ratio = static_cast<double>(g) / cfg.n_gen;
  // Half-open bands; the lower band wins at a boundary.
  double alpha;
  if (ratio < 0.20)
    alpha = 0.05;
  else if (ratio < 0.35)
    alpha = 0.02;
  else if (ratio < 0.75)
    alpha = -0.035;
  else
    alpha = -0.0015;
  return {c1 + alpha, c2 - alpha};
}

namespace {

void clamp_to_bounds(Vec& x, const std::vector<std::pair<double, double>>& bounds) {
  for (std::size_t d = 0; d < x.size(); ++d)
    x[d] = std::clamp(x[d], bounds[d].first, bounds[d].second);
}

}  // namespace

Swarm init_swarm(const PsoConfig& cfg, const FitnessFn& fitness, std::uint64_t seed,
                 std::uint64_t stream_id, const Vec* seed_candidate) {
  cfg.validate();
  const std::size_t dim = cfg.bounds.size();

  Swarm swarm;
  swarm.c1 = cfg.c1_init;
  swarm.c2 = cfg.c2_init;
  swarm.gbest_cost = std::numeric_limits<double>::infinity();
  swarm.particles.resize(static_cast<std::size_t>(cfg.n_pop));

  for (int i = 0; i < cfg.n_pop; ++i) {
    auto& p = swarm.particles[static_cast<std::size_t>(i)];
    Rng rng = Rng::stream(seed, stream_id, static_cast<std::uint64_t>(i), 0);
    p.position.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
      p.position[d] = rng.uniform(cfg.bounds[d].first, cfg.bounds[d].second);
    if (i == 0 && seed_candidate) {
      p.position = *seed_candidate;
      clamp_to_bounds(p.position, cfg.bounds);
    }
    p.velocity.assign(dim, 0.0);
    p.pbest_pos = p.position;
    const double cost = fitness(p.position);
    if (std::isnan(cost)) {
      std::fprintf(stderr, "pso: non-finite fitness at init, particle %d skipped\n", i);
      p.pbest_cost = std::numeric_limits<double>::infinity();
    } else {
      p.pbest_cost = cost;
    }
    if (p.pbest_cost < swarm.gbest_cost) {
      swarm.gbest_cost = p.pbest_cost;
      swarm.gbest_pos = p.pbest_pos;
    }
  }
  if (swarm.gbest_pos.empty()) swarm.gbest_pos = swarm.particles[0].position;
  return swarm;
}

void pso_step(Swarm& swarm, const FitnessFn& fitness, int g, const PsoConfig& cfg,
              std::uint64_t seed, std::uint64_t stream_id) {
  const std::size_t dim = cfg.bounds.size();
  const double w = inertia_weight(g, cfg);
  std::tie(swarm.c1, swarm.c2) = update_accelerations(swarm.c1, swarm.c2, g, cfg);

  for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
    auto& p = swarm.particles[i];
    Rng rng = Rng::stream(seed, stream_id, i, static_cast<std::uint64_t>(g));
    for (std::size_t d = 0; d < dim; ++d) {
      const double r1 = rng.uniform();
      const double r2 = rng.uniform();
      double v = w * p.velocity[d] + swarm.c1 * r1 * (p.pbest_pos[d] - p.position[d]) +
                 swarm.c2 * r2 * (swarm.gbest_pos[d] - p.position[d]);
      const double vmax = cfg.velocity_clamp_frac * (cfg.bounds[d].second - cfg.bounds[d].first);
      p.velocity[d] = std::clamp(v, -vmax, vmax);
      p.position[d] += p.velocity[d];
    }
    clamp_to_bounds(p.position, cfg.bounds);

    const double cost = fitness(p.position);
    if (std::isnan(cost)) {
      std::fprintf(stderr, "pso: non-finite fitness at generation %d, particle %zu skipped\n",
                   g, i);
      continue;
    }
    if (cost < p.pbest_cost) {
      p.pbest_cost = cost;
      p.pbest_pos = p.position;
    }
  }
  for (const auto& p : swarm.particles) {
    if (p.pbest_cost < swarm.gbest_cost) {
      swarm.gbest_cost = p.pbest_cost;
      swarm.gbest_pos = p.pbest_pos;
    }
  }
  swarm.generation = g;
}

PsoResult pso_optimize(const PsoConfig& cfg, const FitnessFn& fitness, std::uint64_t seed,
                       std::uint64_t stream_id, const Vec* seed_candidate) {
  Swarm swarm = init_swarm(cfg, fitness, seed, stream_id, seed_candidate);
  PsoResult res;
  res.gbest_history.push_back(swarm.gbest_cost);
  for (int g = 1; g <= cfg.n_gen; ++g) {
    pso_step(swarm, fitness, g, cfg, seed, stream_id);
    res.gbest_history.push_back(swarm.gbest_cost);
  }
  res.best = swarm.gbest_pos;
  res.cost = swarm.gbest_cost;
  return res;
}

MpcParams candidate_to_params(std::span<const double> candidate) {
  MpcParams p;
  p.np = std::max(1, static_cast<int>(std::lround(candidate[0])));
  p.nc = std::clamp(static_cast<int>(std::lround(candidate[1])), 1, p.np);
  p.q = candidate[2];
  p.r = candidate[3];
  return p;
}

double evaluate_fitness(std::span<const double> candidate, const OperatingCondition& cond,
                        const FitnessSettings& fit) {
  const MpcParams params = candidate_to_params(candidate);
  const PacejkaParams tire =
      fit.tire.fz_front > 0.0 ? fit.tire : PacejkaParams::from_vehicle(fit.vehicle);
  const Disturbance dist{cond.wind, cond.mu};

  MpcController ctl(fit.vehicle, params, fit.cons, fit.mpc);
  const double ts = fit.mpc.ts;
  const int n_steps = static_cast<int>(std::lround(fit.duration / ts));
  const auto ref_at = [&](double tau) { return tau >= fit.step_time ? cond.y_ref : 0.0; };

  LateralState state;
  Vec window(static_cast<std::size_t>(params.np));
  double sq_sum = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    const double t = k * ts;
    const double err = ref_at(t) - state.y;
    sq_sum += err * err;
    for (std::size_t i = 0; i < window.size(); ++i)
      window[i] = ref_at(t + (static_cast<double>(i) + 1.0) * ts);
    double u;
    try {
      u = ctl.step(state, cond.vx, window);
      state = plant_step(state, u, cond.vx, dist, ts, fit.vehicle, tire);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
    if (!state.finite() || std::fabs(state.y) > 1e6)
      return std::numeric_limits<double>::infinity();
  }
  return sq_sum / n_steps;
}

void GridSpec::validate() const {
  if (n_vx < 1 || n_yref < 1 || n_mu < 1 || n_wind < 1)
    throw std::invalid_argument("GridSpec: counts must be >= 1");
}

namespace {

double linspace_at(std::pair<double, double> range, int i, int n) {
  if (n == 1) return range.first;
  return range.first + (range.second - range.first) * i / (n - 1);
}

}  // namespace

OperatingCondition GridSpec::at(int index) const {
  const int iyref = index % n_yref;
  index /= n_yref;
  const int imu = index % n_mu;
  index /= n_mu;
  const int iwind = index % n_wind;
  index /= n_wind;
  const int ivx = index;
  OperatingCondition c;
  c.vx = linspace_at(vx_range, ivx, n_vx);
  c.wind = linspace_at(wind_range, iwind, n_wind);
  c.mu = linspace_at(mu_range, imu, n_mu);
  c.y_ref = linspace_at(yref_range, iyref, n_yref);
  return c;
}

std::vector<TuningRecord> generate_dataset(const GridSpec& grid, const PsoConfig& cfg,
                                           const FitnessSettings& fit,
                                           const DatasetOptions& opts) {
  grid.validate();
  cfg.validate();
  const int n_points = grid.size();
  std::vector<TuningRecord> records(static_cast<std::size_t>(n_points));

  // Particle 0 starts at the Table-2 defaults so the recorded optimum can
  // never lose to them.
  const Vec default_candidate{35.0, 8.0, 10.0, 0.01};

  const auto solve_point = [&](int idx, const Vec* extra_warm) {
    const OperatingCondition cond = grid.at(idx);
    const FitnessFn fitness = [&](std::span<const double> cand) {
      return evaluate_fitness(cand, cond, fit);
    };
    Swarm swarm = init_swarm(cfg, fitness, opts.seed,
                             static_cast<std::uint64_t>(idx), &default_candidate);
    if (extra_warm && cfg.n_pop > 1) {
      auto& p = swarm.particles[1];
      p.position = *extra_warm;
      clamp_to_bounds(p.position, cfg.bounds);
      p.velocity.assign(p.position.size(), 0.0);
      const double cost = fitness(p.position);
      if (!std::isnan(cost) && cost < p.pbest_cost) {
        p.pbest_cost = cost;
        p.pbest_pos = p.position;
        if (cost < swarm.gbest_cost) {
          swarm.gbest_cost = cost;
          swarm.gbest_pos = p.position;
        }
      }
    }
    for (int g = 1; g <= cfg.n_gen; ++g)
      pso_step(swarm, fitness, g, cfg, opts.seed, static_cast<std::uint64_t>(idx));

    TuningRecord rec;
    rec.condition = cond;
    rec.optimal = candidate_to_params(swarm.gbest_pos);
    rec.achieved_mse = swarm.gbest_cost;
    records[static_cast<std::size_t>(idx)] = rec;
  };

  if (opts.warm_start || opts.n_threads <= 1) {
    Vec prev_best;
    for (int idx = 0; idx < n_points; ++idx) {
      solve_point(idx, (opts.warm_start && idx > 0) ? &prev_best : nullptr);
      if (opts.warm_start) {
        const auto& r = records[static_cast<std::size_t>(idx)];
        prev_best = {static_cast<double>(r.optimal.np), static_cast<double>(r.optimal.nc),
                     r.optimal.q, r.optimal.r};
      }
    }
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int idx = next.fetch_add(1);
        if (idx >= n_points) return;
        solve_point(idx, nullptr);
      }
    };
    std::vector<std::thread> pool;
    const int n = std::max(1, opts.n_threads);
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

void write_dataset_csv(const std::vector<TuningRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "vx,wind,mu,y_ref,np,nc,q,r,mse\n";
  for (const auto& r : records) {
    out << fmt_double(r.condition.vx) << ',' << fmt_double(r.condition.wind) << ','
        << fmt_double(r.condition.mu) << ',' << fmt_double(r.condition.y_ref) << ','
        << r.optimal.np << ',' << r.optimal.nc << ',' << fmt_double(r.optimal.q) << ','
        << fmt_double(r.optimal.r) << ',' << fmt_double(r.achieved_mse) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<TuningRecord> read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset: " + path);
  if (line != "vx,wind,mu,y_ref,np,nc,q,r,mse")
    throw std::runtime_error("unexpected dataset header in " + path);
  std::vector<TuningRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 9) throw std::runtime_error("bad dataset row in " + path);
    TuningRecord r;
    r.condition = {vals[0], vals[1], vals[2], vals[3]};
    r.optimal.np = static_cast<int>(vals[4]);
    r.optimal.nc = static_cast<int>(vals[5]);
    r.optimal.q = vals[6];
    r.optimal.r = vals[7];
    r.achieved_mse = vals[8];
    records.push_back(r);
  }
  return records;
}

}  // namespace latmpc
