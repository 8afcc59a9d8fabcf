#ifndef LATMPC_PSO_HPP
#define LATMPC_PSO_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "latmpc/linalg.hpp"
#include "latmpc/mpc.hpp"
#include "latmpc/vehicle.hpp"

namespace latmpc {

// Improved PSO: exponentially decaying inertia plus scheduled
// cognitive/social accelerations, applied per generation.
struct PsoConfig {
  int n_gen = 15;
  int n_pop = 20;
  double w_max = 0.99;
  double w_min = 0.1;
  double c1_init = 2.0;
  double c2_init = 2.0;
  double lambda1 = 30.0;
  double lambda2 = 3.0;
  // Per-dimension velocity clamp as a fraction of the bound range.
  double velocity_clamp_frac = 0.2;
  std::vector<std::pair<double, double>> bounds;

  void validate() const;
};

// Search box for the four MPC knobs (np, nc, q, r). Brackets Table-2 style
// values by roughly an order of magnitude each side.
std::vector<std::pair<double, double>> default_search_bounds();

struct Particle {
  Vec position;
  Vec velocity;
  Vec pbest_pos;
  double pbest_cost = 0.0;
};

struct Swarm {
  std::vector<Particle> particles;
  Vec gbest_pos;
  double gbest_cost = 0.0;
  double c1 = 2.0;
  double c2 = 2.0;
  int generation = 0;
};

using FitnessFn = std::function<double(std::span<const double>)>;

double inertia_weight(int g, const PsoConfig& cfg);

// Returns the updated (c1, c2). alpha = -beta in every band, so c1 + c2
// is conserved.
std::pair<double, double> update_accelerations(double c1, double c2, int g,
                                               const PsoConfig& cfg);

// Positions uniform in bounds, velocities zero. When a seed candidate is
// given it replaces particle 0's position.
Swarm init_swarm(const PsoConfig& cfg, const FitnessFn& fitness,
                 std::uint64_t seed, std::uint64_t stream_id,
                 const Vec* seed_candidate = nullptr);

// One generation of the improved PSO (velocity/position update, clamping,
// best bookkeeping). RNG streams are derived from
// (seed, stream_id, particle, generation).
void pso_step(Swarm& swarm, const FitnessFn& fitness, int g, const PsoConfig& cfg,
              std::uint64_t seed, std::uint64_t stream_id);

struct PsoResult {
  Vec best;
  double cost = 0.0;
  std::vector<double> gbest_history;  // cost after init and after each generation
};

PsoResult pso_optimize(const PsoConfig& cfg, const FitnessFn& fitness,
                       std::uint64_t seed, std::uint64_t stream_id,
                       const Vec* seed_candidate = nullptr);

// A fixed operating point for tuning: constant speed, wind and adhesion,
// step reference of y_ref at step_time.
struct OperatingCondition {
  double vx = 15.0;
  double wind = 0.0;
  double mu = 0.9;
  double y_ref = 3.5;
};

struct FitnessSettings {
  VehicleParams vehicle;
  MpcConstraints cons;
  MpcSettings mpc;
  PacejkaParams tire;  // zero loads = derive from vehicle
  double duration = 10.0;
  double step_time = 1.0;
};

// Rounds the continuous candidate to valid MPC parameters:
// np = round(np_raw), nc = min(round(nc_raw), np).
MpcParams candidate_to_params(std::span<const double> candidate);

// Closed-loop MSE of the candidate on the given condition (nonlinear plant,
// step reference). Diverged simulations map to +inf.
double evaluate_fitness(std::span<const double> candidate, const OperatingCondition& cond,
                        const FitnessSettings& fit);

struct TuningRecord {
  OperatingCondition condition;
  MpcParams optimal;
  double achieved_mse = 0.0;
};

struct GridSpec {
  int n_vx = 8;
  int n_yref = 8;
  int n_mu = 10;
  int n_wind = 10;
  std::pair<double, double> vx_range{3.0, 27.0};
  std::pair<double, double> yref_range{-15.0, 15.0};
  std::pair<double, double> mu_range{0.5, 0.9};
  std::pair<double, double> wind_range{-30.0, 30.0};

  int size() const { return n_vx * n_yref * n_mu * n_wind; }
  // Condition at flat index, iterating vx (outer), wind, mu, y_ref (inner).
  OperatingCondition at(int index) const;
  void validate() const;
};

struct DatasetOptions {
  std::uint64_t seed = 1;
  int n_threads = 1;
  // Adds the previous grid point's optimum to the swarm (forces serial
  // processing).
  bool warm_start = false;
};

// Runs a full PSO per grid point and records the global best. Deterministic
// under a fixed seed for any thread count.
std::vector<TuningRecord> generate_dataset(const GridSpec& grid, const PsoConfig& cfg,
                                           const FitnessSettings& fit,
                                           const DatasetOptions& opts);

void write_dataset_csv(const std::vector<TuningRecord>& records, const std::string& path);
std::vector<TuningRecord> read_dataset_csv(const std::string& path);

}  // namespace latmpc

#endif  // LATMPC_PSO_HPP
