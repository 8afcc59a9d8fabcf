#ifndef LATMPC_SCENARIO_HPP
#define LATMPC_SCENARIO_HPP

#include <functional>
#include <string>
#include <vector>

#include "latmpc/adapter.hpp"
#include "latmpc/mpc.hpp"
#include "latmpc/vehicle.hpp"

namespace latmpc {

enum class ControllerMode { fixed, nn_adaptive, anfis_adaptive };

std::string mode_name(ControllerMode m);
ControllerMode mode_from_name(const std::string& name);

// Linear interpolation between breakpoints, first/last value held outside.
struct PiecewiseLinear {
  std::vector<double> t;
  std::vector<double> v;
  double operator()(double time) const;
};

// Value v[i] on [t[i], t[i+1]), last value held.
struct PiecewiseConstant {
  std::vector<double> t;
  std::vector<double> v;
  double operator()(double time) const;
};

struct Scenario {
  std::string name;
  double duration = 10.0;
  std::function<double(double)> reference;
  PiecewiseLinear velocity;
  PiecewiseConstant wind;
  PiecewiseConstant mu;

  void validate() const;
};

// Three C1 lane transitions 0 -> 3.5 -> 7 -> 3.5 m, smooth ramps of 2 s
// centered at t = 5, 12, 19 s, constant between ramps.
double triple_lane_change_ref(double t);

// y(t) = 4 sin(0.08 pi t) + 2 sin(0.2 pi t)
double general_trajectory_ref(double t);

struct SimRecord {
  double t, y_ref, y, error, u, du, psi_dot, vx, wind, mu;
  int np, nc;
  double q, r;
  int qp_iterations;
};

struct SimLog {
  std::vector<SimRecord> records;
};

struct RunSettings {
  VehicleParams vehicle;
  PacejkaParams tire;  // zero loads = derive from vehicle
  MpcParams mpc;
  MpcConstraints cons;
  MpcSettings mpc_settings;
  int adapter_period = 1;     // query the adapter every k steps
  bool measure_latency = false;
};

struct RunResult {
  SimLog log;
  double adapter_latency_us = 0.0;  // mean per query; only when measured
};

// Steps plant and controller at Ts over the scenario. In adaptive modes the
// adapter is queried with (vx, wind, mu, current setpoint) and its output
// applied before the MPC step. Deterministic: identical inputs give
// bit-identical logs.
RunResult run_closed_loop(const Scenario& scenario, const RunSettings& settings,
                          const ParameterAdapter* adapter = nullptr);

double compute_mse(const SimLog& log);
double max_abs_error(const SimLog& log);
double mean_qp_iterations(const SimLog& log);

void write_simlog_csv(const SimLog& log, const std::string& path);

}  // namespace latmpc

#endif  // LATMPC_SCENARIO_HPP
