#include "latmpc/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace latmpc {

std::string mode_name(ControllerMode m) {
  switch (m) {
    case ControllerMode::fixed: return "fixed";
    case ControllerMode::nn_adaptive: return "nn-adaptive";
    case ControllerMode::anfis_adaptive: return "anfis-adaptive";
  }
  return "?";
}

ControllerMode mode_from_name(const std::string& name) {
  if (name == "fixed") return ControllerMode::fixed;
  if (name == "nn-adaptive") return ControllerMode::nn_adaptive;
  if (name == "anfis-adaptive") return ControllerMode::anfis_adaptive;
  throw std::invalid_argument("unknown controller mode: " + name);
}

double PiecewiseLinear::operator()(double time) const {
  if (t.empty()) throw std::runtime_error("PiecewiseLinear: no breakpoints");
  if (time <= t.front()) return v.front();
  if (time >= t.back()) return v.back();
  std::size_t i = 1;
  while (t[i] < time) ++i;
  const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
  return v[i - 1] + w * (v[i] - v[i - 1]);
}

double PiecewiseConstant::operator()(double time) const {
  if (t.empty()) throw std::runtime_error("PiecewiseConstant: no breakpoints");
  std::size_t i = 0;
  while (i + 1 < t.size() && t[i + 1] <= time) ++i;
  return v[i];
}

void Scenario::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("Scenario: duration must be > 0");
  if (!reference) throw std::invalid_argument("Scenario: reference not set");
  const auto check = [](const std::vector<double>& t, const std::vector<double>& v,
                        const char* what) {
    if (t.empty() || t.size() != v.size())
      throw std::invalid_argument(std::string("Scenario: malformed ") + what + " profile");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (!(t[i] > t[i - 1]))
        throw std::invalid_argument(std::string("Scenario: ") + what +
                                    " breakpoints not increasing");
  };
  check(velocity.t, velocity.v, "velocity");
  check(wind.t, wind.v, "wind");
  check(mu.t, mu.v, "mu");
  for (double vel : velocity.v)
    if (!(vel >= kVxMin && vel <= 30.0))
      throw std::invalid_argument("Scenario: velocity profile outside [vx_min, 30]");
}

namespace {

// Cubic smoothstep: 0 -> 1 over u in [0,1] with zero end slopes.
double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }

double lane_ramp(double t, double center, double width, double from, double to) {
  const double t0 = center - 0.5 * width;
  if (t <= t0) return from;
  if (t >= t0 + width) return to;
  return from + (to - from) * smoothstep((t - t0) / width);
}

}  // namespace

double triple_lane_change_ref(double t) {
  if (t < 11.0) return lane_ramp(t, 5.0, 2.0, 0.0, 3.5);
  if (t < 18.0) return lane_ramp(t, 12.0, 2.0, 3.5, 7.0);
  return lane_ramp(t, 19.0, 2.0, 7.0, 3.5);
}

double general_trajectory_ref(double t) {
  return 4.0 * std::sin(0.08 * std::numbers::pi * t) +
         2.0 * std::sin(0.2 * std::numbers::pi * t);
}

RunResult run_closed_loop(const Scenario& scenario, const RunSettings& settings,
                          const ParameterAdapter* adapter) {
  scenario.validate();
  const PacejkaParams tire = settings.tire.fz_front > 0.0
                                 ? settings.tire
                                 : PacejkaParams::from_vehicle(settings.vehicle);
  const double ts = settings.mpc_settings.ts;
  const int n_steps = static_cast<int>(std::lround(scenario.duration / ts));

  MpcController ctl(settings.vehicle, settings.mpc, settings.cons, settings.mpc_settings);

  RunResult result;
  result.log.records.reserve(static_cast<std::size_t>(n_steps));

  LateralState state;
  Vec window;
  double u_last = 0.0;
  double latency_acc = 0.0;
  long latency_count = 0;

  for (int k = 0; k < n_steps; ++k) {
    const double t = k * ts;
    const double vx = scenario.velocity(t);
    const double wind = scenario.wind(t);
    const double mu = scenario.mu(t);
    const double setpoint = scenario.reference(t);

    if (adapter && (settings.adapter_period <= 1 || k % settings.adapter_period == 0)) {
      const OperatingCondition cond{vx, wind, mu, setpoint};
      if (settings.measure_latency) {
        const auto t0 = std::chrono::steady_clock::now();
        ctl.set_params(adapter->adapt(cond));
        const auto t1 = std::chrono::steady_clock::now();
        latency_acc += std::chrono::duration<double, std::micro>(t1 - t0).count();
        ++latency_count;
      } else {
        ctl.set_params(adapter->adapt(cond));
      }
    }

    const int np = ctl.params().np;
    window.resize(static_cast<std::size_t>(np));
    for (int i = 0; i < np; ++i) window[static_cast<std::size_t>(i)] =
        scenario.reference(t + (i + 1) * ts);

    double u;
    try {
      u = ctl.step(state, vx, window);
    } catch (const std::exception& e) {
      throw std::runtime_error("closed loop failed at step " + std::to_string(k) + ": " +
                               e.what());
    }

    SimRecord rec;
    rec.t = t;
    rec.y_ref = setpoint;
    rec.y = state.y;
    rec.error = setpoint - state.y;
    rec.u = u;
    rec.du = u - u_last;
    rec.psi_dot = state.psi_dot;
    rec.vx = vx;
    rec.wind = wind;
    rec.mu = mu;
    rec.np = np;
    rec.nc = ctl.params().nc;
    rec.q = ctl.params().q;
    rec.r = ctl.params().r;
    rec.qp_iterations = ctl.last_qp_iterations();
    result.log.records.push_back(rec);
    u_last = u;

    const Disturbance dist{wind, mu};
    try {
      state = plant_step(state, u, vx, dist, ts, settings.vehicle, tire);
    } catch (const std::exception& e) {
      throw std::runtime_error("plant diverged at step " + std::to_string(k) + ": " + e.what());
    }
  }
  if (latency_count > 0) result.adapter_latency_us = latency_acc / latency_count;
  return result;
}

double compute_mse(const SimLog& log) {
  if (log.records.empty()) throw std::invalid_argument("compute_mse: empty log");
  double acc = 0.0;
  for (const auto& r : log.records) acc += r.error * r.error;
  return acc / static_cast<double>(log.records.size());
}

double max_abs_error(const SimLog& log) {
  if (log.records.empty()) throw std::invalid_argument("max_abs_error: empty log");
  double best = 0.0;
  for (const auto& r : log.records) best = std::max(best, std::fabs(r.error));
  return best;
}

double mean_qp_iterations(const SimLog& log) {
  if (log.records.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : log.records) acc += r.qp_iterations;
  return acc / static_cast<double>(log.records.size());
}

void write_simlog_csv(const SimLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,y_ref,y,error,u,du,psi_dot,vx,wind,mu,np,nc,q,r,qp_iterations\n";
  char buf[512];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof(buf),
                  "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%d,%d,%.6g,%.6g,%d\n",
                  r.t, r.y_ref, r.y, r.error, r.u, r.du, r.psi_dot, r.vx, r.wind, r.mu,
                  r.np, r.nc, r.q, r.r, r.qp_iterations);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace latmpc
