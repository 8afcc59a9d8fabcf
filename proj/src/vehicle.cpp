#include "latmpc/vehicle.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace latmpc {

namespace {

double clamp_vx(double vx) {
  if (vx >= kVxMin) return vx;
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true))
    std::fprintf(stderr, "latmpc: vx=%g below floor, clamped to %g m/s\n", vx, kVxMin);
  return kVxMin;
}

}  // namespace

void VehicleParams::validate() const {
  const double vals[] = {m, iz, lf, lr, cyf, cyr};
  for (double v : vals)
    if (!std::isfinite(v) || v <= 0.0)
      throw std::invalid_argument("VehicleParams: entries must be finite and > 0");
}

bool LateralState::finite() const {
  return std::isfinite(vy) && std::isfinite(psi) && std::isfinite(psi_dot) &&
         std::isfinite(y);
}

PacejkaParams PacejkaParams::from_vehicle(const VehicleParams& vp) {
  vp.validate();
  PacejkaParams pj;
  const double wheelbase = vp.lf + vp.lr;
  pj.fz_front = vp.m * kGravity * vp.lr / (2.0 * wheelbase);
  pj.fz_rear = vp.m * kGravity * vp.lf / (2.0 * wheelbase);
  return pj;
}

void PacejkaParams::validate() const {
  if (!(b_stiff > 0.0) || !(c_shape >= 1.0 && c_shape <= 2.0) || !(e_curv <= 1.0))
    throw std::invalid_argument("PacejkaParams: coefficient out of range");
  if (!(fz_front > 0.0) || !(fz_rear > 0.0))
    throw std::invalid_argument("PacejkaParams: normal loads must be > 0");
}

void Disturbance::validate() const {
  if (!std::isfinite(wind_speed)) throw std::invalid_argument("Disturbance: wind not finite");
  if (!(mu > 0.0 && mu <= 1.2)) throw std::invalid_argument("Disturbance: mu outside (0, 1.2]");
}

ContinuousStateSpace linear_lateral_matrices(const VehicleParams& p, double vx) {
  p.validate();
  if (!std::isfinite(vx)) throw std::invalid_argument("linear_lateral_matrices: vx not finite");
  vx = clamp_vx(vx);

  ContinuousStateSpace ss;
  ss.a = Mat(4, 4);
  ss.b = Mat(4, 1);
  ss.c = Mat(1, 4);

  ss.a(0, 0) = -2.0 * (p.cyf + p.cyr) / (p.m * vx);
  ss.a(0, 2) = -vx - 2.0 * (p.cyf * p.lf - p.cyr * p.lr) / (p.m * vx);
  ss.a(1, 2) = 1.0;
  ss.a(2, 0) = -2.0 * (p.cyf * p.lf - p.cyr * p.lr) / (p.iz * vx);
  ss.a(2, 2) = -2.0 * (p.cyf * p.lf * p.lf + p.cyr * p.lr * p.lr) / (p.iz * vx);
  ss.a(3, 0) = 1.0;
  ss.a(3, 1) = vx;

  ss.b(0, 0) = 2.0 * p.cyf / p.m;
  ss.b(2, 0) = 2.0 * p.cyf * p.lf / p.iz;

  ss.c(0, 3) = 1.0;
  return ss;
}

std::pair<double, double> tire_slip_angles(const LateralState& s, double vx,
                                           double delta_f, const VehicleParams& p) {
  vx = clamp_vx(vx);
  const double alpha_f = delta_f - std::atan((s.vy + p.lf * s.psi_dot) / vx);
  const double alpha_r = -std::atan((s.vy - p.lr * s.psi_dot) / vx);
  return {alpha_f, alpha_r};
}

double pacejka_lateral_force(double alpha, double fz, double mu,
                             const PacejkaParams& pj) {
  const double ba = pj.b_stiff * alpha;
  const double arg = ba - pj.e_curv * (ba - std::atan(ba));
  return mu * fz * std::sin(pj.c_shape * std::atan(arg));
}

LateralState plant_deriv(const LateralState& s, double delta_f, double vx,
                         const Disturbance& dist, const VehicleParams& p,
                         const PacejkaParams& pj) {
  const auto [alpha_f, alpha_r] = tire_slip_angles(s, vx, delta_f, p);
  const double fyf = pacejka_lateral_force(alpha_f, pj.fz_front, dist.mu, pj);
  const double fyr = pacejka_lateral_force(alpha_r, pj.fz_rear, dist.mu, pj);
  const double fw = 0.5 * kAirDensity * kSideAreaCs * dist.wind_speed *
                    std::fabs(dist.wind_speed);
  vx = clamp_vx(vx);

  LateralState d;
  d.vy = (2.0 * fyf + 2.0 * fyr + fw) / p.m - vx * s.psi_dot;
  d.psi = s.psi_dot;
  d.psi_dot = (2.0 * p.lf * fyf - 2.0 * p.lr * fyr) / p.iz;
  d.y = vx * std::sin(s.psi) + s.vy * std::cos(s.psi);
  return d;
}

namespace {

LateralState advance(const LateralState& s, const LateralState& d, double h) {
  return {s.vy + h * d.vy, s.psi + h * d.psi, s.psi_dot + h * d.psi_dot,
          s.y + h * d.y};
}

}  // namespace

LateralState plant_step(const LateralState& state, double delta_f, double vx,
                        const Disturbance& dist, double dt,
                        const VehicleParams& params, const PacejkaParams& pj) {
  if (!state.finite()) throw std::runtime_error("plant_step: diverged state");
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("plant_step: dt outside (0, 0.1]");
  dist.validate();

  const LateralState k1 = plant_deriv(state, delta_f, vx, dist, params, pj);
  const LateralState k2 =
      plant_deriv(advance(state, k1, 0.5 * dt), delta_f, vx, dist, params, pj);
  const LateralState k3 =
      plant_deriv(advance(state, k2, 0.5 * dt), delta_f, vx, dist, params, pj);
  const LateralState k4 =
      plant_deriv(advance(state, k3, dt), delta_f, vx, dist, params, pj);

  const double h = dt / 6.0;
  return {state.vy + h * (k1.vy + 2.0 * k2.vy + 2.0 * k3.vy + k4.vy),
          state.psi + h * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi),
          state.psi_dot + h * (k1.psi_dot + 2.0 * k2.psi_dot + 2.0 * k3.psi_dot + k4.psi_dot),
          state.y + h * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y)};
}

}  // namespace latmpc
