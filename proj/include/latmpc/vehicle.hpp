#ifndef LATMPC_VEHICLE_HPP
#define LATMPC_VEHICLE_HPP

#include <utility>

#include "latmpc/linalg.hpp"

namespace latmpc {

// Matrices of the lateral single-track model are singular at zero speed;
// speeds below this floor are clamped (the tuning grid starts at 3 m/s,
// so the floor is never active in normal runs).
inline constexpr double kVxMin = 1.0;

inline constexpr double kGravity = 9.81;

// Lateral wind force parameters: F_w = 0.5 * rho * CsAs * w * |w| at the CG.
inline constexpr double kAirDensity = 1.225;
inline constexpr double kSideAreaCs = 2.0;

struct VehicleParams {
  double m = 1575.0;     // mass [kg]
  double iz = 2875.0;    // yaw inertia [kg m^2]
  double lf = 1.2;       // CG to front axle [m]
  double lr = 1.6;       // CG to rear axle [m]
  double cyf = 19000.0;  // front cornering stiffness [N/rad]
  double cyr = 33000.0;  // rear cornering stiffness [N/rad]

  // Throws std::invalid_argument when any entry is non-finite or <= 0.
  void validate() const;
};

// State vector [vy, psi, psi_dot, y]: lateral velocity in the body frame,
// heading, yaw rate, inertial lateral position.
struct LateralState {
  double vy = 0.0;
  double psi = 0.0;
  double psi_dot = 0.0;
  double y = 0.0;

  bool finite() const;
};

struct ContinuousStateSpace {
  Mat a;  // 4x4
  Mat b;  // 4x1
  Mat c;  // 1x4
};

// Magic-formula coefficients plus the static per-wheel normal loads.
struct PacejkaParams {
  double b_stiff = 10.0;
  double c_shape = 1.9;
  double e_curv = 0.97;
  double fz_front = 0.0;  // per wheel [N]
  double fz_rear = 0.0;   // per wheel [N]

  static PacejkaParams from_vehicle(const VehicleParams& vp);
  void validate() const;
};

struct Disturbance {
  double wind_speed = 0.0;  // lateral wind [m/s], signed
  double mu = 0.9;          // road adhesion, (0, 1.2]

  void validate() const;
};

// Continuous-time linear lateral model at longitudinal speed vx.
// C is always [0 0 0 1].
ContinuousStateSpace linear_lateral_matrices(const VehicleParams& params, double vx);

// Front/rear slip angles with the exact atan kinematics (plant side).
std::pair<double, double> tire_slip_angles(const LateralState& state, double vx,
                                           double delta_f, const VehicleParams& params);

// F = mu * fz * sin(C * atan(B*a - E*(B*a - atan(B*a)))).
// Odd in alpha and bounded by mu * fz.
double pacejka_lateral_force(double alpha, double fz, double mu,
                             const PacejkaParams& pj);

// One RK4 step of the nonlinear single-track plant with Pacejka tires,
// lateral wind force at the CG and adhesion scaling.
LateralState plant_step(const LateralState& state, double delta_f, double vx,
                        const Disturbance& dist, double dt,
                        const VehicleParams& params, const PacejkaParams& pj);

// Time derivative of the plant state (exposed for the integration tests).
LateralState plant_deriv(const LateralState& state, double delta_f, double vx,
                         const Disturbance& dist, const VehicleParams& params,
                         const PacejkaParams& pj);

}  // namespace latmpc

#endif  // LATMPC_VEHICLE_HPP
