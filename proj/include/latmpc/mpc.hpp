#ifndef LATMPC_MPC_HPP
#define LATMPC_MPC_HPP

#include <numbers>
#include <optional>
#include <span>

#include "latmpc/linalg.hpp"
#include "latmpc/vehicle.hpp"

namespace latmpc {

struct DiscreteStateSpace {
  Mat a_d;    // 4x4
  Mat b_d;    // 4x1
  Mat c_d;    // 1x4
  double ts;  // sample period [s]
};

// State extended with the previous-step increment and the output, driven
// by input increments. This is what gives the controller integral action.
struct AugmentedModel {
  Mat a_aug;  // 5x5
  Mat b_aug;  // 5x1
  Mat c_aug;  // 1x5
};

struct PredictionMatrices {
  Mat f;    // Np x 5, rows C*A^i
  Mat phi;  // Np x Nc, lower block-triangular impulse responses
};

struct MpcParams {
  int np = 35;      // prediction horizon [steps]
  int nc = 8;       // control horizon [steps]
  double q = 10.0;  // tracking weight, Q = q*I
  double r = 0.01;  // move weight, R = r*I

  void validate() const;
  bool operator==(const MpcParams&) const = default;
};

// Symmetric bounds: |du| <= du_max per step, |u| <= u_max, optional |y| <= y_max.
struct MpcConstraints {
  double du_max = std::numbers::pi / 12.0;
  double u_max = std::numbers::pi / 6.0;
  std::optional<double> y_max;

  void validate() const;
};

struct QpProblem {
  Mat e;      // Nc x Nc Hessian, symmetric positive definite
  Vec k;      // Nc linear term
  Mat m;      // Ncon x Nc constraint matrix
  Vec gamma;  // Ncon bounds
};

struct QpSolution {
  Vec x;
  int iterations = 0;      // dual sweeps used (0 = unconstrained shortcut)
  bool converged = true;   // false when max_iter was hit (approximate solution)
  int active_constraints = 0;
};

// Exact zero-order-hold discretization via the block matrix exponential.
DiscreteStateSpace discretize(const ContinuousStateSpace& css, double ts);

AugmentedModel augment(const DiscreteStateSpace& dss);

PredictionMatrices build_prediction(const AugmentedModel& aug, int np, int nc);

// Builds E, K, M, gamma from the prediction matrices, the current augmented
// state, the reference window (length np) and the previous command.
QpProblem assemble_qp(const PredictionMatrices& pred, std::span<const double> x_aug,
                      std::span<const double> ref, const MpcParams& params,
                      const MpcConstraints& cons, double u_prev);

// Model-dependent part of the Hildreth solver, reusable across steps while
// the prediction model is unchanged.
struct HildrethWorkspace {
  Cholesky e_chol;
  Mat m;
  Mat einv_mt;  // E^{-1} M^T
  Mat p;        // M E^{-1} M^T

  HildrethWorkspace(const Mat& e, const Mat& m_in);
};

QpSolution hildreth_solve(const QpProblem& qp, double tol = 1e-8, int max_iter = 200);
QpSolution hildreth_solve(const HildrethWorkspace& ws, std::span<const double> k,
                          std::span<const double> gamma, double tol, int max_iter);

struct MpcSettings {
  double ts = 0.05;
  double vx_rebuild_threshold = 0.1;  // m/s
  double qp_tol = 1e-8;
  int qp_max_iter = 200;
};

// Receding-horizon lateral controller. The prediction model follows the
// live longitudinal velocity; matrices are rebuilt only when vx moves more
// than the threshold or the parameters change. Single-owner mutable.
class MpcController {
 public:
  MpcController(VehicleParams vehicle, MpcParams params, MpcConstraints cons,
                MpcSettings settings = {});

  // Returns the steering command [rad]. ref_window holds the lateral
  // setpoints over the preview horizon; shorter windows are padded by
  // holding the last value.
  double step(const LateralState& measurement, double vx,
              std::span<const double> ref_window);

  void set_params(const MpcParams& p);
  const MpcParams& params() const { return params_; }
  const MpcSettings& settings() const { return settings_; }
  double u_prev() const { return u_prev_; }
  int last_qp_iterations() const { return last_qp_iterations_; }
  bool last_qp_converged() const { return last_qp_converged_; }

  void reset();

  // Current linear prediction model (exposed for tests).
  const DiscreteStateSpace& model() const { return model_; }

 private:
  void rebuild(double vx);

  VehicleParams vehicle_;
  MpcParams params_;
  MpcConstraints cons_;
  MpcSettings settings_;

  bool built_ = false;
  double vx_cached_ = 0.0;
  DiscreteStateSpace model_;
  PredictionMatrices pred_;
  Mat phi_t_q_;  // Phi^T Q
  std::optional<HildrethWorkspace> ws_;

  double u_prev_ = 0.0;
  bool has_prev_state_ = false;
  LateralState prev_state_;
  int last_qp_iterations_ = 0;
  bool last_qp_converged_ = true;
};

}  // namespace latmpc

#endif  // LATMPC_MPC_HPP
