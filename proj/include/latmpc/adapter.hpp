#ifndef LATMPC_ADAPTER_HPP
#define LATMPC_ADAPTER_HPP

#include "latmpc/mpc.hpp"
#include "latmpc/pso.hpp"

namespace latmpc {

// Online MPC parameter source queried by the closed loop with the current
// (vx, wind, mu, reference setpoint). Implementations must always return a
// valid MpcParams (clamped to the tuner's search bounds).
class ParameterAdapter {
 public:
  virtual ~ParameterAdapter() = default;
  virtual MpcParams adapt(const OperatingCondition& cond) const = 0;
};

// Shared clamping contract for the regressor outputs:
// np in [10, 60], nc in [2, np], q in [0.1, 100], r in [0.001, 1].
MpcParams clamp_adapted(double np_pred, double nc_pred, double q_pred, double r_pred);

}  // namespace latmpc

#endif  // LATMPC_ADAPTER_HPP
