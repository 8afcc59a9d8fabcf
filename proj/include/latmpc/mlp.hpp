#ifndef LATMPC_MLP_HPP
#define LATMPC_MLP_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "latmpc/adapter.hpp"
#include "latmpc/linalg.hpp"

namespace latmpc {

// One (condition -> parameter) training row: inputs are
// (vx, wind, mu, y_ref), target is one of np/nc/q/r.
struct TrainingSample {
  std::array<double, 4> x;
  double y;
};

// 4-16-8-1 feedforward network, sigmoid hidden layers, ReLU output.
// Weight matrices carry the bias as their last column. Inputs and the
// target are min-max normalized to [0,1] with the ranges stored alongside
// the weights.
struct MlpNetwork {
  Mat w1;  // 16 x 5
  Mat w2;  // 8 x 17
  Mat w3;  // 1 x 9
  std::array<std::pair<double, double>, 4> in_range{};
  std::pair<double, double> out_range{0.0, 1.0};

  std::string target;  // "np" | "nc" | "q" | "r" (metadata)
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  double final_train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainConfig {
  int epochs = 1000;
  double lr = 0.05;
  double momentum = 0.9;
  double holdout_frac = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Seeded uniform(+-sqrt(6/(fan_in+fan_out))) init; the output bias starts
// positive so the ReLU is not born dead on normalized targets.
MlpNetwork mlp_init(std::uint64_t seed);

// Denormalized prediction for raw inputs (clamped to the stored ranges).
double mlp_forward(const MlpNetwork& net, const std::array<double, 4>& inputs);

// Normalized batch with bias column, as used by training and the
// gradient checks.
struct MlpBatch {
  Mat a0;  // N x 5
  Vec y;   // N
};

MlpBatch mlp_prepare_batch(const MlpNetwork& net, std::span<const TrainingSample> rows);

struct MlpGradients {
  Mat w1, w2, w3;
};

double mlp_batch_loss(const MlpNetwork& net, const MlpBatch& batch);

// Full-batch MSE loss and its analytic gradients. Returns the loss.
double mlp_batch_gradients(const MlpNetwork& net, const MlpBatch& batch, MlpGradients& grads);

struct MlpTrainResult {
  std::vector<double> loss_history;  // per-epoch training MSE (normalized scale)
  double final_train_mse = 0.0;
  double validation_mse = 0.0;
};

// Full-batch gradient descent with momentum. Normalization ranges are
// computed from the dataset and stored in the network. Holdout rows (when
// holdout_frac > 0) are only used for the reported validation MSE.
MlpTrainResult mlp_train(MlpNetwork& net, std::span<const TrainingSample> rows,
                         const TrainConfig& cfg);

void save_mlp(const MlpNetwork& net, const std::string& path);
MlpNetwork load_mlp(const std::string& path);

// Four networks, one per MPC parameter, in (np, nc, q, r) order.
class NnAdapter : public ParameterAdapter {
 public:
  explicit NnAdapter(std::array<MlpNetwork, 4> nets) : nets_(std::move(nets)) {}
  MpcParams adapt(const OperatingCondition& cond) const override;
  const std::array<MlpNetwork, 4>& nets() const { return nets_; }

 private:
  std::array<MlpNetwork, 4> nets_;
};

}  // namespace latmpc

#endif  // LATMPC_MLP_HPP
