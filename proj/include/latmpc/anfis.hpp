#ifndef LATMPC_ANFIS_HPP
#define LATMPC_ANFIS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "latmpc/adapter.hpp"
#include "latmpc/mlp.hpp"  // TrainingSample

namespace latmpc {

// One Takagi-Sugeno rule: a Gaussian membership function per input plus a
// first-order polynomial consequent (4 slopes + offset).
struct AnfisRule {
  std::array<double, 4> center{};
  std::array<double, 4> sigma{};
  std::array<double, 5> coef{};
};

struct AnfisModel {
  std::vector<AnfisRule> rules;
  std::array<std::pair<double, double>, 4> in_range{};
  std::pair<double, double> out_range{0.0, 1.0};

  std::string target;
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  double final_train_mse = 0.0;
};

// Per-layer values of one forward evaluation, used by the training halves
// and the tests.
struct AnfisTrace {
  std::vector<std::array<double, 4>> memberships;  // layer 1
  Vec strengths;                                   // layer 2
  Vec normalized;                                  // layer 3
  Vec rule_outputs;                                // f_i
  double strength_sum = 0.0;
  bool degenerate = false;  // sum fell below the guard, uniform fallback used
};

// Layer 1-5 evaluation on normalized inputs in [0,1]^4.
double anfis_forward_normalized(const AnfisModel& model, const std::array<double, 4>& xn,
                                AnfisTrace* trace = nullptr);

// Raw-input convenience wrapper: normalizes (clamped), evaluates,
// denormalizes.
double anfis_forward(const AnfisModel& model, const std::array<double, 4>& inputs,
                     AnfisTrace* trace = nullptr);

// Subtractive clustering over the normalized input space; one rule per
// selected center, sigma = radius / sqrt(8).
struct ScatterResult {
  std::vector<std::array<double, 4>> centers;
  double sigma = 0.0;
};

ScatterResult anfis_init_scatter(const std::vector<std::array<double, 4>>& inputs_norm,
                                 double radius);

struct HybridTrainConfig {
  int epochs = 60;
  double premise_lr = 0.01;
  double forgetting = 1.0;
  double radius = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AnfisTrainResult {
  std::vector<double> loss_history;     // MSE after each epoch's RLS half
  std::vector<double> mse_before_rls;   // MSE entering each epoch
  std::vector<double> mse_after_rls;    // MSE right after the RLS half-step
  int rule_count = 0;
};

// Builds the premise structure by scatter partitioning, then alternates
// RLS consequent re-solves with gradient-descent premise updates.
AnfisTrainResult anfis_train_hybrid(AnfisModel& model, std::span<const TrainingSample> rows,
                                    const HybridTrainConfig& cfg);

// Consequent least squares on frozen premises (the RLS forward half),
// exposed for the oracle tests. Returns the stacked coefficients
// (rule-major, 5 per rule).
Vec anfis_rls_consequents(const AnfisModel& model, const Mat& inputs_norm, const Vec& targets,
                          double forgetting, double initial_covariance = 1e6);

// Premise (center, sigma) gradients of the batch MSE with consequents
// frozen. Returns the loss.
double anfis_premise_gradients(const AnfisModel& model, const Mat& inputs_norm,
                               const Vec& targets, std::vector<std::array<double, 8>>& grads);

void save_anfis(const AnfisModel& model, const std::string& path);
AnfisModel load_anfis(const std::string& path);

class AnfisAdapter : public ParameterAdapter {
 public:
  explicit AnfisAdapter(std::array<AnfisModel, 4> models) : models_(std::move(models)) {}
  MpcParams adapt(const OperatingCondition& cond) const override;
  const std::array<AnfisModel, 4>& models() const { return models_; }

 private:
  std::array<AnfisModel, 4> models_;
};

}  // namespace latmpc

#endif  // LATMPC_ANFIS_HPP
