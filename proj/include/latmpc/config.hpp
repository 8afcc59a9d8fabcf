#ifndef LATMPC_CONFIG_HPP
#define LATMPC_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "latmpc/anfis.hpp"
#include "latmpc/mlp.hpp"
#include "latmpc/mpc.hpp"
#include "latmpc/pso.hpp"
#include "latmpc/scenario.hpp"
#include "latmpc/vehicle.hpp"

namespace latmpc {

// Configuration problems carry the offending "section.key" path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ScenarioProfiles {
  double duration = 25.0;
  std::vector<double> velocity_t{0.0};
  std::vector<double> velocity_v{15.0};
  std::vector<double> wind_t{0.0};
  std::vector<double> wind_v{0.0};
  std::vector<double> mu_t{0.0};
  std::vector<double> mu_v{0.9};
};

// Everything a run needs, defaults matching the MPC/model and PSO parameter
// tables plus the documented profile defaults.
struct RunConfig {
  VehicleParams vehicle;
  PacejkaParams tire;  // loads filled from vehicle at load time
  MpcParams mpc;
  MpcConstraints cons;
  MpcSettings mpc_settings;

  PsoConfig pso;
  GridSpec grid;
  double fitness_duration = 10.0;
  double fitness_step_time = 1.0;
  bool pso_warm_start = false;

  TrainConfig train_nn;
  HybridTrainConfig train_anfis;

  std::map<std::string, ScenarioProfiles> scenarios;  // by name

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 0;  // 0 = hardware concurrency
  int adapter_period = 1;
  std::string kernels = "auto";  // auto | scalar | avx2

  FitnessSettings fitness_settings() const;
  Scenario make_scenario(const std::string& name) const;
  // Deterministic flat dump (also the input of the config hash).
  std::string dump() const;
};

RunConfig default_config();

// Parses the key = value section file and overlays it on the defaults.
// Unknown sections or keys raise ConfigError naming the field path.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

// FNV-1a over the resolved dump, hex string.
std::string config_hash(const RunConfig& cfg);

}  // namespace latmpc

#endif  // LATMPC_CONFIG_HPP
