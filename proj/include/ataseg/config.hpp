#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ataseg/adam.hpp"
#include "ataseg/adapter.hpp"
#include "ataseg/annotator.hpp"
#include "ataseg/stream.hpp"

namespace ataseg {

// How the source network is obtained before adaptation.
struct SourceConfig {
  std::string checkpoint;  // load when non-empty, else pretrain
  std::vector<int> hidden = {16, 16};
  int scenes = 300;
  std::uint64_t data_seed = 123;
  std::uint64_t init_seed = 7;
  int epochs = 15;
  double lr = 3e-3;
  std::uint64_t shuffle_seed = 1;
  void validate() const;
};

enum class OracleMode { kSimulated, kHuman };
std::string to_string(OracleMode mode);
OracleMode oracle_mode_from_string(const std::string& name);

struct OracleConfig {
  OracleMode mode = OracleMode::kSimulated;
  double timeout_s = 300.0;  // human oracle only
};

// Grid expanded by the sweep command. Empty axes keep the base config value.
struct SweepGrid {
  std::vector<std::string> adapters;
  std::vector<std::string> annotators;
  std::vector<int> budgets = {1, 2, 4, 8, 16};
  std::vector<double> omegas;
  std::vector<int> suppression_k;  // window side at 960-pixel width
  std::vector<std::string> consistency;
  std::vector<std::vector<int>> domain_orders;
};

// Per-run seed s drives the stream (stream.seed = s) and the annotator RNG.
struct ExperimentConfig {
  AdapterSpec adapter;
  AnnotatorSpec annotator;
  StreamSpec stream = desk_ctta_spec(0);
  AdamConfig optimizer;
  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir = "runs";
  SourceConfig source;
  OracleConfig oracle;
  bool evaluate_source = true;
  bool multi_session = false;
  SweepGrid sweep;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Learning rate of the desk preset. The default optimizer learning rate is
// tuned for networks with tens of millions of weights; the desk network has
// under 3k, and needs a larger step to move within one frame.
inline constexpr double kDeskLearningRate = 2e-3;

// Defaults with the desk learning rate.
ExperimentConfig desk_preset();

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing fields take defaults; unknown fields and bad values throw
// ConfigError with the field path.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const StreamSpec& spec);
StreamSpec stream_from_json(const nlohmann::json& doc);

}  // namespace ataseg
