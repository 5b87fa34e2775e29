#pragma once

#include <optional>
#include <string>

#include "nnadapt/adapt.hpp"
#include "nnadapt/pretrain.hpp"

namespace nnadapt {

// Everything a subcommand can consume, resolved from the config file plus
// flag overrides. Field defaults define the standard synthetic task.
struct RunConfig {
  // task / data generation
  int n_per_domain = 1000;
  int num_classes = 4;
  int dims = 10;
  double rotation_degrees = 45.0;
  std::vector<double> translation{2.0};  // scalar = same shift in every dim
  double noise_std = 1.0;
  double class_sep = 6.0;

  // source training
  PretrainConfig pretrain;

  // target adaptation
  AdaptConfig adapt;

  // shared
  uint64_t seed = 2020;
  std::string out_dir = "out";
  int ablate_rounds = 10;

  // artifact paths; empty entries resolve to defaults under out_dir
  std::string source_data, target_data;
  std::string source_checkpoint, adapted_checkpoint;
  std::string eval_data, eval_checkpoint;

  std::string resolved_source_data() const;
  std::string resolved_target_data() const;
  std::string resolved_source_checkpoint() const;
  std::string resolved_adapted_checkpoint() const;
  std::string resolved_eval_data() const;
  std::string resolved_eval_checkpoint() const;
};

struct CliOverrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> mode;  // "nnh" | "shnnh"
};

// Parse the JSON config file (empty path = all defaults) and apply flag
// overrides; unknown keys and malformed values are config errors.
RunConfig load_run_config(const std::string& config_path, const CliOverrides& overrides);

// Canonical single-line JSON rendering: key-sorted, used for the resolved
// snapshot and the fingerprint.
std::string canonical_config_json(const RunConfig& cfg);

int cmd_gen_data(const RunConfig& cfg);
int cmd_pretrain(const RunConfig& cfg);
int cmd_adapt(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_ablate(const RunConfig& cfg);

}  // namespace nnadapt
