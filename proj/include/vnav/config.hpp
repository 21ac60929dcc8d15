#pragma once

#include "vnav/agents.hpp"
#include "vnav/dqn.hpp"
#include "vnav/grid_env.hpp"
#include "vnav/localview.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace vnav {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a training/evaluation run depends on. Loaded from a flat
/// `key = value` file; see README for the key list.
struct ExperimentConfig {
  /// "fixture", "generate" or a path to an ASCII grid file.
  std::string map_source = "fixture";
  std::uint64_t map_seed = 7;
  double map_water_fraction = 0.6;
  int downsample = 4;
  /// Directory for plan-cache files; empty disables caching.
  std::string plan_cache_dir;

  AgentKind agent = AgentKind::Vnplv;
  /// Empty selects default_descriptor(agent, view).
  std::string network_descriptor;

  EnvConfig env;
  LocalViewParams view;
  TrainerConfig trainer;

  std::vector<double> buckets = {0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
  /// Buckets sampled for training rollouts; empty means `buckets`.
  std::vector<double> train_buckets;
  double bucket_tolerance = 0.1;
  int tests_per_eval = 100;
  int episodes_per_round = 1000;
  int rounds = 100;
  int checkpoint_every = 1;
  int compare_repeats = 5;
  std::string output_dir = "runs";
  std::uint64_t seed = 0;

  std::string descriptor() const {
    return network_descriptor.empty() ? default_descriptor(agent, view) : network_descriptor;
  }

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

/// Unknown keys and malformed values are errors (with line numbers). Relative
/// map and directory paths resolve against `base_dir`.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one `key = value` assignment.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Every key in canonical order; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& config);

}  // namespace vnav
