#pragma once

#include "vnav/agents.hpp"
#include "vnav/config.hpp"
#include "vnav/dqn.hpp"
#include "vnav/grid_env.hpp"
#include "vnav/planner.hpp"
#include "vnav/stats.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace vnav {

/// 100 x 75 cells (0.10 x 0.075 degrees) at the origin of the Halifax box: a
/// land barrier crossed by two channels, a wavy southern coast and two islands.
GridMap make_fixture_map();

/// Resolves config.map_source ("fixture", "generate" or a file path).
GridMap load_map_source(const ExperimentConfig& config);

/// Map plus its planning graph and all-pairs table; immutable once built.
struct World {
  std::shared_ptr<const GridMap> map;
  PlanningGraph graph;
  NextHopMatrix matrix;
  std::vector<CellIndex> water_cells;
};

/// Builds the planning tables, reusing/writing a plan cache in `cache_dir` when given.
std::shared_ptr<const World> build_world(GridMap map, int downsample, const std::filesystem::path& cache_dir = {});

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OdPair {
  Point origin = Point::Zero();
  Point destination = Point::Zero();
};

inline constexpr int kOdSamplingRetries = 10000;

/// Water cell centres separated by bucket * (1 +- tolerance) and connected in
/// the planning graph. Throws SamplingError after kOdSamplingRetries misses.
OdPair sample_od_pair(const World& world, double bucket, Rng& rng, double tolerance = 0.1);

/// The buckets (in input order) for which sample_od_pair succeeds.
std::vector<double> feasible_buckets(const World& world, const std::vector<double>& buckets, double tolerance,
                                     std::uint64_t seed);

struct EvaluationRecord {
  int round = 0;
  double bucket = 0.0;
  int trials = 0;
  int successes = 0;
  double ratd = 0.0;
  std::uint64_t seed = 0;
  AgentKind agent = AgentKind::Vnplv;
};

/// 100 * successes / trials; throws for trials < 1.
double ratd(int successes, int trials);

/// What evaluation and training need besides the network.
struct RunContext {
  std::shared_ptr<const World> world;
  EnvConfig env;
  LocalViewParams view;
  double bucket_tolerance = 0.1;
};

/// Runs one greedy episode (VVN) or plan (VNPLV).
RolloutResult run_greedy(AgentKind agent, const nn::Network<double>& net, const RunContext& ctx, const OdPair& od,
                         std::uint64_t obstacle_seed);

/// n_tests greedy trials on fresh pairs and obstacle seeds drawn from `rng`.
/// Never modifies the network.
EvaluationRecord evaluate(AgentKind agent, const nn::Network<double>& net, const RunContext& ctx, double bucket,
                          int n_tests, Rng& rng);

/// Seed of the fixed evaluation set for a bucket under a master seed.
std::uint64_t evaluation_seed(std::uint64_t master_seed, double bucket);

/// Agent type implied by a network's input layout.
AgentKind infer_agent(const nn::Network<double>& net);

/// One agent's training state: trainer, replay buffer and environment step
/// counter. Rounds alternate with evaluations in run_training().
class TrainingSession {
 public:
  explicit TrainingSession(ExperimentConfig config, std::shared_ptr<const World> world = nullptr);

  const ExperimentConfig& config() const { return config_; }
  const RunContext& context() const { return ctx_; }
  const std::vector<double>& eval_buckets() const { return eval_buckets_; }
  const std::vector<double>& train_buckets() const { return train_buckets_; }
  int round() const { return round_; }
  std::int64_t env_steps() const { return env_steps_; }
  const nn::Network<double>& network() const;
  const TrainerCounters& counters() const;
  std::size_t replay_size() const;

  /// One training round of episodes_per_round epsilon-greedy rollouts.
  void train_round();

  /// Greedy evaluation of every feasible bucket, labelled with the current round.
  std::vector<EvaluationRecord> evaluate_round() const;
  EvaluationRecord evaluate_bucket(double bucket, int n_tests) const;

  /// Evaluation seed for a bucket; identical across rounds.
  std::uint64_t eval_seed(double bucket) const;

 private:
  template <class Obs>
  void train_round_impl(Trainer<Obs>& trainer);

  ExperimentConfig config_;
  RunContext ctx_;
  std::vector<double> eval_buckets_;
  std::vector<double> train_buckets_;
  std::variant<Trainer<VvnObservation>, Trainer<VnplvObservation>> trainer_;
  Rng rollout_rng_;
  std::int64_t env_steps_ = 0;
  int round_ = 0;
};

struct TrainingSummary {
  std::vector<EvaluationRecord> records;
  std::filesystem::path metrics_path;
  std::filesystem::path final_checkpoint;
  std::int64_t env_steps = 0;
};

/// Evaluates the initial network, then alternates training rounds and
/// evaluations. Writes metrics.csv, run_config.txt and checkpoints into
/// config.output_dir. `on_round` may stop training early by returning false.
TrainingSummary run_training(
    const ExperimentConfig& config, std::shared_ptr<const World> world = nullptr,
    const std::function<bool(const TrainingSession&, const std::vector<EvaluationRecord>&)>& on_round = {});

inline constexpr const char* kMetricsHeader = "round,bucket_deg,trials,successes,ratd,seed,agent";
void write_metrics_row(std::ostream& out, const EvaluationRecord& r);

struct BucketComparison {
  double bucket = 0.0;
  std::vector<double> vvn;
  std::vector<double> vnplv;
  /// Absent when both samples are constant but different.
  std::optional<WelchResult> welch;
};

struct ComparisonResult {
  std::vector<EvaluationRecord> records;
  std::vector<BucketComparison> buckets;
  std::optional<WelchResult> overall;
};

/// Welch's test that treats two identical constant samples as t = 0, p = 1.
std::optional<WelchResult> compare_samples(const std::vector<double>& a, const std::vector<double>& b);

/// Evaluates both networks over all feasible buckets x compare_repeats seeds.
/// Both agents see the same pairs and obstacle seeds.
ComparisonResult compare_agents(const ExperimentConfig& config, const nn::Network<double>& vvn,
                                const nn::Network<double>& vnplv, std::shared_ptr<const World> world = nullptr);

void write_comparison_csv(std::ostream& out, const ComparisonResult& result);

}  // namespace vnav
