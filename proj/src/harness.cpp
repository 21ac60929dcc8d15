#include "vnav/harness.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace vnav {

namespace {

constexpr std::uint64_t kNetworkStream = 1;
constexpr std::uint64_t kTrainerStream = 2;
constexpr std::uint64_t kRolloutStream = 3;
constexpr std::uint64_t kEvalStream = 4;
constexpr std::uint64_t kFeasibilityStream = 5;
constexpr std::uint64_t kCompareStream = 6;

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::uint64_t bucket_key(double bucket) { return std::bit_cast<std::uint64_t>(bucket); }

/// Network-implied view size with the configured margin.
LocalViewParams view_for(const nn::Network<double>& net, LocalViewParams base) {
  base.size = static_cast<int>(net.input_shape().height);
  base.validate();
  return base;
}

}  // namespace

GridMap make_fixture_map() {
  constexpr int ncols = 100;
  constexpr int nrows = 75;
  GridMap::Cells cells = GridMap::Cells::Zero(nrows, ncols);
  auto land = [&](int r0, int r1, int c0, int c1) {
    for (int r = std::max(r0, 0); r <= std::min(r1, nrows - 1); ++r)
      for (int c = std::max(c0, 0); c <= std::min(c1, ncols - 1); ++c) cells(r, c) = 1;
  };
  // Southern coast with a gentle wave.
  for (int c = 0; c < ncols; ++c) {
    const int shore = 67 + static_cast<int>(std::lround(2.0 * std::sin(c / 7.0)));
    land(shore, nrows - 1, c, c);
  }
  // North-south barrier with two channels.
  land(0, 15, 48, 55);
  land(24, 43, 48, 55);
  land(52, nrows - 1, 48, 55);
  // Islands.
  land(30, 36, 20, 27);
  land(25, 31, 72, 80);
  land(0, 3, 0, 9);
  return GridMap(GeoTransform::from_corner(-63.69, 44.58, ncols, nrows, 0.001), std::move(cells));
}

GridMap load_map_source(const ExperimentConfig& config) {
  if (config.map_source == "fixture") return make_fixture_map();
  if (config.map_source == "generate") {
    MapGenParams params;
    params.water_fraction = config.map_water_fraction;
    return generate_map(config.map_seed, params);
  }
  return load_map(config.map_source);
}

std::shared_ptr<const World> build_world(GridMap map, int downsample, const std::filesystem::path& cache_dir) {
  auto world = std::make_shared<World>();
  world->graph = build_planning_graph(map, downsample);
  const std::uint64_t hash = map.content_hash();
  std::filesystem::path cache_file;
  if (!cache_dir.empty()) cache_file = cache_dir / plan_cache_filename(hash, downsample);
  if (!cache_file.empty() && std::filesystem::exists(cache_file)) {
    world->matrix = load_plan_cache(cache_file, hash);
    if (world->matrix.node_count() != world->graph.node_count())
      throw PlanCacheError("plan cache node count does not match the planning graph");
  } else {
    world->matrix = floyd_all_pairs(world->graph);
    if (!cache_file.empty()) {
      std::filesystem::create_directories(cache_dir);
      save_plan_cache(cache_file, world->matrix, hash);
    }
  }
  for (int r = 0; r < map.nrows(); ++r)
    for (int c = 0; c < map.ncols(); ++c)
      if (map.is_water(r, c)) world->water_cells.push_back({r, c});
  world->map = std::make_shared<const GridMap>(std::move(map));
  return world;
}

OdPair sample_od_pair(const World& world, double bucket, Rng& rng, double tolerance) {
  if (!(bucket > 0.0)) throw std::invalid_argument("bucket must be positive");
  if (world.water_cells.empty()) throw SamplingError("map has no water");
  const GridMap& map = *world.map;
  const double lo = bucket * (1.0 - tolerance);
  const double hi = bucket * (1.0 + tolerance);
  for (int attempt = 0; attempt < kOdSamplingRetries; ++attempt) {
    const Point origin = map.cell_center(world.water_cells[rng.below(world.water_cells.size())]);
    const double radius = rng.uniform(lo, hi);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto cell = map.cell_of(origin + radius * Point(std::cos(angle), std::sin(angle)));
    if (!cell || !map.is_water(*cell)) continue;
    const Point destination = map.cell_center(*cell);
    const double separation = (destination - origin).norm();
    if (separation < lo || separation > hi) continue;
    const int a = world.graph.node_of(origin);
    const int b = world.graph.node_of(destination);
    if (a < 0 || b < 0 || !world.matrix.reachable(a, b)) continue;
    return {origin, destination};
  }
  throw SamplingError("no origin/destination pair for bucket " + format_double(bucket) + " after " +
                      std::to_string(kOdSamplingRetries) + " attempts");
}

std::vector<double> feasible_buckets(const World& world, const std::vector<double>& buckets, double tolerance,
                                     std::uint64_t seed) {
  std::vector<double> out;
  for (double b : buckets) {
    Rng rng(derive_seed(seed, {kFeasibilityStream, bucket_key(b)}));
    try {
      sample_od_pair(world, b, rng, tolerance);
      out.push_back(b);
    } catch (const SamplingError&) {
    }
  }
  return out;
}

double ratd(int successes, int trials) {
  if (trials < 1) throw std::invalid_argument("ratd needs at least one trial");
  if (successes < 0 || successes > trials) throw std::invalid_argument("successes out of range");
  return 100.0 * successes / trials;
}

RolloutResult run_greedy(AgentKind agent, const nn::Network<double>& net, const RunContext& ctx, const OdPair& od,
                         std::uint64_t obstacle_seed) {
  const World& world = *ctx.world;
  Environment env(world.map, ctx.env);
  ObstacleField obstacles =
      spawn_obstacles(*world.map, ctx.env.obstacles, obstacle_seed, {od.origin, od.destination});
  Rng unused(0);
  PolicyDriver driver{&net, 0.0, &unused};
  if (agent == AgentKind::Vvn) {
    const EpisodeSpec spec{od.origin, od.destination,
                           default_max_steps((od.destination - od.origin).norm(), ctx.env)};
    return run_vvn_episode(env, spec, std::move(obstacles), driver);
  }
  const PlanSpec plan = make_plan(*world.map, world.graph, world.matrix, od.origin, od.destination);
  return run_vnplv_plan(env, plan, std::move(obstacles), view_for(net, ctx.view), driver);
}

EvaluationRecord evaluate(AgentKind agent, const nn::Network<double>& net, const RunContext& ctx, double bucket,
                          int n_tests, Rng& rng) {
  if (n_tests < 1) throw std::invalid_argument("evaluation needs at least one test");
  EvaluationRecord rec;
  rec.bucket = bucket;
  rec.trials = n_tests;
  rec.agent = agent;
  for (int i = 0; i < n_tests; ++i) {
    const OdPair od = sample_od_pair(*ctx.world, bucket, rng, ctx.bucket_tolerance);
    const std::uint64_t obstacle_seed = rng.next();
    if (run_greedy(agent, net, ctx, od, obstacle_seed).success) ++rec.successes;
  }
  rec.ratd = ratd(rec.successes, rec.trials);
  return rec;
}

std::uint64_t evaluation_seed(std::uint64_t master_seed, double bucket) {
  return derive_seed(master_seed, {kEvalStream, bucket_key(bucket)});
}

AgentKind infer_agent(const nn::Network<double>& net) {
  const auto& s = net.input_shape();
  if (s.channels == 3 && s.height == s.width && s.height > 1) return AgentKind::Vnplv;
  if (net.input_size() == 4) return AgentKind::Vvn;
  throw nn::ArchitectureError("network input matches neither agent: " + net.descriptor());
}

// ---------------------------------------------------------------------------
// Training

namespace {

template <class Obs>
struct TrainingDriver {
  Trainer<Obs>* trainer;
  Rng* rng;
  std::int64_t* env_steps;

  Action choose(const Obs& o) { return act(trainer->online(), o, trainer->explore_probability(*env_steps), *rng); }

  void record(const Obs& s, Action a, const StepResult& r, const Obs& next) {
    trainer->push({s, action_index(a), r.reward, next, r.outcome != Outcome::NormalMovement});
    ++*env_steps;
    trainer->train_tick(*env_steps);
  }
};

std::variant<Trainer<VvnObservation>, Trainer<VnplvObservation>> make_trainer(const ExperimentConfig& config) {
  nn::Network<double> net(config.descriptor(), derive_seed(config.seed, {kNetworkStream}));
  if (infer_agent(net) != config.agent)
    throw ConfigError("network descriptor does not fit agent " + std::string(to_string(config.agent)));
  if (config.agent == AgentKind::Vnplv && net.input_shape().height != config.view.size)
    throw ConfigError("network input does not match localview.size");
  TrainerConfig tc = config.trainer;
  tc.seed = derive_seed(config.seed, {kTrainerStream});
  if (config.agent == AgentKind::Vvn) return Trainer<VvnObservation>(std::move(net), tc);
  return Trainer<VnplvObservation>(std::move(net), tc);
}

}  // namespace

TrainingSession::TrainingSession(ExperimentConfig config, std::shared_ptr<const World> world)
    : config_((config.validate(), std::move(config))),
      trainer_(make_trainer(config_)),
      rollout_rng_(derive_seed(config_.seed, {kRolloutStream})) {
  if (!world) world = build_world(load_map_source(config_), config_.downsample, config_.plan_cache_dir);
  ctx_ = RunContext{std::move(world), config_.env, config_.view, config_.bucket_tolerance};
  eval_buckets_ = feasible_buckets(*ctx_.world, config_.buckets, config_.bucket_tolerance, config_.seed);
  if (eval_buckets_.empty()) throw SamplingError("no distance bucket is feasible on this map");
  train_buckets_ = feasible_buckets(
      *ctx_.world, config_.train_buckets.empty() ? config_.buckets : config_.train_buckets,
      config_.bucket_tolerance, config_.seed);
  if (train_buckets_.empty()) throw SamplingError("no training bucket is feasible on this map");
}

const nn::Network<double>& TrainingSession::network() const {
  return std::visit([](const auto& t) -> const nn::Network<double>& { return t.online(); }, trainer_);
}

const TrainerCounters& TrainingSession::counters() const {
  return std::visit([](const auto& t) -> const TrainerCounters& { return t.counters(); }, trainer_);
}

std::size_t TrainingSession::replay_size() const {
  return std::visit([](const auto& t) { return t.buffer().size(); }, trainer_);
}

template <class Obs>
void TrainingSession::train_round_impl(Trainer<Obs>& trainer) {
  const World& world = *ctx_.world;
  Environment env(world.map, ctx_.env);
  TrainingDriver<Obs> driver{&trainer, &rollout_rng_, &env_steps_};
  for (int e = 0; e < config_.episodes_per_round; ++e) {
    const double bucket = train_buckets_[rollout_rng_.below(train_buckets_.size())];
    const OdPair od = sample_od_pair(world, bucket, rollout_rng_, ctx_.bucket_tolerance);
    ObstacleField obstacles =
        spawn_obstacles(*world.map, ctx_.env.obstacles, rollout_rng_.next(), {od.origin, od.destination});
    if constexpr (std::is_same_v<Obs, VvnObservation>) {
      const EpisodeSpec spec{od.origin, od.destination,
                             default_max_steps((od.destination - od.origin).norm(), ctx_.env)};
      run_vvn_episode(env, spec, std::move(obstacles), driver);
    } else {
      const PlanSpec plan = make_plan(*world.map, world.graph, world.matrix, od.origin, od.destination);
      run_vnplv_plan(env, plan, std::move(obstacles), ctx_.view, driver);
    }
  }
}

void TrainingSession::train_round() {
  std::visit([this](auto& t) { train_round_impl(t); }, trainer_);
  ++round_;
}

std::uint64_t TrainingSession::eval_seed(double bucket) const { return evaluation_seed(config_.seed, bucket); }

EvaluationRecord TrainingSession::evaluate_bucket(double bucket, int n_tests) const {
  Rng rng(eval_seed(bucket));
  EvaluationRecord rec = evaluate(config_.agent, network(), ctx_, bucket, n_tests, rng);
  rec.round = round_;
  rec.seed = config_.seed;
  return rec;
}

std::vector<EvaluationRecord> TrainingSession::evaluate_round() const {
  std::vector<EvaluationRecord> out;
  for (double b : eval_buckets_) out.push_back(evaluate_bucket(b, config_.tests_per_eval));
  return out;
}

void write_metrics_row(std::ostream& out, const EvaluationRecord& r) {
  out << r.round << ',' << format_double(r.bucket) << ',' << r.trials << ',' << r.successes << ','
      << format_double(r.ratd) << ',' << r.seed << ',' << to_string(r.agent) << '\n';
}

TrainingSummary run_training(
    const ExperimentConfig& config, std::shared_ptr<const World> world,
    const std::function<bool(const TrainingSession&, const std::vector<EvaluationRecord>&)>& on_round) {
  TrainingSession session(config, std::move(world));
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir / "checkpoints");

  TrainingSummary summary;
  summary.metrics_path = dir / "metrics.csv";
  summary.final_checkpoint = dir / "final.vnn";
  {
    std::ofstream cfg(dir / "run_config.txt");
    cfg << to_text(config);
    if (!cfg) throw std::runtime_error("cannot write " + (dir / "run_config.txt").string());
  }
  std::ofstream metrics(summary.metrics_path);
  if (!metrics) throw std::runtime_error("cannot write " + summary.metrics_path.string());
  metrics << kMetricsHeader << '\n';

  auto evaluate_and_log = [&]() {
    const auto records = session.evaluate_round();
    for (const auto& r : records) write_metrics_row(metrics, r);
    metrics.flush();
    summary.records.insert(summary.records.end(), records.begin(), records.end());
    return on_round ? on_round(session, records) : true;
  };

  bool keep_going = evaluate_and_log();
  while (keep_going && session.round() < config.rounds) {
    session.train_round();
    if (config.checkpoint_every > 0 && session.round() % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "round_%04d.vnn", session.round());
      nn::save_checkpoint(dir / "checkpoints" / name, session.network());
    }
    keep_going = evaluate_and_log();
  }
  nn::save_checkpoint(summary.final_checkpoint, session.network());
  summary.env_steps = session.env_steps();
  if (!metrics) throw std::runtime_error("error writing " + summary.metrics_path.string());
  return summary;
}

// ---------------------------------------------------------------------------
// Comparison

std::optional<WelchResult> compare_samples(const std::vector<double>& a, const std::vector<double>& b) {
  try {
    return welch_t_test(a, b);
  } catch (const DegenerateSample&) {
    if (a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin()))
      return WelchResult{0.0, static_cast<double>(a.size() + b.size() - 2), 1.0};
    return std::nullopt;
  }
}

ComparisonResult compare_agents(const ExperimentConfig& config, const nn::Network<double>& vvn,
                                const nn::Network<double>& vnplv, std::shared_ptr<const World> world) {
  config.validate();
  if (!world) world = build_world(load_map_source(config), config.downsample, config.plan_cache_dir);
  const RunContext ctx{world, config.env, config.view, config.bucket_tolerance};
  const AgentKind vvn_kind = infer_agent(vvn);
  const AgentKind vnplv_kind = infer_agent(vnplv);

  ComparisonResult result;
  std::vector<double> all_vvn, all_vnplv;
  for (double bucket : feasible_buckets(*world, config.buckets, config.bucket_tolerance, config.seed)) {
    BucketComparison bc;
    bc.bucket = bucket;
    for (int rep = 0; rep < config.compare_repeats; ++rep) {
      const std::uint64_t seed = derive_seed(config.seed, {kCompareStream, bucket_key(bucket),
                                                           static_cast<std::uint64_t>(rep)});
      Rng rng_a(seed), rng_b(seed);
      EvaluationRecord a = evaluate(vvn_kind, vvn, ctx, bucket, config.tests_per_eval, rng_a);
      EvaluationRecord b = evaluate(vnplv_kind, vnplv, ctx, bucket, config.tests_per_eval, rng_b);
      for (auto* r : {&a, &b}) {
        r->round = rep;
        r->seed = seed;
      }
      a.agent = AgentKind::Vvn;
      b.agent = AgentKind::Vnplv;
      bc.vvn.push_back(a.ratd);
      bc.vnplv.push_back(b.ratd);
      result.records.push_back(a);
      result.records.push_back(b);
    }
    bc.welch = compare_samples(bc.vvn, bc.vnplv);
    all_vvn.insert(all_vvn.end(), bc.vvn.begin(), bc.vvn.end());
    all_vnplv.insert(all_vnplv.end(), bc.vnplv.begin(), bc.vnplv.end());
    result.buckets.push_back(std::move(bc));
  }
  result.overall = compare_samples(all_vvn, all_vnplv);
  return result;
}

void write_comparison_csv(std::ostream& out, const ComparisonResult& result) {
  out << kMetricsHeader << '\n';
  for (const auto& r : result.records) write_metrics_row(out, r);
  out << "bucket_deg,t_stat,p_value\n";
  auto footer = [&](const std::string& label, const std::optional<WelchResult>& w) {
    out << label << ',';
    if (w)
      out << format_double(w->t) << ',' << format_double(w->p) << '\n';
    else
      out << "degenerate,degenerate\n";
  };
  for (const auto& b : result.buckets) footer(format_double(b.bucket), b.welch);
  footer("all", result.overall);
}

}  // namespace vnav
