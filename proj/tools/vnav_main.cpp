#include "vnav/config.hpp"
#include "vnav/harness.hpp"
#include "vnav/planner.hpp"
#include "vnav/tinynn.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace {

vnav::Point parse_point(const std::string& text) {
  std::istringstream in(text);
  double x = 0.0, y = 0.0;
  char comma = 0;
  if (!(in >> x >> comma >> y) || comma != ',' || !(in >> std::ws).eof())
    throw CLI::ValidationError("point", "expected x,y but got '" + text + "'");
  return {x, y};
}

std::shared_ptr<const vnav::World> world_for(const vnav::ExperimentConfig& config) {
  return vnav::build_world(vnav::load_map_source(config), config.downsample, config.plan_cache_dir);
}

struct TraceDriver {
  const vnav::nn::Network<double>* net;
  vnav::Rng rng{0};
  int step = 0;

  template <vnav::Observation Obs>
  vnav::Action choose(const Obs& o) {
    return vnav::act(*net, o, 0.0, rng);
  }
  template <vnav::Observation Obs>
  void record(const Obs&, vnav::Action a, const vnav::StepResult& r, const Obs&) {
    const auto& s = r.next_state;
    std::printf("%d,%s,%.6f,%.6f,%.6f,%.6f,%s,%.9g\n", ++step, std::string(vnav::to_string(a)).c_str(),
                s.position.x(), s.position.y(), s.goal.x(), s.goal.y(),
                std::string(vnav::to_string(r.outcome)).c_str(), r.reward);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marine navigation agents: grid simulator, planner and DQN training harness"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-map", "Write a generated (or the fixture) ASCII grid map");
  std::uint64_t gen_seed = 7;
  double water_fraction = 0.6;
  std::string gen_out;
  bool fixture = false;
  vnav::MapGenParams gen_params;
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--water-fraction", water_fraction, "Target water fraction in (0, 1]");
  gen->add_option("--ncols", gen_params.ncols, "Columns");
  gen->add_option("--nrows", gen_params.nrows, "Rows");
  gen->add_flag("--fixture", fixture, "Write the built-in 100x75 fixture map instead");
  gen->add_option("--out", gen_out, "Output file")->required();

  auto* pc = app.add_subcommand("plan-cache", "Precompute the all-pairs planning table for a map");
  std::string pc_map, pc_out;
  int pc_downsample = 4;
  pc->add_option("--map", pc_map, "ASCII grid map, or 'fixture'")->required();
  pc->add_option("--downsample", pc_downsample, "Coarse block size in cells");
  pc->add_option("--out", pc_out, "Output file");

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train an agent and write metrics and checkpoints");
  train->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint over all feasible buckets");
  std::string checkpoint;
  eval->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", checkpoint, "Network checkpoint")->required()->check(CLI::ExistingFile);

  auto* cmp = app.add_subcommand("compare", "Compare VVN and VNPLV checkpoints with Welch's t-test");
  std::string vvn_ckpt, vnplv_ckpt;
  cmp->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  cmp->add_option("--vvn-ckpt", vvn_ckpt, "VVN checkpoint")->required()->check(CLI::ExistingFile);
  cmp->add_option("--vnplv-ckpt", vnplv_ckpt, "VNPLV checkpoint")->required()->check(CLI::ExistingFile);

  auto* roll = app.add_subcommand("rollout", "Run one greedy rollout and print its step trace");
  std::string origin_text, dest_text;
  std::uint64_t obstacle_seed = 0;
  roll->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  roll->add_option("--checkpoint", checkpoint, "Network checkpoint")->required()->check(CLI::ExistingFile);
  roll->add_option("--origin", origin_text, "Origin as lon,lat")->required();
  roll->add_option("--dest", dest_text, "Destination as lon,lat")->required();
  roll->add_option("--obstacle-seed", obstacle_seed, "Obstacle field seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gen_params.water_fraction = water_fraction;
      vnav::save_map(gen_out, fixture ? vnav::make_fixture_map() : vnav::generate_map(gen_seed, gen_params));
    } else if (*pc) {
      vnav::GridMap map = pc_map == "fixture" ? vnav::make_fixture_map() : vnav::load_map(pc_map);
      const auto graph = vnav::build_planning_graph(map, pc_downsample);
      const std::uint64_t hash = map.content_hash();
      if (pc_out.empty()) pc_out = vnav::plan_cache_filename(hash, pc_downsample);
      vnav::save_plan_cache(pc_out, vnav::floyd_all_pairs(graph), hash);
      std::cout << pc_out << ": " << graph.node_count() << " nodes\n";
    } else if (*train) {
      const auto config = vnav::load_config(config_path);
      const auto summary = vnav::run_training(
          config, nullptr, [](const vnav::TrainingSession& s, const std::vector<vnav::EvaluationRecord>& recs) {
            std::cerr << "round " << s.round();
            for (const auto& r : recs) std::cerr << "  " << r.bucket << ":" << r.ratd;
            std::cerr << '\n';
            return true;
          });
      std::cout << summary.metrics_path.string() << '\n' << summary.final_checkpoint.string() << '\n';
    } else if (*eval) {
      const auto config = vnav::load_config(config_path);
      const auto net = vnav::nn::load_checkpoint(checkpoint);
      const auto world = world_for(config);
      const vnav::RunContext ctx{world, config.env, config.view, config.bucket_tolerance};
      const auto kind = vnav::infer_agent(net);
      std::cout << vnav::kMetricsHeader << '\n';
      for (double b : vnav::feasible_buckets(*world, config.buckets, config.bucket_tolerance, config.seed)) {
        vnav::Rng rng(vnav::evaluation_seed(config.seed, b));
        auto rec = vnav::evaluate(kind, net, ctx, b, config.tests_per_eval, rng);
        rec.seed = config.seed;
        vnav::write_metrics_row(std::cout, rec);
      }
    } else if (*cmp) {
      const auto config = vnav::load_config(config_path);
      const auto result =
          vnav::compare_agents(config, vnav::nn::load_checkpoint(vvn_ckpt), vnav::nn::load_checkpoint(vnplv_ckpt));
      vnav::write_comparison_csv(std::cout, result);
    } else if (*roll) {
      const auto config = vnav::load_config(config_path);
      const auto net = vnav::nn::load_checkpoint(checkpoint);
      const auto world = world_for(config);
      const vnav::OdPair od{parse_point(origin_text), parse_point(dest_text)};
      if (!world->map->is_water(od.origin)) throw std::invalid_argument("origin is not on water");
      if (!world->map->is_water(od.destination)) throw std::invalid_argument("destination is not on water");
      const auto kind = vnav::infer_agent(net);
      vnav::Environment env(world->map, config.env);
      auto obstacles = vnav::spawn_obstacles(*world->map, config.env.obstacles, obstacle_seed,
                                             {od.origin, od.destination});
      TraceDriver driver{&net};
      std::printf("step,action,x,y,goal_x,goal_y,outcome,reward\n");
      vnav::RolloutResult result;
      if (kind == vnav::AgentKind::Vvn) {
        result = vnav::run_vvn_episode(
            env, {od.origin, od.destination, vnav::default_max_steps((od.destination - od.origin).norm(), config.env)},
            std::move(obstacles), driver);
      } else {
        vnav::LocalViewParams view = config.view;
        view.size = static_cast<int>(net.input_shape().height);
        const auto plan = vnav::make_plan(*world->map, world->graph, world->matrix, od.origin, od.destination);
        result = vnav::run_vnplv_plan(env, plan, std::move(obstacles), view, driver);
      }
      std::printf("# %s after %d steps, %d episode(s): %s\n", result.success ? "arrived" : "failed", result.steps,
                  result.episodes, std::string(vnav::to_string(result.final_outcome)).c_str());
      return result.success ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
