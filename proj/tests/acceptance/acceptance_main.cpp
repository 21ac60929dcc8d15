#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vnav/harness.hpp"
#include "vnav/stats.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

using namespace vnav;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Verdict()> run;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

fs::path g_work_dir;
fs::path g_cli;

// ---------------------------------------------------------------------------
// 1. Reward table

Verdict reward_table() {
  const RewardParams p;
  int mismatches = 0;
  mismatches += reward(Outcome::HitObstacle, 0.001, -0.001, p) != -5.0;
  mismatches += reward(Outcome::HitLand, 0.001, -0.001, p) != -5.0;
  mismatches += reward(Outcome::VanishTarget, 0.001, -0.001, p) != -5.0;
  mismatches += reward(Outcome::ArriveTarget, -0.001, 0.001, p) != 5.0;
  mismatches += reward(Outcome::NormalMovement, 0.0, 0.0, p) != -0.01;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double dd = rng.uniform(-0.0015, 0.0015), dod = rng.uniform(-0.003, 0.003);
    const double direct = 1000.0 * dd - 20.0 * dod - 0.01;
    mismatches += reward(Outcome::NormalMovement, dd, dod, p) != direct;
  }
  return {mismatches == 0, fmt("%d mismatches over 1005 cases, tolerance 0", mismatches)};
}

// ---------------------------------------------------------------------------
// 2. Floyd vs Dijkstra

Verdict planner_oracle() {
  constexpr double kRelTol = 1e-9;
  constexpr int kMaxNodes = 2000;
  Rng rng(2);
  int maps = 0, max_nodes = 0;
  double worst = 0.0;
  std::int64_t paths = 0;
  const auto rel = [](double a, double b) {
    if (a == b) return 0.0;
    return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
  };
  for (std::uint64_t seed = 0; maps < 50; ++seed) {
    MapGenParams mp;
    mp.ncols = 30 + static_cast<int>(rng.below(150));
    mp.nrows = 25 + static_cast<int>(rng.below(110));
    mp.water_fraction = rng.uniform(0.4, 0.85);
    mp.feature_cells = 4 + static_cast<int>(rng.below(16));
    const GridMap map = generate_map(seed, mp);
    int f = 1 + static_cast<int>(rng.below(4));
    PlanningGraph g = build_planning_graph(map, f);
    while (g.node_count() > kMaxNodes) g = build_planning_graph(map, ++f);
    const NextHopMatrix m = floyd_all_pairs(g);
    const int n = g.node_count();
    max_nodes = std::max(max_nodes, n);
    for (int s = 0; s < n; ++s) {
      const auto ref = oracle::dijkstra(g, s);
      for (int t = 0; t < n; ++t) {
        const double d = m.dist(s, t);
        if (std::isinf(ref[static_cast<std::size_t>(t)]) != std::isinf(d)) return {false, "reachability differs"};
        if (std::isinf(d)) continue;
        worst = std::max(worst, rel(d, ref[static_cast<std::size_t>(t)]));
        const auto path = m.node_path(s, t);
        double len = 0.0;
        for (std::size_t k = 1; k < path.size(); ++k)
          len += (g.centers[static_cast<std::size_t>(path[k])] - g.centers[static_cast<std::size_t>(path[k - 1])]).norm();
        worst = std::max(worst, rel(len, d));
        ++paths;
      }
    }
    ++maps;
  }
  return {worst <= kRelTol,
          fmt("%d maps, up to %d nodes, %lld paths, max relative error %.3g (limit %.0e)", maps, max_nodes,
              static_cast<long long>(paths), worst, kRelTol)};
}

// ---------------------------------------------------------------------------
// 3. RDP vs reference

Verdict rdp_oracle() {
  Rng rng(3);
  int mismatches = 0, far = 0;
  std::size_t dropped = 0;
  for (int i = 0; i < 200; ++i) {
    const int n = 2 + static_cast<int>(rng.below(499));
    std::vector<Point> line;
    Point p(rng.uniform(-1, 1), rng.uniform(-1, 1));
    double heading = rng.uniform(0, 6.283185307179586);
    for (int k = 0; k < n; ++k) {
      line.push_back(p);
      heading += rng.uniform(-0.6, 0.6);
      p += rng.uniform(0.0005, 0.003) * Point(std::cos(heading), std::sin(heading));
    }
    const double eps = std::pow(10.0, rng.uniform(-4.0, -2.0));
    const auto got = rdp_simplify(line, eps);
    if (got != oracle::rdp(line, eps)) ++mismatches;
    dropped += line.size() - got.size();
    for (const auto& q : line)
      if (oracle::polyline_distance(q, got) > eps * (1.0 + 1e-12)) ++far;
  }
  return {mismatches == 0 && far == 0,
          fmt("200 polylines, %d differ from reference, %d points beyond epsilon, %zu points dropped", mismatches, far,
              dropped)};
}

// ---------------------------------------------------------------------------
// 4. Gradient checks

Verdict gradient_checks() {
  constexpr double kLimit = 1e-4;
  Rng rng(4);
  double worst = 0.0;
  int configs = 0;
  std::set<std::string> kinds;
  for (; configs < 24; ++configs) {
    std::string d;
    const bool conv = configs % 3 != 0;
    if (conv) {
      const int c = 1 + static_cast<int>(rng.below(3)), h = 5 + static_cast<int>(rng.below(6));
      d = "in=" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(h);
      const int layers = 1 + static_cast<int>(rng.below(2));
      int size = h;
      for (int l = 0; l < layers; ++l) {
        const int k = 2 + static_cast<int>(rng.below(2)), s = 1 + static_cast<int>(rng.below(2));
        if (size < k) break;
        d += " conv(" + std::to_string(2 + rng.below(3)) + "," + std::to_string(k) + "," + std::to_string(s) + ")";
        size = (size - k) / s + 1;
        if (rng.bernoulli(0.7)) d += " relu";
      }
      d += " flatten";
      kinds.insert("conv");
      kinds.insert("flatten");
    } else {
      d = "in=" + std::to_string(2 + rng.below(6));
    }
    const int dense = 1 + static_cast<int>(rng.below(2));
    for (int l = 0; l < dense; ++l) d += " dense(" + std::to_string(2 + rng.below(6)) + ") relu";
    d += " dense(" + std::to_string(1 + rng.below(8)) + ") linear";
    kinds.insert("dense");
    kinds.insert("relu");
    kinds.insert("linear");

    nn::Network<double> net(d, rng.next());
    for (auto& param : net.parameters())
      if (param.name.ends_with("bias"))
        for (Eigen::Index i = 0; i < param.value->size(); ++i) param.value->data()[i] = rng.uniform(-0.5, 0.5);
    const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.below(4));
    Eigen::MatrixXd x(net.input_size(), batch), w(net.output_size(), batch);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1, 1);
    worst = std::max(worst, testing::gradient_check(net, x, w, 1e-5));
  }
  return {worst < kLimit && configs >= 20 && kinds.size() == 5,
          fmt("%d configurations over %zu layer types, max relative error %.3g (limit %.0e)", configs, kinds.size(),
              worst, kLimit)};
}

// ---------------------------------------------------------------------------
// 5. Tabular DQN vs value iteration

constexpr int kGrid = 5;
constexpr int kGoal = 3 * kGrid + 4;

struct CellObs {
  int cell = 0;
  Eigen::Index input_size() const { return kGrid * kGrid; }
  void write_to(Eigen::Ref<Eigen::VectorXd> out) const {
    out.setZero();
    out(cell) = 1.0;
  }
};

int move(int cell, int action) {
  const Eigen::Vector2d dir = direction(action_from_index(action));
  const int dc = dir.x() > 0.1 ? 1 : dir.x() < -0.1 ? -1 : 0;
  const int dr = dir.y() > 0.1 ? -1 : dir.y() < -0.1 ? 1 : 0;
  const int r = cell / kGrid + dr, c = cell % kGrid + dc;
  if (r < 0 || c < 0 || r >= kGrid || c >= kGrid) return cell;
  return r * kGrid + c;
}

Verdict dqn_sanity() {
  // Undiscounted value iteration with -1 per step gives minus the step count.
  std::vector<double> v(kGrid * kGrid, 0.0);
  for (bool changed = true; changed;) {
    changed = false;
    for (int s = 0; s < kGrid * kGrid; ++s) {
      if (s == kGoal) continue;
      double best = -1e9;
      for (int a = 0; a < kNumActions; ++a) best = std::max(best, -1.0 + v[static_cast<std::size_t>(move(s, a))]);
      if (best != v[static_cast<std::size_t>(s)]) {
        v[static_cast<std::size_t>(s)] = best;
        changed = true;
      }
    }
  }

  TrainerConfig cfg;
  cfg.gamma = 0.9;
  cfg.batch_size = 32;
  cfg.learn_every = 1;
  cfg.sync_every = 50;
  cfg.learning_rate = 0.01;
  cfg.replay_capacity = 20000;
  cfg.epsilon = {1.0, 0.1, 4000};
  cfg.seed = 5;
  Trainer<CellObs> trainer(nn::Network<double>("in=25 dense(8) linear", 5), cfg);
  Rng rng(5);
  std::int64_t step = 0;
  while (step < 8000) {
    int s = static_cast<int>(rng.below(kGrid * kGrid - 1));
    if (s >= kGoal) ++s;
    for (int t = 0; t < 30; ++t) {
      const int a = select_action(trainer.online(), encode(CellObs{s}), trainer.explore_probability(step), rng);
      const int next = move(s, a);
      trainer.push({CellObs{s}, a, -1.0, CellObs{next}, next == kGoal});
      trainer.train_tick(++step);
      s = next;
      if (s == kGoal) break;
    }
  }

  int wrong = 0;
  for (int start = 0; start < kGrid * kGrid; ++start) {
    int s = start, steps = 0;
    while (s != kGoal && steps < 2 * kGrid * kGrid) {
      s = move(s, argmax(trainer.online().predict(encode(CellObs{s})).col(0)));
      ++steps;
    }
    if (steps != static_cast<int>(-v[static_cast<std::size_t>(start)])) ++wrong;
  }
  return {wrong == 0, fmt("%d of 25 start cells differ from value-iteration step counts after %lld steps", wrong,
                          static_cast<long long>(step))};
}

// ---------------------------------------------------------------------------
// Shared fixture-map training settings for criteria 6-8.

ExperimentConfig fixture_config(AgentKind agent, std::uint64_t seed) {
  ExperimentConfig c;
  c.agent = agent;
  c.seed = seed;
  c.env.obstacles.density = 1000.0;
  c.trainer.gamma = 0.9;
  c.trainer.learning_rate = 1e-3;
  c.trainer.batch_size = 64;
  c.trainer.learn_every = 4;
  c.trainer.epsilon.anneal_steps = 5000;
  c.episodes_per_round = 100;
  c.tests_per_eval = 100;
  c.output_dir = (g_work_dir / "unused").string();
  return c;
}

std::shared_ptr<const World> fixture_world() {
  static const auto world = build_world(make_fixture_map(), 4);
  return world;
}

// ---------------------------------------------------------------------------
// 6. Short-distance learnability

Verdict short_distance() {
  constexpr double kTarget = 90.0;
  constexpr int kMaxRounds = 30;
  std::vector<TrainingSession> sessions;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig c = fixture_config(AgentKind::Vnplv, seed);
    c.buckets = {0.01};
    c.train_buckets = {0.01};
    sessions.emplace_back(c, fixture_world());
  }
  std::string trace;
  for (int round = 1; round <= kMaxRounds; ++round) {
    double sum = 0.0;
    for (auto& s : sessions) {
      s.train_round();
      sum += s.evaluate_bucket(0.01, 100).ratd;
    }
    const double mean = sum / static_cast<double>(sessions.size());
    trace += fmt("%s%.1f", trace.empty() ? "" : " ", mean);
    std::fprintf(stderr, "  criterion 6: round %d mean RATD %.1f\n", round, mean);
    if (mean >= kTarget)
      return {true, fmt("mean RATD over 3 seeds reached %.1f at round %d (target %.0f): %s", mean, round, kTarget,
                        trace.c_str())};
  }
  return {false, "mean RATD stayed below target over 30 rounds: " + trace};
}

// ---------------------------------------------------------------------------
// 7. VNPLV vs VVN ordering

Verdict ordering() {
  constexpr double kGap = 20.0;
  constexpr double kAlpha = 0.05;
  constexpr int kRounds = 8;
  const std::vector<double> all = ExperimentConfig{}.buckets;
  const double largest = feasible_buckets(*fixture_world(), all, 0.1, 0).back();
  std::vector<double> vvn, vnplv;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (AgentKind agent : {AgentKind::Vvn, AgentKind::Vnplv}) {
      ExperimentConfig c = fixture_config(agent, seed);
      c.buckets = all;
      TrainingSession s(c, fixture_world());
      for (int r = 0; r < kRounds; ++r) s.train_round();
      const double score = s.evaluate_bucket(largest, 100).ratd;
      (agent == AgentKind::Vvn ? vvn : vnplv).push_back(score);
      std::fprintf(stderr, "  criterion 7: seed %llu %s RATD %.0f at %.2f\n", static_cast<unsigned long long>(seed),
                   std::string(to_string(agent)).c_str(), score, largest);
    }
  }
  const double mv = std::accumulate(vvn.begin(), vvn.end(), 0.0) / 5.0;
  const double mp = std::accumulate(vnplv.begin(), vnplv.end(), 0.0) / 5.0;
  const auto w = compare_samples(vnplv, vvn);
  const double p = w ? w->p : 1.0;
  return {mp - mv >= kGap && p < kAlpha,
          fmt("bucket %.2f: VNPLV %.1f vs VVN %.1f, gap %.1f (target %.0f), Welch p %.3g (limit %.2f)", largest, mp, mv,
              mp - mv, kGap, p, kAlpha)};
}

// ---------------------------------------------------------------------------
// 8. End-to-end determinism through the CLI

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  if (g_cli.empty() || !fs::exists(g_cli)) return {false, "vnav executable not given (--vnav)"};
  std::vector<fs::path> dirs;
  for (const char* name : {"det_a", "det_b"}) {
    const fs::path dir = g_work_dir / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    ExperimentConfig c = fixture_config(AgentKind::Vnplv, 42);
    c.buckets = {0.01, 0.02};
    c.rounds = 2;
    c.episodes_per_round = 30;
    c.tests_per_eval = 20;
    c.output_dir = (dir / "run").string();
    std::ofstream(dir / "config.txt") << to_text(c);
    const std::string cmd = "\"" + g_cli.string() + "\" train --config \"" + (dir / "config.txt").string() + "\" 2>/dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "train command failed"};
    dirs.push_back(dir / "run");
  }
  const std::string ma = slurp(dirs[0] / "metrics.csv"), mb = slurp(dirs[1] / "metrics.csv");
  const auto ha = nn::parameter_hash(nn::load_checkpoint(dirs[0] / "final.vnn"));
  const auto hb = nn::parameter_hash(nn::load_checkpoint(dirs[1] / "final.vnn"));
  const bool same_ckpts = slurp(dirs[0] / "checkpoints" / "round_0002.vnn") == slurp(dirs[1] / "checkpoints" / "round_0002.vnn");
  return {!ma.empty() && ma == mb && ha == hb && same_ckpts,
          fmt("metrics %s (%zu bytes), final checkpoint hashes %016llx / %016llx", ma == mb ? "identical" : "differ",
              ma.size(), static_cast<unsigned long long>(ha), static_cast<unsigned long long>(hb))};
}

// ---------------------------------------------------------------------------
// 9. Schedule conformance

Verdict schedule() {
  ExperimentConfig c;
  c.agent = AgentKind::Vvn;
  c.episodes_per_round = 500;
  TrainingSession s(c, fixture_world());
  while (s.env_steps() < 100500) s.train_round();
  const std::int64_t n = s.env_steps();
  const TrainerCounters& k = s.counters();
  bool updates_ok = k.update_steps.size() == static_cast<std::size_t>(n / 100);
  for (std::size_t i = 0; updates_ok && i < k.update_steps.size(); ++i)
    updates_ok = k.update_steps[i] == 100 * static_cast<std::int64_t>(i + 1);
  bool syncs_ok = k.sync_steps.size() == static_cast<std::size_t>(n / 200);
  for (std::size_t i = 0; syncs_ok && i < k.sync_steps.size(); ++i)
    syncs_ok = k.sync_steps[i] == 200 * static_cast<std::int64_t>(i + 1);
  const bool buffer_ok = s.replay_size() == 100000 && c.trainer.replay_capacity == 100000;
  const bool batch_ok = k.last_batch_size == 3000 && c.trainer.batch_size == 3000;
  const double e0 = c.trainer.epsilon(0), e1 = c.trainer.epsilon(25000);
  const bool eps_ok = e0 == 0.9 && e1 == 0.1;
  return {updates_ok && syncs_ok && buffer_ok && batch_ok && eps_ok,
          fmt("%lld env steps: %zu updates (%s), %zu syncs (%s), buffer %zu, batch %lld, eps(0)=%g eps(25000)=%g",
              static_cast<long long>(n), k.update_steps.size(), updates_ok ? "every 100" : "off cadence",
              k.sync_steps.size(), syncs_ok ? "every 200" : "off cadence", s.replay_size(),
              static_cast<long long>(k.last_batch_size), e0, e1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vnav acceptance checks"};
  std::vector<int> only;
  std::string work = (fs::temp_directory_path() / "vnav_acceptance").string();
  std::string cli;
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--work-dir", work, "Scratch directory");
  app.add_option("--vnav", cli, "Path to the vnav executable (criterion 8)");
  CLI11_PARSE(app, argc, argv);
  g_work_dir = work;
  g_cli = cli;
  fs::create_directories(g_work_dir);

  const std::vector<Criterion> criteria = {
      {1, "reward table exactness", 1, reward_table},
      {2, "planner equals Dijkstra", 60, planner_oracle},
      {3, "RDP equals reference", 10, rdp_oracle},
      {4, "gradient checks", 30, gradient_checks},
      {5, "DQN matches value iteration", 120, dqn_sanity},
      {6, "short-distance learnability", 1800, short_distance},
      {7, "VNPLV beats VVN at the largest bucket", 7200, ordering},
      {8, "end-to-end determinism", 1800, determinism},
      {9, "schedule conformance", 60, schedule},
  };

  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = v.pass && in_time;
    std::printf("criterion %d %s: %s; %.1f s (limit %.0f s)  %s\n", c.id, c.name.c_str(), v.detail.c_str(), secs,
                c.budget_seconds, pass ? "PASS" : "FAIL");
    std::fflush(stdout);
    all = all && pass;
  }
  return all ? 0 : 1;
}
