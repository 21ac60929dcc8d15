#include "vnav/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vnav {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < INT32_MIN || x > INT32_MAX) throw ConfigError("'" + key + "' is out of range");
  return static_cast<int>(x);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

struct Key {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename F, typename G>
Key key(F set, G get) {
  return {set, get};
}

#define VNAV_DOUBLE(field) \
  key([](ExperimentConfig& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); }, \
      [](const ExperimentConfig& c) { return format_double(c.field); })
#define VNAV_INT(field) \
  key([](ExperimentConfig& c, const std::string& k, const std::string& v) { c.field = to_int(k, v); }, \
      [](const ExperimentConfig& c) { return std::to_string(c.field); })
#define VNAV_U64(field) \
  key([](ExperimentConfig& c, const std::string& k, const std::string& v) { c.field = to_unsigned(k, v); }, \
      [](const ExperimentConfig& c) { return std::to_string(c.field); })
#define VNAV_STRING(field) \
  key([](ExperimentConfig& c, const std::string&, const std::string& v) { c.field = v; }, \
      [](const ExperimentConfig& c) { return c.field; })

const std::vector<std::pair<std::string, Key>>& keys() {
  static const std::vector<std::pair<std::string, Key>> table = {
      {"seed", VNAV_U64(seed)},
      {"agent", key([](ExperimentConfig& c, const std::string&, const std::string& v) { c.agent = parse_agent_kind(v); },
                    [](const ExperimentConfig& c) { return std::string(to_string(c.agent)); })},
      {"network.descriptor", VNAV_STRING(network_descriptor)},
      {"map.source", VNAV_STRING(map_source)},
      {"map.seed", VNAV_U64(map_seed)},
      {"map.water_fraction", VNAV_DOUBLE(map_water_fraction)},
      {"planner.downsample", VNAV_INT(downsample)},
      {"planner.cache_dir", VNAV_STRING(plan_cache_dir)},
      {"env.step_length", VNAV_DOUBLE(env.step_length)},
      {"env.arrival_radius", VNAV_DOUBLE(env.arrival_radius)},
      {"env.collision_radius", VNAV_DOUBLE(env.collision_radius)},
      {"env.vanish_margin", VNAV_DOUBLE(env.vanish_margin)},
      {"env.max_steps_factor", VNAV_DOUBLE(env.max_steps_factor)},
      {"reward.psi", VNAV_DOUBLE(env.reward.psi)},
      {"reward.phi", VNAV_DOUBLE(env.reward.phi)},
      {"reward.kappa", VNAV_DOUBLE(env.reward.kappa)},
      {"reward.delta_d_mode",
       key([](ExperimentConfig& c, const std::string& k, const std::string& v) {
             if (v == "progress") c.env.reward.delta_d_mode = DeltaDMode::Progress;
             else if (v == "displacement") c.env.reward.delta_d_mode = DeltaDMode::Displacement;
             else throw ConfigError("'" + k + "' expects progress or displacement");
           },
           [](const ExperimentConfig& c) {
             return std::string(c.env.reward.delta_d_mode == DeltaDMode::Progress ? "progress" : "displacement");
           })},
      {"reward.delta_od_mode",
       key([](ExperimentConfig& c, const std::string& k, const std::string& v) {
             if (v == "approach") c.env.reward.delta_od_mode = DeltaOdMode::Approach;
             else if (v == "absolute") c.env.reward.delta_od_mode = DeltaOdMode::Absolute;
             else throw ConfigError("'" + k + "' expects approach or absolute");
           },
           [](const ExperimentConfig& c) {
             return std::string(c.env.reward.delta_od_mode == DeltaOdMode::Approach ? "approach" : "absolute");
           })},
      {"obstacles.density", VNAV_DOUBLE(env.obstacles.density)},
      {"obstacles.speed", VNAV_DOUBLE(env.obstacles.speed)},
      {"obstacles.turn_probability", VNAV_DOUBLE(env.obstacles.turn_probability)},
      {"obstacles.clearance", VNAV_DOUBLE(env.obstacles.clearance)},
      {"localview.size", VNAV_INT(view.size)},
      {"localview.margin", VNAV_INT(view.margin)},
      {"dqn.gamma", VNAV_DOUBLE(trainer.gamma)},
      {"dqn.batch_size", VNAV_INT(trainer.batch_size)},
      {"dqn.learn_every", VNAV_INT(trainer.learn_every)},
      {"dqn.sync_every", VNAV_INT(trainer.sync_every)},
      {"dqn.learning_rate", VNAV_DOUBLE(trainer.learning_rate)},
      {"dqn.replay_capacity",
       key([](ExperimentConfig& c, const std::string& k, const std::string& v) { c.trainer.replay_capacity = to_unsigned(k, v); },
           [](const ExperimentConfig& c) { return std::to_string(c.trainer.replay_capacity); })},
      {"dqn.loss",
       key([](ExperimentConfig& c, const std::string& k, const std::string& v) {
             if (v == "huber") c.trainer.loss = LossKind::Huber;
             else if (v == "mse") c.trainer.loss = LossKind::Mse;
             else throw ConfigError("'" + k + "' expects huber or mse");
           },
           [](const ExperimentConfig& c) { return std::string(c.trainer.loss == LossKind::Huber ? "huber" : "mse"); })},
      {"dqn.huber_delta", VNAV_DOUBLE(trainer.huber_delta)},
      {"dqn.optimizer",
       key([](ExperimentConfig& c, const std::string& k, const std::string& v) {
             if (v == "adam") c.trainer.optimizer = nn::OptimizerKind::Adam;
             else if (v == "sgd") c.trainer.optimizer = nn::OptimizerKind::Sgd;
             else throw ConfigError("'" + k + "' expects adam or sgd");
           },
           [](const ExperimentConfig& c) {
             return std::string(c.trainer.optimizer == nn::OptimizerKind::Adam ? "adam" : "sgd");
           })},
      {"dqn.epsilon_start", VNAV_DOUBLE(trainer.epsilon.start)},
      {"dqn.epsilon_end", VNAV_DOUBLE(trainer.epsilon.end)},
      {"dqn.epsilon_anneal_steps",
       key([](ExperimentConfig& c, const std::string& k, const std::string& v) { c.trainer.epsilon.anneal_steps = to_integer(k, v); },
           [](const ExperimentConfig& c) { return std::to_string(c.trainer.epsilon.anneal_steps); })},
      {"eval.buckets",
       key([](ExperimentConfig& c, const std::string& k, const std::string& v) { c.buckets = to_list(k, v); },
           [](const ExperimentConfig& c) { return format_list(c.buckets); })},
      {"eval.bucket_tolerance", VNAV_DOUBLE(bucket_tolerance)},
      {"eval.tests", VNAV_INT(tests_per_eval)},
      {"train.buckets",
       key([](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train_buckets = to_list(k, v); },
           [](const ExperimentConfig& c) { return format_list(c.train_buckets); })},
      {"train.episodes_per_round", VNAV_INT(episodes_per_round)},
      {"train.rounds", VNAV_INT(rounds)},
      {"train.checkpoint_every", VNAV_INT(checkpoint_every)},
      {"compare.repeats", VNAV_INT(compare_repeats)},
      {"output.dir", VNAV_STRING(output_dir)},
  };
  return table;
}

#undef VNAV_DOUBLE
#undef VNAV_INT
#undef VNAV_U64
#undef VNAV_STRING

bool is_path_key(const std::string& k) {
  return k == "map.source" || k == "planner.cache_dir" || k == "output.dir";
}

}  // namespace

void set_config_value(ExperimentConfig& config, const std::string& k, const std::string& value) {
  for (const auto& [name, entry] : keys()) {
    if (name == k) {
      entry.set(config, k, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + k + "'");
}

void ExperimentConfig::validate() const {
  if (buckets.empty()) throw ConfigError("eval.buckets must not be empty");
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (!(buckets[i] > 0.0)) throw ConfigError("buckets must be positive");
    if (i > 0 && !(buckets[i] > buckets[i - 1])) throw ConfigError("buckets must be strictly increasing");
  }
  for (double b : train_buckets)
    if (!(b > 0.0)) throw ConfigError("train.buckets must be positive");
  if (tests_per_eval < 1) throw ConfigError("eval.tests must be at least 1");
  if (episodes_per_round < 1) throw ConfigError("train.episodes_per_round must be at least 1");
  if (rounds < 0) throw ConfigError("train.rounds must be non-negative");
  if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be at least 1");
  if (compare_repeats < 2) throw ConfigError("compare.repeats must be at least 2");
  if (downsample < 1) throw ConfigError("planner.downsample must be at least 1");
  if (!(bucket_tolerance >= 0.0 && bucket_tolerance < 1.0)) throw ConfigError("eval.bucket_tolerance must lie in [0, 1)");
  if (!(map_water_fraction > 0.0 && map_water_fraction <= 1.0)) throw ConfigError("map.water_fraction must lie in (0, 1]");
  if (!(env.step_length > 0.0 && env.arrival_radius > 0.0 && env.collision_radius >= 0.0 && env.vanish_margin >= 0.0 &&
        env.max_steps_factor > 0.0))
    throw ConfigError("environment distances must be positive");
  try {
    view.validate();
    trainer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  std::map<std::string, int> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string content = trim(line.substr(0, line.find('#')));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string k = trim(content.substr(0, eq));
    std::string v = trim(content.substr(eq + 1));
    if (seen.count(k)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + k + "'");
    seen[k] = line_no;
    if (is_path_key(k) && !v.empty() && v != "fixture" && v != "generate" && !base_dir.empty() &&
        std::filesystem::path(v).is_relative())
      v = (base_dir / v).lexically_normal().string();
    try {
      set_config_value(config, k, v);
    } catch (const std::exception& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path());
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [name, entry] : keys()) out += name + " = " + entry.get(config) + "\n";
  return out;
}

}  // namespace vnav
