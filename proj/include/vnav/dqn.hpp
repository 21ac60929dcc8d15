#pragma once

#include "vnav/rng.hpp"
#include "vnav/tinynn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace vnav {

/// Anything that can be written into one network input column.
template <class T>
concept Observation = requires(const T& o, Eigen::Ref<Eigen::VectorXd> out) {
  { o.input_size() } -> std::convertible_to<Eigen::Index>;
  o.write_to(out);
};

template <Observation Obs>
struct Transition {
  Obs state;
  int action = 0;
  double reward = 0.0;
  Obs next_state;
  bool terminal = false;
};

/// Fixed-capacity FIFO of transitions with uniform sampling (with replacement).
template <Observation Obs>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }

  void push(Transition<Obs> t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// i-th oldest stored transition.
  const Transition<Obs>& at(std::size_t i) const {
    if (i >= storage_.size()) throw std::out_of_range("replay index out of range");
    return storage_[(head_ + i) % storage_.size()];
  }

  /// Throws std::logic_error on an empty buffer.
  std::vector<const Transition<Obs>*> sample(std::size_t n, Rng& rng) const {
    if (storage_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
    std::vector<const Transition<Obs>*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&storage_[rng.below(storage_.size())]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition<Obs>> storage_;
  std::size_t head_ = 0;
};

/// Linear explore-probability schedule, constant after `anneal_steps`.
struct EpsilonSchedule {
  double start = 0.9;
  double end = 0.1;
  std::int64_t anneal_steps = 25000;

  double operator()(std::int64_t env_step) const;
};

inline double epsilon(const EpsilonSchedule& schedule, std::int64_t env_step) { return schedule(env_step); }

/// Index of the largest value, lowest index on ties.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& values);

/// With probability explore_prob a uniform random action, else the greedy one.
/// No random draw happens when explore_prob <= 0.
int select_action(const nn::Network<double>& net, const Eigen::VectorXd& input, double explore_prob,
                  Rng& rng);

template <Observation Obs>
Eigen::MatrixXd encode_batch(std::span<const Obs* const> observations) {
  if (observations.empty()) return {};
  Eigen::MatrixXd batch(observations.front()->input_size(), static_cast<Eigen::Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i)
    observations[i]->write_to(batch.col(static_cast<Eigen::Index>(i)));
  return batch;
}

template <Observation Obs>
Eigen::VectorXd encode(const Obs& obs) {
  Eigen::VectorXd v(obs.input_size());
  obs.write_to(v);
  return v;
}

inline constexpr Eigen::Index kBatchChunk = 512;

/// r for terminal transitions, r + gamma * max_a Q_target(s', a) otherwise.
template <Observation Obs>
Eigen::VectorXd td_targets(std::span<const Transition<Obs>* const> batch, const nn::Network<double>& target_net,
                           double gamma) {
  if (batch.empty()) throw std::invalid_argument("td_targets needs a non-empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::VectorXd targets(n);
  std::vector<Eigen::Index> open;
  for (Eigen::Index i = 0; i < n; ++i) {
    targets(i) = batch[static_cast<std::size_t>(i)]->reward;
    if (!batch[static_cast<std::size_t>(i)]->terminal && gamma != 0.0) open.push_back(i);
  }
  for (std::size_t begin = 0; begin < open.size(); begin += kBatchChunk) {
    const std::size_t end = std::min(open.size(), begin + static_cast<std::size_t>(kBatchChunk));
    std::vector<const Obs*> next;
    for (std::size_t j = begin; j < end; ++j) next.push_back(&batch[static_cast<std::size_t>(open[j])]->next_state);
    const Eigen::MatrixXd q = target_net.predict(encode_batch<Obs>(next));
    for (std::size_t j = begin; j < end; ++j)
      targets(open[j]) += gamma * q.col(static_cast<Eigen::Index>(j - begin)).maxCoeff();
  }
  return targets;
}

enum class LossKind { Huber, Mse };

struct TrainerConfig {
  double gamma = 0.99;
  int batch_size = 3000;
  int learn_every = 100;
  int sync_every = 200;
  double learning_rate = 5e-4;
  std::uint64_t seed = 0;
  std::size_t replay_capacity = 100000;
  LossKind loss = LossKind::Huber;
  double huber_delta = 1.0;
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
  EpsilonSchedule epsilon;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Instrumentation for the learn/sync cadence.
struct TrainerCounters {
  std::int64_t updates = 0;
  std::int64_t syncs = 0;
  std::int64_t last_batch_size = 0;
  std::vector<std::int64_t> update_steps;
  std::vector<std::int64_t> sync_steps;
};

/// Online/target network pair plus replay buffer. One owner drives it from a
/// single thread.
template <Observation Obs>
class Trainer {
 public:
  Trainer(nn::Network<double> online, TrainerConfig config)
      : online_(std::move(online)),
        target_(online_),
        optimizer_({config.optimizer, config.learning_rate}),
        buffer_(config.replay_capacity),
        config_(config),
        rng_(derive_seed(config.seed, {0x5a3b1e})) {
    config_.validate();
  }

  const nn::Network<double>& online() const { return online_; }
  nn::Network<double>& online() { return online_; }
  const nn::Network<double>& target() const { return target_; }
  const ReplayBuffer<Obs>& buffer() const { return buffer_; }
  const TrainerConfig& config() const { return config_; }
  const TrainerCounters& counters() const { return counters_; }

  double explore_probability(std::int64_t env_step) const { return config_.epsilon(env_step); }

  void push(Transition<Obs> t) {
    if (t.action < 0 || t.action >= online_.output_size()) throw std::invalid_argument("action index out of range");
    buffer_.push(std::move(t));
  }

  /// Learns when env_step is a multiple of learn_every (non-empty buffer) and
  /// syncs the target network on multiples of sync_every. Returns the loss of
  /// the update, if one happened.
  std::optional<double> train_tick(std::int64_t env_step) {
    std::optional<double> loss;
    if (env_step <= 0) return loss;
    if (env_step % config_.learn_every == 0 && !buffer_.empty()) {
      loss = learn();
      counters_.update_steps.push_back(env_step);
    }
    if (env_step % config_.sync_every == 0) {
      sync_target();
      counters_.sync_steps.push_back(env_step);
    }
    return loss;
  }

  /// One gradient update on a sampled batch.
  double learn() {
    const auto batch = buffer_.sample(static_cast<std::size_t>(config_.batch_size), rng_);
    const std::span<const Transition<Obs>* const> view(batch);
    const Eigen::VectorXd targets = td_targets<Obs>(view, target_, config_.gamma);
    const auto n = static_cast<Eigen::Index>(batch.size());

    online_.zero_grad();
    double loss = 0.0;
    for (Eigen::Index begin = 0; begin < n; begin += kBatchChunk) {
      const Eigen::Index count = std::min(kBatchChunk, n - begin);
      std::vector<const Obs*> states;
      for (Eigen::Index i = begin; i < begin + count; ++i) states.push_back(&batch[static_cast<std::size_t>(i)]->state);
      const Eigen::MatrixXd q = online_.forward(encode_batch<Obs>(states));
      Eigen::VectorXd chosen(count);
      for (Eigen::Index i = 0; i < count; ++i) chosen(i) = q(batch[static_cast<std::size_t>(begin + i)]->action, i);

      const auto part = config_.loss == LossKind::Huber
                            ? nn::huber_loss(chosen, targets.segment(begin, count), config_.huber_delta)
                            : nn::mse_loss(chosen, targets.segment(begin, count));
      const double share = static_cast<double>(count) / static_cast<double>(n);
      loss += part.value * share;
      Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(q.rows(), count);
      for (Eigen::Index i = 0; i < count; ++i)
        grad(batch[static_cast<std::size_t>(begin + i)]->action, i) = part.gradient(i) * share;
      online_.backward(grad);
    }
    optimizer_.step(online_);
    ++counters_.updates;
    counters_.last_batch_size = n;
    return loss;
  }

  void sync_target() {
    nn::copy_parameters(online_, target_);
    ++counters_.syncs;
  }

 private:
  nn::Network<double> online_;
  nn::Network<double> target_;
  nn::Optimizer<double> optimizer_;
  ReplayBuffer<Obs> buffer_;
  TrainerConfig config_;
  Rng rng_;
  TrainerCounters counters_;
};

}  // namespace vnav
