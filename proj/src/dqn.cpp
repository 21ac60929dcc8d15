#include "vnav/dqn.hpp"

namespace vnav {

double EpsilonSchedule::operator()(std::int64_t env_step) const {
  if (env_step <= 0) return start;
  if (anneal_steps <= 0 || env_step >= anneal_steps) return end;
  const double t = static_cast<double>(env_step) / static_cast<double>(anneal_steps);
  return start + (end - start) * t;
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (values(i) > values(best)) best = static_cast<int>(i);
  return best;
}

int select_action(const nn::Network<double>& net, const Eigen::VectorXd& input, double explore_prob,
                  Rng& rng) {
  if (explore_prob > 0.0 && rng.bernoulli(explore_prob))
    return static_cast<int>(rng.below(static_cast<std::uint64_t>(net.output_size())));
  const Eigen::MatrixXd q = net.predict(input);
  return argmax(q.col(0));
}

void TrainerConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (batch_size < 1 || learn_every < 1 || sync_every < 1)
    throw std::invalid_argument("batch_size, learn_every and sync_every must be at least 1");
  if (replay_capacity < 1) throw std::invalid_argument("replay capacity must be positive");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (!(huber_delta > 0.0)) throw std::invalid_argument("huber delta must be positive");
  if (epsilon.start < 0.0 || epsilon.start > 1.0 || epsilon.end < 0.0 || epsilon.end > 1.0 || epsilon.end > epsilon.start)
    throw std::invalid_argument("epsilon schedule must be non-increasing within [0, 1]");
}

}  // namespace vnav
