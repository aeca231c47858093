#include "coca/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace coca::rewards {

GroupStats group_stats(std::span<const double> rewards, double eps_norm) {
  if (rewards.empty()) throw std::invalid_argument("group_stats: empty group");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  return {mean, std::sqrt(var), eps_norm};
}

std::vector<int> accuracy_reward(const std::vector<Trajectory>& trajectories,
                                 const tasks::TaskInstance& instance,
                                 const Vocabulary& vocab) {
  std::vector<int> out;
  out.reserve(trajectories.size());
  for (const Trajectory& traj : trajectories)
    out.push_back(tasks::ans_correct(instance, traj.answer_tokens(), vocab));
  return out;
}

double gesr(std::span<const int> acc_rewards) {
  if (acc_rewards.empty()) throw std::invalid_argument("gesr: empty group");
  double sum = 0.0;
  for (int r : acc_rewards) sum += static_cast<double>(r);
  return sum / static_cast<double>(acc_rewards.size());
}

double brier_confidence_reward(std::optional<double> s, double p_hat) {
  if (!s) return -1.0;
  double d = *s - p_hat;
  return -(d * d);
}

double rlcr_reward(std::optional<double> s, int correct) {
  double c = static_cast<double>(correct);
  double conf = s ? *s : 1.0 - c;
  double d = conf - c;
  return c - d * d;
}

double joint_reward(double acc_reward, double conf_reward) {
  return acc_reward + conf_reward;
}

std::vector<double> group_normalize(std::span<const double> rewards, double eps_norm) {
  if (rewards.size() < 2) throw std::invalid_argument("group_normalize: need G >= 2");
  GroupStats st = group_stats(rewards, eps_norm);
  std::vector<double> out(rewards.size());
  double denom = st.stddev + eps_norm;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - st.mean) / denom;
  return out;
}

MajorityVote majority_vote_confidence(const std::vector<std::vector<TokenId>>& answers) {
  if (answers.empty()) throw std::invalid_argument("majority_vote: empty answer list");
  std::size_t best = 0;
  int best_count = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    int count = 0;
    for (const auto& other : answers)
      if (other == answers[i]) ++count;
    if (count > best_count) {  // strict: ties keep the earliest occurrence
      best_count = count;
      best = i;
    }
  }
  return {answers[best],
          static_cast<double>(best_count) / static_cast<double>(answers.size())};
}

}  // namespace coca::rewards
