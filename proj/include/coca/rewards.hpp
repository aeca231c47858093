#pragma once

#include <optional>
#include <span>
#include <vector>

#include "coca/tasks.hpp"
#include "coca/vocab.hpp"

namespace coca::rewards {

struct GroupStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  double eps_norm = 0.0;
};

GroupStats group_stats(std::span<const double> rewards, double eps_norm);

// r^a per trajectory: answer correctness under the instance's verifier.
std::vector<int> accuracy_reward(const std::vector<Trajectory>& trajectories,
                                 const tasks::TaskInstance& instance,
                                 const Vocabulary& vocab);

// Group-wise empirical success rate: mean of the G accuracy rewards,
// including every member (no leave-one-out). Throws on an empty group.
double gesr(std::span<const int> acc_rewards);

// r^c = -(s - p_hat)^2. An unparseable confidence gets the worst case -1.
double brier_confidence_reward(std::optional<double> s, double p_hat);

// R = correct - (s - correct)^2; unparseable confidence uses s = 1 - correct.
double rlcr_reward(std::optional<double> s, int correct);

double joint_reward(double acc_reward, double conf_reward);

// (r_i - mean) / (stddev + eps_norm) with population stddev. Throws if G < 2.
std::vector<double> group_normalize(std::span<const double> rewards, double eps_norm);

struct MajorityVote {
  std::vector<TokenId> answer;
  double confidence = 0.0;  // share of the largest cluster, in (0, 1]
};

// Exact token-sequence clustering; ties break toward the earliest first
// occurrence. Throws on an empty list.
MajorityVote majority_vote_confidence(const std::vector<std::vector<TokenId>>& answers);

}  // namespace coca::rewards
