#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coca/policy.hpp"
#include "coca/rewards.hpp"
#include "coca/rng.hpp"
#include "coca/tasks.hpp"
#include "coca/vocab.hpp"

namespace coca::trainer {

enum class Mode { Coca, Joint, Rlvr, Rlcr, Sequential };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct TrainConfig {
  Mode mode = Mode::Coca;
  int group_size = 16;       // G
  int batch = 16;            // prompts per step, B
  long steps = 2000;         // total update steps (derived for sequential)
  long steps_phase1 = 1000;  // sequential only
  long steps_phase2 = 1000;  // sequential only
  double clip_eps = 0.2;
  double lr = 0.1;
  double beta = 0.0;         // KL coefficient; forced to 0 in coca mode
  double eps_norm = 1e-8;
  int inner_epochs = 1;      // gradient steps per rollout batch
  std::uint64_t seed = 1;
  int threads = 0;           // 0 = hardware concurrency
};

struct StepReport {
  long step = 0;
  Mode mode = Mode::Coca;
  double mean_acc_reward = 0.0;
  double mean_conf_reward = 0.0;
  double mean_response_length = 0.0;  // learnable tokens only
  double mean_conf_gap = 0.0;         // mean |s - gesr| within groups
  double refusal_rate = 0.0;
  double wall_ms = 0.0;  // kept out of metrics.jsonl so reruns stay byte-identical
};

struct Event {
  long step = -1;
  std::string type;
  std::string detail;
};

struct BatchRollout {
  std::vector<tasks::TaskInstance> instances;
  std::vector<RolloutGroup> groups;
};

// Bundle of the per-run immutables every step function needs.
struct RunContext {
  const Vocabulary& vocab;
  const tasks::TaskSpec& spec;
};

// Samples G responses from the snapshot and fills rewards, GESR, and both
// group-relative advantage channels.
RolloutGroup rollout_group(const policy::PolicySnapshot& snapshot, const Vocabulary& vocab,
                           const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                           int group_size, double eps_norm, Rng& rng);

// min(rho * adv, clip(rho, 1-eps, 1+eps) * adv).
double clipped_surrogate(double rho, double adv, double clip_eps);

// Sum over one span of the clipped surrogate at the given advantage.
double trajectory_clipped_objective(const policy::PolicyParams& params, const RunContext& ctx,
                                    const tasks::TaskInstance& instance,
                                    const Trajectory& traj, const SegmentSpan& span,
                                    double adv, double clip_eps);

// L^c_i + L^a_i for one trajectory (confidence span at adv_conf, answer span
// at adv_ans).
double trajectory_segmented_objective(const policy::PolicyParams& params,
                                      const RunContext& ctx,
                                      const tasks::TaskInstance& instance,
                                      const Trajectory& traj, double adv_conf,
                                      double adv_ans, double clip_eps);

// Accumulates d/dtheta of trajectory_clipped_objective into grad (standard
// PPO subgradient: the clipped branch contributes zero).
void accumulate_clipped_gradient(policy::Gradient& grad, const policy::PolicyParams& params,
                                 const RunContext& ctx, const tasks::TaskInstance& instance,
                                 const Trajectory& traj, const SegmentSpan& span, double adv,
                                 double clip_eps, double scale);

// Exact categorical KL(pi_params || pi_ref) summed over the heads the
// instance's contexts touch.
double kl_penalty(const policy::PolicyParams& params, const policy::PolicyParams& ref,
                  const RunContext& ctx, const tasks::TaskInstance& instance);

// Per-batch update steps. Each applies cfg.inner_epochs gradient steps to
// params in place and returns the sampling-time report for the batch.
// A non-finite gradient skips the update and records an event.
StepReport segmented_step(policy::PolicyParams& params, const RunContext& ctx,
                          const BatchRollout& batch, const TrainConfig& cfg, long step,
                          std::vector<Event>* events);
StepReport joint_step(policy::PolicyParams& params, const policy::PolicyParams& ref,
                      const RunContext& ctx, const BatchRollout& batch,
                      const TrainConfig& cfg, long step, std::vector<Event>* events);
StepReport rlvr_step(policy::PolicyParams& params, const policy::PolicyParams& ref,
                     const RunContext& ctx, const BatchRollout& batch,
                     const TrainConfig& cfg, long step, std::vector<Event>* events);
StepReport rlcr_step(policy::PolicyParams& params, const policy::PolicyParams& ref,
                     const RunContext& ctx, const BatchRollout& batch,
                     const TrainConfig& cfg, long step, std::vector<Event>* events);
// Sequential phase 2: whole-sequence confidence-only reward r_i = r^c_i.
StepReport conf_only_step(policy::PolicyParams& params, const policy::PolicyParams& ref,
                          const RunContext& ctx, const BatchRollout& batch,
                          const TrainConfig& cfg, long step, std::vector<Event>* events);

// Rolls out one batch against the snapshot, in parallel across batch slots.
// Slot b draws from substream (seed, step, b, Rollout), so results do not
// depend on the thread count.
BatchRollout rollout_batch(const policy::PolicySnapshot& snapshot, const RunContext& ctx,
                           const TrainConfig& cfg, long step);

// Mode of a given step index (resolves sequential phases).
Mode step_mode(const TrainConfig& cfg, long step);

long total_steps(const TrainConfig& cfg);

}  // namespace coca::trainer
