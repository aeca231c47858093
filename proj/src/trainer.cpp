#include "coca/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace coca::trainer {

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Coca: return "coca";
    case Mode::Joint: return "joint";
    case Mode::Rlvr: return "rlvr";
    case Mode::Rlcr: return "rlcr";
    case Mode::Sequential: return "sequential";
  }
  return "?";
}

Mode mode_from_name(const std::string& name) {
  if (name == "coca") return Mode::Coca;
  if (name == "joint") return Mode::Joint;
  if (name == "rlvr") return Mode::Rlvr;
  if (name == "rlcr") return Mode::Rlcr;
  if (name == "sequential") return Mode::Sequential;
  throw std::invalid_argument("unknown mode: " + name);
}

RolloutGroup rollout_group(const policy::PolicySnapshot& snapshot, const Vocabulary& vocab,
                           const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                           int group_size, double eps_norm, Rng& rng) {
  if (group_size < 2) throw std::invalid_argument("rollout_group: need G >= 2");
  RolloutGroup group;
  group.instance_id = instance.instance_id;
  group.trajectories.reserve(static_cast<std::size_t>(group_size));
  for (int i = 0; i < group_size; ++i)
    group.trajectories.push_back(
        policy::sample_response(snapshot.params(), vocab, spec, instance, 1.0, rng));

  group.acc_rewards = rewards::accuracy_reward(group.trajectories, instance, vocab);
  group.gesr = rewards::gesr(group.acc_rewards);

  group.conf_rewards.reserve(group.trajectories.size());
  for (const Trajectory& traj : group.trajectories)
    group.conf_rewards.push_back(
        rewards::brier_confidence_reward(traj.parsed_confidence, group.gesr));

  std::vector<double> acc_real(group.acc_rewards.begin(), group.acc_rewards.end());
  group.adv_conf = rewards::group_normalize(group.conf_rewards, eps_norm);
  group.adv_ans = rewards::group_normalize(acc_real, eps_norm);
  return group;
}

double clipped_surrogate(double rho, double adv, double clip_eps) {
  double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(rho * adv, clipped * adv);
}

double trajectory_clipped_objective(const policy::PolicyParams& params, const RunContext& ctx,
                                    const tasks::TaskInstance& instance,
                                    const Trajectory& traj, const SegmentSpan& span,
                                    double adv, double clip_eps) {
  double total = 0.0;
  for (int t = span.start; t < span.end; ++t)
    total += clipped_surrogate(
        policy::prob_ratio(params, ctx.vocab, ctx.spec, instance, traj, t), adv, clip_eps);
  return total;
}

double trajectory_segmented_objective(const policy::PolicyParams& params,
                                      const RunContext& ctx,
                                      const tasks::TaskInstance& instance,
                                      const Trajectory& traj, double adv_conf,
                                      double adv_ans, double clip_eps) {
  return trajectory_clipped_objective(params, ctx, instance, traj, traj.conf_span, adv_conf,
                                      clip_eps) +
         trajectory_clipped_objective(params, ctx, instance, traj, traj.ans_span, adv_ans,
                                      clip_eps);
}

void accumulate_clipped_gradient(policy::Gradient& grad, const policy::PolicyParams& params,
                                 const RunContext& ctx, const tasks::TaskInstance& instance,
                                 const Trajectory& traj, const SegmentSpan& span, double adv,
                                 double clip_eps, double scale) {
  for (int t = span.start; t < span.end; ++t) {
    double rho = policy::prob_ratio(params, ctx.vocab, ctx.spec, instance, traj, t);
    double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
    // Gradient flows only through the unclipped branch of the min.
    if (rho * adv <= clipped * adv)
      policy::accumulate_logprob_grad(grad, params, ctx.vocab, ctx.spec, instance, traj, t,
                                      scale * adv * rho);
  }
}

double kl_penalty(const policy::PolicyParams& params, const policy::PolicyParams& ref,
                  const RunContext& ctx, const tasks::TaskInstance& instance) {
  auto head_kl = [](std::span<const double> zp, std::span<const double> zq) {
    double lse_p = policy::logsumexp(zp);
    double lse_q = policy::logsumexp(zq);
    double kl = 0.0;
    for (std::size_t k = 0; k < zp.size(); ++k) {
      double log_p = zp[k] - lse_p;
      double log_q = zq[k] - lse_q;
      kl += std::exp(log_p) * (log_p - log_q);
    }
    return std::max(kl, 0.0);  // guards the rounding tail when heads coincide
  };

  const int ci = ctx.spec.class_index(instance.class_id);
  double kl = head_kl(params.conf_head(ci), ref.conf_head(ci));
  for (int pos = 0; pos < ctx.spec.answer_len; ++pos) {
    int hctx = policy::hint_context(ctx.spec, instance.observation, pos);
    kl += head_kl(params.ans_head(ci, hctx, pos), ref.ans_head(ci, hctx, pos));
  }
  return kl;
}

namespace {

// d KL(p||q) / d z_j = p_j * ((log p_j - log q_j) - KL).
void accumulate_kl_gradient(policy::Gradient& grad, const policy::PolicyParams& params,
                            const policy::PolicyParams& ref, const tasks::TaskSpec& spec,
                            const tasks::TaskInstance& instance, double scale) {
  auto head_grad = [&](std::span<const double> zp, std::span<const double> zq,
                       std::span<double> out) {
    double lse_p = policy::logsumexp(zp);
    double lse_q = policy::logsumexp(zq);
    double kl = 0.0;
    std::vector<double> p(zp.size()), diff(zp.size());
    for (std::size_t k = 0; k < zp.size(); ++k) {
      double log_p = zp[k] - lse_p;
      diff[k] = log_p - (zq[k] - lse_q);
      p[k] = std::exp(log_p);
      kl += p[k] * diff[k];
    }
    for (std::size_t k = 0; k < zp.size(); ++k) out[k] += scale * p[k] * (diff[k] - kl);
  };

  const int ci = spec.class_index(instance.class_id);
  head_grad(params.conf_head(ci), ref.conf_head(ci),
            std::span<double>(grad.table.conf)
                .subspan(params.shape.conf_offset(ci),
                         static_cast<std::size_t>(params.shape.n_bins)));
  for (int pos = 0; pos < spec.answer_len; ++pos) {
    int hctx = policy::hint_context(spec, instance.observation, pos);
    head_grad(params.ans_head(ci, hctx, pos), ref.ans_head(ci, hctx, pos),
              std::span<double>(grad.table.ans)
                  .subspan(params.shape.ans_offset(ci, hctx, pos),
                           static_cast<std::size_t>(params.shape.n_ans_out)));
  }
}

StepReport batch_report(const BatchRollout& batch, Mode mode, long step,
                        const Vocabulary& vocab) {
  StepReport rep;
  rep.step = step;
  rep.mode = mode;
  long n = 0;
  long refusals = 0;
  for (const RolloutGroup& group : batch.groups) {
    for (int i = 0; i < group.size(); ++i) {
      const Trajectory& traj = group.trajectories[static_cast<std::size_t>(i)];
      rep.mean_acc_reward += group.acc_rewards[static_cast<std::size_t>(i)];
      rep.mean_conf_reward += group.conf_rewards[static_cast<std::size_t>(i)];
      rep.mean_response_length += traj.conf_span.size() + traj.ans_span.size();
      rep.mean_conf_gap += std::fabs(*traj.parsed_confidence - group.gesr);
      bool refused = false;
      for (TokenId tok : traj.answer_tokens()) refused |= (tok == vocab.refuse());
      refusals += refused ? 1 : 0;
      ++n;
    }
  }
  double dn = static_cast<double>(n);
  rep.mean_acc_reward /= dn;
  rep.mean_conf_reward /= dn;
  rep.mean_response_length /= dn;
  rep.mean_conf_gap /= dn;
  rep.refusal_rate = static_cast<double>(refusals) / dn;
  return rep;
}

enum class RewardKind { Accuracy, Rlcr, Joint, ConfOnly };

std::vector<double> whole_sequence_rewards(const RolloutGroup& group, RewardKind kind) {
  std::vector<double> r(static_cast<std::size_t>(group.size()));
  for (int i = 0; i < group.size(); ++i) {
    auto idx = static_cast<std::size_t>(i);
    double acc = group.acc_rewards[idx];
    switch (kind) {
      case RewardKind::Accuracy:
        r[idx] = acc;
        break;
      case RewardKind::Rlcr:
        r[idx] = rewards::rlcr_reward(group.trajectories[idx].parsed_confidence,
                                      group.acc_rewards[idx]);
        break;
      case RewardKind::Joint:
        r[idx] = rewards::joint_reward(acc, group.conf_rewards[idx]);
        break;
      case RewardKind::ConfOnly:
        r[idx] = group.conf_rewards[idx];
        break;
    }
  }
  return r;
}

policy::Gradient segmented_gradient(const policy::PolicyParams& params, const RunContext& ctx,
                                    const BatchRollout& batch, const TrainConfig& cfg) {
  policy::Gradient grad = policy::Gradient::zeros(params.shape);
  // Per-prompt objective carries the 1/G factor; the batch accumulates by sum.
  double scale = 1.0 / static_cast<double>(cfg.group_size);
  for (std::size_t b = 0; b < batch.groups.size(); ++b) {
    const RolloutGroup& group = batch.groups[b];
    const tasks::TaskInstance& inst = batch.instances[b];
    for (int i = 0; i < group.size(); ++i) {
      const Trajectory& traj = group.trajectories[static_cast<std::size_t>(i)];
      auto idx = static_cast<std::size_t>(i);
      accumulate_clipped_gradient(grad, params, ctx, inst, traj, traj.conf_span,
                                  group.adv_conf[idx], cfg.clip_eps, scale);
      accumulate_clipped_gradient(grad, params, ctx, inst, traj, traj.ans_span,
                                  group.adv_ans[idx], cfg.clip_eps, scale);
    }
  }
  return grad;
}

policy::Gradient whole_sequence_gradient(const policy::PolicyParams& params,
                                         const policy::PolicyParams& ref,
                                         const RunContext& ctx, const BatchRollout& batch,
                                         const TrainConfig& cfg, RewardKind kind) {
  policy::Gradient grad = policy::Gradient::zeros(params.shape);
  // Per-prompt objective carries the 1/G factor; the batch accumulates by sum.
  double scale = 1.0 / static_cast<double>(cfg.group_size);
  for (std::size_t b = 0; b < batch.groups.size(); ++b) {
    const RolloutGroup& group = batch.groups[b];
    const tasks::TaskInstance& inst = batch.instances[b];
    std::vector<double> adv =
        rewards::group_normalize(whole_sequence_rewards(group, kind), cfg.eps_norm);
    for (int i = 0; i < group.size(); ++i) {
      const Trajectory& traj = group.trajectories[static_cast<std::size_t>(i)];
      auto idx = static_cast<std::size_t>(i);
      accumulate_clipped_gradient(grad, params, ctx, inst, traj, traj.conf_span, adv[idx],
                                  cfg.clip_eps, scale);
      accumulate_clipped_gradient(grad, params, ctx, inst, traj, traj.ans_span, adv[idx],
                                  cfg.clip_eps, scale);
    }
  }
  if (cfg.beta > 0.0) {
    double kl_scale = -cfg.beta;  // one KL term per prompt, same aggregation
    for (const tasks::TaskInstance& inst : batch.instances)
      accumulate_kl_gradient(grad, params, ref, ctx.spec, inst, kl_scale);
  }
  return grad;
}

template <typename GradFn>
StepReport apply_epochs(policy::PolicyParams& params, const RunContext& ctx,
                        const BatchRollout& batch, const TrainConfig& cfg, Mode mode,
                        long step, std::vector<Event>* events, GradFn&& grad_fn) {
  for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
    policy::Gradient grad = grad_fn(params);
    if (!grad.finite()) {
      if (events) events->push_back({step, "skipped_step", "non_finite_gradient"});
      break;
    }
    params = policy::apply_update(params, grad, cfg.lr);
  }
  return batch_report(batch, mode, step, ctx.vocab);
}

}  // namespace

StepReport segmented_step(policy::PolicyParams& params, const RunContext& ctx,
                          const BatchRollout& batch, const TrainConfig& cfg, long step,
                          std::vector<Event>* events) {
  // Segmented objective carries no KL term.
  return apply_epochs(params, ctx, batch, cfg, Mode::Coca, step, events,
                      [&](const policy::PolicyParams& p) {
                        return segmented_gradient(p, ctx, batch, cfg);
                      });
}

StepReport joint_step(policy::PolicyParams& params, const policy::PolicyParams& ref,
                      const RunContext& ctx, const BatchRollout& batch,
                      const TrainConfig& cfg, long step, std::vector<Event>* events) {
  return apply_epochs(params, ctx, batch, cfg, Mode::Joint, step, events,
                      [&](const policy::PolicyParams& p) {
                        return whole_sequence_gradient(p, ref, ctx, batch, cfg,
                                                       RewardKind::Joint);
                      });
}

StepReport rlvr_step(policy::PolicyParams& params, const policy::PolicyParams& ref,
                     const RunContext& ctx, const BatchRollout& batch,
                     const TrainConfig& cfg, long step, std::vector<Event>* events) {
  return apply_epochs(params, ctx, batch, cfg, Mode::Rlvr, step, events,
                      [&](const policy::PolicyParams& p) {
                        return whole_sequence_gradient(p, ref, ctx, batch, cfg,
                                                       RewardKind::Accuracy);
                      });
}

StepReport rlcr_step(policy::PolicyParams& params, const policy::PolicyParams& ref,
                     const RunContext& ctx, const BatchRollout& batch,
                     const TrainConfig& cfg, long step, std::vector<Event>* events) {
  return apply_epochs(params, ctx, batch, cfg, Mode::Rlcr, step, events,
                      [&](const policy::PolicyParams& p) {
                        return whole_sequence_gradient(p, ref, ctx, batch, cfg,
                                                       RewardKind::Rlcr);
                      });
}

StepReport conf_only_step(policy::PolicyParams& params, const policy::PolicyParams& ref,
                          const RunContext& ctx, const BatchRollout& batch,
                          const TrainConfig& cfg, long step, std::vector<Event>* events) {
  return apply_epochs(params, ctx, batch, cfg, Mode::Sequential, step, events,
                      [&](const policy::PolicyParams& p) {
                        return whole_sequence_gradient(p, ref, ctx, batch, cfg,
                                                       RewardKind::ConfOnly);
                      });
}

BatchRollout rollout_batch(const policy::PolicySnapshot& snapshot, const RunContext& ctx,
                           const TrainConfig& cfg, long step) {
  BatchRollout batch;
  batch.instances.resize(static_cast<std::size_t>(cfg.batch));
  batch.groups.resize(static_cast<std::size_t>(cfg.batch));

  auto run_slot = [&](int b) {
    Rng rng(derive_stream(cfg.seed, static_cast<std::uint64_t>(step),
                          static_cast<std::uint64_t>(b), StreamPurpose::Rollout));
    auto ci = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ctx.spec.n_classes())));
    std::int64_t instance_id = step * static_cast<long>(cfg.batch) + b;
    batch.instances[static_cast<std::size_t>(b)] =
        tasks::sample_instance(ctx.spec, ctx.vocab,
                               ctx.spec.classes[static_cast<std::size_t>(ci)].class_id,
                               instance_id, rng);
    batch.groups[static_cast<std::size_t>(b)] =
        rollout_group(snapshot, ctx.vocab, ctx.spec,
                      batch.instances[static_cast<std::size_t>(b)], cfg.group_size,
                      cfg.eps_norm, rng);
  };

  int n_threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, cfg.batch);
  if (n_threads == 1) {
    for (int b = 0; b < cfg.batch; ++b) run_slot(b);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w)
      pool.emplace_back([&, w] {
        for (int b = w; b < cfg.batch; b += n_threads) run_slot(b);
      });
    for (std::thread& th : pool) th.join();
  }
  return batch;
}

Mode step_mode(const TrainConfig& cfg, long step) {
  if (cfg.mode != Mode::Sequential) return cfg.mode;
  return step < cfg.steps_phase1 ? Mode::Rlvr : Mode::Sequential;
}

long total_steps(const TrainConfig& cfg) {
  return cfg.mode == Mode::Sequential ? cfg.steps_phase1 + cfg.steps_phase2 : cfg.steps;
}

}  // namespace coca::trainer
