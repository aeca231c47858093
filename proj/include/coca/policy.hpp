#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coca/rng.hpp"
#include "coca/tasks.hpp"
#include "coca/vocab.hpp"

namespace coca::policy {

// Tabular head layout.
//   confidence head: [n_classes][n_bins]
//   answer head:     [n_classes][n_ctx][answer_len][answer_space + 1]
// The last answer outcome is the refuse token. For the hinted-channel family
// the context at position p is "no hint" (0) or 1 + hinted answer index at p.
struct PolicyShape {
  int n_classes = 0;
  int n_bins = 0;
  int n_ctx = 1;
  int ans_len = 1;
  int n_ans_out = 0;

  static PolicyShape from(const tasks::TaskSpec& spec, const Vocabulary& vocab);

  std::size_t conf_size() const {
    return static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(n_bins);
  }
  std::size_t ans_size() const {
    return static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(n_ctx) *
           static_cast<std::size_t>(ans_len) * static_cast<std::size_t>(n_ans_out);
  }
  std::size_t conf_offset(int c) const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(n_bins);
  }
  std::size_t ans_offset(int c, int ctx, int pos) const {
    return ((static_cast<std::size_t>(c) * static_cast<std::size_t>(n_ctx) +
             static_cast<std::size_t>(ctx)) *
                static_cast<std::size_t>(ans_len) +
            static_cast<std::size_t>(pos)) *
           static_cast<std::size_t>(n_ans_out);
  }
  bool operator==(const PolicyShape&) const = default;
};

struct ParamTable {
  std::vector<double> conf;
  std::vector<double> ans;
};

struct PolicyParams {
  PolicyShape shape;
  ParamTable table;
  std::uint64_t version = 0;

  static PolicyParams zeros(const PolicyShape& shape);

  std::span<double> conf_head(int c) {
    return std::span<double>(table.conf).subspan(shape.conf_offset(c),
                                                 static_cast<std::size_t>(shape.n_bins));
  }
  std::span<const double> conf_head(int c) const {
    return std::span<const double>(table.conf)
        .subspan(shape.conf_offset(c), static_cast<std::size_t>(shape.n_bins));
  }
  std::span<double> ans_head(int c, int ctx, int pos) {
    return std::span<double>(table.ans).subspan(shape.ans_offset(c, ctx, pos),
                                                static_cast<std::size_t>(shape.n_ans_out));
  }
  std::span<const double> ans_head(int c, int ctx, int pos) const {
    return std::span<const double>(table.ans)
        .subspan(shape.ans_offset(c, ctx, pos), static_cast<std::size_t>(shape.n_ans_out));
  }
};

// Frozen copy of the sampling policy; rollout workers share it read-only.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(const PolicyParams& params) : params_(params) {}
  const PolicyParams& params() const { return params_; }

 private:
  const PolicyParams params_;
};

struct Gradient {
  PolicyShape shape;
  ParamTable table;

  static Gradient zeros(const PolicyShape& shape);
  void add(const Gradient& other);
  void scale(double factor);
  bool finite() const;
};

double logsumexp(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

// Answer-head context index for a given observation and answer position.
int hint_context(const tasks::TaskSpec& spec, const tasks::Observation& obs, int pos);

// Answer-head outcome index for a token in an answer slot (refuse maps to K).
int answer_outcome(const Vocabulary& vocab, TokenId tok);

// Samples one grammar-valid trajectory. Delimiters are forced with
// probability 1 (log-probability 0) and stay outside both learnable spans.
// Stored log-probabilities follow the temperature-1.0 convention regardless
// of the diagnostic sampling temperature.
Trajectory sample_response(const PolicyParams& params, const Vocabulary& vocab,
                           const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                           double temperature, Rng& rng);

// Log-probability of traj.tokens[t] under params; t must lie in a learnable
// span (forced delimiter positions are rejected with std::out_of_range).
double token_logprob(const PolicyParams& params, const Vocabulary& vocab,
                     const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                     const Trajectory& traj, int t);

// exp(token_logprob(params, t) - logprobs_old[t]).
double prob_ratio(const PolicyParams& params, const Vocabulary& vocab,
                  const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                  const Trajectory& traj, int t);

// Score-function gradient of token_logprob: onehot(token) - softmax(head),
// zero everywhere else.
Gradient logprob_grad(const PolicyParams& params, const Vocabulary& vocab,
                      const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                      const Trajectory& traj, int t);

// In-place variant used by the trainer's batched accumulation.
void accumulate_logprob_grad(Gradient& grad, const PolicyParams& params,
                             const Vocabulary& vocab, const tasks::TaskSpec& spec,
                             const tasks::TaskInstance& instance, const Trajectory& traj,
                             int t, double coeff);

// Gradient-ascent step; the returned params carry an incremented version.
// Throws std::invalid_argument on a non-finite gradient or lr <= 0.
PolicyParams apply_update(const PolicyParams& params, const Gradient& grad, double lr);

}  // namespace coca::policy
