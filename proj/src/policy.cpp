#include "coca/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coca::policy {

PolicyShape PolicyShape::from(const tasks::TaskSpec& spec, const Vocabulary& vocab) {
  PolicyShape s;
  s.n_classes = spec.n_classes();
  s.n_bins = vocab.n_bins();
  s.n_ctx = spec.family == tasks::TaskFamily::HintedChannel ? spec.answer_space + 1 : 1;
  s.ans_len = spec.answer_len;
  s.n_ans_out = spec.answer_space + 1;  // K answers + refuse
  return s;
}

PolicyParams PolicyParams::zeros(const PolicyShape& shape) {
  PolicyParams p;
  p.shape = shape;
  p.table.conf.assign(shape.conf_size(), 0.0);
  p.table.ans.assign(shape.ans_size(), 0.0);
  return p;
}

Gradient Gradient::zeros(const PolicyShape& shape) {
  Gradient g;
  g.shape = shape;
  g.table.conf.assign(shape.conf_size(), 0.0);
  g.table.ans.assign(shape.ans_size(), 0.0);
  return g;
}

void Gradient::add(const Gradient& other) {
  for (std::size_t i = 0; i < table.conf.size(); ++i) table.conf[i] += other.table.conf[i];
  for (std::size_t i = 0; i < table.ans.size(); ++i) table.ans[i] += other.table.ans[i];
}

void Gradient::scale(double factor) {
  for (double& v : table.conf) v *= factor;
  for (double& v : table.ans) v *= factor;
}

bool Gradient::finite() const {
  for (double v : table.conf)
    if (!std::isfinite(v)) return false;
  for (double v : table.ans)
    if (!std::isfinite(v)) return false;
  return true;
}

double logsumexp(std::span<const double> logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double z : logits) acc += std::exp(z - m);
  return m + std::log(acc);
}

std::vector<double> softmax(std::span<const double> logits) {
  double lse = logsumexp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) p[k] = std::exp(logits[k] - lse);
  return p;
}

int hint_context(const tasks::TaskSpec& spec, const tasks::Observation& obs, int pos) {
  if (spec.family != tasks::TaskFamily::HintedChannel) return 0;
  if (!obs.hint) return 0;
  return 1 + (*obs.hint)[static_cast<std::size_t>(pos)];
}

int answer_outcome(const Vocabulary& vocab, TokenId tok) {
  if (tok == vocab.refuse()) return vocab.answer_space();
  int idx = vocab.answer_index(tok);
  if (idx < 0) throw std::invalid_argument("answer_outcome: token not valid in answer slot");
  return idx;
}

namespace {

// Sample from softmax(logits / temperature); returns (outcome, logprob at
// temperature 1.0).
std::pair<int, double> sample_head(std::span<const double> logits, double temperature,
                                   Rng& rng) {
  std::vector<double> scaled(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) scaled[k] = logits[k] / temperature;
  std::vector<double> probs = softmax(scaled);
  int k = rng.categorical(probs);
  double lse = logsumexp(logits);
  return {k, logits[static_cast<std::size_t>(k)] - lse};
}

struct HeadRef {
  std::span<const double> logits;
  int outcome;  // index of traj token within the head
};

HeadRef head_at(const PolicyParams& params, const Vocabulary& vocab,
                const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                const Trajectory& traj, int t) {
  const int ci = spec.class_index(instance.class_id);
  TokenId tok = traj.tokens[static_cast<std::size_t>(t)];
  if (traj.conf_span.contains(t)) {
    int j = vocab.bin_index(tok);
    if (j < 0) throw std::invalid_argument("confidence slot holds a non-bin token");
    return {params.conf_head(ci), j};
  }
  if (traj.ans_span.contains(t)) {
    int pos = t - traj.ans_span.start;
    int ctx = hint_context(spec, instance.observation, pos);
    return {params.ans_head(ci, ctx, pos), answer_outcome(vocab, tok)};
  }
  throw std::out_of_range("token position " + std::to_string(t) +
                          " is a forced delimiter, not a learnable position");
}

}  // namespace

Trajectory sample_response(const PolicyParams& params, const Vocabulary& vocab,
                           const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                           double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  const int ci = spec.class_index(instance.class_id);
  const int L = vocab.answer_len();

  Trajectory traj;
  traj.tokens.reserve(static_cast<std::size_t>(vocab.total_len()));
  traj.logprobs_old.reserve(static_cast<std::size_t>(vocab.total_len()));

  traj.tokens.push_back(vocab.conf_open());
  traj.logprobs_old.push_back(0.0);

  auto [bin, bin_lp] = sample_head(params.conf_head(ci), temperature, rng);
  traj.tokens.push_back(vocab.conf_bins()[static_cast<std::size_t>(bin)].token);
  traj.logprobs_old.push_back(bin_lp);

  traj.tokens.push_back(vocab.conf_close());
  traj.logprobs_old.push_back(0.0);

  for (int pos = 0; pos < L; ++pos) {
    int ctx = hint_context(spec, instance.observation, pos);
    auto [k, lp] = sample_head(params.ans_head(ci, ctx, pos), temperature, rng);
    TokenId tok = k == vocab.answer_space() ? vocab.refuse()
                                            : vocab.answer_tokens()[static_cast<std::size_t>(k)];
    traj.tokens.push_back(tok);
    traj.logprobs_old.push_back(lp);
  }

  traj.tokens.push_back(vocab.eos());
  traj.logprobs_old.push_back(0.0);

  traj.conf_span = {1, 2};
  traj.ans_span = {3, 3 + L};
  traj.parsed_confidence = vocab.conf_bins()[static_cast<std::size_t>(bin)].value;
  return traj;
}

double token_logprob(const PolicyParams& params, const Vocabulary& vocab,
                     const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                     const Trajectory& traj, int t) {
  HeadRef h = head_at(params, vocab, spec, instance, traj, t);
  return h.logits[static_cast<std::size_t>(h.outcome)] - logsumexp(h.logits);
}

double prob_ratio(const PolicyParams& params, const Vocabulary& vocab,
                  const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                  const Trajectory& traj, int t) {
  double lp = token_logprob(params, vocab, spec, instance, traj, t);
  return std::exp(lp - traj.logprobs_old[static_cast<std::size_t>(t)]);
}

Gradient logprob_grad(const PolicyParams& params, const Vocabulary& vocab,
                      const tasks::TaskSpec& spec, const tasks::TaskInstance& instance,
                      const Trajectory& traj, int t) {
  Gradient g = Gradient::zeros(params.shape);
  accumulate_logprob_grad(g, params, vocab, spec, instance, traj, t, 1.0);
  return g;
}

void accumulate_logprob_grad(Gradient& grad, const PolicyParams& params,
                             const Vocabulary& vocab, const tasks::TaskSpec& spec,
                             const tasks::TaskInstance& instance, const Trajectory& traj,
                             int t, double coeff) {
  const int ci = spec.class_index(instance.class_id);
  TokenId tok = traj.tokens[static_cast<std::size_t>(t)];

  std::span<const double> logits;
  std::span<double> out;
  int k;
  if (traj.conf_span.contains(t)) {
    logits = params.conf_head(ci);
    k = vocab.bin_index(tok);
    out = std::span<double>(grad.table.conf)
              .subspan(params.shape.conf_offset(ci), logits.size());
  } else if (traj.ans_span.contains(t)) {
    int pos = t - traj.ans_span.start;
    int ctx = hint_context(spec, instance.observation, pos);
    logits = params.ans_head(ci, ctx, pos);
    k = answer_outcome(vocab, tok);
    out = std::span<double>(grad.table.ans)
              .subspan(params.shape.ans_offset(ci, ctx, pos), logits.size());
  } else {
    throw std::out_of_range("token position " + std::to_string(t) +
                            " is a forced delimiter, not a learnable position");
  }

  std::vector<double> p = softmax(logits);
  for (std::size_t j = 0; j < p.size(); ++j) out[j] -= coeff * p[j];
  out[static_cast<std::size_t>(k)] += coeff;
}

PolicyParams apply_update(const PolicyParams& params, const Gradient& grad, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("apply_update: lr must be > 0");
  if (!grad.finite()) throw std::invalid_argument("apply_update: non-finite gradient");
  if (!(grad.shape == params.shape))
    throw std::invalid_argument("apply_update: shape mismatch");
  PolicyParams next = params;
  for (std::size_t i = 0; i < next.table.conf.size(); ++i)
    next.table.conf[i] += lr * grad.table.conf[i];
  for (std::size_t i = 0; i < next.table.ans.size(); ++i)
    next.table.ans[i] += lr * grad.table.ans[i];
  next.version = params.version + 1;
  return next;
}

}  // namespace coca::policy
