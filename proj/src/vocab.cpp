#include "coca/vocab.hpp"

#include <cmath>
#include <stdexcept>

namespace coca {

Vocabulary Vocabulary::make(int n_bins, int answer_space, int answer_len) {
  if (n_bins < 2) throw std::invalid_argument("vocabulary: need >= 2 confidence bins");
  if (answer_space < 1) throw std::invalid_argument("vocabulary: answer space must be >= 1");
  if (answer_len < 1) throw std::invalid_argument("vocabulary: answer length must be >= 1");

  Vocabulary v;
  TokenId next = 0;
  v.conf_open_ = next++;
  v.conf_close_ = next++;
  v.eos_ = next++;
  v.refuse_ = next++;
  v.conf_bins_.reserve(static_cast<std::size_t>(n_bins));
  for (int j = 0; j < n_bins; ++j) {
    double value = static_cast<double>(j) / static_cast<double>(n_bins - 1);
    v.conf_bins_.push_back({next++, value});
  }
  v.answer_tokens_.reserve(static_cast<std::size_t>(answer_space));
  for (int k = 0; k < answer_space; ++k) v.answer_tokens_.push_back(next++);
  v.answer_len_ = answer_len;
  return v;
}

bool Vocabulary::is_conf_bin(TokenId t) const { return bin_index(t) >= 0; }

int Vocabulary::bin_index(TokenId t) const {
  TokenId first = conf_bins_.front().token;
  TokenId last = conf_bins_.back().token;
  if (t < first || t > last) return -1;
  return static_cast<int>(t - first);
}

double Vocabulary::bin_value(TokenId t) const {
  int j = bin_index(t);
  if (j < 0) throw std::invalid_argument("bin_value: not a confidence bin token");
  return conf_bins_[static_cast<std::size_t>(j)].value;
}

TokenId Vocabulary::nearest_bin_token(double v) const {
  double best = 2.0;
  TokenId tok = conf_bins_.front().token;
  for (const ConfBin& b : conf_bins_) {
    double d = std::fabs(b.value - v);
    if (d < best) {
      best = d;
      tok = b.token;
    }
  }
  return tok;
}

int Vocabulary::answer_index(TokenId t) const {
  TokenId first = answer_tokens_.front();
  TokenId last = answer_tokens_.back();
  if (t < first || t > last) return -1;
  return static_cast<int>(t - first);
}

namespace {

std::optional<FormatViolation> violation(int pos, const char* expected) {
  return FormatViolation{pos, expected};
}

}  // namespace

std::optional<FormatViolation> validate_trajectory(const Trajectory& traj,
                                                   const Vocabulary& vocab) {
  const auto& toks = traj.tokens;
  const int L = vocab.answer_len();
  const int want = vocab.total_len();
  const int n = static_cast<int>(toks.size());

  // Token grammar, scanned left to right so the first offending position wins.
  for (int t = 0; t < want; ++t) {
    if (t >= n) {
      if (t == 0) return violation(0, "conf_open");
      if (t == 1) return violation(1, "confidence bin");
      if (t == 2) return violation(2, "conf_close");
      if (t < 3 + L) return violation(t, "answer token");
      return violation(t, "eos");
    }
    TokenId tok = toks[static_cast<std::size_t>(t)];
    if (t == 0 && tok != vocab.conf_open()) return violation(0, "conf_open");
    if (t == 1 && !vocab.is_conf_bin(tok)) return violation(1, "confidence bin");
    if (t == 2 && tok != vocab.conf_close()) return violation(2, "conf_close");
    if (t >= 3 && t < 3 + L && !vocab.is_answer_slot_token(tok))
      return violation(t, "answer token");
    if (t == 3 + L && tok != vocab.eos()) return violation(t, "eos");
  }
  if (n > want) return violation(want, "end of sequence");

  // Span metadata. The confidence span covers exactly the bin position and
  // precedes the answer span; delimiters belong to neither.
  if (traj.conf_span.start != 1 || traj.conf_span.end != 2)
    return violation(1, "conf_span covering the bin token");
  if (traj.ans_span.start != 3 || traj.ans_span.end != 3 + L)
    return violation(3, "ans_span covering the answer tokens");
  if (traj.logprobs_old.size() != toks.size())
    return violation(0, "one stored log-probability per token");
  double bin = vocab.bin_value(toks[1]);
  if (!traj.parsed_confidence || *traj.parsed_confidence != bin)
    return violation(1, "parsed_confidence equal to the bin value");
  return std::nullopt;
}

Segments extract_segments(const Trajectory& traj, const Vocabulary& vocab) {
  Segments out;
  out.conf_span = {1, 2};
  out.ans_span = {3, 3 + vocab.answer_len()};
  out.parsed_confidence = vocab.bin_value(traj.tokens[1]);
  return out;
}

}  // namespace coca
