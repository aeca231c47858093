#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coca {

using TokenId = std::int32_t;

struct ConfBin {
  TokenId token;
  double value;  // in [0, 1]
};

// Token alphabet for the fixed confidence-first grammar:
//   conf_open, <bin>, conf_close, <L answer tokens>, eos
// Delimiters are forced during sampling and belong to neither learnable span.
class Vocabulary {
 public:
  // Ids are assigned deterministically from (n_bins, answer_space, answer_len)
  // so a vocabulary is fully reconstructible from config fields.
  static Vocabulary make(int n_bins, int answer_space, int answer_len);

  TokenId conf_open() const { return conf_open_; }
  TokenId conf_close() const { return conf_close_; }
  TokenId eos() const { return eos_; }
  TokenId refuse() const { return refuse_; }
  const std::vector<ConfBin>& conf_bins() const { return conf_bins_; }
  const std::vector<TokenId>& answer_tokens() const { return answer_tokens_; }
  int answer_len() const { return answer_len_; }
  int answer_space() const { return static_cast<int>(answer_tokens_.size()); }
  int n_bins() const { return static_cast<int>(conf_bins_.size()); }

  // Grammar length: open + bin + close + L answers + eos.
  int total_len() const { return answer_len_ + 4; }

  bool is_conf_bin(TokenId t) const;
  int bin_index(TokenId t) const;       // -1 if not a bin token
  double bin_value(TokenId t) const;    // requires is_conf_bin(t)
  TokenId nearest_bin_token(double v) const;

  int answer_index(TokenId t) const;    // -1 if not an answer token
  bool is_answer_slot_token(TokenId t) const {  // answer token or refuse
    return t == refuse_ || answer_index(t) >= 0;
  }

 private:
  TokenId conf_open_ = 0;
  TokenId conf_close_ = 0;
  TokenId eos_ = 0;
  TokenId refuse_ = 0;
  std::vector<ConfBin> conf_bins_;
  std::vector<TokenId> answer_tokens_;
  int answer_len_ = 1;
};

struct SegmentSpan {
  int start = 0;  // inclusive
  int end = 0;    // exclusive
  int size() const { return end - start; }
  bool contains(int t) const { return t >= start && t < end; }
};

struct Trajectory {
  std::vector<TokenId> tokens;
  SegmentSpan conf_span;
  SegmentSpan ans_span;
  std::vector<double> logprobs_old;  // per token, under the sampling policy
  std::optional<double> parsed_confidence;

  std::span<const TokenId> answer_tokens() const {
    return std::span<const TokenId>(tokens).subspan(
        static_cast<std::size_t>(ans_span.start),
        static_cast<std::size_t>(ans_span.size()));
  }
};

struct RolloutGroup {
  std::int64_t instance_id = 0;
  std::vector<Trajectory> trajectories;
  std::vector<int> acc_rewards;       // r^a, each in {0,1}
  std::vector<double> conf_rewards;   // r^c, each <= 0
  double gesr = 0.0;                  // mean of acc_rewards
  std::vector<double> adv_conf;       // group-normalized r^c
  std::vector<double> adv_ans;        // group-normalized r^a
  int size() const { return static_cast<int>(trajectories.size()); }
};

struct FormatViolation {
  int position = 0;
  std::string expected;
};

// nullopt means the trajectory satisfies every invariant. Otherwise the
// first offending position and the expected token class are reported.
std::optional<FormatViolation> validate_trajectory(const Trajectory& traj,
                                                   const Vocabulary& vocab);

struct Segments {
  SegmentSpan conf_span;
  SegmentSpan ans_span;
  double parsed_confidence = 0.0;
};

// Precondition: validate_trajectory(traj, vocab) returned nullopt.
Segments extract_segments(const Trajectory& traj, const Vocabulary& vocab);

}  // namespace coca
