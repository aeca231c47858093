#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "coca/metrics.hpp"
#include "coca/policy.hpp"
#include "coca/run_config.hpp"
#include "coca/trainer.hpp"

namespace coca::runio {

struct RunResult {
  std::filesystem::path run_dir;
  std::vector<trainer::StepReport> reports;
  std::vector<trainer::Event> events;
  policy::PolicyParams final_params;
};

// Runs the full training loop of the configured mode and writes the run
// directory: config.json, checkpoints/, metrics.jsonl, events.jsonl,
// eval.csv, reliability.csv.
RunResult train(const RunConfig& cfg);

struct EvalSummary {
  std::vector<metrics::EvalRecord> records;
  double accuracy_pct = 0.0;
  std::optional<double> auroc;
  double ece = 0.0;
  double brier = 0.0;
  double ttc_mean = 0.0;
  double sr = 0.0;
  long n = 0;
  long n_parsed = 0;
};

// Samples n_eval fresh instances (one response each, temperature 1.0) and
// computes the metric suite. Instance i draws from substream
// (seed, 0, i, Eval).
EvalSummary evaluate_policy(const policy::PolicyParams& params, const Vocabulary& vocab,
                            const tasks::TaskSpec& spec, int n_eval, std::uint64_t seed,
                            int ece_bins);

// Exact E|s - target| of the confidence head for one class.
double expected_conf_gap(const policy::PolicyParams& params, const Vocabulary& vocab,
                         const tasks::TaskSpec& spec, int class_id, double target);

// Probability the answer head assigns to one full answer-index sequence.
double answer_sequence_prob(const policy::PolicyParams& params, const tasks::TaskSpec& spec,
                            const tasks::Observation& obs, std::span<const int> answer_idx);

void write_eval_csv(const std::filesystem::path& file, const EvalSummary& summary);
void write_reliability_csv(const std::filesystem::path& file,
                           const std::vector<metrics::ReliabilityRow>& rows);

}  // namespace coca::runio
