#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coca/vocab.hpp"

namespace coca::metrics {

struct EvalRecord {
  std::optional<double> score;  // absent on parse failure
  int label = 0;                // answer correctness in {0,1}
  long ttc = 0;                 // tokens consumed up to the confidence close
};

// Extracts the first <confidence>...</confidence> span and parses a plain
// decimal in [0, 1]. Percentages, words, and out-of-range values fail.
std::optional<double> parse_confidence(std::string_view text);

// Percentage of correct labels over all records (parse failures included).
double accuracy(std::span<const EvalRecord> records);

// Bin index for a score under the equal-width rule: [lo, hi) except the last
// bin, which is closed at 1.0. Total over s in [0, 1].
int ece_bin(double score, int n_bins);

// Expected calibration error over parsed records. Throws when none parsed.
double ece(std::span<const EvalRecord> records, int n_bins);

// Mean squared (score - label)^2 over parsed records.
double brier_score(std::span<const EvalRecord> records);

// Mann-Whitney AUROC with 0.5 credit for score ties; nullopt when either
// class is empty among parsed records (undefined, not an error).
std::optional<double> auroc(std::span<const EvalRecord> records);

// Tokens generated up to and including the confidence close delimiter.
long ttc_of_trajectory(const Trajectory& traj, const Vocabulary& vocab);

// Fraction of records with a parseable confidence.
double success_rate(std::span<const EvalRecord> records);

struct ReliabilityRow {
  double bin_lo = 0.0;
  double bin_hi = 0.0;
  long count = 0;
  std::optional<double> mean_conf;  // absent for empty bins
  std::optional<double> mean_acc;
};

// One row per bin, empty bins included; counts sum to the parsed total.
std::vector<ReliabilityRow> reliability_table(std::span<const EvalRecord> records,
                                              int n_bins);

}  // namespace coca::metrics
