#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coca/metrics.hpp"
#include "coca/run_config.hpp"
#include "coca/runner.hpp"
#include "coca/trainer.hpp"

namespace coca::runio {

struct SeriesRow {
  long step_lo = 0;  // inclusive
  long step_hi = 0;  // exclusive
  double mean = 0.0;
};

std::vector<SeriesRow> binned_series(std::span<const trainer::StepReport> reports,
                                     double trainer::StepReport::*field, long bin_width);

// Reads metrics.jsonl back from a run directory.
std::vector<trainer::StepReport> load_metrics(const std::filesystem::path& run_dir);

// Aggregates metrics.jsonl into report.md plus one CSV per curve
// (confidence reward, accuracy reward, response length). Idempotent.
void write_report(const std::filesystem::path& run_dir, long bin_width);

struct AblateConfig {
  std::string suite;  // "seq-vs-joint" or "joint-vs-segment"
  std::vector<std::uint64_t> seeds;
  RunConfig base;     // shared knobs; mode/seed/out_dir set per run
  std::filesystem::path out_dir;
  long window = 50;   // step window for the comparison series
};

// Runs the suite over the seed list and writes comparison.csv (per-seed
// windowed series) and comparison_summary.csv (per-mode medians).
void run_ablation(const AblateConfig& cfg);

struct IngestResult {
  std::vector<metrics::EvalRecord> records;
  long skipped = 0;  // malformed lines and schema violations
  EvalSummary summary;
};

// Transcript JSONL: one object per line with {id, output_text, correct,
// generated_tokens?}. generated_tokens may be an integer (already-measured
// tokens to confidence) or an array of token strings, in which case TTC is
// the count up to and including the token completing "</confidence>".
IngestResult ingest_transcripts(const std::filesystem::path& jsonl_file, int ece_bins);

}  // namespace coca::runio
