#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "coca/tasks.hpp"
#include "coca/trainer.hpp"
#include "coca/vocab.hpp"

namespace coca::runio {

using json = nlohmann::ordered_json;

struct RunConfig {
  trainer::TrainConfig train;
  tasks::TaskSpec task = tasks::TaskSpec::default_spec();
  int conf_bins = 21;
  int n_eval = 4000;
  int ece_bins = 10;
  long report_bin_width = 50;
  std::string out_dir;

  Vocabulary make_vocab() const {
    return Vocabulary::make(conf_bins, task.answer_space, task.answer_len);
  }
  void validate() const;
};

// Strict parse: unknown keys anywhere are rejected with the offending field
// named. The resolved form written back by a run (which carries the derived
// "vocabulary" block) parses too.
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& file);

// Fully resolved config, every default materialized, vocabulary included.
json resolved_config_json(const RunConfig& cfg);

void save_checkpoint(const std::filesystem::path& file, const policy::PolicyParams& params);
policy::PolicyParams load_checkpoint(const std::filesystem::path& file);

}  // namespace coca::runio
