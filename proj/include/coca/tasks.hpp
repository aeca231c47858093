#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coca/rng.hpp"
#include "coca/vocab.hpp"

namespace coca::tasks {

enum class TaskFamily { LatentAnswer, HintedChannel };

std::string family_name(TaskFamily f);
TaskFamily family_from_name(const std::string& name);

struct TaskClass {
  int class_id = 0;
  // Latent-answer family: modal-answer probability. Hinted-channel family:
  // probability the hint is shown.
  double q = 0.5;
};

struct TaskSpec {
  TaskFamily family = TaskFamily::LatentAnswer;
  std::vector<TaskClass> classes;
  int answer_space = 8;  // K
  int answer_len = 1;    // L

  int n_classes() const { return static_cast<int>(classes.size()); }
  int class_index(int class_id) const;  // throws on unknown class_id
  void validate() const;

  // 9 latent-answer classes with q = 0.1 ... 0.9, K = 8, L = 1.
  static TaskSpec default_spec();
};

struct Observation {
  int class_id = 0;
  // Hinted-channel family only: answer indices of the correct answer, absent
  // when the hint channel stayed silent this instance.
  std::optional<std::vector<int>> hint;
};

struct TaskInstance {
  std::int64_t instance_id = 0;
  int class_id = 0;
  Observation observation;
  std::vector<TokenId> hidden_answer;  // L tokens, never contains refuse
};

// Modal answer index for a class at a given answer position.
int modal_answer_index(const TaskSpec& spec, int class_index, int pos);

TaskInstance sample_instance(const TaskSpec& spec, const Vocabulary& vocab,
                             int class_id, std::int64_t instance_id, Rng& rng);

// 1 iff answer matches hidden_answer element-wise; refuse anywhere (or a
// length mismatch) yields 0.
int ans_correct(const TaskInstance& instance, std::span<const TokenId> answer,
                const Vocabulary& vocab);

// Best single-sample accuracy of the family's reference policy: the modal
// answer for latent-answer classes, follow-hint-else-guess for hinted-channel.
double true_solvability(const TaskSpec& spec, int class_id);

}  // namespace coca::tasks
