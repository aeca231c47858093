#include "coca/tasks.hpp"

#include <cmath>
#include <stdexcept>

namespace coca::tasks {

std::string family_name(TaskFamily f) {
  return f == TaskFamily::LatentAnswer ? "latent-answer" : "hinted-channel";
}

TaskFamily family_from_name(const std::string& name) {
  if (name == "latent-answer") return TaskFamily::LatentAnswer;
  if (name == "hinted-channel") return TaskFamily::HintedChannel;
  throw std::invalid_argument("unknown task family: " + name);
}

int TaskSpec::class_index(int class_id) const {
  for (int i = 0; i < n_classes(); ++i)
    if (classes[static_cast<std::size_t>(i)].class_id == class_id) return i;
  throw std::invalid_argument("unknown class_id: " + std::to_string(class_id));
}

void TaskSpec::validate() const {
  if (classes.empty()) throw std::invalid_argument("task spec: need >= 1 class");
  if (answer_space < 2) throw std::invalid_argument("task spec: answer space must be >= 2");
  if (answer_len < 1) throw std::invalid_argument("task spec: answer length must be >= 1");
  for (const TaskClass& c : classes) {
    if (!(c.q > 0.0) || c.q > 1.0)
      throw std::invalid_argument("task spec: class " + std::to_string(c.class_id) +
                                  " has q outside (0, 1]");
  }
}

TaskSpec TaskSpec::default_spec() {
  TaskSpec spec;
  spec.family = TaskFamily::LatentAnswer;
  spec.answer_space = 8;
  spec.answer_len = 1;
  for (int i = 0; i < 9; ++i)
    spec.classes.push_back({i, 0.1 * static_cast<double>(i + 1)});
  return spec;
}

int modal_answer_index(const TaskSpec& spec, int class_index, int pos) {
  return (class_index + pos) % spec.answer_space;
}

TaskInstance sample_instance(const TaskSpec& spec, const Vocabulary& vocab,
                             int class_id, std::int64_t instance_id, Rng& rng) {
  const int ci = spec.class_index(class_id);
  const TaskClass& cls = spec.classes[static_cast<std::size_t>(ci)];
  const int K = spec.answer_space;
  const int L = spec.answer_len;

  TaskInstance inst;
  inst.instance_id = instance_id;
  inst.class_id = class_id;
  inst.observation.class_id = class_id;

  std::vector<int> answer_idx(static_cast<std::size_t>(L));
  if (spec.family == TaskFamily::LatentAnswer) {
    // Modal answer with probability q, else every position uniform over the
    // remaining K-1 tokens; modal play therefore scores exactly q.
    bool modal = rng.uniform() < cls.q;
    for (int p = 0; p < L; ++p) {
      int m = modal_answer_index(spec, ci, p);
      if (modal) {
        answer_idx[static_cast<std::size_t>(p)] = m;
      } else {
        int r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(K - 1)));
        answer_idx[static_cast<std::size_t>(p)] = r < m ? r : r + 1;
      }
    }
  } else {
    for (int p = 0; p < L; ++p)
      answer_idx[static_cast<std::size_t>(p)] =
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(K)));
    if (rng.uniform() < cls.q) inst.observation.hint = answer_idx;
  }

  inst.hidden_answer.reserve(static_cast<std::size_t>(L));
  for (int idx : answer_idx)
    inst.hidden_answer.push_back(vocab.answer_tokens()[static_cast<std::size_t>(idx)]);
  return inst;
}

int ans_correct(const TaskInstance& instance, std::span<const TokenId> answer,
                const Vocabulary& vocab) {
  if (answer.size() != instance.hidden_answer.size()) return 0;
  for (std::size_t p = 0; p < answer.size(); ++p) {
    if (answer[p] == vocab.refuse()) return 0;
    if (answer[p] != instance.hidden_answer[p]) return 0;
  }
  return 1;
}

double true_solvability(const TaskSpec& spec, int class_id) {
  const TaskClass& cls = spec.classes[static_cast<std::size_t>(spec.class_index(class_id))];
  if (spec.family == TaskFamily::LatentAnswer) return cls.q;
  double guess = std::pow(1.0 / static_cast<double>(spec.answer_space),
                          static_cast<double>(spec.answer_len));
  return cls.q + (1.0 - cls.q) * guess;
}

}  // namespace coca::tasks
