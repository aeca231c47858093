#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <vector>

#include "coca/metrics.hpp"
#include "coca/policy.hpp"
#include "coca/report.hpp"
#include "coca/rewards.hpp"
#include "coca/run_config.hpp"
#include "coca/runner.hpp"
#include "coca/tasks.hpp"
#include "coca/trainer.hpp"

namespace py = pybind11;
using namespace coca;

namespace {

std::vector<metrics::EvalRecord> make_records(
    const std::vector<std::optional<double>>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels must have equal length");
  std::vector<metrics::EvalRecord> records(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    records[i].score = scores[i];
    records[i].label = labels[i];
  }
  return records;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "confidence-first segmented GRPO lab (C++ core)";

  // rewards
  m.def("gesr", [](const std::vector<int>& acc) { return rewards::gesr(acc); },
        py::arg("acc_rewards"));
  m.def("brier_confidence_reward", &rewards::brier_confidence_reward, py::arg("s"),
        py::arg("p_hat"));
  m.def("rlcr_reward", &rewards::rlcr_reward, py::arg("s"), py::arg("correct"));
  m.def("joint_reward", &rewards::joint_reward, py::arg("acc_reward"),
        py::arg("conf_reward"));
  m.def(
      "group_normalize",
      [](const std::vector<double>& rewards_in, double eps_norm) {
        return rewards::group_normalize(rewards_in, eps_norm);
      },
      py::arg("rewards"), py::arg("eps_norm") = 1e-8);
  m.def(
      "majority_vote_confidence",
      [](const std::vector<std::vector<TokenId>>& answers) {
        rewards::MajorityVote mv = rewards::majority_vote_confidence(answers);
        return py::make_tuple(mv.answer, mv.confidence);
      },
      py::arg("answers"));

  // metrics
  m.def("parse_confidence",
        [](const std::string& text) { return metrics::parse_confidence(text); },
        py::arg("text"));
  m.def(
      "accuracy",
      [](const std::vector<std::optional<double>>& scores, const std::vector<int>& labels) {
        return metrics::accuracy(make_records(scores, labels));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "ece",
      [](const std::vector<std::optional<double>>& scores, const std::vector<int>& labels,
         int n_bins) { return metrics::ece(make_records(scores, labels), n_bins); },
      py::arg("scores"), py::arg("labels"), py::arg("n_bins") = 10);
  m.def(
      "brier_score",
      [](const std::vector<std::optional<double>>& scores, const std::vector<int>& labels) {
        return metrics::brier_score(make_records(scores, labels));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "auroc",
      [](const std::vector<std::optional<double>>& scores, const std::vector<int>& labels) {
        return metrics::auroc(make_records(scores, labels));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "success_rate",
      [](const std::vector<std::optional<double>>& scores, const std::vector<int>& labels) {
        return metrics::success_rate(make_records(scores, labels));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "reliability_table",
      [](const std::vector<std::optional<double>>& scores, const std::vector<int>& labels,
         int n_bins) {
        auto rows = metrics::reliability_table(make_records(scores, labels), n_bins);
        py::list out;
        for (const metrics::ReliabilityRow& r : rows)
          out.append(py::make_tuple(r.bin_lo, r.bin_hi, r.count, r.mean_conf, r.mean_acc));
        return out;
      },
      py::arg("scores"), py::arg("labels"), py::arg("n_bins") = 10);

  // tasks
  m.def("true_solvability",
        [](const std::string& family, double q, int answer_space, int answer_len) {
          tasks::TaskSpec spec;
          spec.family = tasks::family_from_name(family);
          spec.classes = {{0, q}};
          spec.answer_space = answer_space;
          spec.answer_len = answer_len;
          return tasks::true_solvability(spec, 0);
        },
        py::arg("family"), py::arg("q"), py::arg("answer_space") = 8,
        py::arg("answer_len") = 1);

  // end-to-end drivers
  m.def(
      "run_train",
      [](const std::string& config_json) {
        runio::RunConfig cfg =
            runio::run_config_from_json(runio::json::parse(config_json));
        runio::RunResult run = runio::train(cfg);
        return run.run_dir.string();
      },
      py::arg("config_json"), "Run training from a JSON config string; returns the run dir.",
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_eval",
      [](const std::string& run_dir, int n_eval, std::uint64_t seed) {
        runio::RunConfig cfg =
            runio::load_run_config(std::filesystem::path(run_dir) / "config.json");
        if (n_eval > 0) cfg.n_eval = n_eval;
        cfg.train.seed = seed;
        Vocabulary vocab = cfg.make_vocab();
        policy::PolicyParams params = runio::load_checkpoint(
            std::filesystem::path(run_dir) / "checkpoints" /
            ("step_" + std::to_string(trainer::total_steps(cfg.train)) + ".json"));
        runio::EvalSummary s =
            runio::evaluate_policy(params, vocab, cfg.task, cfg.n_eval, seed, cfg.ece_bins);
        py::dict out;
        out["accuracy"] = s.accuracy_pct;
        out["auroc"] = s.auroc;
        out["ece"] = s.ece;
        out["brier"] = s.brier;
        out["ttc_mean"] = s.ttc_mean;
        out["sr"] = s.sr;
        out["n"] = s.n;
        out["n_parsed"] = s.n_parsed;
        return out;
      },
      py::arg("run_dir"), py::arg("n_eval") = 0, py::arg("seed") = 1);
  m.def("default_config_json", []() {
    runio::RunConfig cfg;
    cfg.train.mode = trainer::Mode::Coca;
    return runio::resolved_config_json(cfg).dump();
  });
}
