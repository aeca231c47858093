// coca: train / eval / ablate / report / ingest for the confidence-first
// segmented-GRPO lab. Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coca/report.hpp"
#include "coca/run_config.hpp"
#include "coca/runner.hpp"

namespace fs = std::filesystem;
using coca::runio::json;

namespace {

struct TrainFlags {
  std::string config_path;
  std::string mode;
  std::string out_dir;
  std::uint64_t seed = 0;
  long steps = -1, steps_phase1 = -1, steps_phase2 = -1;
  int group_size = -1, batch = -1, threads = -1, inner_epochs = -1, n_eval = -1;
  double lr = -1.0, clip_eps = -1.0, beta = -1.0, eps_norm = -1.0;
  bool seed_set = false, beta_set = false;
};

coca::runio::RunConfig resolve_train_config(const TrainFlags& f) {
  json j;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw std::runtime_error("cannot open config file: " + f.config_path);
    j = json::parse(in);
  }
  // Flags override config-file values.
  if (!f.mode.empty()) j["mode"] = f.mode;
  if (f.seed_set) j["seed"] = f.seed;
  if (f.steps >= 0) j["steps"] = f.steps;
  if (f.steps_phase1 >= 0) j["steps_phase1"] = f.steps_phase1;
  if (f.steps_phase2 >= 0) j["steps_phase2"] = f.steps_phase2;
  if (f.group_size >= 0) j["group_size"] = f.group_size;
  if (f.batch >= 0) j["batch"] = f.batch;
  if (f.threads >= 0) j["threads"] = f.threads;
  if (f.inner_epochs >= 0) j["inner_epochs"] = f.inner_epochs;
  if (f.n_eval >= 0) j["n_eval"] = f.n_eval;
  if (f.lr >= 0.0) j["lr"] = f.lr;
  if (f.clip_eps >= 0.0) j["clip_eps"] = f.clip_eps;
  if (f.beta_set) j["beta"] = f.beta;
  if (f.eps_norm >= 0.0) j["eps_norm"] = f.eps_norm;
  if (!f.out_dir.empty()) j["out_dir"] = f.out_dir;
  if (!j.contains("mode"))
    throw CLI::RequiredError("--mode (or a config file providing it)");
  return coca::runio::run_config_from_json(j);
}

int cmd_train(const TrainFlags& flags) {
  coca::runio::RunConfig cfg = resolve_train_config(flags);
  coca::runio::RunResult run = coca::runio::train(cfg);

  coca::Vocabulary vocab = cfg.make_vocab();
  std::printf("run directory: %s\n", run.run_dir.string().c_str());
  if (!run.reports.empty()) {
    long window = std::min<long>(50, static_cast<long>(run.reports.size()));
    double acc = 0.0, conf = 0.0;
    for (std::size_t i = run.reports.size() - static_cast<std::size_t>(window);
         i < run.reports.size(); ++i) {
      acc += run.reports[i].mean_acc_reward;
      conf += run.reports[i].mean_conf_reward;
    }
    std::printf("final mean accuracy reward   (last %ld steps): %.4f\n", window,
                acc / static_cast<double>(window));
    std::printf("final mean confidence reward (last %ld steps): %.4f\n", window,
                conf / static_cast<double>(window));
    std::printf("per-class E|s - solvability|:\n");
    for (const coca::tasks::TaskClass& cls : cfg.task.classes) {
      double target = coca::tasks::true_solvability(cfg.task, cls.class_id);
      double gap = coca::runio::expected_conf_gap(run.final_params, vocab, cfg.task,
                                                  cls.class_id, target);
      std::printf("  class %d (solvability %.3f): %.4f\n", cls.class_id, target, gap);
    }
  }
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& checkpoint,
             const std::string& out_dir, int n_eval, std::uint64_t seed, bool seed_set) {
  coca::runio::RunConfig cfg = coca::runio::load_run_config(fs::path(run_dir) / "config.json");
  if (n_eval >= 0) cfg.n_eval = n_eval;
  if (seed_set) cfg.train.seed = seed;
  if (cfg.n_eval == 0) throw std::runtime_error("eval: n_eval must be > 0");

  fs::path ckpt = checkpoint.empty()
                      ? fs::path(run_dir) / "checkpoints" /
                            ("step_" + std::to_string(coca::trainer::total_steps(cfg.train)) +
                             ".json")
                      : fs::path(checkpoint);
  coca::policy::PolicyParams params = coca::runio::load_checkpoint(ckpt);
  coca::Vocabulary vocab = cfg.make_vocab();
  if (!(params.shape == coca::policy::PolicyShape::from(cfg.task, vocab)))
    throw std::runtime_error("eval: checkpoint shape does not match the run's vocabulary");

  coca::runio::EvalSummary summary = coca::runio::evaluate_policy(
      params, vocab, cfg.task, cfg.n_eval, cfg.train.seed, cfg.ece_bins);

  fs::path out = out_dir.empty() ? fs::path(run_dir) : fs::path(out_dir);
  fs::create_directories(out);
  coca::runio::write_eval_csv(out / "eval.csv", summary);
  coca::runio::write_reliability_csv(
      out / "reliability.csv", coca::metrics::reliability_table(summary.records, cfg.ece_bins));
  std::printf("eval: n=%ld accuracy=%.2f%% ece=%.4f brier=%.4f sr=%.3f\n", summary.n,
              summary.accuracy_pct, summary.ece, summary.brier, summary.sr);
  return 0;
}

int cmd_ablate(const std::string& suite, const std::vector<std::uint64_t>& seeds,
               const std::string& out_dir, const std::string& config_path, long window) {
  coca::runio::AblateConfig cfg;
  cfg.suite = suite;
  cfg.seeds = seeds;
  cfg.window = window;
  cfg.out_dir = out_dir.empty() ? fs::path("runs") / ("ablate-" + suite) : fs::path(out_dir);
  if (!config_path.empty()) {
    cfg.base = coca::runio::load_run_config(config_path);
  } else {
    json j;
    j["mode"] = "sequential";  // placeholder; run_ablation sets the mode per run
    cfg.base = coca::runio::run_config_from_json(j);
  }
  coca::runio::run_ablation(cfg);
  std::printf("ablation '%s' written to %s\n", suite.c_str(),
              cfg.out_dir.string().c_str());
  return 0;
}

int cmd_report(const std::string& run_dir, long bin_width) {
  coca::runio::write_report(run_dir, bin_width);
  std::printf("report written to %s\n", (fs::path(run_dir) / "report.md").string().c_str());
  return 0;
}

int cmd_ingest(const std::string& transcripts, const std::string& out_dir, int ece_bins) {
  coca::runio::IngestResult result = coca::runio::ingest_transcripts(transcripts, ece_bins);
  fs::path out = out_dir.empty() ? fs::path(transcripts).parent_path() : fs::path(out_dir);
  if (!out.empty()) fs::create_directories(out);
  coca::runio::write_eval_csv(out / "eval.csv", result.summary);
  coca::runio::write_reliability_csv(
      out / "reliability.csv",
      coca::metrics::reliability_table(result.records, ece_bins));
  std::printf("ingested %ld records (%ld skipped), SR=%.4f\n",
              result.summary.n, result.skipped, result.summary.sr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"confidence-first segmented GRPO lab"};
  app.require_subcommand(1);

  TrainFlags tf;
  CLI::App* train = app.add_subcommand("train", "run a training experiment");
  train->add_option("--config", tf.config_path, "JSON config file");
  train->add_option("--mode", tf.mode, "coca | joint | rlvr | rlcr | sequential");
  train->add_option("--seed", tf.seed)->each([&](const std::string&) { tf.seed_set = true; });
  train->add_option("--steps", tf.steps);
  train->add_option("--steps-phase1", tf.steps_phase1);
  train->add_option("--steps-phase2", tf.steps_phase2);
  train->add_option("--group-size,-G", tf.group_size);
  train->add_option("--batch,-B", tf.batch);
  train->add_option("--lr", tf.lr);
  train->add_option("--clip-eps", tf.clip_eps);
  train->add_option("--beta", tf.beta)->each([&](const std::string&) { tf.beta_set = true; });
  train->add_option("--eps-norm", tf.eps_norm);
  train->add_option("--inner-epochs", tf.inner_epochs);
  train->add_option("--threads", tf.threads);
  train->add_option("--n-eval", tf.n_eval);
  train->add_option("--out", tf.out_dir, "run directory");

  std::string eval_run, eval_ckpt, eval_out;
  int eval_n = -1;
  std::uint64_t eval_seed = 0;
  bool eval_seed_set = false;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--run", eval_run, "run directory (provides config.json)")->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file (default: final)");
  eval->add_option("--n-eval", eval_n);
  eval->add_option("--seed", eval_seed)->each([&](const std::string&) { eval_seed_set = true; });
  eval->add_option("--out", eval_out, "output directory (default: run dir)");

  std::string ab_suite, ab_out, ab_config;
  std::vector<std::uint64_t> ab_seeds;
  long ab_window = 50;
  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation suite");
  ablate->add_option("--suite", ab_suite, "seq-vs-joint | joint-vs-segment")->required();
  ablate->add_option("--seeds", ab_seeds, "seed list")->required()->delimiter(',');
  ablate->add_option("--config", ab_config, "base config JSON");
  ablate->add_option("--out", ab_out);
  ablate->add_option("--window", ab_window, "step window for comparison.csv");

  std::string rep_run;
  long rep_bin = 50;
  CLI::App* report = app.add_subcommand("report", "aggregate metrics.jsonl into curves");
  report->add_option("--run", rep_run)->required();
  report->add_option("--bin-width", rep_bin);

  std::string ing_file, ing_out;
  int ing_bins = 10;
  CLI::App* ingest = app.add_subcommand("ingest", "score external transcripts");
  ingest->add_option("--transcripts", ing_file, "JSONL transcript file")->required();
  ingest->add_option("--out", ing_out);
  ingest->add_option("--ece-bins", ing_bins);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train(tf);
    if (*eval) return cmd_eval(eval_run, eval_ckpt, eval_out, eval_n, eval_seed,
                               eval_seed_set);
    if (*ablate) return cmd_ablate(ab_suite, ab_seeds, ab_out, ab_config, ab_window);
    if (*report) return cmd_report(rep_run, rep_bin);
    if (*ingest) return cmd_ingest(ing_file, ing_out, ing_bins);
  } catch (const CLI::RequiredError& e) {
    std::cerr << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
