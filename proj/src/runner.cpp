#include "coca/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coca::runio {

namespace {

json report_to_json(const trainer::StepReport& rep) {
  json j;
  j["step"] = rep.step;
  j["mode"] = trainer::mode_name(rep.mode);
  j["mean_acc_reward"] = rep.mean_acc_reward;
  j["mean_conf_reward"] = rep.mean_conf_reward;
  j["mean_response_length"] = rep.mean_response_length;
  j["mean_conf_gap"] = rep.mean_conf_gap;
  j["refusal_rate"] = rep.refusal_rate;
  return j;
}

json event_to_json(const trainer::Event& ev) {
  json j;
  j["step"] = ev.step;
  j["type"] = ev.type;
  if (!ev.detail.empty()) j["detail"] = ev.detail;
  return j;
}

std::string csv_value(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "-";  // undefined metrics print as "-"
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

RunResult train(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.validate();

  std::vector<trainer::Event> events;
  if (cfg.train.mode == trainer::Mode::Coca && cfg.train.beta != 0.0) {
    // The segmented objective has no KL term; the coefficient is inert.
    events.push_back({-1, "beta_forced_zero", "segmented objective has no KL term"});
    cfg.train.beta = 0.0;
  }

  if (cfg.out_dir.empty())
    cfg.out_dir = "runs/" + trainer::mode_name(cfg.train.mode) + "-seed" +
                  std::to_string(cfg.train.seed);
  std::filesystem::path run_dir(cfg.out_dir);
  std::filesystem::create_directories(run_dir / "checkpoints");

  const Vocabulary vocab = cfg.make_vocab();
  const tasks::TaskSpec& spec = cfg.task;
  const trainer::RunContext ctx{vocab, spec};

  {
    std::ofstream out(run_dir / "config.json");
    if (!out) throw std::runtime_error("cannot write config.json in " + cfg.out_dir);
    out << resolved_config_json(cfg).dump(2) << '\n';
  }

  policy::PolicyParams params =
      policy::PolicyParams::zeros(policy::PolicyShape::from(spec, vocab));
  const policy::PolicyParams ref = params;  // KL reference: parameters at run start
  save_checkpoint(run_dir / "checkpoints" / "step_0.json", params);

  std::ofstream metrics_out(run_dir / "metrics.jsonl");
  if (!metrics_out) throw std::runtime_error("cannot write metrics.jsonl in " + cfg.out_dir);

  const long steps = trainer::total_steps(cfg.train);
  events.push_back({0, "run_start", trainer::mode_name(cfg.train.mode)});

  RunResult result;
  result.run_dir = run_dir;
  long completed = 0;
  double total_wall_ms = 0.0;
  try {
    trainer::Mode prev_mode = trainer::step_mode(cfg.train, 0);
    for (long step = 0; step < steps; ++step) {
      auto t0 = std::chrono::steady_clock::now();
      trainer::Mode mode = trainer::step_mode(cfg.train, step);
      if (mode != prev_mode) {
        events.push_back({step, "mode_change",
                          trainer::mode_name(prev_mode) + "->" + trainer::mode_name(mode)});
        prev_mode = mode;
      }

      policy::PolicySnapshot snapshot(params);
      trainer::BatchRollout batch = trainer::rollout_batch(snapshot, ctx, cfg.train, step);

      trainer::StepReport rep;
      switch (mode) {
        case trainer::Mode::Coca:
          rep = trainer::segmented_step(params, ctx, batch, cfg.train, step, &events);
          break;
        case trainer::Mode::Joint:
          rep = trainer::joint_step(params, ref, ctx, batch, cfg.train, step, &events);
          break;
        case trainer::Mode::Rlvr:
          rep = trainer::rlvr_step(params, ref, ctx, batch, cfg.train, step, &events);
          break;
        case trainer::Mode::Rlcr:
          rep = trainer::rlcr_step(params, ref, ctx, batch, cfg.train, step, &events);
          break;
        case trainer::Mode::Sequential:
          rep = trainer::conf_only_step(params, ref, ctx, batch, cfg.train, step, &events);
          break;
      }
      auto t1 = std::chrono::steady_clock::now();
      rep.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      total_wall_ms += rep.wall_ms;

      metrics_out << report_to_json(rep).dump() << '\n';
      result.reports.push_back(rep);
      completed = step + 1;
    }
  } catch (const std::exception& e) {
    events.push_back({completed, "run_interrupted", e.what()});
    std::ofstream events_out(run_dir / "events.jsonl");
    for (const trainer::Event& ev : events) events_out << event_to_json(ev).dump() << '\n';
    throw;
  }
  metrics_out.flush();

  save_checkpoint(run_dir / "checkpoints" / ("step_" + std::to_string(steps) + ".json"),
                  params);

  if (cfg.n_eval > 0 && steps > 0) {
    EvalSummary summary = evaluate_policy(params, vocab, spec, cfg.n_eval,
                                          cfg.train.seed, cfg.ece_bins);
    write_eval_csv(run_dir / "eval.csv", summary);
    write_reliability_csv(run_dir / "reliability.csv",
                          metrics::reliability_table(summary.records, cfg.ece_bins));
  }

  events.push_back({completed, "run_end",
                    "completed_steps=" + std::to_string(completed) +
                        " total_wall_ms=" + std::to_string(total_wall_ms)});
  std::ofstream events_out(run_dir / "events.jsonl");
  for (const trainer::Event& ev : events) events_out << event_to_json(ev).dump() << '\n';

  result.events = std::move(events);
  result.final_params = std::move(params);
  return result;
}

EvalSummary evaluate_policy(const policy::PolicyParams& params, const Vocabulary& vocab,
                            const tasks::TaskSpec& spec, int n_eval, std::uint64_t seed,
                            int ece_bins) {
  if (n_eval <= 0) throw std::invalid_argument("evaluate_policy: n_eval must be > 0");
  EvalSummary summary;
  summary.records.reserve(static_cast<std::size_t>(n_eval));
  for (int i = 0; i < n_eval; ++i) {
    Rng rng(derive_stream(seed, 0, static_cast<std::uint64_t>(i), StreamPurpose::Eval));
    auto ci = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.n_classes())));
    tasks::TaskInstance inst = tasks::sample_instance(
        spec, vocab, spec.classes[static_cast<std::size_t>(ci)].class_id, i, rng);
    Trajectory traj = policy::sample_response(params, vocab, spec, inst, 1.0, rng);
    metrics::EvalRecord rec;
    rec.score = traj.parsed_confidence;
    rec.label = tasks::ans_correct(inst, traj.answer_tokens(), vocab);
    rec.ttc = metrics::ttc_of_trajectory(traj, vocab);
    summary.records.push_back(rec);
  }

  summary.n = static_cast<long>(summary.records.size());
  summary.accuracy_pct = metrics::accuracy(summary.records);
  summary.auroc = metrics::auroc(summary.records);
  summary.ece = metrics::ece(summary.records, ece_bins);
  summary.brier = metrics::brier_score(summary.records);
  summary.sr = metrics::success_rate(summary.records);
  double ttc_sum = 0.0;
  long parsed = 0;
  for (const metrics::EvalRecord& r : summary.records) {
    ttc_sum += static_cast<double>(r.ttc);
    parsed += r.score ? 1 : 0;
  }
  summary.ttc_mean = ttc_sum / static_cast<double>(summary.n);
  summary.n_parsed = parsed;
  return summary;
}

double expected_conf_gap(const policy::PolicyParams& params, const Vocabulary& vocab,
                         const tasks::TaskSpec& spec, int class_id, double target) {
  const int ci = spec.class_index(class_id);
  std::vector<double> p = policy::softmax(params.conf_head(ci));
  double gap = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j)
    gap += p[j] * std::fabs(vocab.conf_bins()[j].value - target);
  return gap;
}

double answer_sequence_prob(const policy::PolicyParams& params, const tasks::TaskSpec& spec,
                            const tasks::Observation& obs, std::span<const int> answer_idx) {
  const int ci = spec.class_index(obs.class_id);
  double prob = 1.0;
  for (int pos = 0; pos < spec.answer_len; ++pos) {
    int hctx = policy::hint_context(spec, obs, pos);
    std::vector<double> p = policy::softmax(params.ans_head(ci, hctx, pos));
    prob *= p[static_cast<std::size_t>(answer_idx[static_cast<std::size_t>(pos)])];
  }
  return prob;
}

void write_eval_csv(const std::filesystem::path& file, const EvalSummary& summary) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "metric,value\n";
  out << "accuracy," << csv_value(summary.accuracy_pct) << '\n';
  out << "auroc," << csv_value(summary.auroc) << '\n';
  out << "ece," << csv_value(summary.ece) << '\n';
  out << "brier," << csv_value(summary.brier) << '\n';
  out << "ttc_mean," << csv_value(summary.ttc_mean) << '\n';
  out << "sr," << csv_value(summary.sr) << '\n';
  out << "n," << summary.n << '\n';
  out << "n_parsed," << summary.n_parsed << '\n';
}

void write_reliability_csv(const std::filesystem::path& file,
                           const std::vector<metrics::ReliabilityRow>& rows) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "bin_lo,bin_hi,count,mean_conf,mean_acc\n";
  std::ostringstream os;
  os.precision(17);
  for (const metrics::ReliabilityRow& row : rows) {
    os.str("");
    os << row.bin_lo << ',' << row.bin_hi << ',' << row.count << ','
       << (row.mean_conf ? csv_value(row.mean_conf) : "") << ','
       << (row.mean_acc ? csv_value(row.mean_acc) : "") << '\n';
    out << os.str();
  }
}

}  // namespace coca::runio
