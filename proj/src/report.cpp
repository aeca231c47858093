#include "coca/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace coca::runio {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty vector");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_series_csv(const std::filesystem::path& file,
                      const std::vector<SeriesRow>& rows) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "step_lo,step_hi,mean\n";
  for (const SeriesRow& r : rows)
    out << r.step_lo << ',' << r.step_hi << ',' << fmt(r.mean) << '\n';
}

}  // namespace

std::vector<SeriesRow> binned_series(std::span<const trainer::StepReport> reports,
                                     double trainer::StepReport::*field, long bin_width) {
  if (bin_width < 1) throw std::invalid_argument("binned_series: bin width must be >= 1");
  std::vector<SeriesRow> rows;
  for (std::size_t i = 0; i < reports.size();) {
    std::size_t j = std::min(i + static_cast<std::size_t>(bin_width), reports.size());
    SeriesRow row;
    row.step_lo = reports[i].step;
    row.step_hi = reports[j - 1].step + 1;
    double sum = 0.0;
    for (std::size_t k = i; k < j; ++k) sum += reports[k].*field;
    row.mean = sum / static_cast<double>(j - i);
    rows.push_back(row);
    i = j;
  }
  return rows;
}

std::vector<trainer::StepReport> load_metrics(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "metrics.jsonl");
  if (!in) throw std::runtime_error("malformed run directory: no metrics.jsonl in " +
                                    run_dir.string());
  std::vector<trainer::StepReport> reports;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    trainer::StepReport rep;
    rep.step = j.at("step").get<long>();
    rep.mode = trainer::mode_from_name(j.at("mode").get<std::string>());
    rep.mean_acc_reward = j.at("mean_acc_reward").get<double>();
    rep.mean_conf_reward = j.at("mean_conf_reward").get<double>();
    rep.mean_response_length = j.at("mean_response_length").get<double>();
    rep.mean_conf_gap = j.at("mean_conf_gap").get<double>();
    rep.refusal_rate = j.at("refusal_rate").get<double>();
    reports.push_back(rep);
  }
  return reports;
}

void write_report(const std::filesystem::path& run_dir, long bin_width) {
  std::vector<trainer::StepReport> reports = load_metrics(run_dir);

  std::ofstream md(run_dir / "report.md");
  if (!md) throw std::runtime_error("cannot write report.md in " + run_dir.string());
  md << "# Run report\n\n";
  if (reports.empty()) {
    md << "no steps\n";
    write_series_csv(run_dir / "series_conf_reward.csv", {});
    write_series_csv(run_dir / "series_acc_reward.csv", {});
    write_series_csv(run_dir / "series_response_length.csv", {});
    return;
  }

  auto conf = binned_series(reports, &trainer::StepReport::mean_conf_reward, bin_width);
  auto acc = binned_series(reports, &trainer::StepReport::mean_acc_reward, bin_width);
  auto len = binned_series(reports, &trainer::StepReport::mean_response_length, bin_width);
  write_series_csv(run_dir / "series_conf_reward.csv", conf);
  write_series_csv(run_dir / "series_acc_reward.csv", acc);
  write_series_csv(run_dir / "series_response_length.csv", len);

  const trainer::StepReport& last = reports.back();
  md << "- steps: " << reports.size() << "\n";
  md << "- final mode: " << trainer::mode_name(last.mode) << "\n";
  md << "- bin width: " << bin_width << " (" << conf.size() << " rows per series)\n";
  md << "- final-bin mean accuracy reward: " << fmt(acc.back().mean) << "\n";
  md << "- final-bin mean confidence reward: " << fmt(conf.back().mean) << "\n";
  md << "- final-bin mean response length: " << fmt(len.back().mean) << "\n";
  md << "- final refusal rate: " << fmt(last.refusal_rate) << "\n";
  md << "\nSeries CSVs: series_conf_reward.csv, series_acc_reward.csv, "
        "series_response_length.csv\n";
}

void run_ablation(const AblateConfig& cfg) {
  std::vector<std::string> modes;
  if (cfg.suite == "seq-vs-joint") {
    modes = {"sequential", "coca"};
  } else if (cfg.suite == "joint-vs-segment") {
    modes = {"joint", "coca"};
  } else {
    throw std::invalid_argument("unknown ablation suite: " + cfg.suite);
  }
  if (cfg.seeds.empty()) throw std::invalid_argument("ablate: empty seed list");

  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream cmp(cfg.out_dir / "comparison.csv");
  if (!cmp) throw std::runtime_error("cannot write comparison.csv");
  cmp << "suite,mode,seed,step,mean_r_conf,mean_r_acc,refusal_rate\n";

  struct Final {
    double conf, acc, refusal, ece, accuracy_pct;
  };
  std::map<std::string, std::vector<Final>> finals;

  for (const std::string& mode : modes) {
    for (std::uint64_t seed : cfg.seeds) {
      RunConfig rc = cfg.base;
      rc.train.mode = trainer::mode_from_name(mode);
      if (rc.train.mode == trainer::Mode::Sequential) {
        rc.train.steps = rc.train.steps_phase1 + rc.train.steps_phase2;
      } else {
        // Same step budget as the sequential comparator.
        rc.train.steps = trainer::total_steps(cfg.base.train);
      }
      rc.train.seed = seed;
      rc.out_dir =
          (cfg.out_dir / (mode + "-seed" + std::to_string(seed))).string();
      RunResult run = train(rc);

      auto conf = binned_series(run.reports, &trainer::StepReport::mean_conf_reward,
                                cfg.window);
      auto acc = binned_series(run.reports, &trainer::StepReport::mean_acc_reward,
                               cfg.window);
      auto refusal = binned_series(run.reports, &trainer::StepReport::refusal_rate,
                                   cfg.window);
      for (std::size_t i = 0; i < conf.size(); ++i)
        cmp << cfg.suite << ',' << mode << ',' << seed << ',' << conf[i].step_lo << ','
            << fmt(conf[i].mean) << ',' << fmt(acc[i].mean) << ','
            << fmt(refusal[i].mean) << '\n';

      Vocabulary vocab = rc.make_vocab();
      EvalSummary ev = evaluate_policy(run.final_params, vocab, rc.task, rc.n_eval,
                                       seed, rc.ece_bins);
      finals[mode].push_back(
          {conf.back().mean, acc.back().mean, run.reports.back().refusal_rate, ev.ece,
           ev.accuracy_pct});
    }
  }

  std::ofstream sum(cfg.out_dir / "comparison_summary.csv");
  sum << "suite,mode,metric,median\n";
  for (const std::string& mode : modes) {
    const std::vector<Final>& f = finals[mode];
    auto med = [&](double Final::*field) {
      std::vector<double> v;
      for (const Final& x : f) v.push_back(x.*field);
      return median(v);
    };
    sum << cfg.suite << ',' << mode << ",final_mean_r_conf," << fmt(med(&Final::conf))
        << '\n';
    sum << cfg.suite << ',' << mode << ",final_mean_r_acc," << fmt(med(&Final::acc))
        << '\n';
    sum << cfg.suite << ',' << mode << ",final_refusal_rate,"
        << fmt(med(&Final::refusal)) << '\n';
    sum << cfg.suite << ',' << mode << ",eval_ece," << fmt(med(&Final::ece)) << '\n';
    sum << cfg.suite << ',' << mode << ",eval_accuracy,"
        << fmt(med(&Final::accuracy_pct)) << '\n';
  }
}

namespace {

long transcript_ttc(const json& j) {
  if (!j.contains("generated_tokens")) {
    // Fallback: whitespace tokens of the prefix through the close tag.
    const std::string text = j.at("output_text").get<std::string>();
    std::size_t end = text.find("</confidence>");
    if (end == std::string::npos) return 0;
    std::istringstream is(text.substr(0, end + std::string("</confidence>").size()));
    long count = 0;
    std::string tok;
    while (is >> tok) ++count;
    return count;
  }
  const json& g = j.at("generated_tokens");
  if (g.is_number_integer()) return g.get<long>();
  if (g.is_array()) {
    std::string acc;
    long count = 0;
    for (const json& tok : g) {
      acc += tok.get<std::string>();
      ++count;
      if (acc.find("</confidence>") != std::string::npos) return count;
    }
    return count;
  }
  throw std::invalid_argument("generated_tokens must be an integer or an array");
}

}  // namespace

IngestResult ingest_transcripts(const std::filesystem::path& jsonl_file, int ece_bins) {
  std::ifstream in(jsonl_file);
  if (!in) throw std::runtime_error("cannot open transcripts: " + jsonl_file.string());

  IngestResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
      if (!j.contains("correct")) throw std::invalid_argument("missing 'correct'");
      if (!j.contains("output_text")) throw std::invalid_argument("missing 'output_text'");
      int correct = j.at("correct").get<int>();
      if (correct != 0 && correct != 1)
        throw std::invalid_argument("'correct' must be 0 or 1");
      metrics::EvalRecord rec;
      rec.score = metrics::parse_confidence(j.at("output_text").get<std::string>());
      rec.label = correct;
      rec.ttc = transcript_ttc(j);
      result.records.push_back(rec);
    } catch (const std::exception&) {
      ++result.skipped;
    }
  }
  if (result.records.empty())
    throw std::runtime_error("no usable transcript lines in " + jsonl_file.string());

  EvalSummary& s = result.summary;
  s.records = result.records;
  s.n = static_cast<long>(result.records.size());
  s.accuracy_pct = metrics::accuracy(result.records);
  s.auroc = metrics::auroc(result.records);
  s.sr = metrics::success_rate(result.records);
  long parsed = 0;
  double ttc_sum = 0.0;
  for (const metrics::EvalRecord& r : result.records) {
    parsed += r.score ? 1 : 0;
    ttc_sum += static_cast<double>(r.ttc);
  }
  s.n_parsed = parsed;
  s.ttc_mean = ttc_sum / static_cast<double>(s.n);
  if (parsed > 0) {
    s.ece = metrics::ece(result.records, ece_bins);
    s.brier = metrics::brier_score(result.records);
  } else {
    s.ece = std::numeric_limits<double>::quiet_NaN();
    s.brier = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

}  // namespace coca::runio
