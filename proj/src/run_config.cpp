#include "coca/run_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "coca/policy.hpp"

namespace coca::runio {

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

tasks::TaskSpec task_from_json(const json& j) {
  reject_unknown_keys(j, {"family", "answer_space", "answer_len", "classes"}, "task");
  tasks::TaskSpec spec;
  spec.family = tasks::family_from_name(get_or<std::string>(j, "family", "latent-answer"));
  spec.answer_space = get_or<int>(j, "answer_space", 8);
  spec.answer_len = get_or<int>(j, "answer_len", 1);
  if (j.contains("classes")) {
    spec.classes.clear();
    for (const json& jc : j.at("classes")) {
      reject_unknown_keys(jc, {"class_id", "q"}, "task.classes");
      spec.classes.push_back({jc.at("class_id").get<int>(), jc.at("q").get<double>()});
    }
  } else {
    spec.classes = tasks::TaskSpec::default_spec().classes;
  }
  return spec;
}

json task_to_json(const tasks::TaskSpec& spec) {
  json j;
  j["family"] = tasks::family_name(spec.family);
  j["answer_space"] = spec.answer_space;
  j["answer_len"] = spec.answer_len;
  j["classes"] = json::array();
  for (const tasks::TaskClass& c : spec.classes)
    j["classes"].push_back(json{{"class_id", c.class_id}, {"q", c.q}});
  return j;
}

json vocab_to_json(const Vocabulary& v) {
  json j;
  j["conf_open"] = v.conf_open();
  j["conf_close"] = v.conf_close();
  j["eos"] = v.eos();
  j["refuse"] = v.refuse();
  j["conf_bins"] = json::array();
  for (const ConfBin& b : v.conf_bins())
    j["conf_bins"].push_back(json{{"token", b.token}, {"value", b.value}});
  j["answer_tokens"] = v.answer_tokens();
  j["answer_len"] = v.answer_len();
  return j;
}

}  // namespace

void RunConfig::validate() const {
  task.validate();
  if (train.group_size < 2) throw std::invalid_argument("config: group_size must be >= 2");
  if (train.batch < 1) throw std::invalid_argument("config: batch must be >= 1");
  if (train.steps < 0 || train.steps_phase1 < 0 || train.steps_phase2 < 0)
    throw std::invalid_argument("config: step counts must be >= 0");
  if (!(train.clip_eps > 0.0 && train.clip_eps < 1.0))
    throw std::invalid_argument("config: clip_eps must be in (0, 1)");
  if (!(train.lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
  if (train.beta < 0.0) throw std::invalid_argument("config: beta must be >= 0");
  if (!(train.eps_norm > 0.0)) throw std::invalid_argument("config: eps_norm must be > 0");
  if (train.inner_epochs < 1)
    throw std::invalid_argument("config: inner_epochs must be >= 1");
  if (conf_bins < 2) throw std::invalid_argument("config: conf_bins must be >= 2");
  if (ece_bins < 1) throw std::invalid_argument("config: ece_bins must be >= 1");
  if (report_bin_width < 1)
    throw std::invalid_argument("config: report_bin_width must be >= 1");
  if (n_eval < 0) throw std::invalid_argument("config: n_eval must be >= 0");
}

RunConfig run_config_from_json(const json& j) {
  static const std::set<std::string> allowed = {
      "mode",       "seed",         "steps",        "steps_phase1", "steps_phase2",
      "group_size", "batch",        "clip_eps",     "lr",           "beta",
      "eps_norm",   "inner_epochs", "threads",      "conf_bins",    "n_eval",
      "ece_bins",   "report_bin_width", "out_dir",  "task",         "vocabulary"};
  reject_unknown_keys(j, allowed, "top level");

  RunConfig cfg;
  if (!j.contains("mode")) throw std::invalid_argument("config: missing required key 'mode'");
  cfg.train.mode = trainer::mode_from_name(j.at("mode").get<std::string>());
  cfg.train.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.train.group_size = get_or<int>(j, "group_size", 16);
  cfg.train.batch = get_or<int>(j, "batch", 16);
  cfg.train.clip_eps = get_or<double>(j, "clip_eps", 0.2);
  cfg.train.lr = get_or<double>(j, "lr", 0.1);
  cfg.train.beta = get_or<double>(j, "beta", 0.0);
  cfg.train.eps_norm = get_or<double>(j, "eps_norm", 1e-8);
  cfg.train.inner_epochs = get_or<int>(j, "inner_epochs", 1);
  cfg.train.threads = get_or<int>(j, "threads", 0);

  if (cfg.train.mode == trainer::Mode::Sequential) {
    cfg.train.steps_phase1 = get_or<long>(j, "steps_phase1", 1000);
    cfg.train.steps_phase2 = get_or<long>(j, "steps_phase2", 1000);
    cfg.train.steps = cfg.train.steps_phase1 + cfg.train.steps_phase2;
    if (j.contains("steps") && j.at("steps").get<long>() != cfg.train.steps)
      throw std::invalid_argument(
          "config: 'steps' must equal steps_phase1 + steps_phase2 in sequential mode");
  } else {
    if (j.contains("steps_phase1") || j.contains("steps_phase2"))
      throw std::invalid_argument("config: phase step counts are sequential-mode only");
    cfg.train.steps = get_or<long>(j, "steps", 2000);
  }

  cfg.conf_bins = get_or<int>(j, "conf_bins", 21);
  cfg.n_eval = get_or<int>(j, "n_eval", 4000);
  cfg.ece_bins = get_or<int>(j, "ece_bins", 10);
  cfg.report_bin_width = get_or<long>(j, "report_bin_width", 50);
  cfg.out_dir = get_or<std::string>(j, "out_dir", "");
  if (j.contains("task")) cfg.task = task_from_json(j.at("task"));

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file: " + file.string());
  json j = json::parse(in);
  return run_config_from_json(j);
}

json resolved_config_json(const RunConfig& cfg) {
  json j;
  j["mode"] = trainer::mode_name(cfg.train.mode);
  j["seed"] = cfg.train.seed;
  j["steps"] = cfg.train.steps;
  if (cfg.train.mode == trainer::Mode::Sequential) {
    j["steps_phase1"] = cfg.train.steps_phase1;
    j["steps_phase2"] = cfg.train.steps_phase2;
  }
  j["group_size"] = cfg.train.group_size;
  j["batch"] = cfg.train.batch;
  j["clip_eps"] = cfg.train.clip_eps;
  j["lr"] = cfg.train.lr;
  j["beta"] = cfg.train.beta;
  j["eps_norm"] = cfg.train.eps_norm;
  j["inner_epochs"] = cfg.train.inner_epochs;
  j["threads"] = cfg.train.threads;
  j["conf_bins"] = cfg.conf_bins;
  j["n_eval"] = cfg.n_eval;
  j["ece_bins"] = cfg.ece_bins;
  j["report_bin_width"] = cfg.report_bin_width;
  j["out_dir"] = cfg.out_dir;
  j["task"] = task_to_json(cfg.task);
  j["vocabulary"] = vocab_to_json(cfg.make_vocab());
  return j;
}

void save_checkpoint(const std::filesystem::path& file, const policy::PolicyParams& params) {
  json j;
  j["version"] = params.version;
  j["shape"] = json{{"n_classes", params.shape.n_classes},
                    {"n_bins", params.shape.n_bins},
                    {"n_ctx", params.shape.n_ctx},
                    {"ans_len", params.shape.ans_len},
                    {"n_ans_out", params.shape.n_ans_out}};
  j["conf"] = params.table.conf;
  j["ans"] = params.table.ans;
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + file.string());
  out << j.dump() << '\n';
}

policy::PolicyParams load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + file.string());
  json j = json::parse(in);
  policy::PolicyParams params;
  const json& s = j.at("shape");
  params.shape = {s.at("n_classes").get<int>(), s.at("n_bins").get<int>(),
                  s.at("n_ctx").get<int>(), s.at("ans_len").get<int>(),
                  s.at("n_ans_out").get<int>()};
  params.version = j.at("version").get<std::uint64_t>();
  params.table.conf = j.at("conf").get<std::vector<double>>();
  params.table.ans = j.at("ans").get<std::vector<double>>();
  if (params.table.conf.size() != params.shape.conf_size() ||
      params.table.ans.size() != params.shape.ans_size())
    throw std::runtime_error("checkpoint: table sizes do not match shape header");
  return params;
}

}  // namespace coca::runio
