#include "coca/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <stdexcept>

namespace coca::metrics {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<double> parse_confidence(std::string_view text) {
  constexpr std::string_view open = "<confidence>";
  constexpr std::string_view close = "</confidence>";
  std::size_t a = text.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  std::size_t b = text.find(close, a + open.size());
  if (b == std::string_view::npos) return std::nullopt;

  std::string_view body = trim(text.substr(a + open.size(), b - a - open.size()));
  if (body.empty()) return std::nullopt;

  // Plain decimal only: digits and at most one dot ("0.5", ".5", "1").
  int dots = 0;
  int digits = 0;
  for (char c : body) {
    if (c == '.') {
      ++dots;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      ++digits;
    } else {
      return std::nullopt;  // rejects signs, percentages, words
    }
  }
  if (dots > 1 || digits == 0) return std::nullopt;

  std::string owned(body);
  char* end = nullptr;
  double v = std::strtod(owned.c_str(), &end);
  if (end != owned.c_str() + owned.size()) return std::nullopt;
  if (v < 0.0 || v > 1.0) return std::nullopt;
  return v;
}

double accuracy(std::span<const EvalRecord> records) {
  if (records.empty()) throw std::invalid_argument("accuracy: no records");
  double sum = 0.0;
  for (const EvalRecord& r : records) sum += static_cast<double>(r.label);
  return 100.0 * sum / static_cast<double>(records.size());
}

int ece_bin(double score, int n_bins) {
  int b = static_cast<int>(score * static_cast<double>(n_bins));
  return std::min(b, n_bins - 1);  // s = 1.0 joins the last bin
}

double ece(std::span<const EvalRecord> records, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("ece: need >= 1 bin");
  std::vector<long> count(static_cast<std::size_t>(n_bins), 0);
  std::vector<double> conf(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> acc(static_cast<std::size_t>(n_bins), 0.0);
  long parsed = 0;
  for (const EvalRecord& r : records) {
    if (!r.score) continue;
    auto b = static_cast<std::size_t>(ece_bin(*r.score, n_bins));
    ++count[b];
    conf[b] += *r.score;
    acc[b] += static_cast<double>(r.label);
    ++parsed;
  }
  if (parsed == 0) throw std::invalid_argument("ece: no parsed records");
  double out = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    double n_b = static_cast<double>(count[b]);
    out += (n_b / static_cast<double>(parsed)) * std::abs(acc[b] / n_b - conf[b] / n_b);
  }
  return out;
}

double brier_score(std::span<const EvalRecord> records) {
  double sum = 0.0;
  long parsed = 0;
  for (const EvalRecord& r : records) {
    if (!r.score) continue;
    double d = *r.score - static_cast<double>(r.label);
    sum += d * d;
    ++parsed;
  }
  if (parsed == 0) throw std::invalid_argument("brier_score: no parsed records");
  return sum / static_cast<double>(parsed);
}

std::optional<double> auroc(std::span<const EvalRecord> records) {
  // Rank-sum (Mann-Whitney) form with midranks for ties.
  std::vector<std::pair<double, int>> pts;
  for (const EvalRecord& r : records)
    if (r.score) pts.emplace_back(*r.score, r.label);
  long n_pos = 0;
  for (const auto& [s, y] : pts) n_pos += y;
  long n_neg = static_cast<long>(pts.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i;
    while (j < pts.size() && pts[j].first == pts[i].first) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (pts[k].second == 1) rank_sum_pos += midrank;
    i = j;
  }
  double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

long ttc_of_trajectory(const Trajectory& traj, const Vocabulary& vocab) {
  for (std::size_t t = 0; t < traj.tokens.size(); ++t)
    if (traj.tokens[t] == vocab.conf_close()) return static_cast<long>(t + 1);
  return static_cast<long>(traj.tokens.size());
}

double success_rate(std::span<const EvalRecord> records) {
  if (records.empty()) throw std::invalid_argument("success_rate: no records");
  long parsed = 0;
  for (const EvalRecord& r : records) parsed += r.score ? 1 : 0;
  return static_cast<double>(parsed) / static_cast<double>(records.size());
}

std::vector<ReliabilityRow> reliability_table(std::span<const EvalRecord> records,
                                              int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("reliability_table: need >= 1 bin");
  std::vector<ReliabilityRow> rows(static_cast<std::size_t>(n_bins));
  std::vector<double> conf(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> acc(static_cast<std::size_t>(n_bins), 0.0);
  for (int b = 0; b < n_bins; ++b) {
    rows[static_cast<std::size_t>(b)].bin_lo =
        static_cast<double>(b) / static_cast<double>(n_bins);
    rows[static_cast<std::size_t>(b)].bin_hi =
        static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  for (const EvalRecord& r : records) {
    if (!r.score) continue;
    auto b = static_cast<std::size_t>(ece_bin(*r.score, n_bins));
    ++rows[b].count;
    conf[b] += *r.score;
    acc[b] += static_cast<double>(r.label);
  }
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b].count == 0) continue;
    rows[b].mean_conf = conf[b] / static_cast<double>(rows[b].count);
    rows[b].mean_acc = acc[b] / static_cast<double>(rows[b].count);
  }
  return rows;
}

}  // namespace coca::metrics
