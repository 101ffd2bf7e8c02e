#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lfl {

struct MetricReport {
  std::string metric;
  double value = 0.0;
  std::size_t count = 0;
  std::optional<double> std;  // across-run deviation when aggregated
};

namespace detail {
inline void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("prediction and truth lengths differ");
  if (a == 0) throw std::invalid_argument("need at least one example");
}
}  // namespace detail

template <class T>
double zero_one_error(std::span<const T> predictions, std::span<const T> truth) {
  detail::check_lengths(predictions.size(), truth.size());
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predictions[i] != truth[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

inline double zero_one_error(const std::vector<std::size_t>& p, const std::vector<std::size_t>& t) {
  return zero_one_error<std::size_t>(p, t);
}

inline double mae(std::span<const double> predictions, std::span<const double> truth) {
  detail::check_lengths(predictions.size(), truth.size());
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(predictions[i] - truth[i]);
  return s / static_cast<double>(truth.size());
}

inline double rmse(std::span<const double> predictions, std::span<const double> truth) {
  detail::check_lengths(predictions.size(), truth.size());
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = predictions[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(truth.size()));
}

/// Mann-Whitney AUC: P(score_pos > score_neg) + P(tie) / 2, via average ranks.
inline double auc(std::span<const double> scores, std::span<const int> truth) {
  detail::check_lengths(scores.size(), truth.size());
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t m = i; m < j; ++m)
      if (truth[order[m]] != 0) {
        pos_rank_sum += avg_rank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("AUC needs both positive and negative examples");
  const double u = pos_rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

struct CalibrationBin {
  double mean_predicted = 0.0;
  double frequency = 0.0;
  std::size_t count = 0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
};

/// Equal-width reliability bins over predicted probabilities of the event
/// `truth[i] != 0`; ECE = sum_b (n_b / n) |freq_b - mean_pred_b|.
inline CalibrationReport calibration_report(std::span<const double> probabilities, std::span<const int> truth,
                                            std::size_t bins = 10) {
  detail::check_lengths(probabilities.size(), truth.size());
  if (bins < 1) throw std::invalid_argument("need at least one bin");
  std::vector<double> psum(bins, 0.0), hits(bins, 0.0);
  CalibrationReport rep;
  rep.bins.resize(bins);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double p = probabilities[i];
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
    const auto b = std::min(bins - 1, static_cast<std::size_t>(p * static_cast<double>(bins)));
    psum[b] += p;
    hits[b] += truth[i] != 0 ? 1.0 : 0.0;
    ++rep.bins[b].count;
  }
  const double n = static_cast<double>(truth.size());
  for (std::size_t b = 0; b < bins; ++b) {
    auto& bin = rep.bins[b];
    if (bin.count == 0) continue;
    bin.mean_predicted = psum[b] / static_cast<double>(bin.count);
    bin.frequency = hits[b] / static_cast<double>(bin.count);
    rep.ece += (static_cast<double>(bin.count) / n) * std::abs(bin.frequency - bin.mean_predicted);
  }
  return rep;
}

/// Mean and sample standard deviation of per-run values.
inline MetricReport aggregate(const std::string& metric, std::span<const double> runs, std::size_t count) {
  if (runs.empty()) throw std::invalid_argument("no runs to aggregate");
  MetricReport r{metric, 0.0, count, std::nullopt};
  for (double v : runs) r.value += v;
  r.value /= static_cast<double>(runs.size());
  if (runs.size() > 1) {
    double ss = 0.0;
    for (double v : runs) ss += (v - r.value) * (v - r.value);
    r.std = std::sqrt(ss / static_cast<double>(runs.size() - 1));
  }
  return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j{{"metric", r.metric}, {"value", r.value}, {"count", r.count}};
  j["std"] = r.std ? nlohmann::json(*r.std) : nlohmann::json(nullptr);
  return j;
}

inline void print_metric_table(std::ostream& out, std::span<const MetricReport> reports) {
  std::size_t w = 6;
  for (const auto& r : reports) w = std::max(w, r.metric.size());
  out << std::left << std::setw(static_cast<int>(w)) << "metric" << "  " << std::right << std::setw(12) << "value"
      << "  " << std::setw(8) << "count" << "  " << std::setw(10) << "std" << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(w)) << r.metric << "  " << std::right << std::setw(12)
        << std::fixed << std::setprecision(6) << r.value << "  " << std::setw(8) << r.count << "  "
        << std::setw(10);
    if (r.std) out << *r.std;
    else out << "-";
    out << '\n';
    out.unsetf(std::ios::fixed);
  }
}

}  // namespace lfl
