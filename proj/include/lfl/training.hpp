#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lfl/dataset.hpp"
#include "lfl/error.hpp"
#include "lfl/model.hpp"
#include "lfl/objective.hpp"

namespace lfl {

enum class Optimizer { sgd, batch };

inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "batch" || s == "lbfgs") return Optimizer::batch;
  throw ConfigError("unknown optimizer '" + s + "'");
}

inline const char* to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "batch"; }

struct TrainConfig {
  Objective objective;
  Optimizer optimizer = Optimizer::sgd;
  std::size_t epochs = 50;
  double learning_rate = 0.05;
  double lr_decay = 0.95;
  std::uint64_t shuffle_seed = 0;
  double init_scale = 0.1;
  std::uint64_t init_seed = 0;
  bool freeze_latent = false;
  double convergence_tol = 1e-9;     // relative objective decrease that stops the batch optimizer
  double gradient_tol = 1e-10;       // infinity-norm gradient threshold for the batch optimizer
  std::size_t max_batch_iters = 500;
  std::size_t lbfgs_memory = 10;
  unsigned threads = 1;              // batch objective/gradient workers; results do not depend on it

  void validate() const {
    objective.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!std::isfinite(learning_rate) || learning_rate < 0) throw ConfigError("learning rate must be finite and >= 0");
    if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("lr_decay must lie in (0, 1]");
    if (!(init_scale >= 0) || !std::isfinite(init_scale)) throw ConfigError("init_scale must be finite and >= 0");
    if (!(convergence_tol >= 0)) throw ConfigError("convergence tolerance must be >= 0");
    if (max_batch_iters < 1) throw ConfigError("max_batch_iters must be >= 1");
  }
};

struct FitReport {
  std::vector<double> trace;  // objective before training, then after each epoch/iteration
  double final_objective = 0.0;
  std::size_t epochs_run = 0;
  double wall_seconds = 0.0;
  bool converged = false;
  std::string message;
};

/// Called after every epoch (SGD) or iteration (batch) with the current model.
using EpochCallback = std::function<void(std::size_t epoch, const LflModel&)>;

/// Free weights i.i.d. uniform on [-init_scale, init_scale]; frozen entries
/// keep their constants. Same (shape, seed, scale) gives bit-identical models.
inline LflModel init_model(const ModelShape& shape, const TrainConfig& config) {
  if (shape.labels.size() == 0) throw ConfigError("label space is empty");
  LflModel m(shape);
  std::mt19937_64 rng(config.init_seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto w = m.parameters();
  for (std::size_t j : m.free_indices()) w[j] = config.init_scale * u(rng);
  return m;
}

namespace detail {

inline void require_finite(double f, const char* where) {
  if (!std::isfinite(f))
    throw NumericalError(std::string("non-finite objective during ") + where +
                         " (learning rate too large?)");
}

}  // namespace detail

/// Stochastic gradient descent over a seeded shuffle of the examples.
///
/// Each step updates the free parameters the example touches with its loss
/// gradient plus its share of the penalty: parameter j receives c_j w_j / m_j,
/// where m_j counts the training examples touching j, so one epoch applies the
/// full penalty gradient once.
inline FitReport fit_sgd(LflModel& model, const DyadDataset& data, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  if (config.optimizer != Optimizer::sgd) throw ConfigError("fit_sgd called with a non-sgd config");
  const auto start = std::chrono::steady_clock::now();
  if (config.freeze_latent) model.set_latent_frozen(true);
  detail::check_compatible(model, data, config.objective);

  const std::size_t P = model.parameter_count();
  const std::size_t L = model.label_count();
  const std::size_t side_dim = model.shape().side_dim;
  const auto coef = penalty_coefficients(model, data, config.objective);

  // m_j: number of examples whose scores depend on parameter j.
  std::vector<std::size_t> touches(P, 0);
  {
    std::vector<std::size_t> stamp(P, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Dyad d = data.dyad(i, side_dim);
      for (std::size_t y = 0; y < L; ++y)
        model.visit_score_partials(d, y, [&](std::size_t j, double) {
          if (stamp[j] != i + 1) {
            stamp[j] = i + 1;
            ++touches[j];
          }
        });
    }
  }

  FitReport report;
  report.trace.push_back(objective_value(model, data, config.objective, config.threads));
  detail::require_finite(report.trace.back(), "sgd");

  std::mt19937_64 rng(config.shuffle_seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> work(L), dscore(L);
  std::vector<std::pair<std::size_t, double>> buf;
  double lr = config.learning_rate;
  auto w = model.parameters();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const Dyad d = data.dyad(i, side_dim);
      detail::example_loss(model, d, data.examples[i].label, config.objective.kind, work, dscore);
      buf.clear();
      for (std::size_t y = 0; y < L; ++y) {
        const double ds = dscore[y];
        model.visit_score_partials(d, y, [&](std::size_t j, double partial) {
          if (!model.is_frozen(j)) buf.emplace_back(j, ds * partial);
        });
      }
      std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      // Gradient is evaluated at the pre-step point: compute all steps, then apply.
      std::size_t out = 0;
      for (std::size_t k = 0; k < buf.size();) {
        const std::size_t j = buf[k].first;
        double g = 0.0;
        for (; k < buf.size() && buf[k].first == j; ++k) g += buf[k].second;
        g += coef[j] * w[j] / static_cast<double>(touches[j]);
        buf[out++] = {j, g};
      }
      for (std::size_t k = 0; k < out; ++k) w[buf[k].first] -= lr * buf[k].second;
    }
    lr *= config.lr_decay;
    report.trace.push_back(objective_value(model, data, config.objective, config.threads));
    detail::require_finite(report.trace.back(), "sgd");
    report.epochs_run = epoch + 1;
    if (on_epoch) on_epoch(epoch + 1, model);
  }
  report.final_objective = report.trace.back();
  report.converged = true;
  report.message = "completed " + std::to_string(report.epochs_run) + " epochs";
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Deterministic full-gradient L-BFGS with backtracking (Armijo) line search.
/// The objective trace is non-increasing. A line-search failure ends the run
/// with the best iterate and converged = false.
inline FitReport fit_batch(LflModel& model, const DyadDataset& data, const TrainConfig& config,
                           const EpochCallback& on_iter = {}) {
  config.validate();
  if (config.optimizer != Optimizer::batch) throw ConfigError("fit_batch called with a non-batch config");
  const auto start = std::chrono::steady_clock::now();
  if (config.freeze_latent) model.set_latent_frozen(true);
  detail::check_compatible(model, data, config.objective);

  const auto& free = model.free_indices();
  const std::size_t n = free.size();
  auto w = model.parameters();
  auto gather = [&](const std::vector<double>& dense) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = dense[free[i]];
    return v;
  };
  auto set_x = [&](const std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) w[free[i]] = x[i];
  };
  auto eval = [&](bool grad) { return evaluate_objective(model, data, config.objective, grad, config.threads); };
  auto dotv = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto inf_norm = [](const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
  };

  FitReport report;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = w[free[i]];
  auto vg = eval(true);
  double f = vg.value;
  detail::require_finite(f, "batch optimisation");
  std::vector<double> g = gather(vg.dense_gradient);
  report.trace.push_back(f);

  std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;  // (s, y)
  std::vector<double> d(n), xt(n);
  report.message = "reached max_batch_iters";

  for (std::size_t iter = 0; iter < config.max_batch_iters; ++iter) {
    if (n == 0 || inf_norm(g) <= config.gradient_tol) {
      report.converged = true;
      report.message = "gradient below tolerance";
      break;
    }
    // Two-loop recursion for d = -H g.
    std::vector<double> q = g;
    std::vector<double> alpha(memory.size());
    for (std::size_t m = memory.size(); m-- > 0;) {
      const auto& [s, y] = memory[m];
      alpha[m] = dotv(s, q) / dotv(y, s);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[m] * y[i];
    }
    double gamma = 1.0;
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      gamma = dotv(s, y) / dotv(y, y);
    } else {
      gamma = 1.0 / std::max(1.0, std::sqrt(dotv(g, g)));
    }
    for (std::size_t i = 0; i < n; ++i) q[i] *= gamma;
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const auto& [s, y] = memory[m];
      const double beta = dotv(y, q) / dotv(y, s);
      for (std::size_t i = 0; i < n; ++i) q[i] += s[i] * (alpha[m] - beta);
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -q[i];
    double slope = dotv(g, d);
    if (!(slope < 0)) {
      memory.clear();
      const double scale = 1.0 / std::max(1.0, std::sqrt(dotv(g, g)));
      for (std::size_t i = 0; i < n; ++i) d[i] = -scale * g[i];
      slope = dotv(g, d);
    }

    double t = 1.0;
    bool accepted = false;
    double f_new = f;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + t * d[i];
      set_x(xt);
      f_new = eval(false).value;
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * t * slope && f_new <= f) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      set_x(x);
      if (!memory.empty()) {
        memory.clear();
        --iter;  // retry this iteration from steepest descent
        continue;
      }
      report.message = "line search failed; returning best iterate";
      break;
    }
    auto vg_new = eval(true);
    std::vector<double> g_new = gather(vg_new.dense_gradient);
    std::vector<double> s(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xt[i] - x[i];
      yv[i] = g_new[i] - g[i];
    }
    const double sy = dotv(s, yv);
    if (sy > 1e-12 * std::sqrt(dotv(s, s) * dotv(yv, yv))) {
      memory.emplace_back(std::move(s), std::move(yv));
      if (memory.size() > config.lbfgs_memory) memory.pop_front();
    }
    const double decrease = f - f_new;
    x = xt;
    g = std::move(g_new);
    f = f_new;
    report.trace.push_back(f);
    report.epochs_run = iter + 1;
    if (on_iter) on_iter(iter + 1, model);
    if (decrease <= config.convergence_tol * std::max(std::abs(report.trace[report.trace.size() - 2]), 1e-300)) {
      report.converged = true;
      report.message = "relative decrease below tolerance";
      break;
    }
  }
  set_x(x);
  report.final_objective = report.trace.back();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline FitReport fit(LflModel& model, const DyadDataset& data, const TrainConfig& config,
                     const EpochCallback& on_epoch = {}) {
  return config.optimizer == Optimizer::sgd ? fit_sgd(model, data, config, on_epoch)
                                            : fit_batch(model, data, config, on_epoch);
}

// ---------------------------------------------------------------------------
// Cold start

struct ColdStartResult {
  LflModel model;  // stage-2 model; latent weights frozen
  FitReport stage1;
  FitReport stage2;
};

/// Block-coordinate training with side-information: fit a latent-only model,
/// copy its latent weights into the side-information model, freeze them, and
/// fit the side weights alone (starting from zero).
inline ColdStartResult fit_coldstart(const ModelShape& shape_with_side, const DyadDataset& data,
                                     const TrainConfig& config, const EpochCallback& on_epoch = {}) {
  if (!data.has_side()) throw DataError("cold-start training needs side features");
  if (shape_with_side.side_dim != data.side_dim)
    throw ConfigError("model side dimension does not match the dataset");

  ModelShape latent_shape = shape_with_side;
  latent_shape.side_dim = 0;
  TrainConfig stage1_cfg = config;
  stage1_cfg.freeze_latent = false;
  LflModel latent = init_model(latent_shape, stage1_cfg);
  FitReport r1 = fit(latent, data, stage1_cfg, on_epoch);

  LflModel full(shape_with_side);
  const auto src = latent.parameters();
  auto dst = full.parameters();
  // Latent blocks precede the side block and share offsets; the optional
  // per-label offsets sit after it.
  const std::size_t side_begin = full.side_index(0, 0);
  std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(side_begin), dst.begin());
  if (shape_with_side.global_bias)
    for (std::size_t y = 0; y < full.label_count(); ++y) full.global_offset(y) = latent.global_offset(y);
  full.set_latent_frozen(true);

  TrainConfig stage2_cfg = config;
  stage2_cfg.freeze_latent = true;
  FitReport r2 = fit(full, data, stage2_cfg, on_epoch);
  return {std::move(full), std::move(r1), std::move(r2)};
}

/// Mean-prediction fallback for dyads with objects absent from training.
///
/// Seen row and column: the model's mean prediction. Unseen row, seen column:
/// average mean prediction over the column's training dyads (and symmetrically
/// for an unseen column). Both unseen: average over the whole training set.
class ColdStartFallback {
 public:
  ColdStartFallback() = default;

  ColdStartFallback(const LflModel& model, const DyadDataset& train) {
    if (model.labels().kind() != LabelKind::ordinal) throw ConfigError("fallback needs an ordinal label space");
    row_sum_.assign(model.shape().rows, 0.0);
    col_sum_.assign(model.shape().cols, 0.0);
    row_n_.assign(model.shape().rows, 0);
    col_n_.assign(model.shape().cols, 0);
    const std::size_t side_dim = model.shape().side_dim;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const Dyad d = train.dyad(i, side_dim);
      const double m = predict_mean(model, d);
      row_sum_[d.row] += m;
      col_sum_[d.col] += m;
      ++row_n_[d.row];
      ++col_n_[d.col];
      global_sum_ += m;
      ++global_n_;
    }
  }

  bool row_seen(std::size_t r) const { return r < row_n_.size() && row_n_[r] > 0; }
  bool col_seen(std::size_t c) const { return c < col_n_.size() && col_n_[c] > 0; }
  double global_mean() const { return global_n_ ? global_sum_ / static_cast<double>(global_n_) : 0.0; }
  double row_mean(std::size_t r) const { return row_sum_[r] / static_cast<double>(row_n_[r]); }
  double col_mean(std::size_t c) const { return col_sum_[c] / static_cast<double>(col_n_[c]); }

  /// `model` must be the model the table was built from.
  double predict(const LflModel& model, const Dyad& d) const {
    const bool rs = row_seen(d.row), cs = col_seen(d.col);
    if (rs && cs) return predict_mean(model, d);
    if (!rs && cs) return col_mean(d.col);
    if (rs && !cs) return row_mean(d.row);
    return global_mean();
  }

  // Raw tables, for serialization alongside a model.
  const std::vector<double>& row_sums() const { return row_sum_; }
  const std::vector<double>& col_sums() const { return col_sum_; }
  const std::vector<std::size_t>& row_counts() const { return row_n_; }
  const std::vector<std::size_t>& col_counts() const { return col_n_; }
  double global_sum() const { return global_sum_; }
  std::size_t global_count() const { return global_n_; }

  static ColdStartFallback from_tables(std::vector<double> row_sum, std::vector<std::size_t> row_n,
                                       std::vector<double> col_sum, std::vector<std::size_t> col_n,
                                       double global_sum, std::size_t global_n) {
    ColdStartFallback f;
    f.row_sum_ = std::move(row_sum);
    f.row_n_ = std::move(row_n);
    f.col_sum_ = std::move(col_sum);
    f.col_n_ = std::move(col_n);
    f.global_sum_ = global_sum;
    f.global_n_ = global_n;
    return f;
  }

 private:
  std::vector<double> row_sum_, col_sum_;
  std::vector<std::size_t> row_n_, col_n_;
  double global_sum_ = 0.0;
  std::size_t global_n_ = 0;
};

inline double predict_coldstart_fallback(const LflModel& model, const DyadDataset& train, const Dyad& dyad) {
  return ColdStartFallback(model, train).predict(model, dyad);
}

}  // namespace lfl
