#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lfl/dataset.hpp"
#include "lfl/error.hpp"
#include "lfl/model.hpp"
#include "lfl/parallel.hpp"

namespace lfl {

enum class Loss { nll, mae, mse };

inline Loss loss_from_string(const std::string& s) {
  if (s == "nll") return Loss::nll;
  if (s == "mae") return Loss::mae;
  if (s == "mse") return Loss::mse;
  throw ConfigError("unknown objective '" + s + "'");
}

inline const char* to_string(Loss l) {
  switch (l) {
    case Loss::nll: return "nll";
    case Loss::mae: return "mae";
    case Loss::mse: return "mse";
  }
  return "?";
}

/// Training objective: a data loss plus (1/2) sum_j c_j w_j^2 over free weights.
struct Objective {
  Loss kind = Loss::nll;
  double l2_latent = 0.0;
  double l2_side = 0.0;
  bool count_scaled = false;  // scale each object's penalty by 1/sqrt(its training count)

  void validate() const {
    if (!std::isfinite(l2_latent) || l2_latent < 0) throw ConfigError("l2_latent must be finite and >= 0");
    if (!std::isfinite(l2_side) || l2_side < 0) throw ConfigError("l2_side must be finite and >= 0");
  }
};

/// Gradient over a model's free parameters, in `model.free_indices()` order.
/// Frozen entries (base label, bias constants, frozen latents) have no slot.
struct GradientSet {
  std::vector<std::size_t> index;  // flat parameter index of each entry
  std::vector<double> value;

  std::size_t size() const { return value.size(); }

  std::vector<double> dense(std::size_t parameter_count) const {
    std::vector<double> out(parameter_count, 0.0);
    for (std::size_t i = 0; i < index.size(); ++i) out[index[i]] = value[i];
    return out;
  }
};

namespace detail {

inline void check_compatible(const LflModel& model, const DyadDataset& data, const Objective& obj) {
  obj.validate();
  if (obj.kind != Loss::nll && model.labels().kind() != LabelKind::ordinal)
    throw ConfigError(std::string(to_string(obj.kind)) + " objective needs an ordinal label space");
  if (data.labels.size() != model.label_count()) throw DataError("dataset and model label counts differ");
  if (data.rows > model.shape().rows || data.cols > model.shape().cols)
    throw DataError("dataset has more objects than the model");
  if (model.has_side() && data.side_dim != model.shape().side_dim)
    throw DataError("dataset side dimension does not match the model");
  if (data.relations > 1 && model.variant() != Variant::multi_relational)
    throw DataError("dataset has several relations but the model is not multi-relational");
  if (model.variant() == Variant::multi_relational && data.relations > model.shape().relations)
    throw DataError("dataset has more relations than the model");
}

/// Loss of one example and d loss / d score_y for every label.
/// `work` must hold label_count() doubles; `dscore` receives the partials.
inline double example_loss(const LflModel& model, const Dyad& d, std::size_t label, Loss loss,
                           std::span<double> work, std::span<double> dscore) {
  const std::size_t L = model.label_count();
  model.scores(d, work);
  double m = -std::numeric_limits<double>::infinity();
  for (double s : work) m = std::max(m, s);
  double z = 0.0;
  for (double s : work) z += std::exp(s - m);
  const double lse = m + std::log(z);
  const double s_true = work[label];
  for (std::size_t y = 0; y < L; ++y) work[y] = std::exp(work[y] - lse);  // probabilities

  if (loss == Loss::nll) {
    for (std::size_t y = 0; y < L; ++y) dscore[y] = work[y] - (y == label ? 1.0 : 0.0);
    return lse - s_true;
  }
  const auto& v = model.labels().values();
  double mean = 0.0;
  for (std::size_t y = 0; y < L; ++y) mean += v[y] * work[y];
  const double resid = mean - v[label];
  double value = 0.0, outer = 0.0;
  if (loss == Loss::mae) {
    value = std::abs(resid);
    outer = resid > 0 ? 1.0 : (resid < 0 ? -1.0 : 0.0);
  } else {
    value = resid * resid;
    outer = 2.0 * resid;
  }
  // d mean / d score_Y = p_Y (v_Y - mean)
  for (std::size_t y = 0; y < L; ++y) dscore[y] = outer * work[y] * (v[y] - mean);
  return value;
}

}  // namespace detail

/// Per-parameter penalty coefficients c_j, so the penalty is (1/2) sum c_j w_j^2.
/// Latent weights use l2_latent, side weights l2_side, frozen entries 0. With
/// count scaling, object-owned weights are multiplied by 1/sqrt(n_obj) for
/// objects seen n_obj > 0 times in `data`.
inline std::vector<double> penalty_coefficients(const LflModel& model, const DyadDataset& data,
                                                const Objective& obj) {
  std::vector<double> c(model.parameter_count(), 0.0);
  const bool link = is_link_variant(model.variant());
  for (std::size_t j : model.free_indices()) {
    if (model.is_side_parameter(j)) {
      c[j] = obj.l2_side;
      continue;
    }
    double scale = 1.0;
    if (obj.count_scaled) {
      if (auto owner = model.owner_of(j)) {
        std::size_t n = 0;
        const bool in_data = owner->is_row ? owner->index < data.rows : owner->index < data.cols;
        if (in_data) {
          if (link || data.shared_ids) {
            n = (owner->index < data.rows ? data.row_counts[owner->index] : 0) +
                (owner->index < data.cols ? data.col_counts[owner->index] : 0);
          } else {
            n = owner->is_row ? data.row_counts[owner->index] : data.col_counts[owner->index];
          }
        }
        if (n > 0) scale = 1.0 / std::sqrt(static_cast<double>(n));
      }
    }
    c[j] = obj.l2_latent * scale;
  }
  return c;
}

inline double penalty_value(const LflModel& model, std::span<const double> coef) {
  const auto w = model.parameters();
  double p = 0.0;
  for (std::size_t j : model.free_indices()) p += coef[j] * w[j] * w[j];
  return 0.5 * p;
}

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> dense_gradient;  // over all stored parameters, zeros at frozen
};

/// Objective value and (optionally) its dense gradient, accumulated in fixed
/// example chunks reduced in order, so results do not depend on thread count.
inline ValueAndGradient evaluate_objective(const LflModel& model, const DyadDataset& data,
                                           const Objective& obj, bool with_gradient,
                                           unsigned threads = 1) {
  detail::check_compatible(model, data, obj);
  const auto coef = penalty_coefficients(model, data, obj);
  const std::size_t P = model.parameter_count();
  const std::size_t L = model.label_count();
  const std::size_t side_dim = model.shape().side_dim;
  const auto bounds = chunk_bounds(data.size());
  const std::size_t chunks = bounds.size() - 1;
  std::vector<double> chunk_loss(chunks, 0.0);
  std::vector<std::vector<double>> chunk_grad(with_gradient ? chunks : 0);

  for_each_chunk(bounds, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    std::vector<double> work(L), dscore(L);
    std::vector<double>* g = nullptr;
    if (with_gradient) {
      chunk_grad[c].assign(P, 0.0);
      g = &chunk_grad[c];
    }
    double loss = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      const Dyad d = data.dyad(i, side_dim);
      loss += detail::example_loss(model, d, data.examples[i].label, obj.kind, work, dscore);
      if (!g) continue;
      for (std::size_t y = 0; y < L; ++y) {
        const double ds = dscore[y];
        if (ds == 0.0) continue;
        model.visit_score_partials(d, y, [&](std::size_t j, double partial) { (*g)[j] += ds * partial; });
      }
    }
    chunk_loss[c] = loss;
  });

  ValueAndGradient out;
  double loss = 0.0;
  for (double l : chunk_loss) loss += l;
  out.value = loss + penalty_value(model, coef);
  if (with_gradient) {
    out.dense_gradient.assign(P, 0.0);
    for (const auto& g : chunk_grad)
      for (std::size_t j = 0; j < P; ++j) out.dense_gradient[j] += g[j];
    const auto w = model.parameters();
    for (std::size_t j = 0; j < P; ++j) {
      if (model.is_frozen(j)) out.dense_gradient[j] = 0.0;
      else out.dense_gradient[j] += coef[j] * w[j];
    }
  }
  return out;
}

inline double objective_value(const LflModel& model, const DyadDataset& data, const Objective& obj,
                              unsigned threads = 1) {
  return evaluate_objective(model, data, obj, false, threads).value;
}

inline GradientSet to_gradient_set(const LflModel& model, std::span<const double> dense) {
  GradientSet g;
  g.index = model.free_indices();
  g.value.reserve(g.index.size());
  for (std::size_t j : g.index) g.value.push_back(dense[j]);
  return g;
}

/// Exact analytic gradient of objective_value over every free parameter.
inline GradientSet gradient(const LflModel& model, const DyadDataset& data, const Objective& obj,
                            unsigned threads = 1) {
  const auto vg = evaluate_objective(model, data, obj, true, threads);
  return to_gradient_set(model, vg.dense_gradient);
}

/// Central difference (f(x+h) - f(x-h)) / 2h of a scalar function.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  if (!(h > 0)) throw std::invalid_argument("finite-difference step must be positive");
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Central-difference gradient of objective_value, one free parameter at a time.
inline GradientSet finite_difference_oracle(const LflModel& model, const DyadDataset& data,
                                            const Objective& obj, double h = 1e-5) {
  if (!(h > 0)) throw std::invalid_argument("finite-difference step must be positive");
  LflModel probe = model;
  GradientSet g;
  g.index = model.free_indices();
  g.value.reserve(g.index.size());
  for (std::size_t j : g.index) {
    const double w0 = probe.parameters()[j];
    probe.parameters()[j] = w0 + h;
    const double up = objective_value(probe, data, obj);
    probe.parameters()[j] = w0 - h;
    const double down = objective_value(probe, data, obj);
    probe.parameters()[j] = w0;
    g.value.push_back((up - down) / (2.0 * h));
  }
  return g;
}

struct GradientComparison {
  double max_abs = 0.0;   // max |analytic - numeric|
  double max_rel = 0.0;   // max |analytic - numeric| / max(|analytic|, |numeric|, abs_floor)
  std::size_t failures = 0;
  std::size_t count = 0;
  bool ok() const { return failures == 0; }
};

/// An entry passes when |a - n| <= max(abs_floor, rel_tol * max(|a|, |n|)).
inline GradientComparison compare_gradients(const GradientSet& analytic, const GradientSet& numeric,
                                            double rel_tol = 1e-4, double abs_floor = 1e-6) {
  if (analytic.index != numeric.index) throw std::invalid_argument("gradient layouts differ");
  GradientComparison c;
  c.count = analytic.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic.value[i], n = numeric.value[i];
    const double diff = std::abs(a - n);
    const double scale = std::max(std::abs(a), std::abs(n));
    c.max_abs = std::max(c.max_abs, diff);
    c.max_rel = std::max(c.max_rel, diff / std::max(scale, abs_floor));
    if (diff > std::max(abs_floor, rel_tol * scale)) ++c.failures;
  }
  return c;
}

}  // namespace lfl
