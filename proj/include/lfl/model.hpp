#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lfl/error.hpp"
#include "lfl/label_space.hpp"
#include "lfl/matrix.hpp"

namespace lfl {

enum class Variant { dyadic, symmetric_link, directed_link, multi_relational, stereotype };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::dyadic: return "dyadic";
    case Variant::symmetric_link: return "symmetric-link";
    case Variant::directed_link: return "directed-link";
    case Variant::multi_relational: return "multi-relational";
    case Variant::stereotype: return "stereotype";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "dyadic") return Variant::dyadic;
  if (s == "symmetric-link" || s == "link-sym") return Variant::symmetric_link;
  if (s == "directed-link" || s == "link-dir") return Variant::directed_link;
  if (s == "multi-relational" || s == "multirel") return Variant::multi_relational;
  if (s == "stereotype") return Variant::stereotype;
  throw ConfigError("unknown variant '" + s + "'");
}

inline bool is_link_variant(Variant v) {
  return v == Variant::symmetric_link || v == Variant::directed_link ||
         v == Variant::multi_relational;
}

/// Everything that fixes the parameter layout of a model.
struct ModelShape {
  LabelSpace labels;
  Variant variant = Variant::dyadic;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t rank = 0;           // free latent factors, bias columns excluded
  bool bias = true;               // two extra factor columns acting as row/column biases
  bool global_bias = false;       // per-label offset (the bias-only baseline uses this)
  std::size_t side_dim = 0;
  std::size_t stereotype_rank = 0;  // number of shared base weight pairs
  std::size_t relations = 1;        // multi-relational only

  std::size_t factor_count() const { return rank + (bias ? 2 : 0); }

  void validate() const {
    if (labels.size() < 2) throw ConfigError("need at least two labels");
    if (variant == Variant::symmetric_link && bias)
      throw ConfigError("symmetric-link shares one weight matrix; bias columns are not supported");
    if (is_link_variant(variant)) {
      if (labels.size() != 2) throw ConfigError(std::string(to_string(variant)) + " needs exactly two labels");
      if (rows != cols) throw ConfigError("link variants need rows == cols");
    }
    if (variant == Variant::multi_relational && relations == 0)
      throw ConfigError("multi-relational model needs at least one relation");
    if (variant == Variant::stereotype && stereotype_rank == 0)
      throw ConfigError("stereotype model needs stereotype_rank >= 1");
  }

  bool operator==(const ModelShape&) const = default;
};

/// A (row, column) pair to score. `side` must have exactly the model's side_dim
/// entries (empty for models without side weights).
struct Dyad {
  std::size_t row = 0;
  std::size_t col = 0;
  std::span<const double> side = {};
  std::size_t relation = 0;
};

struct LabelDistribution {
  std::vector<double> probs;
};

/// In-place softmax with max subtraction.
inline void softmax_inplace(std::span<double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  double z = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    z += x;
  }
  for (double& x : v) x /= z;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Latent feature log-linear model.
///
/// All parameters live in one flat vector. Blocks, in storage order:
///   alpha   sets x rows x K   (sets = labels, or base pairs for stereotype)
///   beta    sets x cols x K   (absent for symmetric-link; aliases alpha)
///   gamma   labels x rows x rank          (directed-link only)
///   lambda  relations x K                 (multi-relational only)
///   phi     pairs x labels                (stereotype only)
///   side    labels x side_dim
///   offset  labels                        (global_bias only)
/// where K = factor_count(). Base-label blocks are stored as zeros and frozen.
/// With bias on, alpha column 0 and beta column 1 hold a frozen constant 1 for
/// every non-base set, so the paired entries act as column and row biases.
class LflModel {
 public:
  LflModel() = default;

  explicit LflModel(ModelShape shape) : shape_(std::move(shape)) {
    shape_.validate();
    layout();
    weights_.assign(total_, 0.0);
    rebuild_frozen();
    reset_constants();
  }

  const ModelShape& shape() const { return shape_; }
  const LabelSpace& labels() const { return shape_.labels; }
  Variant variant() const { return shape_.variant; }
  std::size_t label_count() const { return shape_.labels.size(); }
  std::size_t base_label() const { return shape_.labels.base_index(); }
  std::size_t factor_count() const { return shape_.factor_count(); }
  std::size_t set_count() const {
    return shape_.variant == Variant::stereotype ? shape_.stereotype_rank : label_count();
  }
  bool has_side() const { return shape_.side_dim > 0; }

  std::span<const double> parameters() const { return weights_; }
  std::span<double> parameters() { return weights_; }
  std::size_t parameter_count() const { return total_; }
  bool is_frozen(std::size_t j) const { return frozen_[j] != 0; }
  const std::vector<std::size_t>& free_indices() const { return free_; }
  std::size_t free_count() const { return free_.size(); }

  /// Freezes every parameter except the side weights (block-coordinate stage).
  void set_latent_frozen(bool on) {
    latent_frozen_ = on;
    rebuild_frozen();
  }
  bool latent_frozen() const { return latent_frozen_; }

  /// Restores the frozen constants (base zeros and bias ones).
  void reset_constants() {
    for (std::size_t j = 0; j < total_; ++j)
      if (constant_[j] >= 0) weights_[j] = constant_[j];
  }

  // Flat index helpers.
  std::size_t alpha_index(std::size_t set, std::size_t r, std::size_t i = 0) const {
    return alpha_off_ + (set * shape_.rows + r) * factor_count() + i;
  }
  std::size_t beta_index(std::size_t set, std::size_t c, std::size_t i = 0) const {
    return beta_off_ + (set * shape_.cols + c) * factor_count() + i;
  }
  std::size_t gamma_index(std::size_t y, std::size_t n, std::size_t i = 0) const {
    return gamma_off_ + (y * shape_.rows + n) * shape_.rank + i;
  }
  std::size_t lambda_index(std::size_t t, std::size_t i = 0) const {
    return lambda_off_ + t * factor_count() + i;
  }
  std::size_t phi_index(std::size_t pair, std::size_t y) const {
    return phi_off_ + pair * label_count() + y;
  }
  std::size_t side_index(std::size_t y, std::size_t j = 0) const {
    return side_off_ + y * shape_.side_dim + j;
  }
  std::size_t offset_index(std::size_t y) const { return offset_off_ + y; }

  // Block views. `set` is a label index, or a base-pair index for stereotype.
  std::span<const double> row_weights(std::size_t set, std::size_t r) const {
    return {weights_.data() + alpha_index(set, r), factor_count()};
  }
  std::span<double> row_weights(std::size_t set, std::size_t r) {
    return {weights_.data() + alpha_index(set, r), factor_count()};
  }
  std::span<const double> col_weights(std::size_t set, std::size_t c) const {
    return {weights_.data() + beta_index(set, c), factor_count()};
  }
  std::span<double> col_weights(std::size_t set, std::size_t c) {
    return {weights_.data() + beta_index(set, c), factor_count()};
  }
  std::span<const double> node_weights(std::size_t y, std::size_t n) const {
    require(shape_.variant == Variant::directed_link, "node weights exist only for directed-link");
    return {weights_.data() + gamma_index(y, n), shape_.rank};
  }
  std::span<double> node_weights(std::size_t y, std::size_t n) {
    require(shape_.variant == Variant::directed_link, "node weights exist only for directed-link");
    return {weights_.data() + gamma_index(y, n), shape_.rank};
  }
  std::span<const double> relation_scaling(std::size_t t) const {
    require(shape_.variant == Variant::multi_relational, "relation scaling exists only for multi-relational");
    if (t >= shape_.relations) throw std::out_of_range("relation index out of range");
    return {weights_.data() + lambda_index(t), factor_count()};
  }
  std::span<double> relation_scaling(std::size_t t) {
    require(shape_.variant == Variant::multi_relational, "relation scaling exists only for multi-relational");
    if (t >= shape_.relations) throw std::out_of_range("relation index out of range");
    return {weights_.data() + lambda_index(t), factor_count()};
  }
  double stereotype_coef(std::size_t pair, std::size_t y) const {
    require(shape_.variant == Variant::stereotype, "phi exists only for stereotype");
    return weights_[phi_index(pair, y)];
  }
  double& stereotype_coef(std::size_t pair, std::size_t y) {
    require(shape_.variant == Variant::stereotype, "phi exists only for stereotype");
    return weights_[phi_index(pair, y)];
  }
  std::span<const double> side_weights(std::size_t y) const {
    return {weights_.data() + side_index(y), shape_.side_dim};
  }
  std::span<double> side_weights(std::size_t y) {
    return {weights_.data() + side_index(y), shape_.side_dim};
  }
  double global_offset(std::size_t y) const {
    require(shape_.global_bias, "model has no global offsets");
    return weights_[offset_index(y)];
  }
  double& global_offset(std::size_t y) {
    require(shape_.global_bias, "model has no global offsets");
    return weights_[offset_index(y)];
  }

  void check_dyad(const Dyad& d) const {
    if (d.row >= shape_.rows) throw std::out_of_range("row index out of range");
    if (d.col >= shape_.cols) throw std::out_of_range("column index out of range");
    if (d.side.size() != shape_.side_dim)
      throw std::invalid_argument("side dimension mismatch: expected " +
                                  std::to_string(shape_.side_dim) + ", got " +
                                  std::to_string(d.side.size()));
    if (shape_.variant == Variant::multi_relational && d.relation >= shape_.relations)
      throw std::out_of_range("relation index out of range");
  }

  /// Log-odds of label y against the base label. No bounds checking.
  double score(const Dyad& d, std::size_t y) const {
    if (y == base_label() && shape_.variant != Variant::stereotype) return 0.0;
    const double* w = weights_.data();
    const std::size_t k = factor_count();
    double s = 0.0;
    switch (shape_.variant) {
      case Variant::dyadic:
      case Variant::symmetric_link:
        s = dot({w + alpha_index(y, d.row), k}, {w + beta_index(y, d.col), k});
        break;
      case Variant::directed_link:
        s = dot({w + alpha_index(y, d.row), k}, {w + beta_index(y, d.col), k}) +
            dot({w + gamma_index(y, d.row), shape_.rank}, {w + gamma_index(y, d.col), shape_.rank});
        break;
      case Variant::multi_relational: {
        const double* a = w + alpha_index(y, d.row);
        const double* b = w + beta_index(y, d.col);
        const double* l = w + lambda_index(d.relation);
        for (std::size_t i = 0; i < k; ++i) s += a[i] * l[i] * b[i];
        break;
      }
      case Variant::stereotype:
        for (std::size_t p = 0; p < shape_.stereotype_rank; ++p) {
          const double phi = w[phi_index(p, y)];
          if (phi != 0.0) s += phi * dot({w + alpha_index(p, d.row), k}, {w + beta_index(p, d.col), k});
        }
        break;
    }
    if (has_side()) s += dot({w + side_index(y), shape_.side_dim}, d.side);
    if (shape_.global_bias) s += w[offset_index(y)];
    return s;
  }

  void scores(const Dyad& d, std::span<double> out) const {
    for (std::size_t y = 0; y < label_count(); ++y) out[y] = score(d, y);
  }

  void probabilities(const Dyad& d, std::span<double> out) const {
    scores(d, out);
    softmax_inplace(out);
  }

  /// Calls sink(flat_index, d score(d, y) / d w) for every stored parameter the
  /// label-y score depends on. Frozen parameters are visited too; callers mask.
  /// An index can be visited twice (symmetric-link self pairs); partials add.
  template <class Sink>
  void visit_score_partials(const Dyad& d, std::size_t y, Sink&& sink) const {
    const double* w = weights_.data();
    const std::size_t k = factor_count();
    switch (shape_.variant) {
      case Variant::dyadic:
      case Variant::symmetric_link:
      case Variant::directed_link: {
        const std::size_t a = alpha_index(y, d.row);
        const std::size_t b = beta_index(y, d.col);
        for (std::size_t i = 0; i < k; ++i) {
          sink(a + i, w[b + i]);
          sink(b + i, w[a + i]);
        }
        if (shape_.variant == Variant::directed_link) {
          const std::size_t gr = gamma_index(y, d.row);
          const std::size_t gc = gamma_index(y, d.col);
          for (std::size_t i = 0; i < shape_.rank; ++i) {
            sink(gr + i, w[gc + i]);
            sink(gc + i, w[gr + i]);
          }
        }
        break;
      }
      case Variant::multi_relational: {
        const std::size_t a = alpha_index(y, d.row);
        const std::size_t b = beta_index(y, d.col);
        const std::size_t l = lambda_index(d.relation);
        for (std::size_t i = 0; i < k; ++i) {
          sink(a + i, w[l + i] * w[b + i]);
          sink(b + i, w[l + i] * w[a + i]);
          sink(l + i, w[a + i] * w[b + i]);
        }
        break;
      }
      case Variant::stereotype:
        for (std::size_t p = 0; p < shape_.stereotype_rank; ++p) {
          const std::size_t a = alpha_index(p, d.row);
          const std::size_t b = beta_index(p, d.col);
          const double phi = w[phi_index(p, y)];
          sink(phi_index(p, y), dot({w + a, k}, {w + b, k}));
          for (std::size_t i = 0; i < k; ++i) {
            sink(a + i, phi * w[b + i]);
            sink(b + i, phi * w[a + i]);
          }
        }
        break;
    }
    if (has_side()) {
      const std::size_t s = side_index(y);
      for (std::size_t j = 0; j < shape_.side_dim; ++j) sink(s + j, d.side[j]);
    }
    if (shape_.global_bias) sink(offset_index(y), 1.0);
  }

  /// Which row/col/node object a parameter belongs to, for count-scaled
  /// regularization. Returns nullopt for parameters not tied to an object.
  struct ObjectRef {
    bool is_row;  // false: column object
    std::size_t index;
  };
  std::optional<ObjectRef> owner_of(std::size_t j) const {
    const std::size_t k = factor_count();
    if (j >= alpha_off_ && j < alpha_end_) return ObjectRef{true, ((j - alpha_off_) / k) % shape_.rows};
    if (j >= beta_off_ && j < beta_end_) return ObjectRef{false, ((j - beta_off_) / k) % shape_.cols};
    if (j >= gamma_off_ && j < gamma_end_) return ObjectRef{true, ((j - gamma_off_) / shape_.rank) % shape_.rows};
    return std::nullopt;
  }
  bool is_side_parameter(std::size_t j) const { return j >= side_off_ && j < side_end_; }

  bool operator==(const LflModel& o) const {
    return shape_ == o.shape_ && latent_frozen_ == o.latent_frozen_ && weights_ == o.weights_;
  }

 private:
  static void require(bool ok, const char* what) {
    if (!ok) throw std::logic_error(what);
  }

  void layout() {
    const std::size_t k = factor_count();
    const std::size_t sets = set_count();
    const std::size_t labels = label_count();
    std::size_t off = 0;
    alpha_off_ = off;
    off += sets * shape_.rows * k;
    alpha_end_ = off;
    if (shape_.variant == Variant::symmetric_link) {
      beta_off_ = alpha_off_;
      beta_end_ = alpha_off_;  // owner_of resolves shared entries through alpha
    } else {
      beta_off_ = off;
      off += sets * shape_.cols * k;
      beta_end_ = off;
    }
    gamma_off_ = off;
    if (shape_.variant == Variant::directed_link) off += labels * shape_.rows * shape_.rank;
    gamma_end_ = off;
    lambda_off_ = off;
    if (shape_.variant == Variant::multi_relational) off += shape_.relations * k;
    phi_off_ = off;
    if (shape_.variant == Variant::stereotype) off += shape_.stereotype_rank * labels;
    side_off_ = off;
    off += labels * shape_.side_dim;
    side_end_ = off;
    offset_off_ = off;
    if (shape_.global_bias) off += labels;
    total_ = off;
  }

  void rebuild_frozen() {
    frozen_.assign(total_, 0);
    constant_.assign(total_, -1.0);
    const std::size_t k = factor_count();
    const std::size_t base = base_label();
    const bool per_label = shape_.variant != Variant::stereotype;
    auto pin = [&](std::size_t j, double v) {
      frozen_[j] = 1;
      constant_[j] = v;
    };
    for (std::size_t s = 0; s < set_count(); ++s) {
      const bool base_set = per_label && s == base;
      for (std::size_t r = 0; r < shape_.rows; ++r)
        for (std::size_t i = 0; i < k; ++i) {
          const std::size_t j = alpha_index(s, r, i);
          if (base_set) pin(j, 0.0);
          else if (shape_.bias && i == 0) pin(j, 1.0);
        }
      if (shape_.variant == Variant::symmetric_link) continue;
      for (std::size_t c = 0; c < shape_.cols; ++c)
        for (std::size_t i = 0; i < k; ++i) {
          const std::size_t j = beta_index(s, c, i);
          if (base_set) pin(j, 0.0);
          else if (shape_.bias && i == 1) pin(j, 1.0);
        }
    }
    if (shape_.variant == Variant::directed_link)
      for (std::size_t n = 0; n < shape_.rows; ++n)
        for (std::size_t i = 0; i < shape_.rank; ++i) pin(gamma_index(base, n, i), 0.0);
    if (shape_.variant == Variant::stereotype)
      for (std::size_t p = 0; p < shape_.stereotype_rank; ++p) pin(phi_index(p, base), 0.0);
    for (std::size_t j = 0; j < shape_.side_dim; ++j) pin(side_index(base, j), 0.0);
    if (shape_.global_bias) pin(offset_index(base), 0.0);

    if (latent_frozen_)
      for (std::size_t j = 0; j < total_; ++j)
        if (!is_side_parameter(j)) frozen_[j] = 1;

    free_.clear();
    for (std::size_t j = 0; j < total_; ++j)
      if (!frozen_[j]) free_.push_back(j);
  }

  ModelShape shape_;
  std::vector<double> weights_;
  std::vector<unsigned char> frozen_;
  std::vector<double> constant_;  // value of frozen constants, -1 marks "not a constant"
  std::vector<std::size_t> free_;
  bool latent_frozen_ = false;
  std::size_t alpha_off_ = 0, alpha_end_ = 0, beta_off_ = 0, beta_end_ = 0;
  std::size_t gamma_off_ = 0, gamma_end_ = 0, lambda_off_ = 0, phi_off_ = 0;
  std::size_t side_off_ = 0, side_end_ = 0, offset_off_ = 0, total_ = 0;
};

// ---------------------------------------------------------------------------
// Forward computations

inline LabelDistribution predict_proba(const LflModel& model, const Dyad& dyad) {
  model.check_dyad(dyad);
  LabelDistribution out{std::vector<double>(model.label_count())};
  model.probabilities(dyad, out.probs);
  return out;
}

/// Bias-only log-linear baseline: p(y) proportional to exp(a_ry + b_cy + g_y).
/// Realised as a rank-0 dyadic model with bias columns and global offsets.
inline LabelDistribution predict_proba_baseline(const LflModel& model, const Dyad& dyad) {
  const auto& s = model.shape();
  if (s.variant != Variant::dyadic || s.rank != 0 || !s.bias || !s.global_bias)
    throw ConfigError("baseline needs a dyadic rank-0 model with bias and global offsets");
  return predict_proba(model, dyad);
}

/// Builds the bias-only baseline shape.
inline ModelShape baseline_shape(LabelSpace labels, std::size_t rows, std::size_t cols) {
  ModelShape s;
  s.labels = std::move(labels);
  s.rows = rows;
  s.cols = cols;
  s.rank = 0;
  s.bias = true;
  s.global_bias = true;
  return s;
}

enum class PredictionRule { mode, median, mean };

inline PredictionRule rule_from_string(const std::string& s) {
  if (s == "mode") return PredictionRule::mode;
  if (s == "median") return PredictionRule::median;
  if (s == "mean") return PredictionRule::mean;
  throw ConfigError("unknown prediction rule '" + s + "'");
}

inline const char* to_string(PredictionRule r) {
  switch (r) {
    case PredictionRule::mode: return "mode";
    case PredictionRule::median: return "median";
    case PredictionRule::mean: return "mean";
  }
  return "?";
}

/// A point prediction. `label` is set for mode/median; `value` is the label's
/// numeric value when available (its index otherwise) or the expectation for mean.
struct Prediction {
  std::optional<std::size_t> label;
  double value = 0.0;
};

inline std::size_t argmax_label(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t y = 1; y < probs.size(); ++y)
    if (probs[y] > probs[best]) best = y;
  return best;
}

inline Prediction apply_rule(const LabelSpace& labels, std::span<const double> probs,
                             PredictionRule rule) {
  if (rule != PredictionRule::mode && labels.kind() != LabelKind::ordinal)
    throw ConfigError(std::string(to_string(rule)) + " prediction needs an ordinal label space");
  auto value_of = [&](std::size_t y) {
    return labels.has_values() ? labels.value(y) : static_cast<double>(y);
  };
  switch (rule) {
    case PredictionRule::mode: {
      const std::size_t y = argmax_label(probs);
      return {y, value_of(y)};
    }
    case PredictionRule::median: {
      double cdf = 0.0;
      for (std::size_t y = 0; y < probs.size(); ++y) {
        cdf += probs[y];
        if (cdf >= 0.5) return {y, value_of(y)};
      }
      const std::size_t last = probs.size() - 1;
      return {last, value_of(last)};
    }
    case PredictionRule::mean: {
      double m = 0.0;
      for (std::size_t y = 0; y < probs.size(); ++y) m += labels.value(y) * probs[y];
      return {std::nullopt, m};
    }
  }
  return {};
}

inline Prediction predict(const LflModel& model, const Dyad& dyad, PredictionRule rule) {
  const auto dist = predict_proba(model, dyad);
  return apply_rule(model.labels(), dist.probs, rule);
}

/// Expected label value under the model, E[y | dyad].
inline double predict_mean(const LflModel& model, const Dyad& dyad) {
  return predict(model, dyad, PredictionRule::mean).value;
}

namespace detail {
inline std::size_t positive_label(const LflModel& m) { return m.base_label() == 0 ? 1 : 0; }
}  // namespace detail

inline double predict_link_symmetric(const LflModel& model, std::size_t r, std::size_t c) {
  if (model.variant() != Variant::symmetric_link) throw ConfigError("model is not symmetric-link");
  Dyad d{r, c};
  model.check_dyad(d);
  const std::size_t y = detail::positive_label(model);
  // Score the pair in canonical order so P(r,c) == P(c,r) bit for bit.
  if (r > c) std::swap(d.row, d.col);
  return sigmoid(model.score(d, y));
}

inline double predict_link_directed(const LflModel& model, std::size_t r, std::size_t c) {
  if (model.variant() != Variant::directed_link) throw ConfigError("model is not directed-link");
  const Dyad d{r, c};
  model.check_dyad(d);
  return sigmoid(model.score(d, detail::positive_label(model)));
}

inline double predict_multirelational(const LflModel& model, std::size_t r, std::size_t c,
                                      std::size_t relation) {
  if (model.variant() != Variant::multi_relational) throw ConfigError("model is not multi-relational");
  const Dyad d{r, c, {}, relation};
  model.check_dyad(d);
  return sigmoid(model.score(d, detail::positive_label(model)));
}

/// Effective per-label factors of a stereotype model: alpha^y is the
/// concatenation of phi^i_y * base_alpha^i and beta^y of base_beta^i, so that
/// alpha^y_r . beta^y_c equals the stereotype score's latent part.
struct EffectiveWeights {
  DenseMatrix alpha;
  DenseMatrix beta;
};

inline EffectiveWeights expand_stereotype(const LflModel& model, std::size_t y) {
  if (model.variant() != Variant::stereotype) throw ConfigError("model is not stereotype");
  if (y >= model.label_count()) throw std::out_of_range("label index out of range");
  const auto& s = model.shape();
  const std::size_t k = model.factor_count();
  EffectiveWeights out{DenseMatrix(s.rows, s.stereotype_rank * k), DenseMatrix(s.cols, s.stereotype_rank * k)};
  for (std::size_t p = 0; p < s.stereotype_rank; ++p) {
    const double phi = model.stereotype_coef(p, y);
    for (std::size_t r = 0; r < s.rows; ++r) {
      auto a = model.row_weights(p, r);
      for (std::size_t i = 0; i < k; ++i) out.alpha(r, p * k + i) = phi * a[i];
    }
    for (std::size_t c = 0; c < s.cols; ++c) {
      auto b = model.col_weights(p, c);
      for (std::size_t i = 0; i < k; ++i) out.beta(c, p * k + i) = b[i];
    }
  }
  return out;
}

/// Latent part of the stereotype score, sum_i phi^i_y (base_alpha^i_r . base_beta^i_c).
inline double stereotype_score(const LflModel& model, std::size_t y, std::size_t r, std::size_t c) {
  if (model.variant() != Variant::stereotype) throw ConfigError("model is not stereotype");
  model.check_dyad({r, c, {}, 0});
  double s = 0.0;
  for (std::size_t p = 0; p < model.shape().stereotype_rank; ++p)
    s += model.stereotype_coef(p, y) * dot(model.row_weights(p, r), model.col_weights(p, c));
  return s;
}

}  // namespace lfl
