#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lfl/dataset.hpp"
#include "lfl/error.hpp"
#include "lfl/matrix.hpp"
#include "lfl/model.hpp"

namespace lfl {

struct HeldoutCell {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t true_label = 0;
  std::size_t bayes_label = 0;
  double bayes_prob = 0.0;
};

struct SyntheticTruth {
  std::vector<DenseMatrix> true_alpha;  // per label, n x k
  std::vector<DenseMatrix> true_beta;
  std::vector<HeldoutCell> heldout;
  double mean_bayes_error = 0.0;        // over all n^2 cells
};

/// Generating distribution of cell (r, c): softmax over y of alpha^y_r . beta^y_c.
inline std::vector<double> truth_distribution(const SyntheticTruth& t, std::size_t r, std::size_t c) {
  std::vector<double> p(t.true_alpha.size());
  for (std::size_t y = 0; y < p.size(); ++y) p[y] = dot(t.true_alpha[y].row(r), t.true_beta[y].row(c));
  softmax_inplace(p);
  return p;
}

/// Mean over every cell of 1 - max_y p(y | r, c) under the generating weights.
inline double mean_bayes_error(const SyntheticTruth& t) {
  if (t.true_alpha.empty()) throw ConfigError("truth has no label weights");
  const std::size_t rows = t.true_alpha[0].rows, cols = t.true_beta[0].rows;
  double sum = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const auto p = truth_distribution(t, r, c);
      sum += 1.0 - *std::max_element(p.begin(), p.end());
    }
  return sum / static_cast<double>(rows * cols);
}

struct SyntheticNominal {
  DyadDataset train;
  DyadDataset test;  // the held-out cells as a dataset
  SyntheticTruth truth;
};

struct WeightRange {
  double lo = -3.0;
  double hi = 3.0;
};

namespace detail {

inline std::vector<std::string> numbered_ids(const char* prefix, std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

inline std::size_t sample_categorical(std::span<const double> p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double cdf = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    cdf += p[y];
    if (x < cdf) return y;
  }
  return p.size() - 1;
}

/// Indices of retained cells: exactly round(retention * cells), or i.i.d. per cell.
inline std::vector<char> retain_cells(std::size_t cells, double retention, bool exact_count,
                                      std::mt19937_64& rng) {
  std::vector<char> keep(cells, 0);
  if (exact_count) {
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_keep = static_cast<std::size_t>(std::llround(retention * static_cast<double>(cells)));
    for (std::size_t i = 0; i < n_keep; ++i) keep[order[i]] = 1;
  } else {
    std::bernoulli_distribution b(retention);
    for (auto& k : keep) k = b(rng) ? 1 : 0;
  }
  return keep;
}

}  // namespace detail

/// Synthetic nominal matrix: per-label weights uniform on `range`, every cell's
/// label sampled from the softmax of alpha^y_r . beta^y_c, and a `retention`
/// fraction of cells kept for training. With `zero_base` the base label's
/// weights are zero, so true log-odds have rank k like a fitted model's;
/// otherwise all |Y| blocks are drawn and the log-odds have rank 2k.
inline SyntheticNominal synth_nominal(std::size_t n, std::size_t k, std::size_t num_labels,
                                      double retention, WeightRange range, std::uint64_t seed,
                                      bool exact_count = true, bool zero_base = true) {
  if (n < 2 || k < 1 || num_labels < 2) throw ConfigError("synth_nominal needs n >= 2, k >= 1, labels >= 2");
  if (!(retention > 0 && retention < 1)) throw ConfigError("retention must lie in (0, 1)");
  if (!(range.lo <= range.hi) || !std::isfinite(range.lo) || !std::isfinite(range.hi))
    throw ConfigError("degenerate weight range");

  const LabelSpace labels = LabelSpace::numbered(num_labels, LabelKind::nominal);
  const std::size_t base = labels.base_index();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(range.lo, range.hi);

  SyntheticNominal out;
  auto& truth = out.truth;
  for (std::size_t y = 0; y < num_labels; ++y) {
    truth.true_alpha.emplace_back(n, k);
    truth.true_beta.emplace_back(n, k);
    if (zero_base && y == base) continue;
    for (double& v : truth.true_alpha[y].data) v = range.lo == range.hi ? range.lo : u(rng);
    for (double& v : truth.true_beta[y].data) v = range.lo == range.hi ? range.lo : u(rng);
  }

  std::vector<HeldoutCell> cells(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const auto p = truth_distribution(truth, r, c);
      const std::size_t best = argmax_label(p);
      cells[r * n + c] = {r, c, detail::sample_categorical(p, rng), best, p[best]};
    }
  truth.mean_bayes_error = mean_bayes_error(truth);

  const auto keep = detail::retain_cells(n * n, retention, exact_count, rng);
  DyadDataset all;
  all.labels = labels;
  all.rows = n;
  all.cols = n;
  all.row_ids = IdMap::from_names(detail::numbered_ids("r", n));
  all.col_ids = IdMap::from_names(detail::numbered_ids("c", n));
  out.train = all.empty_like();
  out.test = all.empty_like();
  for (std::size_t i = 0; i < n * n; ++i) {
    const auto& cell = cells[i];
    const Example e{cell.row, cell.col, cell.true_label, 0};
    if (keep[i]) {
      out.train.push(e);
    } else {
      out.test.push(e);
      truth.heldout.push_back(cell);
    }
  }
  out.train.recount();
  out.test.recount();
  return out;
}

// ---------------------------------------------------------------------------
// Link graphs

struct LinkTruth {
  std::size_t n = 0;
  bool symmetric = true;
  DenseMatrix alpha, beta, gamma;  // beta/gamma empty for symmetric graphs
  DenseMatrix prob;                // edge probabilities, diagonal 0
  std::vector<int> adjacency;      // n x n sampled labels, diagonal -1 (not sampled)
};

struct SyntheticLinks {
  DyadDataset train;
  DyadDataset test;
  LinkTruth truth;
};

/// Random graph with P = sigmoid(alpha alpha^T) (symmetric) or
/// sigmoid(alpha beta^T + gamma gamma^T) (directed), weights uniform on
/// [-scale, scale]. Each off-diagonal cell is sampled once (symmetric graphs
/// sample the upper triangle and mirror it); the sampled dyads are split
/// test_fraction / rest. Symmetric datasets list each pair once as (r, c), r < c.
inline SyntheticLinks synth_link_graph(std::size_t n, std::size_t k, bool symmetric, std::uint64_t seed,
                                       double scale = 1.5, double test_fraction = 0.2) {
  if (n < 2 || k < 1) throw ConfigError("synth_link_graph needs n >= 2 and k >= 1");
  if (!(scale >= 0)) throw ConfigError("weight scale must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  auto draw = [&](DenseMatrix& m) {
    m = DenseMatrix(n, k);
    for (double& v : m.data) v = scale == 0 ? 0.0 : u(rng);
  };

  SyntheticLinks out;
  auto& t = out.truth;
  t.n = n;
  t.symmetric = symmetric;
  draw(t.alpha);
  if (!symmetric) {
    draw(t.beta);
    draw(t.gamma);
  }
  t.prob = DenseMatrix(n, n);
  t.adjacency.assign(n * n, -1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> sampled;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      if (r == c) continue;
      if (symmetric && c < r) continue;
      const double z = symmetric ? dot(t.alpha.row(r), t.alpha.row(c))
                                 : dot(t.alpha.row(r), t.beta.row(c)) + dot(t.gamma.row(r), t.gamma.row(c));
      const double p = sigmoid(z);
      const int label = unit(rng) < p ? 1 : 0;
      t.prob(r, c) = p;
      t.adjacency[r * n + c] = label;
      if (symmetric) {
        t.prob(c, r) = p;
        t.adjacency[c * n + r] = label;
      }
      sampled.emplace_back(r, c);
    }

  DyadDataset all;
  all.labels = LabelSpace::binary();
  all.rows = n;
  all.cols = n;
  all.shared_ids = true;
  all.row_ids = IdMap::from_names(detail::numbered_ids("n", n));
  all.col_ids = all.row_ids;
  out.train = all.empty_like();
  out.test = all.empty_like();

  std::vector<std::size_t> order(sampled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(sampled.size())));
  std::vector<char> in_test(sampled.size(), 0);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = 1;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    const auto [r, c] = sampled[i];
    const Example e{r, c, static_cast<std::size_t>(t.adjacency[r * n + c]), 0};
    (in_test[i] ? out.test : out.train).push(e);
  }
  out.train.recount();
  out.test.recount();
  return out;
}

// ---------------------------------------------------------------------------
// Ordinal ratings with informative per-object side features (cold-start suite)

struct SyntheticColdStart {
  DyadDataset train;  // side attached; cold rows absent
  DyadDataset test;   // every retained cell of the cold rows
  SideTable side;
  std::vector<std::size_t> cold_rows;
  DenseMatrix expected_rating;  // E[y] under the generating model, n x n
};

struct ColdStartSynthOptions {
  std::size_t n = 120;
  std::size_t latent_rank = 2;
  std::size_t feature_dim = 3;        // per row object and per column object
  double retention = 0.5;
  double cold_fraction = 0.1;
  double latent_scale = 0.7;          // generating latent weights uniform on [-s, s]
  double slope_scale = 1.5;           // side-direction weights uniform on [-s, s]
};

/// Ordinal 1..5 ratings whose label scores are (v_y - 3) * (theta . [f_r, f_c])
/// plus per-label latent interactions. The side term is expressible by the
/// side-information model exactly, so features carry the row effect that a
/// column-mean fallback cannot see.
inline SyntheticColdStart synth_coldstart(const ColdStartSynthOptions& o, std::uint64_t seed) {
  if (o.n < 2 || o.feature_dim < 1) throw ConfigError("synth_coldstart needs n >= 2 and feature_dim >= 1");
  if (!(o.retention > 0 && o.retention <= 1)) throw ConfigError("retention must lie in (0, 1]");
  if (!(o.cold_fraction > 0 && o.cold_fraction < 1)) throw ConfigError("cold fraction must lie in (0, 1)");
  const std::size_t n = o.n;
  const std::size_t L = 5;
  const LabelSpace labels = LabelSpace::numbered(L, LabelKind::ordinal);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> feat(-1.0, 1.0);
  std::uniform_real_distribution<double> slope(-o.slope_scale, o.slope_scale);
  std::uniform_real_distribution<double> lat(-o.latent_scale, o.latent_scale);

  SyntheticColdStart out;
  const auto row_names = detail::numbered_ids("u", n);
  const auto col_names = detail::numbered_ids("m", n);
  DenseMatrix fr(n, o.feature_dim), fc(n, o.feature_dim);
  for (double& v : fr.data) v = feat(rng);
  for (double& v : fc.data) v = feat(rng);
  std::vector<double> theta(2 * o.feature_dim);
  for (double& v : theta) v = slope(rng);
  std::vector<DenseMatrix> a(L), b(L);
  for (std::size_t y = 0; y < L; ++y) {
    a[y] = DenseMatrix(n, o.latent_rank);
    b[y] = DenseMatrix(n, o.latent_rank);
    if (y == labels.base_index()) continue;
    for (double& v : a[y].data) v = lat(rng);
    for (double& v : b[y].data) v = lat(rng);
  }
  for (std::size_t r = 0; r < n; ++r)
    out.side.add(true, row_names[r], {fr.row(r).begin(), fr.row(r).end()});
  for (std::size_t c = 0; c < n; ++c)
    out.side.add(false, col_names[c], {fc.row(c).begin(), fc.row(c).end()});

  DyadDataset all;
  all.labels = labels;
  all.rows = n;
  all.cols = n;
  all.row_ids = IdMap::from_names(row_names);
  all.col_ids = IdMap::from_names(col_names);
  const auto keep = detail::retain_cells(n * n, o.retention, true, rng);
  out.expected_rating = DenseMatrix(n, n);
  std::vector<double> p(L);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      double z = 0.0;
      for (std::size_t j = 0; j < o.feature_dim; ++j)
        z += theta[j] * fr(r, j) + theta[o.feature_dim + j] * fc(c, j);
      for (std::size_t y = 0; y < L; ++y) p[y] = (labels.value(y) - 3.0) * z + dot(a[y].row(r), b[y].row(c));
      softmax_inplace(p);
      double mean = 0.0;
      for (std::size_t y = 0; y < L; ++y) mean += labels.value(y) * p[y];
      out.expected_rating(r, c) = mean;
      const std::size_t label = detail::sample_categorical(p, rng);
      if (keep[r * n + c]) all.push({r, c, label, 0});
    }
  all.recount();
  attach_side(all, out.side);

  out.cold_rows = pick_rows(n, o.cold_fraction, rng());
  auto tt = split(all, SplitScheme::coldstart_rows(out.cold_rows), 0);
  out.train = std::move(tt.train);
  out.test = std::move(tt.test);
  return out;
}

}  // namespace lfl
