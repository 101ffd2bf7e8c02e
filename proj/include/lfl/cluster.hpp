#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "lfl/matrix.hpp"
#include "lfl/model.hpp"

namespace lfl {

struct KMeansResult {
  std::vector<std::size_t> assignment;  // cluster per point
  std::vector<std::size_t> ordering;    // point indices grouped by cluster, stable within a cluster
  DenseMatrix centroids;
  std::vector<double> distortion;       // sum of squared distances after each assignment step
  std::size_t iterations = 0;
};

/// Lloyd's k-means. Centroids start at `k` distinct points chosen by a seeded
/// shuffle; stops at an assignment fixpoint or after max_iters. A cluster that
/// empties keeps its previous centroid.
inline KMeansResult kmeans(const DenseMatrix& points, std::size_t k, std::uint64_t seed,
                           std::size_t max_iters = 300) {
  const std::size_t n = points.rows, dim = points.cols;
  if (k < 1) throw std::invalid_argument("k-means needs k >= 1");
  if (k > n) throw std::invalid_argument("k-means needs k <= number of points");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  KMeansResult res;
  res.centroids = DenseMatrix(k, dim);
  for (std::size_t c = 0; c < k; ++c)
    std::copy(points.row(idx[c]).begin(), points.row(idx[c]).end(), res.centroids.row(c).begin());
  res.assignment.assign(n, std::numeric_limits<std::size_t>::max());

  auto sqdist = [&](std::size_t p, std::size_t c) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = points(p, j) - res.centroids(c, j);
      s += d * d;
    }
    return s;
  };

  for (std::size_t it = 0; it < max_iters; ++it) {
    bool changed = false;
    double distortion = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      double bd = sqdist(p, 0);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sqdist(p, c);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (res.assignment[p] != best) changed = true;
      res.assignment[p] = best;
      distortion += bd;
    }
    res.distortion.push_back(distortion);
    res.iterations = it + 1;
    if (!changed) break;
    DenseMatrix sum(k, dim);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t p = 0; p < n; ++p) {
      ++cnt[res.assignment[p]];
      for (std::size_t j = 0; j < dim; ++j) sum(res.assignment[p], j) += points(p, j);
    }
    for (std::size_t c = 0; c < k; ++c)
      if (cnt[c] > 0)
        for (std::size_t j = 0; j < dim; ++j) res.centroids(c, j) = sum(c, j) / static_cast<double>(cnt[c]);
  }

  res.ordering.resize(n);
  std::iota(res.ordering.begin(), res.ordering.end(), std::size_t{0});
  std::stable_sort(res.ordering.begin(), res.ordering.end(),
                   [&](std::size_t a, std::size_t b) { return res.assignment[a] < res.assignment[b]; });
  return res;
}

enum class ObjectSide { rows, cols };

/// The weight rows of one label's row or column matrix (alpha^y or beta^y; the
/// shared matrix for symmetric-link; the base pair for stereotype).
inline DenseMatrix latent_matrix(const LflModel& model, ObjectSide which, std::size_t set) {
  if (set >= model.set_count()) throw std::out_of_range("label index out of range");
  const bool rows = which == ObjectSide::rows;
  const std::size_t n = rows ? model.shape().rows : model.shape().cols;
  DenseMatrix m(n, model.factor_count());
  for (std::size_t i = 0; i < n; ++i) {
    auto w = rows ? model.row_weights(set, i) : model.col_weights(set, i);
    std::copy(w.begin(), w.end(), m.row(i).begin());
  }
  return m;
}

inline KMeansResult cluster_latent(const LflModel& model, ObjectSide which, std::size_t label, std::size_t clusters,
                                   std::uint64_t seed) {
  return kmeans(latent_matrix(model, which, label), clusters, seed);
}

}  // namespace lfl
