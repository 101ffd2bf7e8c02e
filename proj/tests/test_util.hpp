#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lfl/lfl.hpp"

namespace lfl::testing {

inline ModelShape make_shape(Variant v, std::size_t rows, std::size_t cols, std::size_t rank, std::size_t labels,
                             LabelKind kind = LabelKind::nominal) {
  ModelShape s;
  s.variant = v;
  s.rows = rows;
  s.cols = cols;
  s.rank = rank;
  s.labels = is_link_variant(v) ? LabelSpace::binary() : LabelSpace::numbered(labels, kind);
  s.bias = v != Variant::symmetric_link;
  if (v == Variant::stereotype) s.stereotype_rank = 2;
  if (v == Variant::multi_relational) s.relations = 3;
  return s;
}

inline LflModel random_model(const ModelShape& shape, std::uint64_t seed, double scale = 0.5) {
  TrainConfig cfg;
  cfg.init_seed = seed;
  cfg.init_scale = scale;
  return init_model(shape, cfg);
}

/// Uniformly random examples consistent with `shape` (side features N(0,1)).
inline DyadDataset random_dataset(const ModelShape& shape, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> row(0, shape.rows - 1), col(0, shape.cols - 1),
      label(0, shape.labels.size() - 1), rel(0, shape.relations - 1);
  std::normal_distribution<double> normal;
  DyadDataset d;
  d.labels = shape.labels;
  d.rows = shape.rows;
  d.cols = shape.cols;
  d.shared_ids = is_link_variant(shape.variant);
  d.relations = shape.variant == Variant::multi_relational ? shape.relations : 1;
  d.side_dim = shape.side_dim;
  for (std::size_t r = 0; r < d.rows; ++r) d.row_ids.intern("r" + std::to_string(r));
  if (d.shared_ids) d.col_ids = d.row_ids;
  else
    for (std::size_t c = 0; c < d.cols; ++c) d.col_ids.intern("c" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    Example e{row(rng), col(rng), label(rng), 0};
    if (shape.variant == Variant::multi_relational) e.relation = rel(rng);
    std::vector<double> s(shape.side_dim);
    for (double& v : s) v = normal(rng);
    d.push(e, s);
  }
  d.recount();
  return d;
}

/// Dataset over the shape's objects with exactly the given examples.
inline DyadDataset dataset_of(const ModelShape& s, std::vector<Example> ex) {
  DyadDataset d;
  d.labels = s.labels;
  d.rows = s.rows;
  d.cols = s.cols;
  d.examples = std::move(ex);
  d.recount();
  return d;
}

}  // namespace lfl::testing
