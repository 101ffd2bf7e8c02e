#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lfl/synthetic.hpp"
#include "lfl/training.hpp"
#include "test_util.hpp"

using namespace lfl;
using lfl::testing::dataset_of;
using lfl::testing::make_shape;
using lfl::testing::random_dataset;

namespace {

std::vector<double> free_weights(const LflModel& m) {
  std::vector<double> out;
  for (std::size_t j : m.free_indices()) out.push_back(m.parameters()[j]);
  return out;
}

std::vector<double> all_weights(const LflModel& m) {
  return {m.parameters().begin(), m.parameters().end()};
}

// Bias-only model on 20 rows and one column: score = row bias + column bias,
// linear in the free weights, so the regularized nll is strictly convex.
struct ConvexCase {
  ModelShape shape;
  DyadDataset data;
};

ConvexCase convex_case() {
  ConvexCase c;
  c.shape.labels = LabelSpace::numbered(2, LabelKind::nominal, 0);
  c.shape.rows = 20;
  c.shape.cols = 1;
  c.shape.rank = 0;
  std::mt19937_64 rng(99);
  std::bernoulli_distribution coin(0.6);
  std::vector<Example> ex;
  for (std::size_t r = 0; r < 20; ++r)
    for (int rep = 0; rep < 5; ++rep) ex.push_back({r, 0, coin(rng) ? 1u : 0u, 0});
  c.data = dataset_of(c.shape, ex);
  return c;
}

TrainConfig batch_config(double l2, double tol = 1e-12) {
  TrainConfig cfg;
  cfg.optimizer = Optimizer::batch;
  cfg.objective = {Loss::nll, l2};
  cfg.convergence_tol = tol;
  cfg.max_batch_iters = 1000;
  return cfg;
}

}  // namespace

TEST(Init, SameSeedIsBitIdentical) {
  auto s = make_shape(Variant::dyadic, 10, 10, 3, 3);
  TrainConfig cfg;
  cfg.init_seed = 17;
  EXPECT_EQ(all_weights(init_model(s, cfg)), all_weights(init_model(s, cfg)));
}

TEST(Init, ZeroScaleGivesUniformPredictions) {
  auto s = make_shape(Variant::dyadic, 4, 4, 3, 3);
  TrainConfig cfg;
  cfg.init_scale = 0.0;
  auto m = init_model(s, cfg);
  for (double w : free_weights(m)) EXPECT_EQ(w, 0.0);
  auto p = predict_proba(m, Dyad{1, 2, {}, 0});
  for (double v : p.probs) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Init, DifferentSeedsDiffer) {
  auto s = make_shape(Variant::dyadic, 10, 10, 3, 3);
  TrainConfig a, b;
  a.init_seed = 1;
  b.init_seed = 2;
  EXPECT_NE(free_weights(init_model(s, a)), free_weights(init_model(s, b)));
}

TEST(Init, WeightsWithinScaleAndConstantsKept) {
  auto s = make_shape(Variant::dyadic, 6, 5, 2, 3);
  TrainConfig cfg;
  cfg.init_scale = 0.3;
  auto m = init_model(s, cfg);
  for (double w : free_weights(m)) EXPECT_LE(std::abs(w), 0.3);
  for (std::size_t r = 0; r < 6; ++r) {
    EXPECT_EQ(m.row_weights(0, r)[0], 1.0);
    for (double w : m.row_weights(m.base_label(), r)) EXPECT_EQ(w, 0.0);
  }
}

TEST(Init, EmptyLabelSpaceRejected) {
  ModelShape s;
  s.rows = s.cols = 2;
  EXPECT_THROW(init_model(s, {}), ConfigError);
}

TEST(Sgd, ZeroLearningRateLeavesModelUnchanged) {
  auto s = make_shape(Variant::dyadic, 5, 5, 2, 3);
  auto m = lfl::testing::random_model(s, 3);
  const auto before = all_weights(m);
  auto d = random_dataset(s, 40, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.objective.l2_latent = 0.1;
  auto rep = fit_sgd(m, d, cfg);
  EXPECT_EQ(all_weights(m), before);
  ASSERT_EQ(rep.trace.size(), 2u);
  EXPECT_EQ(rep.trace[0], rep.trace[1]);
}

TEST(Sgd, MatchesBatchOptimumOnConvexCase) {
  auto c = convex_case();
  LflModel ref(c.shape);
  auto ref_rep = fit_batch(ref, c.data, batch_config(0.1));

  LflModel m(c.shape);
  TrainConfig cfg;
  cfg.objective = {Loss::nll, 0.1};
  cfg.learning_rate = 0.1;
  cfg.lr_decay = 0.99;
  cfg.epochs = 200;
  auto rep = fit_sgd(m, c.data, cfg);
  EXPECT_LE(std::abs(rep.final_objective - ref_rep.final_objective), 1e-2);
}

TEST(Sgd, DescendsOnSyntheticNominal) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto syn = synth_nominal(100, 5, 3, 0.8, {}, seed);
    ModelShape s;
    s.labels = syn.train.labels;
    s.rows = s.cols = 100;
    s.rank = 5;
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.init_seed = seed;
    cfg.shuffle_seed = seed;
    auto m = init_model(s, cfg);
    auto rep = fit_sgd(m, syn.train, cfg);
    EXPECT_LT(rep.final_objective, rep.trace.front()) << seed;
  }
}

TEST(Sgd, DivergenceIsANumericalError) {
  auto s = make_shape(Variant::dyadic, 5, 5, 2, 3);
  auto m = lfl::testing::random_model(s, 1, 1.0);
  auto d = random_dataset(s, 60, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e150;
  cfg.epochs = 3;
  EXPECT_THROW(fit_sgd(m, d, cfg), NumericalError);
}

TEST(Sgd, RejectsBatchConfig) {
  auto s = make_shape(Variant::dyadic, 2, 2, 1, 2);
  LflModel m(s);
  auto d = random_dataset(s, 3, 1);
  EXPECT_THROW(fit_sgd(m, d, batch_config(0.0)), ConfigError);
}

TEST(Batch, RidgeTermConvergesToZero) {
  auto s = make_shape(Variant::dyadic, 4, 5, 2, 3);
  auto m = lfl::testing::random_model(s, 8, 1.0);
  auto empty = dataset_of(s, {});
  auto cfg = batch_config(100.0, 0.0);
  cfg.gradient_tol = 1e-12;
  auto rep = fit_batch(m, empty, cfg);
  EXPECT_LE(rep.epochs_run, 50u);
  for (double w : free_weights(m)) EXPECT_LE(std::abs(w), 1e-8);
}

TEST(Batch, MatchesHighPrecisionReference) {
  auto c = convex_case();
  LflModel ref(c.shape);
  auto cfg_ref = batch_config(0.1, 0.0);
  cfg_ref.gradient_tol = 1e-13;
  auto r_ref = fit_batch(ref, c.data, cfg_ref);
  LflModel m(c.shape);
  auto r = fit_batch(m, c.data, batch_config(0.1, 1e-10));
  EXPECT_NEAR(r.final_objective, r_ref.final_objective, 1e-6);
}

TEST(Batch, TraceIsNonIncreasing) {
  for (Variant v : {Variant::dyadic, Variant::symmetric_link, Variant::directed_link, Variant::multi_relational,
                    Variant::stereotype}) {
    auto s = make_shape(v, 8, 8, 2, 3);
    auto d = random_dataset(s, 60, 5);
    auto cfg = batch_config(0.05, 1e-10);
    cfg.max_batch_iters = 100;
    auto m = init_model(s, cfg);
    auto rep = fit_batch(m, d, cfg);
    for (std::size_t i = 1; i < rep.trace.size(); ++i) EXPECT_LE(rep.trace[i], rep.trace[i - 1]) << to_string(v);
  }
}

TEST(Batch, GradientToleranceStopsAtOptimum) {
  auto s = make_shape(Variant::dyadic, 3, 3, 1, 2);
  LflModel m(s);  // zero weights, empty data: already optimal
  auto rep = fit_batch(m, dataset_of(s, {}), batch_config(1.0));
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.epochs_run, 0u);
  EXPECT_EQ(rep.trace.size(), 1u);
}

TEST(Fit, FinalObjectiveMatchesObjectiveValue) {
  for (Optimizer o : {Optimizer::sgd, Optimizer::batch}) {
    auto s = make_shape(Variant::dyadic, 10, 10, 2, 4, LabelKind::ordinal);
    auto d = random_dataset(s, 80, 3);
    TrainConfig cfg;
    cfg.optimizer = o;
    cfg.epochs = 5;
    cfg.max_batch_iters = 30;
    cfg.objective = {Loss::mae, 0.1, 0.0, true};
    auto m = init_model(s, cfg);
    auto rep = fit(m, d, cfg);
    EXPECT_EQ(rep.final_objective, rep.trace.back());
    EXPECT_NEAR(rep.final_objective, objective_value(m, d, cfg.objective), 1e-10);
  }
}

TEST(Fit, DeterministicForBothOptimizers) {
  for (Optimizer o : {Optimizer::sgd, Optimizer::batch}) {
    auto s = make_shape(Variant::dyadic, 12, 9, 2, 3);
    auto d = random_dataset(s, 100, 4);
    TrainConfig cfg;
    cfg.optimizer = o;
    cfg.epochs = 4;
    cfg.max_batch_iters = 20;
    cfg.shuffle_seed = 5;
    cfg.init_seed = 6;
    cfg.objective.l2_latent = 0.1;
    auto a = init_model(s, cfg);
    auto b = init_model(s, cfg);
    auto ra = fit(a, d, cfg);
    if (o == Optimizer::batch) cfg.threads = 4;
    auto rb = fit(b, d, cfg);
    EXPECT_EQ(ra.trace, rb.trace);
    EXPECT_EQ(all_weights(a), all_weights(b));
  }
}

TEST(Fit, FrozenLatentOnlyMovesSideWeights) {
  auto s = make_shape(Variant::dyadic, 6, 6, 2, 3);
  s.side_dim = 2;
  auto d = random_dataset(s, 50, 7);
  TrainConfig cfg;
  cfg.freeze_latent = true;
  cfg.epochs = 3;
  auto m = init_model(s, cfg);
  const auto before = all_weights(m);
  fit(m, d, cfg);
  for (std::size_t j = 0; j < before.size(); ++j) {
    if (m.is_side_parameter(j)) continue;
    EXPECT_EQ(m.parameters()[j], before[j]);
  }
}

TEST(Fit, CallbackSeesEveryEpoch) {
  auto s = make_shape(Variant::dyadic, 4, 4, 1, 2);
  auto d = random_dataset(s, 20, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  auto m = init_model(s, cfg);
  std::vector<std::size_t> seen;
  fit(m, d, cfg, [&](std::size_t e, const LflModel&) { seen.push_back(e); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
}

namespace {

SyntheticColdStart small_coldstart(std::uint64_t seed) {
  ColdStartSynthOptions o;
  o.n = 30;
  return synth_coldstart(o, seed);
}

ModelShape coldstart_shape(const DyadDataset& d, std::size_t rank) {
  ModelShape s;
  s.labels = d.labels;
  s.rows = d.rows;
  s.cols = d.cols;
  s.rank = rank;
  s.side_dim = d.side_dim;
  return s;
}

TrainConfig coldstart_config() {
  TrainConfig cfg;
  cfg.optimizer = Optimizer::batch;
  cfg.objective = {Loss::mae, 0.5, 0.1};
  cfg.max_batch_iters = 40;
  return cfg;
}

}  // namespace

TEST(ColdStart, ZeroSideFeaturesKeepStageOnePredictions) {
  auto syn = small_coldstart(3);
  DyadDataset d = syn.train;
  std::fill(d.side.begin(), d.side.end(), 0.0);
  auto cfg = coldstart_config();
  auto res = fit_coldstart(coldstart_shape(d, 2), d, cfg);

  ModelShape latent = coldstart_shape(d, 2);
  latent.side_dim = 0;
  auto stage1 = init_model(latent, cfg);
  fit(stage1, d, cfg);
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto a = predict_proba(res.model, d.dyad(i, d.side_dim));
    auto b = predict_proba(stage1, d.dyad(i, 0));
    for (std::size_t y = 0; y < a.probs.size(); ++y) EXPECT_NEAR(a.probs[y], b.probs[y], 1e-14);
  }
}

TEST(ColdStart, StageTwoDescendsAndKeepsLatentWeights) {
  auto syn = small_coldstart(4);
  auto cfg = coldstart_config();
  auto res = fit_coldstart(coldstart_shape(syn.train, 2), syn.train, cfg);
  EXPECT_LE(res.stage2.final_objective, res.stage2.trace.front());

  ModelShape latent = coldstart_shape(syn.train, 2);
  latent.side_dim = 0;
  auto stage1 = init_model(latent, cfg);
  fit(stage1, syn.train, cfg);
  const std::size_t side_begin = res.model.side_index(0, 0);
  for (std::size_t j = 0; j < side_begin; ++j) EXPECT_EQ(res.model.parameters()[j], stage1.parameters()[j]);
  for (std::size_t j = 0; j < side_begin; ++j) EXPECT_TRUE(res.model.is_frozen(j));
}

TEST(ColdStart, MissingSideFeaturesRejected) {
  auto s = make_shape(Variant::dyadic, 4, 4, 1, 3, LabelKind::ordinal);
  auto d = random_dataset(s, 10, 1);
  EXPECT_THROW(fit_coldstart(s, d, coldstart_config()), DataError);
}

TEST(Fallback, BothUnseenUniformModelGivesGlobalMean) {
  auto s = make_shape(Variant::dyadic, 4, 4, 1, 5, LabelKind::ordinal);
  LflModel m(s);
  auto train = dataset_of(s, {{0, 0, 0, 0}, {1, 1, 4, 0}});
  EXPECT_NEAR(predict_coldstart_fallback(m, train, Dyad{3, 3, {}, 0}), 3.0, 1e-12);
}

TEST(Fallback, SingleRaterColumn) {
  auto s = make_shape(Variant::dyadic, 4, 4, 2, 5, LabelKind::ordinal);
  auto m = lfl::testing::random_model(s, 11, 1.0);
  auto train = dataset_of(s, {{0, 0, 1, 0}, {1, 1, 2, 0}, {2, 1, 3, 0}});
  EXPECT_NEAR(predict_coldstart_fallback(m, train, Dyad{3, 0, {}, 0}), predict_mean(m, Dyad{0, 0, {}, 0}), 1e-14);
}

TEST(Fallback, MatchesBruteForceAverage) {
  auto s = make_shape(Variant::dyadic, 10, 6, 2, 5, LabelKind::ordinal);
  auto m = lfl::testing::random_model(s, 12, 1.0);
  auto train = random_dataset(s, 40, 13);
  // drop row 9 from training
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train.examples[i].row != 9) keep.push_back(i);
  train = train.subset(keep);
  ColdStartFallback fb(m, train);
  for (std::size_t c = 0; c < 6; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : train.examples)
      if (e.col == c) {
        sum += predict_mean(m, Dyad{e.row, c, {}, 0});
        ++n;
      }
    if (n == 0) continue;
    EXPECT_NEAR(fb.predict(m, Dyad{9, c, {}, 0}), sum / static_cast<double>(n), 1e-12);
  }
  EXPECT_EQ(fb.predict(m, Dyad{train.examples[0].row, train.examples[0].col, {}, 0}),
            predict_mean(m, Dyad{train.examples[0].row, train.examples[0].col, {}, 0}));
}

TEST(Fallback, NominalRejected) {
  auto s = make_shape(Variant::dyadic, 2, 2, 1, 3);
  LflModel m(s);
  EXPECT_THROW(ColdStartFallback(m, dataset_of(s, {})), ConfigError);
}
