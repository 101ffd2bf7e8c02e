#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lfl/model.hpp"
#include "test_util.hpp"

using namespace lfl;
using lfl::testing::make_shape;
using lfl::testing::random_model;

namespace {

ModelShape plain_shape(std::size_t labels, std::size_t k, std::optional<std::size_t> base = std::nullopt) {
  ModelShape s;
  s.labels = base ? LabelSpace::numbered(labels, LabelKind::nominal, base) : LabelSpace::numbered(labels, LabelKind::nominal);
  s.rows = 2;
  s.cols = 2;
  s.rank = k;
  s.bias = false;
  return s;
}

}  // namespace

TEST(PredictProba, ZeroWeightsGiveUniform) {
  LflModel m(plain_shape(3, 2));
  auto p = predict_proba(m, {0, 1});
  for (double v : p.probs) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(PredictProba, BinaryHandEvaluation) {
  LflModel m(plain_shape(2, 1, 0));
  m.row_weights(1, 0)[0] = 2.0;
  m.col_weights(1, 0)[0] = 1.0;
  auto p = predict_proba(m, {0, 0});
  EXPECT_NEAR(p.probs[1], 0.8807970779778823, 1e-15);
  EXPECT_NEAR(p.probs[0], 1.0 - 0.8807970779778823, 1e-15);
}

TEST(PredictProba, ThreeLabelSoftmaxAgainstBase) {
  LflModel m(plain_shape(3, 1));  // base = label 2
  m.row_weights(0, 1)[0] = 1.0;
  m.col_weights(0, 0)[0] = 1.0;
  m.row_weights(1, 1)[0] = -1.0;
  m.col_weights(1, 0)[0] = 1.0;
  auto p = predict_proba(m, {1, 0});
  EXPECT_NEAR(p.probs[0], 0.6652409557748219, 1e-15);
  EXPECT_NEAR(p.probs[1], 0.09003057317038046, 1e-15);
  EXPECT_NEAR(p.probs[2], 0.24472847105479767, 1e-15);
}

TEST(PredictProba, Errors) {
  ModelShape s = plain_shape(3, 1);
  s.side_dim = 2;
  LflModel m(s);
  std::vector<double> side{1.0, 2.0}, bad{1.0};
  EXPECT_THROW(predict_proba(m, {2, 0, side}), std::out_of_range);
  EXPECT_THROW(predict_proba(m, {0, 2, side}), std::out_of_range);
  EXPECT_THROW(predict_proba(m, {0, 0, bad}), std::invalid_argument);
  EXPECT_THROW(predict_proba(m, {0, 0}), std::invalid_argument);
  EXPECT_NO_THROW(predict_proba(m, {0, 0, side}));
}

TEST(PredictProba, SideInformationAddsLinearTerm) {
  ModelShape s = plain_shape(2, 0, 0);
  s.side_dim = 2;
  LflModel m(s);
  m.side_weights(1)[0] = 0.5;
  m.side_weights(1)[1] = -1.0;
  std::vector<double> x{2.0, -1.0};  // score 2
  EXPECT_NEAR(predict_proba(m, {0, 0, x}).probs[1], 0.8807970779778823, 1e-15);
}

TEST(Model, BaseLabelAndBiasConstantsAreFrozen) {
  ModelShape s = plain_shape(3, 2);
  s.bias = true;
  LflModel m(s);
  EXPECT_EQ(m.factor_count(), 4u);
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (double v : m.row_weights(2, r)) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(m.row_weights(0, r)[0], 1.0);
    EXPECT_TRUE(m.is_frozen(m.alpha_index(0, r, 0)));
    EXPECT_FALSE(m.is_frozen(m.alpha_index(0, r, 1)));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(m.is_frozen(m.alpha_index(2, r, i)));
  }
  for (std::size_t c = 0; c < s.cols; ++c) {
    EXPECT_EQ(m.col_weights(1, c)[1], 1.0);
    EXPECT_TRUE(m.is_frozen(m.beta_index(1, c, 1)));
  }
  // bias entries pair up as column and row biases
  m.col_weights(0, 1)[0] = 0.7;  // column bias of column 1
  m.row_weights(0, 0)[1] = -0.2;  // row bias of row 0
  Dyad d{0, 1};
  EXPECT_NEAR(m.score(d, 0), 0.5, 1e-15);
}

TEST(Baseline, ZeroWeightsUniform) {
  LflModel m(baseline_shape(LabelSpace::numbered(4, LabelKind::nominal), 3, 3));
  for (double v : predict_proba_baseline(m, {1, 2}).probs) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Baseline, HandEvaluation) {
  LflModel m(baseline_shape(LabelSpace::numbered(2, LabelKind::nominal, 0), 2, 2));
  m.row_weights(1, 0)[1] = 1.0;  // alpha_{r,1}
  m.col_weights(1, 0)[0] = 1.0;  // beta_{c,1}
  m.global_offset(1) = 0.0;
  EXPECT_NEAR(predict_proba_baseline(m, {0, 0}).probs[1], 0.8807970779778823, 1e-15);
}

TEST(Baseline, RejectsNonBaselineModels) {
  LflModel m(plain_shape(3, 2));
  EXPECT_THROW(predict_proba_baseline(m, {0, 0}), ConfigError);
}

namespace {

std::vector<std::size_t> ranking(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  return order;
}

}  // namespace

TEST(Baseline, ColumnRankingIsTheSameForEveryRow) {
  auto shape = baseline_shape(LabelSpace::numbered(2, LabelKind::nominal), 5, 5);
  auto m = random_model(shape, 11, 2.0);
  for (std::size_t y = 0; y < 2; ++y) {
    std::vector<std::size_t> reference;
    for (std::size_t r = 0; r < 5; ++r) {
      std::vector<double> p(5);
      for (std::size_t c = 0; c < 5; ++c) p[c] = predict_proba_baseline(m, {r, c}).probs[y];
      if (r == 0) reference = ranking(p);
      else EXPECT_EQ(ranking(p), reference) << "label " << y << " row " << r;
    }
  }
}

// With more than two labels the normalizer couples labels, but the log-odds
// against the base still rank columns identically for every row.
TEST(Baseline, LogOddsColumnRankingIsRowIndependent) {
  auto shape = baseline_shape(LabelSpace::numbered(4, LabelKind::nominal), 5, 5);
  auto m = random_model(shape, 12, 2.0);
  for (std::size_t y = 0; y < 4; ++y) {
    std::vector<std::size_t> reference;
    for (std::size_t r = 0; r < 5; ++r) {
      std::vector<double> s(5);
      for (std::size_t c = 0; c < 5; ++c) s[c] = m.score({r, c}, y);
      if (r == 0) reference = ranking(s);
      else EXPECT_EQ(ranking(s), reference);
    }
  }
}

TEST(Predict, ModeMeanMedian) {
  auto nominal = LabelSpace::numbered(3, LabelKind::nominal);
  std::vector<double> p{0.2, 0.5, 0.3};
  EXPECT_EQ(apply_rule(nominal, p, PredictionRule::mode).label, 1u);

  auto five = LabelSpace::numbered(5, LabelKind::ordinal);
  std::vector<double> u(5, 0.2);
  EXPECT_NEAR(apply_rule(five, u, PredictionRule::mean).value, 3.0, 1e-15);

  auto three = LabelSpace::numbered(3, LabelKind::ordinal);
  std::vector<double> q{0.2, 0.2, 0.6};
  auto med = apply_rule(three, q, PredictionRule::median);
  EXPECT_EQ(med.label, 2u);
  EXPECT_DOUBLE_EQ(med.value, 3.0);
}

TEST(Predict, ModeTiesGoToLowestIndex) {
  auto ls = LabelSpace::numbered(3, LabelKind::nominal);
  std::vector<double> p{0.4, 0.4, 0.2};
  EXPECT_EQ(apply_rule(ls, p, PredictionRule::mode).label, 0u);
}

TEST(Predict, MedianAtExactHalf) {
  auto ls = LabelSpace::numbered(2, LabelKind::ordinal);
  std::vector<double> p{0.5, 0.5};
  EXPECT_EQ(apply_rule(ls, p, PredictionRule::median).label, 0u);
}

TEST(Predict, RuleKindMismatch) {
  auto ls = LabelSpace::numbered(3, LabelKind::nominal);
  std::vector<double> p{0.2, 0.5, 0.3};
  EXPECT_THROW(apply_rule(ls, p, PredictionRule::mean), ConfigError);
  EXPECT_THROW(apply_rule(ls, p, PredictionRule::median), ConfigError);
}

TEST(SymmetricLink, Examples) {
  auto s = make_shape(Variant::symmetric_link, 3, 3, 2, 2);
  LflModel m(s);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(predict_link_symmetric(m, r, c), 0.5);
  auto a = m.row_weights(1, 0);
  a[0] = 1;
  a[1] = 2;
  auto b = m.row_weights(1, 1);
  b[0] = 2;
  b[1] = -1;
  EXPECT_DOUBLE_EQ(predict_link_symmetric(m, 0, 1), 0.5);
  EXPECT_THROW(predict_link_symmetric(m, 0, 3), std::out_of_range);
}

TEST(SymmetricLink, SwapSymmetryOnRandomPairs) {
  auto m = random_model(make_shape(Variant::symmetric_link, 30, 30, 4, 2), 3, 1.0);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> u(0, 29);
  for (int i = 0; i < 100; ++i) {
    const auto r = u(rng), c = u(rng);
    EXPECT_EQ(predict_link_symmetric(m, r, c), predict_link_symmetric(m, c, r));
  }
}

TEST(SymmetricLink, RejectsBiasAndNonBinaryLabels) {
  auto s = make_shape(Variant::symmetric_link, 3, 3, 2, 2);
  s.bias = true;
  EXPECT_THROW(LflModel{s}, ConfigError);
  s.bias = false;
  s.labels = LabelSpace::numbered(3, LabelKind::nominal);
  EXPECT_THROW(LflModel{s}, ConfigError);
}

TEST(DirectedLink, Examples) {
  auto s = make_shape(Variant::directed_link, 2, 2, 1, 2);
  s.bias = false;
  LflModel m(s);
  EXPECT_DOUBLE_EQ(predict_link_directed(m, 0, 1), 0.5);
  m.row_weights(1, 0)[0] = 1;
  m.col_weights(1, 1)[0] = 1;
  m.node_weights(1, 0)[0] = 1;
  m.node_weights(1, 1)[0] = -1;
  EXPECT_DOUBLE_EQ(predict_link_directed(m, 0, 1), 0.5);
}

TEST(DirectedLink, AsymmetricWithoutNodeWeights) {
  auto s = make_shape(Variant::directed_link, 6, 6, 3, 2);
  auto m = random_model(s, 17, 1.0);
  for (std::size_t n = 0; n < 6; ++n)
    for (double& v : m.node_weights(1, n)) v = 0.0;
  const double a = dot(m.row_weights(1, 1), m.col_weights(1, 4));
  const double b = dot(m.row_weights(1, 4), m.col_weights(1, 1));
  ASSERT_NE(a, b);
  EXPECT_NE(predict_link_directed(m, 1, 4), predict_link_directed(m, 4, 1));
}

TEST(MultiRelational, Examples) {
  auto s = make_shape(Variant::multi_relational, 2, 2, 2, 2);
  s.bias = false;
  s.relations = 2;
  LflModel m(s);
  for (auto& v : m.row_weights(1, 0)) v = 1.0;
  for (auto& v : m.col_weights(1, 1)) v = 1.0;
  EXPECT_DOUBLE_EQ(predict_multirelational(m, 0, 1, 0), 0.5);  // lambda = 0
  m.relation_scaling(0)[0] = 2.0;
  m.relation_scaling(0)[1] = -1.0;
  EXPECT_NEAR(predict_multirelational(m, 0, 1, 0), 0.7310585786300049, 1e-15);
  EXPECT_THROW(predict_multirelational(m, 0, 1, 2), std::out_of_range);
}

TEST(MultiRelational, OppositeScalingsSumToOne) {
  auto s = make_shape(Variant::multi_relational, 5, 5, 3, 2);
  s.relations = 2;
  auto m = random_model(s, 23, 1.0);
  for (std::size_t i = 0; i < m.factor_count(); ++i) m.relation_scaling(1)[i] = -m.relation_scaling(0)[i];
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c)
      EXPECT_NEAR(predict_multirelational(m, r, c, 0) + predict_multirelational(m, r, c, 1), 1.0, 1e-15);
}

TEST(Stereotype, ZeroCoefficientsGiveBaseEquivalentScores) {
  auto s = make_shape(Variant::stereotype, 3, 3, 2, 3);
  auto m = random_model(s, 2, 1.0);
  for (std::size_t p = 0; p < s.stereotype_rank; ++p)
    for (std::size_t y = 0; y < 3; ++y)
      if (!m.is_frozen(m.phi_index(p, y))) m.stereotype_coef(p, y) = 0.0;
  for (std::size_t y = 0; y < 3; ++y) EXPECT_EQ(stereotype_score(m, y, 1, 2), 0.0);
  for (double v : predict_proba(m, {1, 2}).probs) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Stereotype, ScalarMultiple) {
  auto s = make_shape(Variant::stereotype, 1, 1, 2, 2);
  s.bias = false;
  s.stereotype_rank = 1;
  LflModel m(s);  // base = label 1
  m.row_weights(0, 0)[0] = 1.5;
  m.col_weights(0, 0)[0] = 1.0;
  m.stereotype_coef(0, 0) = 2.0;
  EXPECT_DOUBLE_EQ(stereotype_score(m, 0, 0, 0), 3.0);
  EXPECT_DOUBLE_EQ(m.score({0, 0}, 0), 3.0);
  auto eff = expand_stereotype(m, 0);
  EXPECT_DOUBLE_EQ(dot(eff.alpha.row(0), eff.beta.row(0)), 3.0);
}

TEST(Stereotype, IdentityAssignmentReproducesUnconstrainedModel) {
  const std::size_t L = 3, n = 4;
  auto plain = random_model(make_shape(Variant::dyadic, n, n, 2, L), 31, 1.0);
  auto ss = make_shape(Variant::stereotype, n, n, 2, L);
  ss.stereotype_rank = L - 1;
  LflModel st(ss);
  // pair p carries label p's weights; phi^p_y = [y == p]
  for (std::size_t p = 0; p < L - 1; ++p) {
    for (std::size_t r = 0; r < n; ++r) {
      auto src = plain.row_weights(p, r);
      std::copy(src.begin(), src.end(), st.row_weights(p, r).begin());
      auto srcb = plain.col_weights(p, r);
      std::copy(srcb.begin(), srcb.end(), st.col_weights(p, r).begin());
    }
    for (std::size_t y = 0; y < L; ++y)
      if (y != st.base_label()) st.stereotype_coef(p, y) = (y == p) ? 1.0 : 0.0;
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      auto a = predict_proba(plain, {r, c}).probs;
      auto b = predict_proba(st, {r, c}).probs;
      for (std::size_t y = 0; y < L; ++y) EXPECT_NEAR(a[y], b[y], 1e-12);
    }
}

TEST(Model, StabilityForLargeWeights) {
  auto s = make_shape(Variant::dyadic, 3, 3, 62, 4);
  auto m = random_model(s, 9, 1e3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      auto p = predict_proba(m, {r, c}).probs;
      double sum = 0;
      for (double v : p) {
        EXPECT_TRUE(std::isfinite(v));
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(Model, ScoresOfMagnitude700DoNotOverflow) {
  LflModel m(plain_shape(3, 1));
  m.row_weights(0, 0)[0] = 700.0;
  m.col_weights(0, 0)[0] = 1.0;
  m.row_weights(1, 0)[0] = -700.0;
  m.col_weights(1, 0)[0] = 1.0;
  auto p = predict_proba(m, {0, 0}).probs;
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  for (double v : p) EXPECT_TRUE(std::isfinite(v));
}
