#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sublaplace/net.hpp"
#include "sublaplace/rng.hpp"

#include <numeric>

using namespace sublaplace;

namespace {

MlpArchitecture random_arch(CounterRng& rng, std::size_t max_params) {
  for (;;) {
    MlpArchitecture a;
    a.input_dim = 1 + rng.below(4);
    a.output_dim = 1 + rng.below(3);
    const auto depth = rng.below(3) + 1;
    for (std::uint64_t l = 0; l < depth; ++l) a.hidden_widths.push_back(1 + rng.below(12));
    if (a.parameter_count() <= max_params) return a;
  }
}

Vector random_vec(CounterRng& rng, Index n, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

}  // namespace

TEST(Architecture, ToyNetworkHas2600Weights) {
  const MlpArchitecture a{1, {50, 50}, 1};
  EXPECT_EQ(a.weight_count(), 2600u);
  EXPECT_EQ(a.bias_count(), 101u);
  EXPECT_EQ(a.parameter_count(), 2701u);
}

TEST(Architecture, EqualWidthWeightCountFormula) {
  // D = (i + 1) w + (h - 1) w^2 with a single output
  for (std::size_t i : {1u, 8u, 11u}) {
    for (std::size_t w : {50u, 100u}) {
      for (std::size_t h : {1u, 2u}) {
        std::vector<std::size_t> widths(h, w);
        const MlpArchitecture a{i, widths, 1};
        EXPECT_EQ(MlpArchitecture::equal_width_weight_count(i, w, h), a.weight_count());
        EXPECT_EQ(a.weight_count(), (i + 1) * w + (h - 1) * w * w);
      }
    }
  }
}

TEST(Architecture, RejectsZeroWidth) {
  const MlpArchitecture a{2, {0}, 1};
  EXPECT_THROW(a.validate(), Error);
}

TEST(Layout, WeightsFirstThenBiases) {
  const MlpArchitecture a{2, {3}, 2};
  const ParameterLayout layout(a);
  EXPECT_EQ(layout.weight_index(0, 0, 0), 0u);
  EXPECT_EQ(layout.weight_index(0, 2, 1), 5u);
  EXPECT_EQ(layout.weight_index(1, 0, 0), 6u);
  EXPECT_EQ(layout.weight_index(1, 1, 2), 11u);
  EXPECT_EQ(layout.bias_index(0, 0), 12u);
  EXPECT_EQ(layout.bias_index(1, 1), 16u);
  EXPECT_EQ(layout.size(), 17u);
  EXPECT_EQ(layout.eligible_count(false), 12u);
  EXPECT_EQ(layout.eligible_count(true), 17u);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const ParamCoord c = layout.coord(i);
    const std::size_t back = c.kind == ParamKind::kWeight ? layout.weight_index(c.layer, c.row, c.col)
                                                          : layout.bias_index(c.layer, c.row);
    EXPECT_EQ(back, i);
  }
}

TEST(WeightVector, SizeMismatchThrows) {
  const MlpArchitecture a{2, {3}, 1};
  try {
    WeightVector(a, Vector::Zero(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(WeightVector, InitializeIsDeterministic) {
  const MlpArchitecture a{3, {10, 10}, 2};
  EXPECT_EQ(WeightVector::initialize(a, 4).values(), WeightVector::initialize(a, 4).values());
  EXPECT_NE(WeightVector::initialize(a, 4).values(), WeightVector::initialize(a, 5).values());
}

TEST(Forward, MatchesLoopOracle) {
  CounterRng rng(11);
  for (int t = 0; t < 20; ++t) {
    const MlpArchitecture a = random_arch(rng, 500);
    const WeightVector w(a, random_vec(rng, static_cast<Index>(a.parameter_count())));
    const Vector x = random_vec(rng, static_cast<Index>(a.input_dim));
    EXPECT_LT((forward(w, x) - oracle::forward(a, w.values(), x)).norm(), 1e-12);
  }
}

TEST(Forward, BatchMatchesSingle) {
  CounterRng rng(12);
  const MlpArchitecture a{3, {8, 5}, 2};
  const WeightVector w(a, random_vec(rng, static_cast<Index>(a.parameter_count())));
  Matrix xs(6, 3);
  for (Index i = 0; i < 6; ++i) xs.row(i) = random_vec(rng, 3).transpose();
  const Matrix out = forward_batch(w, xs);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_LT((out.row(i).transpose() - forward(w, xs.row(i).transpose())).norm(), 1e-13);
  }
}

TEST(Forward, WrongInputWidthThrows) {
  const MlpArchitecture a{3, {4}, 1};
  EXPECT_THROW(forward(WeightVector::zeros(a), Vector::Zero(2)), Error);
}

TEST(Jacobian, LinearModelIsInputPlusBias) {
  const MlpArchitecture a{3, {}, 1};
  const WeightVector w(a, Vector::LinSpaced(4, 0.1, 0.4));
  const Vector x = Eigen::Vector3d(1.0, -2.0, 0.5);
  const Jacobian j = jacobian(w, x);
  ASSERT_EQ(j.matrix.rows(), 1);
  ASSERT_EQ(j.matrix.cols(), 4);
  EXPECT_DOUBLE_EQ(j.matrix(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(j.matrix(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(j.matrix(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(j.matrix(0, 3), 1.0);
}

TEST(Jacobian, MatchesCentralDifferencesOnRandomArchitectures) {
  CounterRng rng(13);
  for (int t = 0; t < 25; ++t) {
    const MlpArchitecture a = random_arch(rng, 500);
    const Vector w0 = random_vec(rng, static_cast<Index>(a.parameter_count()));
    const Vector x = random_vec(rng, static_cast<Index>(a.input_dim));
    const WeightVector w(a, w0);
    const Matrix ad = jacobian(w, x).matrix;
    const Matrix fd = oracle::central_jacobian(
        [&](const Vector& v) { return oracle::forward(a, v, x); }, w0, 1e-4);
    // skip coordinates whose finite-difference stencil crosses a ReLU kink
    const Matrix fd2 = oracle::central_jacobian(
        [&](const Vector& v) { return oracle::forward(a, v, x); }, w0, 5e-5);
    for (Index c = 0; c < ad.cols(); ++c) {
      if ((fd.col(c) - fd2.col(c)).norm() > 1e-6 * (1.0 + fd.col(c).norm())) continue;
      EXPECT_LE((ad.col(c) - fd.col(c)).norm(), 1e-5 * std::max(1.0, fd.col(c).norm()))
          << "architecture " << t << " column " << c;
    }
  }
}

TEST(Jacobian, ColumnSubsetGathersFullColumns) {
  CounterRng rng(14);
  const MlpArchitecture a{2, {6}, 3};
  const WeightVector w(a, random_vec(rng, static_cast<Index>(a.parameter_count())));
  const Vector x = random_vec(rng, 2);
  const Jacobian full = jacobian(w, x);
  const std::vector<std::size_t> cols{0, 5, 17, 30};
  const Jacobian sub = jacobian(w, x, std::span<const std::size_t>(cols));
  EXPECT_EQ(sub.columns, cols);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    EXPECT_EQ(sub.matrix.col(static_cast<Index>(k)), full.matrix.col(static_cast<Index>(cols[k])));
  }
}

TEST(Jacobian, StackedRowsArePointMajor) {
  CounterRng rng(15);
  const MlpArchitecture a{2, {4}, 2};
  const WeightVector w(a, random_vec(rng, static_cast<Index>(a.parameter_count())));
  Matrix xs(3, 2);
  for (Index i = 0; i < 3; ++i) xs.row(i) = random_vec(rng, 2).transpose();
  std::vector<std::size_t> cols(a.parameter_count());
  std::iota(cols.begin(), cols.end(), 0);
  const Matrix st = stacked_jacobian(w, xs, cols);
  ASSERT_EQ(st.rows(), 6);
  for (Index n = 0; n < 3; ++n) {
    EXPECT_LT((st.middleRows(n * 2, 2) - jacobian(w, xs.row(n).transpose()).matrix).norm(), 1e-13);
  }
}

TEST(Backward, GradientIsJacobianTransposeTimesUpstream) {
  CounterRng rng(16);
  for (int t = 0; t < 20; ++t) {
    const MlpArchitecture a = random_arch(rng, 400);
    const WeightVector w(a, random_vec(rng, static_cast<Index>(a.parameter_count())));
    const Vector x = random_vec(rng, static_cast<Index>(a.input_dim));
    const Vector up = random_vec(rng, static_cast<Index>(a.output_dim));
    const Vector g = grad_params(w, x, up);
    EXPECT_LT((g - jacobian(w, x).matrix.transpose() * up).norm(), 1e-12 * (1.0 + g.norm()));
  }
}

TEST(Backward, BatchGradientSumsPoints) {
  CounterRng rng(17);
  const MlpArchitecture a{3, {5, 4}, 2};
  const WeightVector w(a, random_vec(rng, static_cast<Index>(a.parameter_count())));
  Matrix xs(4, 3);
  Matrix up(4, 2);
  for (Index i = 0; i < 4; ++i) {
    xs.row(i) = random_vec(rng, 3).transpose();
    up.row(i) = random_vec(rng, 2).transpose();
  }
  ForwardTrace tr;
  forward_batch(w, xs, &tr);
  const Vector g = backward_batch(w, tr, up);
  Vector expect = Vector::Zero(g.size());
  for (Index i = 0; i < 4; ++i) expect += grad_params(w, xs.row(i).transpose(), up.row(i).transpose());
  EXPECT_LT((g - expect).norm(), 1e-12);
}

TEST(Relu, DerivativeAtZeroIsZero) {
  // one hidden unit with pre-activation exactly 0 at x = 0
  const MlpArchitecture a{1, {1}, 1};
  Vector v(4);
  v << 1.0, 2.0, 0.0, 0.0;  // w1, w2, b1, b2
  const Jacobian j = jacobian(WeightVector(a, v), Vector::Zero(1));
  EXPECT_EQ(j.matrix(0, 0), 0.0);
  EXPECT_EQ(j.matrix(0, 2), 0.0);
  EXPECT_EQ(j.matrix(0, 3), 1.0);
}
