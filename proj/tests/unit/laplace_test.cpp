#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sublaplace/laplace.hpp"

using namespace sublaplace;

namespace {

MapEstimate make_map(const MlpArchitecture& arch, Vector values, Task task = Task::kRegression,
                     double log_var = 0.0) {
  return MapEstimate{WeightVector(arch, std::move(values)), task, log_var, {}, {}, 0, 0};
}

MapEstimate random_map(const MlpArchitecture& arch, std::uint64_t seed,
                       Task task = Task::kRegression, double log_var = -1.0) {
  return MapEstimate{WeightVector::initialize(arch, seed), task, log_var, {}, {}, seed, 0};
}

Dataset regression_inputs(std::size_t n, std::size_t dim, std::uint64_t seed) {
  CounterRng rng(seed);
  Dataset d;
  d.inputs.resize(static_cast<Index>(n), static_cast<Index>(dim));
  d.targets.resize(static_cast<Index>(n), 1);
  for (Index i = 0; i < d.inputs.rows(); ++i) {
    for (Index j = 0; j < d.inputs.cols(); ++j) d.inputs(i, j) = rng.normal();
    d.targets(i, 0) = rng.normal();
  }
  return d;
}

Dataset classification_inputs(std::size_t n, std::size_t dim, std::size_t classes,
                              std::uint64_t seed) {
  Dataset d = regression_inputs(n, dim, seed);
  d.task = Task::kClassification;
  d.targets.resize(0, 0);
  d.num_classes = classes;
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(i % classes));
  return d;
}

}  // namespace

TEST(LikelihoodHessian, Regression) {
  Vector f(1);
  f << 0.4;
  EXPECT_DOUBLE_EQ(likelihood_hessian(Task::kRegression, f, 1.0)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(likelihood_hessian(Task::kRegression, f, 0.25)(0, 0), 4.0);
}

TEST(LikelihoodHessian, EqualLogits) {
  const Matrix h = likelihood_hessian(Task::kClassification, Vector::Zero(2));
  Matrix expected(2, 2);
  expected << 0.25, -0.25, -0.25, 0.25;
  EXPECT_LT((h - expected).norm(), 1e-15);
}

TEST(LikelihoodHessian, ClassificationIsPsdWithZeroRowSums) {
  CounterRng rng(9);
  for (int t = 0; t < 50; ++t) {
    Vector f(4);
    for (Index i = 0; i < 4; ++i) f[i] = 3.0 * rng.normal();
    const Matrix h = likelihood_hessian(Task::kClassification, f);
    const auto [vals, vecs] = oracle::jacobi_eigen(h);
    EXPECT_GT(vals.minCoeff(), -1e-12);
    EXPECT_LT(h.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LikelihoodHessian, RejectsBadNoise) {
  EXPECT_THROW(likelihood_hessian(Task::kRegression, Vector::Zero(1), 0.0), Error);
  EXPECT_THROW(likelihood_hessian(Task::kRegression, Vector::Zero(1)), Error);
}

TEST(Ggn, ScalarLinearModel) {
  // f = w x at x = 2, sigma^2 = 1, lambda = 1: J^T J + 1 = 5
  const MlpArchitecture arch{1, {}, 1};
  Vector w(2);
  w << 0.3, 0.0;
  const MapEstimate map = make_map(arch, w);
  Dataset d;
  d.inputs = Matrix::Constant(1, 1, 2.0);
  d.targets = Matrix::Constant(1, 1, 0.6);
  const GgnMatrix g = compute_ggn(map, d, SubnetworkMask::full(1), GgnKind::kFull, 1.0);
  EXPECT_NEAR(g.precision()(0, 0), 5.0, 1e-14);
  const GaussianPosterior p = build_posterior(g, map, SubnetworkMask::full(1));
  EXPECT_DOUBLE_EQ(p.mean()[0], 0.3);
  EXPECT_NEAR(p.covariance()(0, 0), 0.2, 1e-14);
}

TEST(Ggn, ZeroJacobianGivesPriorOnly) {
  // all-zero weights make every ReLU inactive: the hidden weights get no curvature
  const MlpArchitecture arch{2, {3}, 1};
  const MapEstimate map = make_map(arch, Vector::Zero(static_cast<Index>(arch.parameter_count())));
  const Dataset d = regression_inputs(5, 2, 1);
  const std::size_t w = arch.weight_count();
  const GgnMatrix g = compute_ggn(map, d, SubnetworkMask::full(w), GgnKind::kFull, 2.5);
  EXPECT_LT((g.precision() - 2.5 * Matrix::Identity(static_cast<Index>(w), static_cast<Index>(w))).norm(), 1e-15);
  const GaussianPosterior p = build_posterior(g, map, SubnetworkMask::full(w));
  EXPECT_LT((p.covariance() - Matrix::Identity(static_cast<Index>(w), static_cast<Index>(w)) / 2.5).norm(), 1e-14);
}

TEST(Ggn, MatchesExplicitSum) {
  const MlpArchitecture arch{2, {4, 3}, 2};
  const MapEstimate map = random_map(arch, 4, Task::kClassification);
  const Dataset d = classification_inputs(7, 2, 2, 2);
  const std::size_t total = arch.weight_count();
  const GgnMatrix g = compute_ggn(map, d, SubnetworkMask::full(total), GgnKind::kFull, 0.7);
  Matrix expected = 0.7 * Matrix::Identity(static_cast<Index>(total), static_cast<Index>(total));
  for (Index n = 0; n < d.inputs.rows(); ++n) {
    const Vector x = d.inputs.row(n).transpose();
    const Matrix j = oracle::central_jacobian(
        [&](const Vector& v) { return oracle::forward(arch, v, x); }, map.weights.values(), 1e-6)
                         .leftCols(static_cast<Index>(total));
    const Matrix h = likelihood_hessian(Task::kClassification, forward(map.weights, x));
    expected += j.transpose() * h * j;
  }
  EXPECT_LT((g.precision() - expected).norm(), 1e-6 * expected.norm());
}

TEST(Ggn, DiagonalKindEqualsDiagonalOfFull) {
  const MlpArchitecture arch{3, {6}, 1};
  const MapEstimate map = random_map(arch, 5);
  const Dataset d = regression_inputs(20, 3, 3);
  const SubnetworkMask full = SubnetworkMask::full(arch.weight_count());
  const GgnMatrix gf = compute_ggn(map, d, full, GgnKind::kFull, 1.3);
  const GgnMatrix gd = compute_ggn(map, d, full, GgnKind::kDiagonal, 1.3);
  EXPECT_LT((gd.precision_diagonal() - gf.precision().diagonal()).norm(), 1e-12);
  EXPECT_LT((gf.data_diagonal - gf.data_term.diagonal()).norm(), 1e-12);
}

TEST(Ggn, SubnetworkIsRestrictionOfFull) {
  const MlpArchitecture arch{2, {5, 5}, 1};
  const MapEstimate map = random_map(arch, 6);
  const Dataset d = regression_inputs(15, 2, 4);
  const std::size_t total = arch.weight_count();
  const GgnMatrix gf = compute_ggn(map, d, SubnetworkMask::full(total), GgnKind::kFull, 1.0);
  const SubnetworkMask mask({1, 4, 9, 17, 30, 39}, total);
  const GgnMatrix gs = compute_ggn(map, d, mask, GgnKind::kSubnetwork, 1.0);
  for (std::size_t a = 0; a < mask.size(); ++a) {
    for (std::size_t b = 0; b < mask.size(); ++b) {
      EXPECT_NEAR(gs.data_term(static_cast<Index>(a), static_cast<Index>(b)),
                  gf.data_term(static_cast<Index>(mask.selected()[a]),
                               static_cast<Index>(mask.selected()[b])),
                  1e-12);
    }
  }
}

TEST(Ggn, FullKindNeedsFullMask) {
  const MlpArchitecture arch{1, {3}, 1};
  const MapEstimate map = random_map(arch, 1);
  const Dataset d = regression_inputs(3, 1, 1);
  EXPECT_THROW(compute_ggn(map, d, SubnetworkMask({0}, arch.weight_count()), GgnKind::kFull, 1.0),
               Error);
}

TEST(Ggn, RejectsNonPositivePrior) {
  const MlpArchitecture arch{1, {3}, 1};
  const MapEstimate map = random_map(arch, 1);
  const Dataset d = regression_inputs(3, 1, 1);
  EXPECT_THROW(compute_ggn(map, d, SubnetworkMask::full(3 + 3), GgnKind::kFull, 0.0), Error);
}

TEST(Ggn, WithPriorPrecisionSwapsOnlyPrior) {
  const MlpArchitecture arch{1, {4}, 1};
  const MapEstimate map = random_map(arch, 2);
  const Dataset d = regression_inputs(6, 1, 6);
  const SubnetworkMask full = SubnetworkMask::full(arch.weight_count());
  const GgnMatrix a = compute_ggn(map, d, full, GgnKind::kFull, 1.0);
  const GgnMatrix b = compute_ggn(map, d, full, GgnKind::kFull, 4.0);
  EXPECT_LT((a.with_prior_precision(4.0).precision() - b.precision()).norm(), 1e-12);
}

TEST(RescalePrior, Examples) {
  EXPECT_DOUBLE_EQ(rescale_prior(3.0, 1300, 2600), 1.5);
  EXPECT_DOUBLE_EQ(rescale_prior(3.0, 2600, 2600), 3.0);
  EXPECT_NEAR(rescale_prior(500.0, 42438, 11168000), 1.9, 5e-3);
  EXPECT_THROW(rescale_prior(1.0, 0, 10), Error);
  EXPECT_THROW(rescale_prior(1.0, 11, 10), Error);
}

TEST(Posterior, ConjugateBayesianLinearRegression) {
  // linear net with bias fixed at zero: the GGN Laplace is the exact posterior
  const std::size_t dim = 4;
  const MlpArchitecture arch{dim, {}, 1};
  const Dataset d = regression_inputs(30, dim, 11);
  const double sigma2 = 0.3;
  const double lambda = 2.0;
  const Matrix& x = d.inputs;
  const Matrix prec = x.transpose() * x / sigma2 + lambda * Matrix::Identity(dim, dim);
  const Matrix cov = oracle::gauss_jordan_inverse(prec);
  const Vector mean = cov * x.transpose() * d.targets.col(0) / sigma2;
  Vector w = Vector::Zero(static_cast<Index>(dim + 1));
  w.head(static_cast<Index>(dim)) = mean;
  const MapEstimate map = make_map(arch, w, Task::kRegression, std::log(sigma2));
  const SubnetworkMask mask = SubnetworkMask::full(dim);
  const GaussianPosterior p =
      build_posterior(compute_ggn(map, d, mask, GgnKind::kFull, lambda), map, mask);
  EXPECT_LT((p.covariance() - cov).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((p.mean() - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(p.noise_variance(), sigma2, 1e-14);
}

TEST(Posterior, DiagonalVersusExactVariances) {
  GgnMatrix g;
  g.kind = GgnKind::kFull;
  g.data_term.resize(3, 3);
  g.data_term << 2.0, 0.9, 0.3, 0.9, 1.5, 0.6, 0.3, 0.6, 1.0;
  g.data_diagonal = g.data_term.diagonal();
  g.prior_precision = 0.5;
  g.index_map = {0, 1, 2};
  g.total = 3;
  const Vector exact = exact_marginal_variances(g);
  const Matrix inv = oracle::gauss_jordan_inverse(g.precision());
  EXPECT_LT((exact - inv.diagonal()).norm(), 1e-12);
  const Vector diag = diag_marginal_variances(g);
  EXPECT_LT((diag - g.precision().diagonal().cwiseInverse()).norm(), 1e-15);
  // correlations make the diagonal approximation overconfident
  for (Index i = 0; i < 3; ++i) EXPECT_LT(diag[i], exact[i]);
}

TEST(Posterior, PermutationInvariance) {
  const MlpArchitecture arch{2, {4}, 1};
  const MapEstimate map = random_map(arch, 8);
  const Dataset d = regression_inputs(10, 2, 8);
  const std::size_t total = arch.weight_count();
  const SubnetworkMask full = SubnetworkMask::full(total);
  const GgnMatrix g = compute_ggn(map, d, full, GgnKind::kFull, 1.0);
  const Matrix cov = build_posterior(g, map, full).covariance();

  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng rng(3);
  for (std::size_t i = total; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const auto n = static_cast<Index>(total);
  Matrix p = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < total; ++i) p(static_cast<Index>(i), static_cast<Index>(perm[i])) = 1.0;
  const Matrix permuted = p * g.precision() * p.transpose();
  const Matrix cov_perm = oracle::gauss_jordan_inverse(permuted);
  EXPECT_LT((p.transpose() * cov_perm * p - cov).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Posterior, MarginalizeKeepsCovarianceBlock) {
  const MlpArchitecture arch{2, {4}, 1};
  const MapEstimate map = random_map(arch, 9);
  const Dataset d = regression_inputs(10, 2, 9);
  const SubnetworkMask full = SubnetworkMask::full(arch.weight_count());
  const GaussianPosterior p = build_posterior(compute_ggn(map, d, full, GgnKind::kFull, 1.0), map, full);
  const SubnetworkMask keep({2, 5, 7}, arch.weight_count());
  const GaussianPosterior m = marginalize(p, keep);
  const Matrix cov = p.covariance();
  const Matrix sub = m.covariance();
  for (Index a = 0; a < 3; ++a)
    for (Index b = 0; b < 3; ++b)
      EXPECT_NEAR(sub(a, b), cov(static_cast<Index>(keep.selected()[a]), static_cast<Index>(keep.selected()[b])), 1e-12);
  EXPECT_EQ(m.mask(), keep);
}

TEST(Posterior, EmbedAndComplement) {
  const MlpArchitecture arch{1, {2}, 1};
  const MapEstimate map = random_map(arch, 10);
  const Dataset d = regression_inputs(4, 1, 10);
  const SubnetworkMask mask({0, 3}, arch.weight_count());
  const GaussianPosterior p =
      build_posterior(compute_ggn(map, d, mask, GgnKind::kSubnetwork, 1.0), map, mask);
  Vector ws(2);
  ws << 10.0, 20.0;
  const Vector full = p.embed(ws);
  EXPECT_EQ(full[0], 10.0);
  EXPECT_EQ(full[3], 20.0);
  EXPECT_EQ(full[1], map.weights.values()[1]);
  EXPECT_EQ(p.complement_values().size(), static_cast<Index>(map.weights.size() - 2));
}

TEST(Posterior, SampleOffsetsHaveCovariance) {
  GgnMatrix g;
  g.kind = GgnKind::kFull;
  g.data_term.resize(2, 2);
  g.data_term << 1.0, 0.5, 0.5, 2.0;
  g.data_diagonal = g.data_term.diagonal();
  g.prior_precision = 1.0;
  g.index_map = {0, 1};
  g.total = 2;
  const MlpArchitecture arch{1, {}, 2};
  const MapEstimate map = make_map(arch, Vector::Zero(4));
  const GaussianPosterior p = build_posterior(g, map, SubnetworkMask::full(2));
  CounterRng rng(5);
  const int n = 200000;
  Matrix acc = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Vector s = p.sample_offset(rng);
    acc += s * s.transpose();
  }
  acc /= n;
  EXPECT_LT((acc - p.covariance()).cwiseAbs().maxCoeff(), 0.01);
}

TEST(DiagonalPosterior, LinearizedVariance) {
  GgnMatrix g;
  g.kind = GgnKind::kDiagonal;
  g.data_diagonal = Vector::Constant(3, 1.0);
  g.prior_precision = 1.0;
  g.index_map = {0, 1, 2};
  g.total = 3;
  const DiagonalPosterior p = build_diagonal_posterior(g);
  EXPECT_LT((p.variances() - Vector::Constant(3, 0.5)).norm(), 1e-15);
  Matrix j(1, 3);
  j << 1.0, 2.0, 3.0;
  EXPECT_NEAR(p.linearized_variance(j)(0, 0), 0.5 * 14.0, 1e-14);
}

TEST(Posterior, NotPositiveDefiniteIsReported) {
  GgnMatrix g;
  g.kind = GgnKind::kFull;
  g.data_term = Matrix::Zero(2, 2);
  g.data_term(0, 0) = -5.0;
  g.data_diagonal = g.data_term.diagonal();
  g.prior_precision = 1.0;
  g.index_map = {0, 1};
  g.total = 2;
  const MlpArchitecture arch{1, {}, 2};
  const MapEstimate map = make_map(arch, Vector::Zero(4));
  try {
    build_posterior(g, map, SubnetworkMask::full(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotPositiveDefinite);
  }
}

TEST(JacobianStack, HessJacIsHessianTimesJacobian) {
  const MlpArchitecture arch{2, {3}, 3};
  const MapEstimate map = random_map(arch, 12, Task::kClassification);
  const Dataset d = classification_inputs(4, 2, 3, 12);
  std::vector<std::size_t> cols(arch.weight_count());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  const JacobianStack s = build_jacobian_stack(map, d, cols);
  ASSERT_EQ(s.jac.rows(), 12);
  for (Index n = 0; n < 4; ++n) {
    const Vector x = d.inputs.row(n).transpose();
    const Matrix h = likelihood_hessian(Task::kClassification, forward(map.weights, x));
    const Matrix j = s.jac.middleRows(3 * n, 3);
    EXPECT_LT((s.hess_jac.middleRows(3 * n, 3) - h * j).norm(), 1e-12);
  }
}
