#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sublaplace/eval.hpp"
#include "sublaplace/experiments.hpp"

using namespace sublaplace;

namespace {

Predictive gaussian_pred(const Vector& mean, const Vector& var) {
  Predictive p;
  p.task = Task::kRegression;
  p.mean = mean;
  p.epistemic_variance = Matrix::Zero(mean.size(), 1);
  for (Index i = 0; i < mean.size(); ++i) p.covariance.push_back(Matrix::Constant(1, 1, var[i]));
  return p;
}

Predictive class_pred(Matrix probs) {
  Predictive p;
  p.task = Task::kClassification;
  p.mean = probs;
  p.probabilities = std::move(probs);
  p.epistemic_variance = Matrix::Zero(p.probabilities.rows(), p.probabilities.cols());
  return p;
}

Dataset regression_targets(const Vector& y) {
  Dataset d;
  d.inputs = Matrix::Zero(y.size(), 1);
  d.targets = y;
  return d;
}

Dataset class_labels(std::vector<int> labels, std::size_t classes) {
  Dataset d;
  d.task = Task::kClassification;
  d.inputs = Matrix::Zero(static_cast<Index>(labels.size()), 1);
  d.labels = std::move(labels);
  d.num_classes = classes;
  return d;
}

struct Conjugate {
  MlpArchitecture arch;
  Dataset train;
  Dataset val;
  double sigma2;
  MapEstimate map;
};

Conjugate conjugate_problem(std::uint64_t seed) {
  const std::size_t dim = 3;
  CounterRng rng(seed);
  Vector truth(dim);
  for (Index i = 0; i < 3; ++i) truth[i] = rng.normal();
  const double sigma2 = 0.25;
  auto draw = [&](std::size_t n) {
    Dataset d;
    d.inputs.resize(static_cast<Index>(n), dim);
    d.targets.resize(static_cast<Index>(n), 1);
    for (Index i = 0; i < d.inputs.rows(); ++i) {
      for (Index j = 0; j < 3; ++j) d.inputs(i, j) = rng.normal();
      d.targets(i, 0) = d.inputs.row(i).dot(truth) + std::sqrt(sigma2) * rng.normal();
    }
    return d;
  };
  Dataset train = draw(8);
  Dataset val = draw(200);
  const Matrix prec = train.inputs.transpose() * train.inputs / sigma2 + Matrix::Identity(3, 3);
  const Vector mean = oracle::gauss_jordan_inverse(prec) * train.inputs.transpose() * train.targets.col(0) / sigma2;
  Vector w = Vector::Zero(4);
  w.head(3) = mean;
  const MlpArchitecture arch{dim, {}, 1};
  MapEstimate map{WeightVector(arch, w), Task::kRegression, std::log(sigma2), {}, {}, 0, 0};
  return {arch, std::move(train), std::move(val), sigma2, std::move(map)};
}

double closed_form_val_ll(const Conjugate& c, double lambda) {
  const Matrix prec = c.train.inputs.transpose() * c.train.inputs / c.sigma2 +
                      lambda * Matrix::Identity(3, 3);
  const Matrix cov = oracle::gauss_jordan_inverse(prec);
  const Vector m = c.map.weights.values().head(3);
  double sum = 0.0;
  for (Index i = 0; i < c.val.inputs.rows(); ++i) {
    const Vector x = c.val.inputs.row(i).transpose();
    sum += oracle::normal_log_pdf(c.val.targets(i, 0), m.dot(x), x.dot(cov * x) + c.sigma2);
  }
  return sum / static_cast<double>(c.val.size());
}

}  // namespace

TEST(LogLikelihood, StandardNormal) {
  const Predictive p = gaussian_pred(Vector::Zero(1), Vector::Ones(1));
  EXPECT_NEAR(log_likelihood(p, regression_targets(Vector::Zero(1))),
              -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(LogLikelihood, ClassificationFloor) {
  Matrix probs(2, 2);
  probs << 1.0, 0.0, 1.0, 0.0;
  const Vector ll = pointwise_log_likelihood(class_pred(probs), class_labels({0, 1}, 2));
  EXPECT_EQ(ll[0], 0.0);
  EXPECT_NEAR(ll[1], std::log(kProbabilityFloor), 1e-12);
}

TEST(LogLikelihood, MultivariateGaussian) {
  Predictive p;
  p.task = Task::kRegression;
  p.mean = Matrix::Zero(1, 2);
  Matrix c(2, 2);
  c << 2.0, 0.5, 0.5, 1.0;
  p.covariance = {c};
  p.epistemic_variance = Matrix::Zero(1, 2);
  Dataset d;
  d.inputs = Matrix::Zero(1, 1);
  d.targets.resize(1, 2);
  d.targets << 0.3, -0.4;
  const Vector y = d.targets.row(0).transpose();
  const double expected = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(c.determinant()) -
                          0.5 * y.dot(oracle::gauss_jordan_inverse(c) * y);
  EXPECT_NEAR(log_likelihood(p, d), expected, 1e-13);
}

TEST(LogLikelihood, ConjugateMarginalPerPoint) {
  const Conjugate c = conjugate_problem(3);
  const CurvatureCache cache = build_curvature(c.map, c.train, false, true);
  const FittedMethod f = fit_method(c.map, cache, full_method(), 1.0);
  const Predictive p = predict(c.map, f.posterior.get(), c.val.inputs);
  EXPECT_NEAR(log_likelihood(p, c.val), closed_form_val_ll(c, 1.0), 1e-10);
}

TEST(LogLikelihood, OrderInvariant) {
  CounterRng rng(4);
  Vector m(500), v(500), y(500);
  for (Index i = 0; i < 500; ++i) {
    m[i] = rng.normal();
    v[i] = 0.1 + rng.uniform();
    y[i] = rng.normal();
  }
  const double a = log_likelihood(gaussian_pred(m, v), regression_targets(y));
  const Vector mr = m.reverse(), vr = v.reverse(), yr = y.reverse();
  const double b = log_likelihood(gaussian_pred(mr, vr), regression_targets(yr));
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(Rmse, Simple) {
  Vector m(2), y(2);
  m << 1, 3;
  y << 0, 0;
  EXPECT_NEAR(rmse(gaussian_pred(m, Vector::Ones(2)), regression_targets(y)), std::sqrt(5.0), 1e-15);
}

TEST(Ece, Examples) {
  Matrix confident(4, 2);
  confident << 1, 0, 1, 0, 0, 1, 0, 1;
  EXPECT_NEAR(ece(class_pred(confident), class_labels({0, 0, 1, 1}, 2)), 0.0, 1e-15);
  EXPECT_NEAR(ece(class_pred(confident), class_labels({0, 1, 1, 0}, 2)), 0.5, 1e-15);
  EXPECT_NEAR(error_rate(class_pred(confident), class_labels({0, 1, 1, 0}, 2)), 0.5, 1e-15);
}

TEST(Ece, CalibratedSamplerIsNearZero) {
  CounterRng rng(6);
  const Index n = 10000;
  Matrix probs(n, 2);
  std::vector<int> labels;
  for (Index i = 0; i < n; ++i) {
    const double p = rng.uniform();
    probs(i, 0) = p;
    probs(i, 1) = 1.0 - p;
    labels.push_back(rng.uniform() < p ? 0 : 1);
  }
  const double e = ece(class_pred(probs), class_labels(labels, 2));
  EXPECT_GE(e, 0.0);
  EXPECT_LE(e, 0.02);
}

TEST(Brier, Examples) {
  Matrix onehot(1, 3);
  onehot << 0, 1, 0;
  EXPECT_EQ(brier(class_pred(onehot), class_labels({1}, 3)), 0.0);
  Matrix uniform = Matrix::Constant(2, 2, 0.5);
  EXPECT_NEAR(brier(class_pred(uniform), class_labels({0, 1}, 2)), 0.5, 1e-15);
  CounterRng rng(7);
  Matrix probs(50, 4);
  std::vector<int> labels;
  double naive = 0.0;
  for (Index i = 0; i < 50; ++i) {
    double s = 0.0;
    for (Index k = 0; k < 4; ++k) s += probs(i, k) = rng.uniform();
    probs.row(i) /= s;
    labels.push_back(static_cast<int>(rng.below(4)));
    for (Index k = 0; k < 4; ++k) {
      const double t = k == labels.back() ? 1.0 : 0.0;
      naive += (probs(i, k) - t) * (probs(i, k) - t);
    }
  }
  const double b = brier(class_pred(probs), class_labels(labels, 4));
  EXPECT_NEAR(b, naive / 50.0, 1e-14);
  EXPECT_LE(b, 2.0);
}

TEST(Grid, DefaultListAndSingleton) {
  EXPECT_EQ(default_lambda_grid(),
            (std::vector<double>{1e-4, 1e-3, 0.1, 0.5, 1, 2, 5, 10, 100, 1000}));
  const Conjugate c = conjugate_problem(5);
  const CurvatureCache cache = build_curvature(c.map, c.train, false, true);
  const GridSearchResult r = grid_search_lambda(c.map, cache, c.val, full_method(), {7.0});
  EXPECT_EQ(r.best_lambda, 7.0);
}

TEST(Grid, PicksClosedFormOptimum) {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const Conjugate c = conjugate_problem(seed);
    const CurvatureCache cache = build_curvature(c.map, c.train, false, true);
    const std::vector<double> grid = default_lambda_grid();
    const GridSearchResult r = grid_search_lambda(c.map, cache, c.val, full_method(), grid);
    double best = grid[0];
    for (double l : grid)
      if (closed_form_val_ll(c, l) > closed_form_val_ll(c, best)) best = l;
    EXPECT_EQ(r.best_lambda, best);
    for (std::size_t i = 0; i < grid.size(); ++i)
      EXPECT_NEAR(r.val_log_likelihood[i], closed_form_val_ll(c, grid[i]), 1e-10);
  }
}

TEST(Grid, EmptyValidation) {
  const Conjugate c = conjugate_problem(2);
  const CurvatureCache cache = build_curvature(c.map, c.train, false, true);
  try {
    grid_search_lambda(c.map, cache, c.val.subset({}), full_method());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyValidation);
  }
}

TEST(FitMethod, MapIsPlainGaussian) {
  const Conjugate c = conjugate_problem(8);
  const CurvatureCache cache = build_curvature(c.map, c.train, false, false);
  const FittedMethod f = fit_method(c.map, cache, map_method(), 1.0);
  EXPECT_EQ(f.posterior, nullptr);
  const Predictive p = predict(c.map, nullptr, c.val.inputs);
  double sum = 0.0;
  for (Index i = 0; i < c.val.inputs.rows(); ++i)
    sum += oracle::normal_log_pdf(c.val.targets(i, 0), p.mean(i, 0), c.sigma2);
  EXPECT_NEAR(log_likelihood(p, c.val), sum / static_cast<double>(c.val.size()), 1e-12);
}

TEST(FitMethod, FullSizeSubnetworkRecoversFull) {
  const MlpArchitecture arch{4, {5}, 1};
  const Dataset train = make_synthetic_tabular(40, 4, 3);
  const MapEstimate map{WeightVector::initialize(arch, 3), Task::kRegression, -1.0, {}, {}, 0, 0};
  const CurvatureCache cache = build_curvature(map, train, false, true);
  MethodConfig sub = subnetwork_method(SelectionStrategy::kWassersteinDiag, 1.0);
  const FittedMethod a = fit_method(map, cache, full_method(), 2.0);
  const FittedMethod b = fit_method(map, cache, sub, 2.0);
  EXPECT_EQ(b.subnetwork_size(), arch.weight_count());
  EXPECT_EQ(b.lambda_used, 2.0);
  const Matrix xs = make_synthetic_tabular(20, 4, 4).inputs;
  const Predictive pa = predict(map, a.posterior.get(), xs);
  const Predictive pb = predict(map, b.posterior.get(), xs);
  EXPECT_LT((pa.epistemic_variance - pb.epistemic_variance).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitMethod, SubnetworkRescalesPrior) {
  const MlpArchitecture arch{4, {5}, 1};
  const Dataset train = make_synthetic_tabular(40, 4, 3);
  const MapEstimate map{WeightVector::initialize(arch, 3), Task::kRegression, -1.0, {}, {}, 0, 0};
  const CurvatureCache cache = build_curvature(map, train, false, false);
  MethodConfig sub = subnetwork_method(SelectionStrategy::kWassersteinDiag, 0.5);
  const FittedMethod f = fit_method(map, cache, sub, 2.0);
  EXPECT_EQ(f.subnetwork_size(), 13u);
  EXPECT_DOUBLE_EQ(f.lambda_used, 2.0 * 13.0 / 25.0);
  sub.rescale_prior = false;
  EXPECT_EQ(fit_method(map, cache, sub, 2.0).lambda_used, 2.0);
  EXPECT_THROW(fit_method(map, cache, full_method(), 2.0), Error);
}

TEST(Aggregate, PopulationStd) {
  const Aggregate a = aggregate({1.0, 3.0});
  EXPECT_EQ(a.mean, 2.0);
  EXPECT_EQ(a.std, 1.0);
  EXPECT_EQ(a.count, 2u);
}

TEST(Summaries, CsvAndKeys) {
  std::vector<MetricRow> rows{
      {"d", "standard:0", 1, "MAP", 0, 0.0, "test_ll", -1.0},
      {"d", "standard:1", 2, "MAP", 0, 0.0, "test_ll", -3.0},
      {"d", "gap:0", 3, "MAP", 0, 0.0, "test_ll", -5.0},
  };
  const std::string csv = metrics_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dataset,split,seed,method,S,lambda,metric,value");
  const auto s = summarize(rows);
  EXPECT_EQ(s.at("d|standard|MAP|test_ll").mean, -2.0);
  EXPECT_EQ(s.at("d|gap|MAP|test_ll").count, 1u);
}

TEST(ParallelFor, IndexOrderedResultsAndErrors) {
  std::vector<int> out(100, 0);
  parallel_for(100, [&](std::size_t i) { out[i] = static_cast<int>(i * i); }, 4);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_for(
                   10, [](std::size_t i) { if (i == 3) throw Error(ErrorCode::kIoError, "x"); }, 3),
               Error);
}
