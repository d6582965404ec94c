#include <doctest.h>

#include <cmath>

#include "causalab/demos.hpp"
#include "causalab/numerics.hpp"
#include "causalab/rng.hpp"
#include "causalab/scm.hpp"

using namespace causalab;

namespace {

Matrix random_matrix(Index n, Index p, RandomStream& s) {
  Matrix m(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) m(i, j) = s.gaussian();
  return m;
}

double logistic_mean_nll(const Matrix& x, const Vector& y, const Vector& theta) {
  const Index n = x.rows(), p = x.cols();
  double total = 0;
  for (Index i = 0; i < n; ++i) {
    double eta = theta(p);
    for (Index j = 0; j < p; ++j) eta += x(i, j) * theta(j);
    total += detail::logistic_nll_term(eta, y(i));
  }
  return total / static_cast<double>(n);
}

Vector logistic_analytic_gradient(const Matrix& x, const Vector& y, const Vector& theta) {
  const Index n = x.rows(), p = x.cols();
  Matrix design(n, p + 1);
  design.leftCols(p) = x;
  design.col(p).setOnes();
  const Vector eta = design * theta;
  const Vector prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
  return design.transpose() * (prob - y) / static_cast<double>(n);
}

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("ols recovers an exact affine relation") {
    Vector x(5);
    x << -2, -1, 0, 1, 2;
    const Vector y = 3.0 * x.array() + 1.0;
    const LinearFit fit = ols_fit(x.reshaped(5, 1), y);
    CHECK(fit.coefficients(0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.residuals.cwiseAbs().maxCoeff() <= 1e-10);
  }

  TEST_CASE("ols residuals are orthogonal to the design") {
    RandomStream s({1, 0});
    const Index n = 400, p = 5;
    const Matrix x = random_matrix(n, p, s);
    Vector y(n);
    for (Index i = 0; i < n; ++i) y(i) = x.row(i).sum() + s.gaussian();
    const LinearFit fit = ols_fit(x, y);
    for (Index j = 0; j < p; ++j)
      CHECK(std::abs(x.col(j).dot(fit.residuals)) <= 1e-8 * n * x.col(j).norm());
    CHECK(std::abs(fit.residuals.sum()) <= 1e-8 * n);
  }

  TEST_CASE("ols is invariant under row permutation") {
    RandomStream s({2, 0});
    const Index n = 100;
    const Matrix x = random_matrix(n, 3, s);
    Vector y(n);
    for (Index i = 0; i < n; ++i) y(i) = 2 * x(i, 0) - x(i, 2) + s.gaussian();
    const LinearFit a = ols_fit(x, y);

    Matrix xr(n, 3);
    Vector yr(n);
    for (Index i = 0; i < n; ++i) {
      xr.row(i) = x.row(n - 1 - i);
      yr(i) = y(n - 1 - i);
    }
    const LinearFit b = ols_fit(xr, yr);
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(std::abs(a.intercept - b.intercept) <= 1e-8);
  }

  TEST_CASE("rank-deficient design") {
    Matrix x(6, 2);
    x.col(0) << 1, 2, 3, 4, 5, 6;
    x.col(1) = 2.0 * x.col(0);
    Vector y(6);
    y << 1, 2, 3, 4, 5, 6;
    CHECK_THROWS_AS(ols_fit(x, y), SingularityError);
    CHECK_NOTHROW(ols_fit(x, y, 1e-8));
  }

  TEST_CASE("poly_features powers") {
    Vector x(1);
    x << 2;
    const Matrix m = poly_features(x, 3);
    CHECK(m(0, 0) == 2);
    CHECK(m(0, 1) == 4);
    CHECK(m(0, 2) == 8);
    Vector x2(3);
    x2 << -1, 0.5, 3;
    CHECK(poly_features(x2, 1) == x2.reshaped(3, 1));
    CHECK_THROWS_AS(poly_features(x2, 0), ConfigError);
  }

  TEST_CASE("poly degree 1 reproduces plain ols exactly") {
    RandomStream s({3, 0});
    Vector x(50), y(50);
    for (Index i = 0; i < 50; ++i) {
      x(i) = s.gaussian();
      y(i) = 1.5 * x(i) + s.gaussian();
    }
    const LinearFit a = ols_fit(x.reshaped(50, 1), y);
    const LinearFit b = ols_fit(poly_features(x, 1), y);
    CHECK(a.coefficients(0) == b.coefficients(0));
    CHECK(a.intercept == b.intercept);
  }

  TEST_CASE("degree-5 expansion fits the demo3 outcome nuisance") {
    RandomStream s({4, 0});
    const Index n = 10000;
    Vector x(n), g(n);
    for (Index i = 0; i < n; ++i) {
      x(i) = s.gaussian();
      g(i) = demo3_g0(x(i));
    }
    const LinearFit fit = ols_fit(poly_features(x, 5), g);
    const double rmse = std::sqrt(fit.residuals.squaredNorm() / static_cast<double>(n));
    CHECK(rmse <= 0.05);
  }

  TEST_CASE("logistic separates well-separated clouds") {
    RandomStream s({5, 0});
    const Index n = 500;
    Matrix x(n, 2);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      y(i) = i % 2;
      const double c = y(i) == 1 ? 4.0 : -4.0;
      x(i, 0) = c + s.gaussian();
      x(i, 1) = c + s.gaussian();
    }
    FitConfig cfg;
    cfg.ridge = 1e-4;
    const LinearFit fit = logistic_fit(x, y, cfg);
    const Vector prob = predict(fit, x);
    Index hits = 0;
    for (Index i = 0; i < n; ++i) hits += (prob(i) >= 0.5) == (y(i) == 1.0);
    CHECK(static_cast<double>(hits) / n >= 0.99);

    // AUC on a fresh draw from the same clouds.
    Matrix x2(n, 2);
    Vector y2(n);
    for (Index i = 0; i < n; ++i) {
      y2(i) = i % 2;
      const double c = y2(i) == 1 ? 4.0 : -4.0;
      x2(i, 0) = c + s.gaussian();
      x2(i, 1) = c + s.gaussian();
    }
    const Vector score = predict(fit, x2);
    double pairs = 0, wins = 0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (y2(i) == 1 && y2(j) == 0) {
          pairs += 1;
          wins += score(i) > score(j) ? 1 : (score(i) == score(j) ? 0.5 : 0);
        }
    CHECK(wins / pairs >= 0.99);

    // Fully separated data with no ridge is flagged.
    FitConfig no_ridge;
    no_ridge.ridge = 0.0;
    no_ridge.max_iterations = 500;
    CHECK_THROWS_AS(logistic_fit(x, y, no_ridge), ConvergenceError);
  }

  TEST_CASE("logistic on demo2 reaches high training accuracy at p = 0.98") {
    const Dataset ds = sample(demo2_spec(), {{"p", 0.98}}, 10000, {6, 0});
    Matrix x(ds.n(), 2);
    x.col(0) = ds.col("shape");
    x.col(1) = ds.col("colour");
    FitConfig cfg;
    cfg.ridge = 1e-6;
    const LinearFit fit = logistic_fit(x, ds.col("Y"), cfg);
    const Vector prob = predict(fit, x);
    Index hits = 0;
    for (Index i = 0; i < ds.n(); ++i) hits += (prob(i) >= 0.5) == (ds.col("Y")(i) == 1.0);
    CHECK(static_cast<double>(hits) / static_cast<double>(ds.n()) >= 0.95);
  }

  TEST_CASE("logistic null model keeps coefficients near zero") {
    RandomStream s({7, 0});
    const Index n = 2000;
    Matrix x(n, 2);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = s.gaussian();
      x(i, 1) = s.gaussian();
      y(i) = s.bernoulli(0.5) ? 1.0 : 0.0;
    }
    FitConfig cfg;
    cfg.ridge = 1e-8;
    const LinearFit fit = logistic_fit(x, y, cfg);
    // Null standard error of each coefficient is about 2/sqrt(n).
    const double se = 2.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(fit.coefficients(0)) <= 3 * se);
    CHECK(std::abs(fit.coefficients(1)) <= 3 * se);
  }

  TEST_CASE("logistic convergence error carries the gradient norm") {
    RandomStream s({8, 0});
    Matrix x(100, 1);
    Vector y(100);
    for (Index i = 0; i < 100; ++i) {
      x(i, 0) = s.gaussian();
      y(i) = s.bernoulli(0.5);
    }
    FitConfig cfg;
    cfg.max_iterations = 1;
    cfg.tolerance = 1e-14;
    try {
      logistic_fit(x, y, cfg);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.final_gradient_norm > 0);
    }
    CHECK_THROWS_AS(logistic_fit(x, Vector::Constant(100, 1.0), cfg), ConfigError);
    Vector not01 = y;
    not01(3) = 0.5;
    CHECK_THROWS_AS(logistic_fit(x, not01, cfg), ConfigError);
  }

  TEST_CASE("predict") {
    LinearFit logit;
    logit.coefficients = Vector::Zero(2);
    logit.intercept = 0;
    logit.loss_kind = LossKind::logistic;
    Matrix x(3, 2);
    x << 1, 2, -5, 0.5, 100, -3;
    const Vector p = predict(logit, x);
    for (Index i = 0; i < 3; ++i) CHECK(p(i) == 0.5);

    LinearFit affine;
    affine.coefficients = Vector::Constant(1, 3.0);
    affine.intercept = 1.0;
    Matrix one(1, 1);
    one << 2.0;
    CHECK(predict(affine, one)(0) == 7.0);
    CHECK_THROWS_AS(predict(affine, x), ConfigError);
  }

  TEST_CASE("fd_gradient basics") {
    auto square = [](const Vector& v) { return v(0) * v(0); };
    Vector at(1);
    at << 3.0;
    CHECK(fd_gradient(square, at, 1e-5)(0) == doctest::Approx(6.0).epsilon(1e-7));

    auto constant = [](const Vector&) { return 4.2; };
    Vector at3(3);
    at3 << 1, 2, 3;
    CHECK(fd_gradient(constant, at3, 1e-5).cwiseAbs().maxCoeff() == 0.0);

    auto blows_up = [](const Vector& v) { return std::log(v(0)); };
    Vector neg(1);
    neg << -1.0;
    CHECK_THROWS_AS(fd_gradient(blows_up, neg, 1e-5), NumericError);
    CHECK_THROWS_AS(fd_gradient(square, at, 0.0), ConfigError);
  }

  TEST_CASE("logistic analytic gradient matches central differences") {
    RandomStream s({9, 0});
    const Index n = 200, p = 3;
    const Matrix x = random_matrix(n, p, s);
    Vector y(n);
    for (Index i = 0; i < n; ++i) y(i) = s.bernoulli(0.4) ? 1.0 : 0.0;

    for (int rep = 0; rep < 20; ++rep) {
      Vector theta(p + 1);
      for (Index j = 0; j <= p; ++j) theta(j) = s.gaussian();
      const Vector analytic = logistic_analytic_gradient(x, y, theta);
      const Vector fd = fd_gradient(
          [&](const Vector& t) { return logistic_mean_nll(x, y, t); }, theta, 1e-5);
      const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-8);
      CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale <= 1e-4);
    }
  }
}
