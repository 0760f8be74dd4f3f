#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pricecast/error.hpp"
#include "pricecast/linear.hpp"
#include "support.hpp"

using namespace pricecast;
using doctest::Approx;

TEST_CASE("fit_ols exact line") {
  auto x = Matrix::from_rows({{0}, {1}, {2}, {5}});
  std::vector<double> y = {2, 5, 8, 17};
  auto m = fit_ols(x, y);
  CHECK(m.coefficients[0] == Approx(3.0).epsilon(1e-12));
  CHECK(m.intercept == Approx(2.0).epsilon(1e-12));
  auto pred = predict_linear(m, x);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(pred[i] == Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("fit_ols constant target") {
  Rng rng(2);
  auto x = testing::random_matrix(rng, 20, 3);
  std::vector<double> y(20, 4.5);
  auto m = fit_ols(x, y);
  for (double c : m.coefficients) CHECK(std::abs(c) < 1e-12);
  CHECK(m.intercept == Approx(4.5).epsilon(1e-12));
  CHECK(predict_linear(m, x.row(3)) == Approx(4.5));
}

TEST_CASE("predict_linear is a dot product plus intercept") {
  LinearModel m{{1.0, -2.0, 0.5}, 3.0};
  std::vector<double> row = {2.0, 1.0, 4.0};
  CHECK(predict_linear(m, row) == 5.0);
  LinearModel zero{{0.0, 0.0}, 7.0};
  CHECK(predict_linear(zero, std::vector<double>{9.0, -9.0}) == 7.0);
}

TEST_CASE("fit_ols matches the normal equations") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = testing::random_matrix(rng, 20, 3);
    std::vector<double> y(20);
    for (auto& v : y) v = 10 * rng.normal();
    auto m = fit_ols(x, y);
    auto b = oracle::normal_equations(x, y);
    CHECK(m.intercept == Approx(b[0]).epsilon(1e-8));
    for (std::size_t j = 0; j < 3; ++j) CHECK(m.coefficients[j] == Approx(b[j + 1]).epsilon(1e-8));
  }
}

TEST_CASE("ols residuals are orthogonal to the columns") {
  Rng rng(14);
  auto x = testing::random_matrix(rng, 60, 4);
  std::vector<double> y(60);
  for (std::size_t r = 0; r < 60; ++r) y[r] = x(r, 0) * 2 - x(r, 3) + rng.normal();
  auto m = fit_ols(x, y);
  auto pred = predict_linear(m, x);
  double scale = 0;
  for (double v : y) scale += v * v;
  for (std::size_t c = 0; c < 4; ++c) {
    double dot = 0;
    for (std::size_t r = 0; r < 60; ++r) dot += (y[r] - pred[r]) * x(r, c);
    CHECK(std::abs(dot) <= 1e-6 * std::sqrt(scale));
  }
}

TEST_CASE("rank-deficient designs name the dependent column") {
  auto x = Matrix::from_rows({{1, 2, 1}, {2, 4, 0}, {3, 6, 1}, {4, 8, 0}, {5, 10, 2}});
  std::vector<double> y = {1, 2, 3, 4, 5};
  std::vector<std::string> names = {"a", "twice_a", "c"};
  try {
    fit_ols(x, y, names);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("twice_a") != std::string::npos);
  }
  CHECK(independent_columns(x) == std::vector<std::size_t>{0, 2});
  auto reduced = fit_ols_reduced(x, y);
  CHECK(reduced.coefficients.size() == 3);
  CHECK(reduced.coefficients[1] == 0.0);
  CHECK(reduced.coefficients[0] == Approx(1.0));
}

TEST_CASE("too few rows") {
  auto x = Matrix::from_rows({{1, 2}, {3, 5}});
  CHECK_THROWS_AS(fit_ols(x, std::vector<double>{1, 2}), NumericError);
}

TEST_CASE("linear model json round-trip") {
  LinearModel m{{0.1, 1e-300, -3.25}, 0.3};
  nlohmann::json j = m;
  CHECK(j.get<LinearModel>() == m);
}
