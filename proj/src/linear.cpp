#include "pricecast/linear.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>
#include <cmath>

#include "pricecast/error.hpp"

namespace pricecast {

namespace {

using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

DesignMatrix design_with_intercept(const Matrix& x) {
  DesignMatrix a(x.rows(), x.cols() + 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    a(r, 0) = 1.0;
    for (std::size_t c = 0; c < x.cols(); ++c) a(r, c + 1) = x(r, c);
  }
  return a;
}

Eigen::Index rank_of(const DesignMatrix& a) {
  Eigen::ColPivHouseholderQR<DesignMatrix> qr(a);
  qr.setThreshold(1e-10);
  return qr.rank();
}

}  // namespace

void to_json(nlohmann::json& j, const LinearModel& m) {
  j = {{"coefficients", m.coefficients}, {"intercept", m.intercept}};
}

void from_json(const nlohmann::json& j, LinearModel& m) {
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  m.intercept = j.at("intercept");
}

std::vector<std::size_t> independent_columns(const Matrix& x) {
  std::vector<std::size_t> kept;
  DesignMatrix current = DesignMatrix::Ones(x.rows(), 1);
  Eigen::Index rank = rank_of(current);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    DesignMatrix candidate(x.rows(), current.cols() + 1);
    candidate.leftCols(current.cols()) = current;
    for (std::size_t r = 0; r < x.rows(); ++r) candidate(r, current.cols()) = x(r, c);
    const Eigen::Index r = rank_of(candidate);
    if (r > rank) {
      kept.push_back(c);
      current = std::move(candidate);
      rank = r;
    }
  }
  return kept;
}

LinearModel fit_ols(const Matrix& x, std::span<const double> y, std::span<const std::string> column_names) {
  if (y.size() != x.rows()) throw DomainError("fit_ols: target length does not match row count");
  if (x.rows() <= x.cols()) {
    throw NumericError(fmt::format("fit_ols: need more rows than columns ({} rows, {} columns)", x.rows(), x.cols()));
  }
  const DesignMatrix a = design_with_intercept(x);
  Eigen::ColPivHouseholderQR<DesignMatrix> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols()) {
    const auto kept = independent_columns(x);
    std::size_t offending = x.cols();
    for (std::size_t c = 0, k = 0; c < x.cols(); ++c) {
      if (k < kept.size() && kept[k] == c) {
        ++k;
      } else {
        offending = c;
        break;
      }
    }
    const std::string name = offending < column_names.size() ? column_names[offending]
                                                              : fmt::format("column {}", offending);
    throw NumericError(fmt::format("fit_ols: singular design matrix; '{}' is linearly dependent on the "
                                   "intercept and earlier columns",
                                   name));
  }
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd beta = qr.solve(target);
  LinearModel model;
  model.intercept = beta(0);
  model.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
  return model;
}

LinearModel fit_ols_reduced(const Matrix& x, std::span<const double> y) {
  const auto kept = independent_columns(x);
  Matrix reduced(x.rows(), kept.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t k = 0; k < kept.size(); ++k) reduced(r, k) = x(r, kept[k]);
  }
  const LinearModel small = fit_ols(reduced, y);
  LinearModel model;
  model.intercept = small.intercept;
  model.coefficients.assign(x.cols(), 0.0);
  for (std::size_t k = 0; k < kept.size(); ++k) model.coefficients[kept[k]] = small.coefficients[k];
  return model;
}

double predict_linear(const LinearModel& model, std::span<const double> row) {
  if (row.size() != model.coefficients.size()) throw DomainError("predict_linear: feature count mismatch");
  double s = model.intercept;
  for (std::size_t c = 0; c < row.size(); ++c) s += model.coefficients[c] * row[c];
  return s;
}

std::vector<double> predict_linear(const LinearModel& model, const Matrix& x) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_linear(model, x.row(r));
  return out;
}

}  // namespace pricecast
