#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pricecast/matrix.hpp"

namespace pricecast {

struct LinearModel {
  std::vector<double> coefficients;
  double intercept = 0.0;

  bool operator==(const LinearModel&) const = default;
};

void to_json(nlohmann::json& j, const LinearModel& m);
void from_json(const nlohmann::json& j, LinearModel& m);

/// Ordinary least squares with an intercept, solved by column-pivoted Householder QR.
/// Requires rows > cols and a full-rank design (after adding the intercept column);
/// a rank-deficient design throws NumericError naming the first dependent column.
LinearModel fit_ols(const Matrix& x, std::span<const double> y, std::span<const std::string> column_names = {});

std::vector<double> predict_linear(const LinearModel& model, const Matrix& x);
double predict_linear(const LinearModel& model, std::span<const double> row);

/// Greedy left-to-right column selection keeping each column that raises the rank
/// of [1, kept columns]. Used to drop one-hot reference levels and constant columns
/// before an OLS fit.
std::vector<std::size_t> independent_columns(const Matrix& x);

/// fit_ols over independent_columns(x); dropped columns get a zero coefficient so
/// the model still takes full-width rows.
LinearModel fit_ols_reduced(const Matrix& x, std::span<const double> y);

}  // namespace pricecast
