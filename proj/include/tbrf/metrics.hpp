#pragma once

#include <cstddef>
#include <span>

namespace tbrf {

/// Mean of squared residuals.
double mse(std::span<const double> predictions, std::span<const double> targets);

/// lambda * p^2 + empirical_risk: the regularized objective a child tree is scored by.
double penalized_score(double empirical_risk, std::size_t splits, double lambda);

/// floor(M / sqrt(lambda)): no split budget may exceed this for a cell penalized by lambda.
std::size_t max_splits(double target_bound, double lambda);

} // namespace tbrf
