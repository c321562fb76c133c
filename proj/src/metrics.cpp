#include "tbrf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tbrf/error.hpp"

namespace tbrf {

double mse(std::span<const double> predictions, std::span<const double> targets)
{
    if (predictions.size() != targets.size())
        throw ValidationError("mse: " + std::to_string(predictions.size()) + " predictions vs " +
                              std::to_string(targets.size()) + " targets");
    if (predictions.empty())
        throw ValidationError("mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double r = targets[i] - predictions[i];
        sum += r * r;
    }
    return sum / static_cast<double>(predictions.size());
}

double penalized_score(double empirical_risk, std::size_t splits, double lambda)
{
    if (!(empirical_risk >= 0.0))
        throw ValidationError("penalized_score: empirical risk must be nonnegative");
    if (!(lambda >= 0.0))
        throw ValidationError("penalized_score: lambda must be nonnegative");
    const double p = static_cast<double>(splits);
    return lambda * p * p + empirical_risk;
}

std::size_t max_splits(double target_bound, double lambda)
{
    if (!(target_bound > 0.0) || !(lambda > 0.0))
        throw ValidationError("max_splits: M and lambda must be positive");
    const double bound = std::floor(target_bound / std::sqrt(lambda));
    // Saturate well below size_t overflow; such budgets are never reached in practice.
    constexpr double kCeiling = 1e15;
    return static_cast<std::size_t>(std::min(bound, kCeiling));
}

} // namespace tbrf
