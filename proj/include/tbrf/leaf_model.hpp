#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "tbrf/dataset.hpp"
#include "tbrf/hyper_params.hpp"
#include "tbrf/random_stream.hpp"

namespace tbrf {

struct ConstantModel {
    double value = 0.0;
};

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
};

/// sum_i coefficients[i] * exp(-gamma |x - s_i|^2) + bias.
struct KernelModel {
    std::size_t dim = 0;
    std::vector<double> support; // row-major, coefficients.size() x dim
    std::vector<double> coefficients;
    double bias = 0.0;
    double gamma = 1.0;

    std::span<const double> support_point(std::size_t i) const { return {support.data() + i * dim, dim}; }
};

using LeafModel = std::variant<ConstantModel, LinearModel, KernelModel>;

struct ModelSearchSpec {
    std::vector<double> c_grid = {0.1, 1.0, 10.0, 100.0};
    std::vector<double> gamma_grid = {0.01, 0.1, 1.0, 10.0};
    double validation_fraction = 0.3;
};

/// Unclamped model output.
double evaluate(const LeafModel& model, std::span<const double> x);

/// Model output clamped to [-bound, bound]. Linear and kernel models check
/// the dimension of x.
double predict_leaf(const LeafModel& model, std::span<const double> x, double bound);

LeafModel fit_constant(std::span<const double> targets);

struct LssvmSolution {
    std::vector<double> alpha;
    double bias = 0.0;
    double residual_norm = 0.0; // |A z - rhs| of the bordered system
    double system_norm = 0.0;   // |A|_F |z| + |rhs|
};

/// Least-squares SVM regression: solves
///     [ 0   1^T       ] [ b     ]   [ 0 ]
///     [ 1   K + I / C ] [ alpha ] = [ y ]
/// for an n x n symmetric kernel matrix (row-major). Throws NumericError when
/// the system is numerically singular or the solve does not meet a relative
/// residual of 1e-8.
LssvmSolution solve_lssvm(std::span<const double> kernel_matrix, std::span<const double> targets, double C);

/// Fit a leaf model on the rows `indices` of `data`.
///
/// Linear and Gaussian models pick their hyperparameters on a random 70/30
/// split of the leaf (ties prefer smaller C, then smaller gamma) and are then
/// refit on every row. Leaves smaller than `min_leaf_for_model`, or whose
/// solves all fail, get the constant mean model.
LeafModel fit_leaf(const Dataset& data, std::span<const std::size_t> indices, LeafKind kind,
                   const ModelSearchSpec& spec, RandomStream stream, std::size_t min_leaf_for_model);

} // namespace tbrf
