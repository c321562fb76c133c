#include "tbrf/leaf_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "tbrf/error.hpp"
#include "tbrf/geometry.hpp"

namespace tbrf {
namespace {

constexpr double kResidualTolerance = 1e-8;
constexpr double kMinReciprocalCondition = 1e-15;

double squared_distance(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

void check_dim(std::size_t expected, std::size_t got)
{
    if (expected != got)
        throw ValidationError("leaf model expects " + std::to_string(expected) + " features, got " +
                              std::to_string(got));
}

// Gram matrix of the rows `rows` of `data`; the linear kernel when gamma is 0.
std::vector<double> gram(const Dataset& data, std::span<const std::size_t> rows, double gamma)
{
    const std::size_t n = rows.size();
    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        auto xi = data.features(rows[i]);
        for (std::size_t j = 0; j <= i; ++j) {
            auto xj = data.features(rows[j]);
            double v = gamma > 0.0 ? std::exp(-gamma * squared_distance(xi, xj)) : dot(xi, xj);
            K[i * n + j] = v;
            K[j * n + i] = v;
        }
    }
    return K;
}

LeafModel make_model(const Dataset& data, std::span<const std::size_t> rows, LeafKind kind, double C,
                     double gamma)
{
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        y[i] = data.target(rows[i]);
    const bool gaussian = kind == LeafKind::Gaussian;
    LssvmSolution solution = solve_lssvm(gram(data, rows, gaussian ? gamma : 0.0), y, C);

    const std::size_t d = data.dim();
    if (!gaussian) {
        LinearModel model{std::vector<double>(d, 0.0), solution.bias};
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto x = data.features(rows[i]);
            for (std::size_t c = 0; c < d; ++c)
                model.weights[c] += solution.alpha[i] * x[c];
        }
        return model;
    }
    KernelModel model;
    model.dim = d;
    model.gamma = gamma;
    model.bias = solution.bias;
    model.coefficients = std::move(solution.alpha);
    model.support.reserve(rows.size() * d);
    for (std::size_t row : rows) {
        auto x = data.features(row);
        model.support.insert(model.support.end(), x.begin(), x.end());
    }
    return model;
}

double mean_target(const Dataset& data, std::span<const std::size_t> rows)
{
    double sum = 0.0;
    for (std::size_t row : rows)
        sum += data.target(row);
    return sum / static_cast<double>(rows.size());
}

} // namespace

double evaluate(const LeafModel& model, std::span<const double> x)
{
    if (const auto* constant = std::get_if<ConstantModel>(&model))
        return constant->value;
    if (const auto* linear = std::get_if<LinearModel>(&model)) {
        check_dim(linear->weights.size(), x.size());
        return dot(linear->weights, x) + linear->bias;
    }
    const auto& kernel = std::get<KernelModel>(model);
    check_dim(kernel.dim, x.size());
    double sum = kernel.bias;
    for (std::size_t i = 0; i < kernel.coefficients.size(); ++i)
        sum += kernel.coefficients[i] * std::exp(-kernel.gamma * squared_distance(x, kernel.support_point(i)));
    return sum;
}

double predict_leaf(const LeafModel& model, std::span<const double> x, double bound)
{
    return std::clamp(evaluate(model, x), -bound, bound);
}

LeafModel fit_constant(std::span<const double> targets)
{
    if (targets.empty())
        throw ValidationError("fit_constant: no targets (empty leaves need vacancy filling)");
    double sum = 0.0;
    for (double y : targets)
        sum += y;
    return ConstantModel{sum / static_cast<double>(targets.size())};
}

LssvmSolution solve_lssvm(std::span<const double> kernel_matrix, std::span<const double> targets, double C)
{
    const auto n = static_cast<Eigen::Index>(targets.size());
    if (n == 0)
        throw ValidationError("solve_lssvm: no samples");
    if (kernel_matrix.size() != targets.size() * targets.size())
        throw ValidationError("solve_lssvm: kernel matrix is not n x n");
    if (!(C > 0.0))
        throw ValidationError("solve_lssvm: C must be positive");

    Eigen::MatrixXd A(n + 1, n + 1);
    Eigen::VectorXd rhs(n + 1);
    A(0, 0) = 0.0;
    rhs(0) = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        A(0, i + 1) = 1.0;
        A(i + 1, 0) = 1.0;
        rhs(i + 1) = targets[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j)
            A(i + 1, j + 1) = kernel_matrix[static_cast<std::size_t>(i * n + j)];
        A(i + 1, i + 1) += 1.0 / C;
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const double rcond = lu.rcond();
    if (!(rcond > kMinReciprocalCondition))
        throw NumericError("solve_lssvm: system is numerically singular (rcond " + std::to_string(rcond) + ")");
    Eigen::VectorXd z = lu.solve(rhs);
    if (!z.allFinite())
        throw NumericError("solve_lssvm: non-finite solution");

    LssvmSolution solution;
    solution.residual_norm = (A * z - rhs).norm();
    solution.system_norm = A.norm() * z.norm() + rhs.norm();
    if (solution.residual_norm > kResidualTolerance * solution.system_norm)
        throw NumericError("solve_lssvm: residual above tolerance");
    solution.bias = z(0);
    solution.alpha.assign(z.data() + 1, z.data() + z.size());
    return solution;
}

LeafModel fit_leaf(const Dataset& data, std::span<const std::size_t> indices, LeafKind kind,
                   const ModelSearchSpec& spec, RandomStream stream, std::size_t min_leaf_for_model)
{
    if (indices.empty())
        throw ValidationError("fit_leaf: no samples");
    const ConstantModel mean{mean_target(data, indices)};
    const std::size_t n = indices.size();
    if (kind == LeafKind::Constant || n < std::max<std::size_t>(min_leaf_for_model, 2))
        return mean;
    if (spec.c_grid.empty() || (kind == LeafKind::Gaussian && spec.gamma_grid.empty()))
        throw ValidationError("fit_leaf: empty hyperparameter grid");
    if (!(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0))
        throw ValidationError("fit_leaf: validation fraction must lie in (0, 1)");

    std::vector<std::size_t> order(indices.begin(), indices.end());
    stream.shuffle(order);
    auto n_fit = static_cast<std::size_t>(std::llround((1.0 - spec.validation_fraction) * n));
    n_fit = std::clamp<std::size_t>(n_fit, 1, n - 1);
    std::span<const std::size_t> fit_rows(order.data(), n_fit);
    std::span<const std::size_t> check_rows(order.data() + n_fit, n - n_fit);

    std::vector<double> c_grid = spec.c_grid;
    std::vector<double> gamma_grid = kind == LeafKind::Gaussian ? spec.gamma_grid : std::vector<double>{0.0};
    std::sort(c_grid.begin(), c_grid.end());
    std::sort(gamma_grid.begin(), gamma_grid.end());

    double best_error = std::numeric_limits<double>::infinity();
    double best_c = 0.0;
    double best_gamma = 0.0;
    for (double C : c_grid) {
        for (double gamma : gamma_grid) {
            try {
                LeafModel candidate = make_model(data, fit_rows, kind, C, gamma);
                double error = 0.0;
                for (std::size_t row : check_rows) {
                    double r = data.target(row) - evaluate(candidate, data.features(row));
                    error += r * r;
                }
                error /= static_cast<double>(check_rows.size());
                if (error < best_error) {
                    best_error = error;
                    best_c = C;
                    best_gamma = gamma;
                }
            } catch (const NumericError&) {
                // skip this grid point
            }
        }
    }
    if (!std::isfinite(best_error))
        return mean;
    try {
        return make_model(data, indices, kind, best_c, best_gamma);
    } catch (const NumericError&) {
        return mean;
    }
}

} // namespace tbrf
