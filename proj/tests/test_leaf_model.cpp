#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "support.hpp"
#include "tbrf/error.hpp"
#include "tbrf/geometry.hpp"
#include "tbrf/leaf_model.hpp"

using namespace tbrf;

namespace {

std::vector<std::size_t> all_rows(const Dataset& data)
{
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

std::vector<double> linear_kernel(const std::vector<std::vector<double>>& xs)
{
    const std::size_t n = xs.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            k[i * n + j] = dot(xs[i], xs[j]);
    return k;
}

std::vector<double> rbf_kernel(const std::vector<std::vector<double>>& xs, double gamma)
{
    const std::size_t n = xs.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < xs[i].size(); ++c)
                s += (xs[i][c] - xs[j][c]) * (xs[i][c] - xs[j][c]);
            k[i * n + j] = std::exp(-gamma * s);
        }
    return k;
}

} // namespace

TEST_CASE("fit_constant")
{
    CHECK(std::get<ConstantModel>(fit_constant(std::vector<double>{1, 2, 3})).value == 2.0);
    CHECK(std::get<ConstantModel>(fit_constant(std::vector<double>{5})).value == 5.0);
    CHECK(std::get<ConstantModel>(fit_constant(std::vector<double>{-1, 1})).value == 0.0);
    CHECK_THROWS_AS(fit_constant(std::vector<double>{}), ValidationError);
}

TEST_CASE("predict_leaf")
{
    CHECK(predict_leaf(ConstantModel{2.5}, std::vector<double>{7.0, 1.0}, 10.0) == 2.5);
    CHECK(predict_leaf(LinearModel{{1.0, -1.0}, 0.0}, std::vector<double>{3.0, 1.0}, 10.0) == 2.0);
    KernelModel kernel{2, {0.3, 0.4}, {1.0}, 0.0, 5.0};
    CHECK(predict_leaf(kernel, std::vector<double>{0.3, 0.4}, 10.0) == 1.0);

    // Clamped to [-M, M].
    CHECK(predict_leaf(LinearModel{{10.0}, 0.0}, std::vector<double>{1.0}, 3.0) == 3.0);
    CHECK(predict_leaf(ConstantModel{-4.0}, std::vector<double>{1.0}, 3.0) == -3.0);

    CHECK_THROWS_AS(predict_leaf(LinearModel{{1.0, -1.0}, 0.0}, std::vector<double>{3.0}, 10.0), ValidationError);
    CHECK_THROWS_AS(predict_leaf(kernel, std::vector<double>{3.0}, 10.0), ValidationError);
}

TEST_CASE("solve_lssvm interpolates a single point")
{
    const LssvmSolution s = solve_lssvm(std::vector<double>{1.0}, std::vector<double>{3.0}, 1e9);
    // The constraint forces alpha = 0 and the bias carries the value.
    CHECK(s.alpha[0] * 1.0 + s.bias == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("solve_lssvm matches an elimination oracle on a 3x3 system")
{
    const double C = 1e6;
    const std::vector<std::vector<double>> xs = {{0.0}, {1.0}};
    const std::vector<double> y = {0.0, 1.0};
    const LssvmSolution s = solve_lssvm(linear_kernel(xs), y, C);

    const std::vector<double> z = test::gauss_solve(
        {{0.0, 1.0, 1.0}, {1.0, 0.0 + 1.0 / C, 0.0}, {1.0, 0.0, 1.0 + 1.0 / C}}, {0.0, 0.0, 1.0});
    CHECK(s.bias == doctest::Approx(z[0]).epsilon(1e-12));
    CHECK(s.alpha[0] == doctest::Approx(z[1]).epsilon(1e-12));
    CHECK(s.alpha[1] == doctest::Approx(z[2]).epsilon(1e-12));

    // f(x) = sum_i alpha_i x_i x + b
    const double f = s.alpha[1] * 1.0 * 0.5 + s.bias;
    CHECK(f == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(std::abs(s.alpha[0] + s.alpha[1]) < 1e-12);
}

TEST_CASE("solve_lssvm residual and constraint on random problems")
{
    RandomStream r = test::stream(1);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + r.below(25);
        std::vector<std::vector<double>> xs(n, std::vector<double>(2));
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = {r.uniform(-1, 1), r.uniform(-1, 1)};
            y[i] = r.normal();
        }
        const LssvmSolution s = solve_lssvm(rbf_kernel(xs, 2.0), y, 10.0);
        CHECK(s.residual_norm <= 1e-8 * s.system_norm);
        const double total = std::accumulate(s.alpha.begin(), s.alpha.end(), 0.0);
        CHECK(std::abs(total) < 1e-10);
    }
}

TEST_CASE("linear LS-SVM with large C agrees with least squares")
{
    RandomStream r = test::stream(2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 1 + r.below(5);
        const std::size_t n = d + 3 + r.below(20 - d - 2);
        std::vector<std::vector<double>> xs(n, std::vector<double>(d));
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (double& v : xs[i])
                v = r.uniform(-1, 1);
            y[i] = r.normal();
        }
        const LssvmSolution s = solve_lssvm(linear_kernel(xs), y, 1e6);
        const std::vector<double> beta = test::ols(xs, y);
        double diff = 0.0;
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double lssvm = s.bias;
            double reference = beta[d];
            for (std::size_t j = 0; j < n; ++j)
                lssvm += s.alpha[j] * dot(xs[j], xs[i]);
            for (std::size_t c = 0; c < d; ++c)
                reference += beta[c] * xs[i][c];
            diff += (lssvm - reference) * (lssvm - reference);
            norm += reference * reference;
        }
        CHECK(std::sqrt(diff / norm) < 1e-4);
        CHECK(s.residual_norm <= 1e-8 * s.system_norm);
    }
}

TEST_CASE("kernel fit shifts with the targets")
{
    RandomStream r = test::stream(3);
    const std::size_t n = 15;
    std::vector<std::vector<double>> xs(n, std::vector<double>(1));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i][0] = r.uniform(0, 3);
        y[i] = std::sin(xs[i][0]);
    }
    const std::vector<double> k = rbf_kernel(xs, 1.0);
    const LssvmSolution a = solve_lssvm(k, y, 10.0);
    std::vector<double> shifted = y;
    for (double& v : shifted)
        v += 4.0;
    const LssvmSolution b = solve_lssvm(k, shifted, 10.0);
    CHECK(b.bias - a.bias == doctest::Approx(4.0).epsilon(1e-10));
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(a.alpha[i] - b.alpha[i]) < 1e-8);
}

TEST_CASE("solve_lssvm rejects bad input")
{
    CHECK_THROWS_AS(solve_lssvm(std::vector<double>{}, std::vector<double>{}, 1.0), ValidationError);
    CHECK_THROWS_AS(solve_lssvm(std::vector<double>{1, 0, 0}, std::vector<double>{1, 2}, 1.0), ValidationError);
    CHECK_THROWS_AS(solve_lssvm(std::vector<double>{1}, std::vector<double>{1}, 0.0), ValidationError);
    // Infinite regularization weight on duplicated points makes the system singular.
    CHECK_THROWS_AS(solve_lssvm(std::vector<double>{1, 1, 1, 1}, std::vector<double>{0, 1}, 1e300), NumericError);
}

TEST_CASE("fit_leaf")
{
    const ModelSearchSpec spec;
    Dataset tiny(1);
    for (double x : {0.0, 1.0, 2.0})
        tiny.add(std::vector<double>{x}, 2.0 * x);
    const LeafModel fallback = fit_leaf(tiny, all_rows(tiny), LeafKind::Linear, spec, test::stream(4), 10);
    REQUIRE(std::holds_alternative<ConstantModel>(fallback));
    CHECK(std::get<ConstantModel>(fallback).value == 2.0);

    Dataset line(1);
    RandomStream r = test::stream(5);
    for (int i = 0; i < 30; ++i) {
        const double x = r.uniform(0, 1);
        line.add(std::vector<double>{x}, 2.0 * x + 1.0);
    }
    ModelSearchSpec large;
    large.c_grid = {1e8};
    const LeafModel fitted = fit_leaf(line, all_rows(line), LeafKind::Linear, large, test::stream(6), 10);
    REQUIRE(std::holds_alternative<LinearModel>(fitted));
    const auto& linear = std::get<LinearModel>(fitted);
    // Closed-form least squares of exact data is the generating line.
    std::vector<std::vector<double>> xs;
    for (std::size_t i = 0; i < line.size(); ++i)
        xs.push_back({line.features(i)[0]});
    const std::vector<double> beta = test::ols(xs, line.targets());
    CHECK(linear.weights[0] == doctest::Approx(beta[0]).epsilon(1e-3));
    CHECK(linear.bias == doctest::Approx(beta[1]).epsilon(1e-3));
    CHECK(linear.weights[0] == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(linear.bias == doctest::Approx(1.0).epsilon(1e-3));

    const LeafModel constant = fit_leaf(line, all_rows(line), LeafKind::Constant, large, test::stream(6), 0);
    double mean = 0.0;
    for (double y : line.targets())
        mean += y / static_cast<double>(line.size());
    CHECK(std::get<ConstantModel>(constant).value == doctest::Approx(mean).epsilon(1e-14));

    const LeafModel again = fit_leaf(line, all_rows(line), LeafKind::Linear, large, test::stream(6), 10);
    CHECK(std::get<LinearModel>(again).weights == linear.weights);
}

TEST_CASE("gaussian leaf beats the mean on a smooth target")
{
    const Dataset data = test::random_dataset(
        80, 1, [](const std::vector<double>& x) { return std::sin(4.0 * x[0]); }, 0.05, 7);
    const ModelSearchSpec spec;
    const LeafModel model = fit_leaf(data, all_rows(data), LeafKind::Gaussian, spec, test::stream(8), 32);
    REQUIRE(std::holds_alternative<KernelModel>(model));
    const auto& kernel = std::get<KernelModel>(model);
    CHECK(kernel.coefficients.size() == data.size());
    CHECK(kernel.support.size() == data.size());

    const Dataset fresh = test::random_dataset(
        200, 1, [](const std::vector<double>& x) { return std::sin(4.0 * x[0]); }, 0.0, 9);
    double err = 0.0;
    double spread = 0.0;
    double mean = 0.0;
    for (double y : fresh.targets())
        mean += y / static_cast<double>(fresh.size());
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        const double r = fresh.target(i) - predict_leaf(model, fresh.features(i), 10.0);
        err += r * r;
        spread += (fresh.target(i) - mean) * (fresh.target(i) - mean);
    }
    CHECK(err < 0.1 * spread);
}
