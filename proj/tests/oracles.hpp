#pragma once

// Small independent numerical oracles used to cross-check the library.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tbrf::test {

// Gaussian elimination with partial pivoting on a dense row-major system.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col]))
                pivot = r;
        if (a[pivot][col] == 0.0)
            throw std::runtime_error("singular system");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c)
                a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c)
            s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

// Ordinary least squares with intercept via the normal equations.
// Returns {w_0 .. w_{d-1}, intercept}.
inline std::vector<double> ols(const std::vector<std::vector<double>>& xs, const std::vector<double>& y)
{
    const std::size_t d = xs.front().size();
    std::vector<std::vector<double>> gram(d + 1, std::vector<double>(d + 1, 0.0));
    std::vector<double> rhs(d + 1, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::vector<double> z = xs[i];
        z.push_back(1.0);
        for (std::size_t r = 0; r <= d; ++r) {
            rhs[r] += z[r] * y[i];
            for (std::size_t c = 0; c <= d; ++c)
                gram[r][c] += z[r] * z[c];
        }
    }
    return gauss_solve(gram, rhs);
}

// Probability that each of the given leaves wins a plurality vote of t
// independent draws with leaf probabilities q (ties to the smallest id),
// by enumerating all vote-count compositions.
inline std::vector<double> plurality_distribution(const std::vector<double>& q, int t)
{
    const std::size_t k = q.size();
    std::vector<double> result(k, 0.0);
    std::vector<int> counts(k, 0);
    auto log_factorial = [](int n) { return std::lgamma(n + 1.0); };
    auto visit = [&](auto&& self, std::size_t leaf, int remaining) -> void {
        if (leaf + 1 == k) {
            counts[leaf] = remaining;
            double logp = log_factorial(t);
            for (std::size_t j = 0; j < k; ++j) {
                if (counts[j] > 0 && q[j] == 0.0)
                    return;
                logp -= log_factorial(counts[j]);
                if (counts[j] > 0)
                    logp += counts[j] * std::log(q[j]);
            }
            std::size_t winner = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (counts[j] > counts[winner])
                    winner = j;
            result[winner] += std::exp(logp);
            return;
        }
        for (int c = 0; c <= remaining; ++c) {
            counts[leaf] = c;
            self(self, leaf + 1, remaining - c);
        }
    };
    visit(visit, 0, t);
    return result;
}

} // namespace tbrf::test
