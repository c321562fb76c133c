#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "tbrf/dataset.hpp"
#include "tbrf/random_stream.hpp"

namespace tbrf::test {

inline RandomStream stream(std::uint64_t seed, std::uint64_t tag = 0)
{
    return RandomStream(seed, {static_cast<std::uint64_t>(Purpose::Test), tag});
}

// Uniform features on [lo, hi)^d with y = f(x) + noise.
template <typename F>
Dataset random_dataset(std::size_t n, std::size_t d, F f, double noise, std::uint64_t seed, double lo = 0.0,
                       double hi = 1.0)
{
    RandomStream s = stream(seed, 1);
    Dataset data(d);
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : x)
            v = s.uniform(lo, hi);
        data.add(x, f(x) + noise * s.normal());
    }
    return data;
}

inline Dataset smooth_dataset(std::size_t n, std::size_t d, std::uint64_t seed)
{
    return random_dataset(
        n, d,
        [](const std::vector<double>& x) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                s += std::sin(3.0 * x[i] + static_cast<double>(i));
            return s / static_cast<double>(x.size());
        },
        0.1, seed);
}

// Fresh scratch directory, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("tbrf_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace tbrf::test
