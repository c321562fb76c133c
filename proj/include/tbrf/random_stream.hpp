#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <vector>

namespace tbrf {

// Purpose tags for the last component of a stream path. Values are part of the
// model-reproducibility contract; do not renumber.
enum class Purpose : std::uint64_t {
    StageOne = 1,
    Candidate = 2,
    Holdout = 3,
    LeafFit = 4,
    LeafRefit = 5,
    Split = 6,
    Synth = 7,
    Cell = 8,
    DataSplit = 9,
    Test = 99,
};

/// The Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream (Philox4x32-10) keyed by a master seed and a
/// path of integers such as (tree, cell, candidate, purpose).
///
/// The key is a hash of (seed, path) and the i-th output block is a pure
/// function of (key, i), so two streams built from the same seed and path
/// produce identical sequences no matter which thread creates them or when.
/// Streams are cheap to copy; each task should own its own.
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path);
    RandomStream(std::uint64_t master_seed, std::vector<std::uint64_t> path);

    /// Stream whose path is this stream's path with `component` appended.
    RandomStream child(std::uint64_t component) const;
    RandomStream child(Purpose purpose) const { return child(static_cast<std::uint64_t>(purpose)); }

    std::uint64_t master_seed() const { return seed_; }
    const std::vector<std::uint64_t>& path() const { return path_; }

    std::uint64_t next_u64();
    std::uint64_t operator()() { return next_u64(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return std::numeric_limits<std::uint64_t>::max(); }

    /// Uniform on the open interval (0, 1); exact 0 is rejected.
    double uniform_open();
    /// Uniform on [a, b).
    double uniform(double a, double b);
    /// Uniform integer in [0, n); n must be positive.
    std::size_t below(std::size_t n);
    /// Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& values)
    {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    void refill();

    std::uint64_t seed_;
    std::vector<std::uint64_t> path_;
    std::uint32_t key_[2];
    std::uint64_t counter_ = 0;
    std::uint32_t block_[4] = {0, 0, 0, 0};
    int used_ = 4; // 32-bit words consumed from block_
};

} // namespace tbrf
