#include "tbrf/random_stream.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace tbrf {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_path(std::uint64_t seed, const std::vector<std::uint64_t>& path)
{
    std::uint64_t h = splitmix64(seed ^ 0x5442524653545245ULL);
    std::uint64_t position = 1;
    for (std::uint64_t component : path) {
        h = splitmix64(h ^ splitmix64(component + kGolden * position));
        ++position;
    }
    // Fold in the length so that a path and its zero-extended variant differ.
    return splitmix64(h ^ path.size());
}

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

} // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key)
{
    std::uint32_t key0 = key[0];
    std::uint32_t key1 = key[1];
    constexpr std::uint32_t kMul0 = 0xD2511F53;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, counter[0], hi0, lo0);
        mulhilo(kMul1, counter[2], hi1, lo1);
        std::uint32_t next[4] = {hi1 ^ counter[1] ^ key0, lo1, hi0 ^ counter[3] ^ key1, lo0};
        counter[0] = next[0];
        counter[1] = next[1];
        counter[2] = next[2];
        counter[3] = next[3];
        key0 += kWeyl0;
        key1 += kWeyl1;
    }
    return counter;
}

RandomStream::RandomStream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path)
    : RandomStream(master_seed, std::vector<std::uint64_t>(path))
{
}

RandomStream::RandomStream(std::uint64_t master_seed, std::vector<std::uint64_t> path)
    : seed_{master_seed}, path_{std::move(path)}
{
    std::uint64_t key = hash_path(seed_, path_);
    key_[0] = static_cast<std::uint32_t>(key);
    key_[1] = static_cast<std::uint32_t>(key >> 32);
}

RandomStream RandomStream::child(std::uint64_t component) const
{
    std::vector<std::uint64_t> extended = path_;
    extended.push_back(component);
    return RandomStream(seed_, std::move(extended));
}

void RandomStream::refill()
{
    const auto out = philox4x32_10(
        {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0, 0},
        {key_[0], key_[1]});
    std::copy(out.begin(), out.end(), block_);
    ++counter_;
    used_ = 0;
}

std::uint64_t RandomStream::next_u64()
{
    if (used_ > 2)
        refill();
    std::uint64_t value = (static_cast<std::uint64_t>(block_[used_ + 1]) << 32) | block_[used_];
    used_ += 2;
    return value;
}

double RandomStream::uniform_open()
{
    for (;;) {
        double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        if (u > 0.0)
            return u;
    }
}

double RandomStream::uniform(double a, double b)
{
    double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return a + (b - a) * u;
}

std::size_t RandomStream::below(std::size_t n)
{
    // Rejection on the top of the range keeps the draw exactly uniform.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = max() - max() % bound;
    for (;;) {
        std::uint64_t x = next_u64();
        if (x < limit)
            return static_cast<std::size_t>(x % bound);
    }
}

double RandomStream::normal()
{
    double u1 = uniform_open();
    double u2 = uniform_open();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace tbrf
