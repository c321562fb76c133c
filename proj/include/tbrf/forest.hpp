#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tbrf/dataset.hpp"
#include "tbrf/geometry.hpp"
#include "tbrf/hyper_params.hpp"
#include "tbrf/tree.hpp"

namespace tbrf {

struct TrainingMeta {
    std::size_t n = 0;
    std::size_t dim = 0;
    double bound = 1.0;       // M
    double global_mean = 0.0;
    Box root;                 // stage-one root shared by every parent
};

/// Average of T parent trees, each grown on its own stage-one partition.
struct Forest {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::vector<ParentTree> parents;
    HyperParams params;
    TrainingMeta meta;

    std::size_t dim() const { return meta.dim; }
    /// Mean of the parent predictions; x is clamped into the root first.
    double predict(std::span<const double> x) const;
    /// Prediction of one parent at x (clamped into the root first).
    double predict_parent(std::size_t tree, std::span<const double> x) const;
};

/// Worker count to use when the caller passes 0: $TBRF_WORKERS if set,
/// otherwise the OpenMP default.
std::size_t resolve_workers(std::size_t requested);

/// Train with OpenMP fork-join: stage-one partitions in parallel over trees,
/// then child trees in parallel over every (tree, cell) pair. Output does not
/// depend on `workers`.
Forest train(const Dataset& data, const HyperParams& params, std::size_t workers = 0);

/// Predictions for row-major points, parallel over rows, in input order.
std::vector<double> predict_batch(const Forest& forest, std::span<const std::vector<double>> xs,
                                  std::size_t workers = 0);
std::vector<double> predict_batch(const Forest& forest, const Dataset& data, std::size_t workers = 0);

/// Forest made of the first `trees` parents. Because every parent is seeded
/// by its index alone, this equals training with T = trees.
Forest first_trees(const Forest& forest, std::size_t trees);

/// Serial reference implementations; kept for equivalence tests and as the
/// baseline of the benchmark.
namespace reference {
Forest train(const Dataset& data, const HyperParams& params);
std::vector<double> predict_batch(const Forest& forest, std::span<const std::vector<double>> xs);
} // namespace reference

/// Self-describing binary container: magic, format version, payload length,
/// payload, FNV-1a checksum. Doubles are stored as raw IEEE bits.
std::string serialize(const Forest& forest);
Forest deserialize(std::string_view bytes);
void save(const Forest& forest, const std::filesystem::path& path);
Forest load(const std::filesystem::path& path);

/// Plain-text sidecar: parameters plus any extra key=value lines.
void write_metadata(const Forest& forest, const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& extra);

/// Split traces of every partition, for debugging and golden tests.
std::string export_traces(const Forest& forest);

} // namespace tbrf
