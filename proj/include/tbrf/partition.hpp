#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tbrf/dataset.hpp"
#include "tbrf/error.hpp"
#include "tbrf/geometry.hpp"
#include "tbrf/hyper_params.hpp"
#include "tbrf/random_stream.hpp"

namespace tbrf {

/// Cut leaf `leaf_id` along `dim` at lower + ratio * extent. The lower part
/// keeps the leaf id; the upper part receives the next free id.
struct AxisSplit {
    std::size_t leaf_id = 0;
    std::size_t dim = 0;
    double ratio = 0.5;
};

/// Cut leaf `leaf_id` by the hyperplane normal . x + offset = 0. The side
/// where the expression is <= 0 keeps the leaf id.
struct ObliqueSplit {
    std::size_t leaf_id = 0;
    std::vector<double> normal;
    double offset = 0.0;
};

using Split = std::variant<AxisSplit, ObliqueSplit>;

class SplitMissesLeaf : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Recursive partition of a root cell. Leaves carry stable ids 0..p; the
/// split sequence fully determines the tree, so it is also the serialized
/// form (see replay()).
class PartitionTree {
public:
    PartitionTree(Cell root, Geometry geometry);

    /// Rebuild a tree by applying `splits` in order.
    static PartitionTree replay(Cell root, Geometry geometry, std::span<const Split> splits);

    const Cell& root() const { return root_; }
    Geometry geometry() const { return geometry_; }
    std::size_t dim() const { return root_.bounds.dim(); }
    std::size_t leaf_count() const { return leaf_node_.size(); }
    std::size_t split_count() const { return splits_.size(); }
    const std::vector<Split>& splits() const { return splits_; }

    /// Leaf holding x. Points on a cut go to the lower / non-positive side.
    /// x is not clamped; points outside the root fall through to the leaf on
    /// their side of every cut.
    std::size_t locate(std::span<const double> x) const;

    /// Bounding box of a leaf; exact for axis-parallel leaves.
    Box leaf_bounds(std::size_t leaf) const;
    /// Full geometric description of a leaf, half-spaces included.
    Cell leaf(std::size_t leaf) const;

    /// Whether the hyperplane crosses the bounding box of `leaf`.
    bool crosses_leaf(std::size_t leaf, std::span<const double> normal, double offset) const;

    void apply(const AxisSplit& split);
    void apply(const ObliqueSplit& split);
    void apply(const Split& split);

    /// One line per split: "axis <leaf> <dim> <ratio>" or
    /// "oblique <leaf> <w_0> ... <w_{d-1}> <offset>".
    std::string trace() const;

private:
    struct Node {
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::int32_t parent = -1;
        std::int32_t dim = -1;    // >= 0 for axis cuts, -1 for oblique or leaf
        double cut = 0.0;
        std::uint32_t split = 0;  // index into splits_ when internal
        std::uint32_t leaf = 0;   // leaf id when terminal
    };

    bool goes_left(const Node& node, std::span<const double> x) const;
    void check_leaf(std::size_t leaf) const;
    std::int32_t split_node(std::size_t leaf, std::int32_t dim, double cut);

    Cell root_;
    Geometry geometry_;
    std::vector<Split> splits_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> leaf_node_;
    std::vector<double> lower_; // leaf bounding boxes, leaf-major
    std::vector<double> upper_;
};

PartitionTree apply_axis_split(PartitionTree tree, const AxisSplit& split);
PartitionTree apply_oblique_split(PartitionTree tree, const ObliqueSplit& split);

/// Uniformly random current leaf.
std::size_t choose_leaf_uniform(const PartitionTree& tree, RandomStream& stream);

/// Draw t of `indices` with replacement, label each by its leaf, return the
/// plurality leaf (ties go to the smallest id).
std::size_t choose_leaf_adaptive(const PartitionTree& tree, const Dataset& data,
                                 std::span<const std::size_t> indices, std::size_t votes,
                                 RandomStream& stream);

/// Most frequent label; ties go to the smallest label.
std::size_t plurality_vote(std::span<const std::size_t> labels);

/// min(round(pro * n), cap).
std::size_t split_budget(std::size_t cell_sample_count, double pro, std::size_t cap);

/// A partition together with the samples that landed in each leaf.
struct GrownPartition {
    PartitionTree tree;
    std::vector<std::vector<std::size_t>> members; // dataset indices per leaf id
};

struct GrowOptions {
    Geometry geometry = Geometry::AxisParallel;
    std::size_t votes = 1;
    bool uniform_leaf_choice = false;
};

/// Apply `splits` random splits to `root`. `pool` lists the dataset rows
/// that lie in the root; they vote on the leaf to split (unless the choice is
/// uniform) and are tracked into the resulting leaves.
GrownPartition grow_partition(Cell root, const Dataset& data, std::vector<std::size_t> pool,
                              std::size_t splits, const GrowOptions& options, RandomStream stream);

/// Relative margin added to each side of the training bounding box.
inline constexpr double kRootMargin = 0.05;

/// Stage one: m - 1 adaptive splits of the inflated training bounding box.
GrownPartition build_stage_one(const Dataset& data, std::size_t cells, std::size_t votes,
                               Geometry geometry, RandomStream stream);

/// Stage two: p splits of one stage-one cell, adaptive unless `pure`.
GrownPartition build_stage_two(const Cell& cell, const Dataset& data,
                               std::vector<std::size_t> cell_indices, std::size_t splits,
                               std::size_t votes, Geometry geometry, bool pure, RandomStream stream);

} // namespace tbrf
