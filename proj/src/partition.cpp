#include "tbrf/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tbrf {
namespace {

constexpr int kObliqueRetries = 16;
constexpr int kRatioRetries = 64;

} // namespace

PartitionTree::PartitionTree(Cell root, Geometry geometry)
    : root_{std::move(root)}, geometry_{geometry}
{
    if (!root_.bounds.valid())
        throw ValidationError("partition root must have lower < upper in every dimension");
    if (geometry_ == Geometry::Oblique)
        root_.shape = CellShape::Polytope;
    nodes_.push_back(Node{});
    leaf_node_.push_back(0);
    lower_ = root_.bounds.lower;
    upper_ = root_.bounds.upper;
}

PartitionTree PartitionTree::replay(Cell root, Geometry geometry, std::span<const Split> splits)
{
    PartitionTree tree(std::move(root), geometry);
    tree.splits_.reserve(splits.size());
    tree.nodes_.reserve(2 * splits.size() + 1);
    for (const Split& split : splits)
        tree.apply(split);
    return tree;
}

bool PartitionTree::goes_left(const Node& node, std::span<const double> x) const
{
    if (node.dim >= 0)
        return x[static_cast<std::size_t>(node.dim)] <= node.cut;
    const auto& oblique = std::get<ObliqueSplit>(splits_[node.split]);
    return dot(oblique.normal, x) + oblique.offset <= 0.0;
}

std::size_t PartitionTree::locate(std::span<const double> x) const
{
    const Node* node = &nodes_[0];
    while (node->left >= 0)
        node = &nodes_[static_cast<std::size_t>(goes_left(*node, x) ? node->left : node->right)];
    return node->leaf;
}

void PartitionTree::check_leaf(std::size_t leaf) const
{
    if (leaf >= leaf_count())
        throw ValidationError("leaf id " + std::to_string(leaf) + " does not exist (tree has " +
                              std::to_string(leaf_count()) + " leaves)");
}

Box PartitionTree::leaf_bounds(std::size_t leaf) const
{
    check_leaf(leaf);
    const std::size_t d = dim();
    return Box{{lower_.begin() + leaf * d, lower_.begin() + (leaf + 1) * d},
               {upper_.begin() + leaf * d, upper_.begin() + (leaf + 1) * d}};
}

Cell PartitionTree::leaf(std::size_t leaf) const
{
    Cell cell;
    cell.id = leaf;
    cell.shape = root_.shape;
    cell.bounds = leaf_bounds(leaf);
    cell.halfspaces = root_.halfspaces;
    std::int32_t child = static_cast<std::int32_t>(leaf_node_[leaf]);
    for (std::int32_t parent = nodes_[child].parent; parent >= 0;
         child = parent, parent = nodes_[parent].parent) {
        const Node& node = nodes_[static_cast<std::size_t>(parent)];
        if (node.dim >= 0)
            continue; // encoded in the bounding box
        const auto& oblique = std::get<ObliqueSplit>(splits_[node.split]);
        Halfspace h{oblique.normal, oblique.offset, false};
        cell.halfspaces.push_back(node.left == child ? h : h.complement());
    }
    return cell;
}

bool PartitionTree::crosses_leaf(std::size_t leaf, std::span<const double> normal, double offset) const
{
    check_leaf(leaf);
    const std::size_t d = dim();
    double low = offset;
    double high = offset;
    bool nonzero = false;
    for (std::size_t i = 0; i < d; ++i) {
        double a = normal[i] * lower_[leaf * d + i];
        double b = normal[i] * upper_[leaf * d + i];
        low += std::min(a, b);
        high += std::max(a, b);
        nonzero = nonzero || normal[i] != 0.0;
    }
    return nonzero && low < 0.0 && high > 0.0;
}

std::int32_t PartitionTree::split_node(std::size_t leaf, std::int32_t dim, double cut)
{
    const auto node_index = static_cast<std::int32_t>(leaf_node_[leaf]);
    const auto new_leaf = static_cast<std::uint32_t>(leaf_count());
    const auto left = static_cast<std::int32_t>(nodes_.size());
    const std::int32_t right = left + 1;

    Node left_node;
    left_node.parent = node_index;
    left_node.leaf = static_cast<std::uint32_t>(leaf);
    Node right_node;
    right_node.parent = node_index;
    right_node.leaf = new_leaf;
    nodes_.push_back(left_node);
    nodes_.push_back(right_node);

    Node& node = nodes_[static_cast<std::size_t>(node_index)];
    node.left = left;
    node.right = right;
    node.dim = dim;
    node.cut = cut;
    node.split = static_cast<std::uint32_t>(splits_.size());
    leaf_node_[leaf] = static_cast<std::uint32_t>(left);
    leaf_node_.push_back(static_cast<std::uint32_t>(right));

    const std::size_t d = this->dim();
    for (std::size_t i = 0; i < d; ++i) {
        lower_.push_back(lower_[leaf * d + i]);
        upper_.push_back(upper_[leaf * d + i]);
    }
    if (dim >= 0) {
        upper_[leaf * d + static_cast<std::size_t>(dim)] = cut;
        lower_[new_leaf * d + static_cast<std::size_t>(dim)] = cut;
    }
    return node_index;
}

void PartitionTree::apply(const AxisSplit& split)
{
    check_leaf(split.leaf_id);
    if (split.dim >= dim())
        throw ValidationError("split dimension " + std::to_string(split.dim) + " out of range");
    if (!(split.ratio > 0.0 && split.ratio < 1.0))
        throw ValidationError("split ratio must lie in (0, 1)");
    const std::size_t at = split.leaf_id * dim() + split.dim;
    const double lo = lower_[at];
    const double hi = upper_[at];
    const double cut = lo + split.ratio * (hi - lo);
    if (!(cut > lo && cut < hi))
        throw ValidationError("cut does not fall strictly inside the leaf");
    split_node(split.leaf_id, static_cast<std::int32_t>(split.dim), cut);
    splits_.push_back(split);
}

void PartitionTree::apply(const ObliqueSplit& split)
{
    check_leaf(split.leaf_id);
    if (split.normal.size() != dim())
        throw ValidationError("oblique normal has wrong dimension");
    if (!crosses_leaf(split.leaf_id, split.normal, split.offset))
        throw SplitMissesLeaf("hyperplane misses leaf " + std::to_string(split.leaf_id));
    split_node(split.leaf_id, -1, 0.0);
    splits_.push_back(split);
}

void PartitionTree::apply(const Split& split)
{
    std::visit([this](const auto& s) { apply(s); }, split);
}

std::string PartitionTree::trace() const
{
    std::ostringstream out;
    for (const Split& split : splits_) {
        if (const auto* axis = std::get_if<AxisSplit>(&split)) {
            out << "axis " << axis->leaf_id << ' ' << axis->dim << ' ' << format_double(axis->ratio) << '\n';
        } else {
            const auto& oblique = std::get<ObliqueSplit>(split);
            out << "oblique " << oblique.leaf_id;
            for (double w : oblique.normal)
                out << ' ' << format_double(w);
            out << ' ' << format_double(oblique.offset) << '\n';
        }
    }
    return out.str();
}

PartitionTree apply_axis_split(PartitionTree tree, const AxisSplit& split)
{
    tree.apply(split);
    return tree;
}

PartitionTree apply_oblique_split(PartitionTree tree, const ObliqueSplit& split)
{
    tree.apply(split);
    return tree;
}

std::size_t choose_leaf_uniform(const PartitionTree& tree, RandomStream& stream)
{
    return stream.below(tree.leaf_count());
}

std::size_t plurality_vote(std::span<const std::size_t> labels)
{
    if (labels.empty())
        throw ValidationError("plurality vote over no labels");
    std::vector<std::size_t> sorted(labels.begin(), labels.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t best = sorted[0];
    std::size_t best_count = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i])
            ++j;
        if (j - i > best_count) {
            best_count = j - i;
            best = sorted[i];
        }
        i = j;
    }
    return best;
}

std::size_t choose_leaf_adaptive(const PartitionTree& tree, const Dataset& data,
                                 std::span<const std::size_t> indices, std::size_t votes,
                                 RandomStream& stream)
{
    if (indices.empty())
        throw ValidationError("adaptive leaf choice needs at least one sample in the root");
    if (votes == 0)
        throw ValidationError("adaptive leaf choice needs at least one vote");
    std::vector<std::size_t> labels(votes);
    for (auto& label : labels)
        label = tree.locate(data.features(indices[stream.below(indices.size())]));
    return plurality_vote(labels);
}

std::size_t split_budget(std::size_t cell_sample_count, double pro, std::size_t cap)
{
    if (!(pro > 0.0 && pro <= 1.0))
        throw ValidationError("split fraction must lie in (0, 1]");
    auto budget = static_cast<std::size_t>(std::llround(pro * static_cast<double>(cell_sample_count)));
    return std::min(budget, cap);
}

namespace {

// Incremental bookkeeping for growing a partition: each pool row carries
// its current leaf label so votes cost O(t) and a split only revisits the
// rows of the leaf being cut.
class Grower {
public:
    Grower(Cell root, const Dataset& data, std::vector<std::size_t> pool, const GrowOptions& options)
        : tree_(std::move(root), options.geometry), data_(data), pool_(std::move(pool)),
          options_(options), label_(pool_.size(), 0)
    {
        members_.emplace_back(pool_.size());
        std::iota(members_[0].begin(), members_[0].end(), std::size_t{0});
    }

    void split_once(RandomStream& stream)
    {
        std::size_t leaf = 0;
        voters_.clear();
        if (options_.uniform_leaf_choice) {
            leaf = choose_leaf_uniform(tree_, stream);
        } else {
            if (pool_.empty())
                throw ValidationError("adaptive leaf choice needs at least one sample in the root");
            votes_.resize(options_.votes);
            positions_.resize(options_.votes);
            for (std::size_t v = 0; v < options_.votes; ++v) {
                positions_[v] = stream.below(pool_.size());
                votes_[v] = label_[positions_[v]];
            }
            leaf = plurality_vote(votes_);
            for (std::size_t v = 0; v < options_.votes; ++v)
                if (votes_[v] == leaf)
                    voters_.push_back(positions_[v]);
        }

        if (options_.geometry == Geometry::Oblique && try_oblique(leaf, stream))
            return;
        split_axis(leaf, stream);
    }

    GrownPartition finish() &&
    {
        GrownPartition out{std::move(tree_), {}};
        out.members.resize(members_.size());
        for (std::size_t leaf = 0; leaf < members_.size(); ++leaf) {
            out.members[leaf].reserve(members_[leaf].size());
            for (std::size_t position : members_[leaf])
                out.members[leaf].push_back(pool_[position]);
        }
        return out;
    }

private:
    std::span<const double> row(std::size_t position) const { return data_.features(pool_[position]); }

    std::vector<double> centroid(std::size_t leaf) const
    {
        const std::vector<std::size_t>& source = voters_.empty() ? members_[leaf] : voters_;
        if (source.empty())
            return tree_.leaf_bounds(leaf).center();
        std::vector<double> c(tree_.dim(), 0.0);
        for (std::size_t position : source) {
            auto x = row(position);
            for (std::size_t i = 0; i < c.size(); ++i)
                c[i] += x[i];
        }
        for (double& v : c)
            v /= static_cast<double>(source.size());
        return c;
    }

    bool try_oblique(std::size_t leaf, RandomStream& stream)
    {
        const std::vector<double> center = centroid(leaf);
        ObliqueSplit split{leaf, std::vector<double>(tree_.dim()), 0.0};
        for (int attempt = 0; attempt < kObliqueRetries; ++attempt) {
            for (double& w : split.normal)
                w = stream.uniform(-1.0, 1.0);
            split.offset = -dot(split.normal, center);
            if (tree_.crosses_leaf(leaf, split.normal, split.offset)) {
                tree_.apply(split);
                distribute(leaf, [&](std::span<const double> x) {
                    return dot(split.normal, x) + split.offset <= 0.0;
                });
                return true;
            }
        }
        return false;
    }

    void split_axis(std::size_t leaf, RandomStream& stream)
    {
        const std::size_t dim = stream.below(tree_.dim());
        const Box box = tree_.leaf_bounds(leaf);
        const double lo = box.lower[dim];
        const double hi = box.upper[dim];
        for (int attempt = 0; attempt < kRatioRetries; ++attempt) {
            const double ratio = stream.uniform_open();
            const double cut = lo + ratio * (hi - lo);
            if (cut > lo && cut < hi) {
                tree_.apply(AxisSplit{leaf, dim, ratio});
                distribute(leaf, [&](std::span<const double> x) { return x[dim] <= cut; });
                return;
            }
        }
        throw NumericError("leaf " + std::to_string(leaf) + " is too thin to split");
    }

    template <typename Predicate>
    void distribute(std::size_t leaf, Predicate goes_left)
    {
        const auto new_leaf = tree_.leaf_count() - 1;
        std::vector<std::size_t>& stay = members_[leaf];
        std::vector<std::size_t> moved;
        auto keep_end = std::stable_partition(stay.begin(), stay.end(),
                                              [&](std::size_t position) { return goes_left(row(position)); });
        moved.assign(keep_end, stay.end());
        stay.erase(keep_end, stay.end());
        for (std::size_t position : moved)
            label_[position] = new_leaf;
        members_.push_back(std::move(moved));
    }

    PartitionTree tree_;
    const Dataset& data_;
    std::vector<std::size_t> pool_;
    GrowOptions options_;
    std::vector<std::size_t> label_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<std::size_t> votes_;
    std::vector<std::size_t> positions_;
    std::vector<std::size_t> voters_;
};

} // namespace

GrownPartition grow_partition(Cell root, const Dataset& data, std::vector<std::size_t> pool,
                              std::size_t splits, const GrowOptions& options, RandomStream stream)
{
    if (!options.uniform_leaf_choice && options.votes == 0)
        throw ValidationError("adaptive leaf choice needs at least one vote");
    Grower grower(std::move(root), data, std::move(pool), options);
    for (std::size_t s = 0; s < splits; ++s)
        grower.split_once(stream);
    return std::move(grower).finish();
}

GrownPartition build_stage_one(const Dataset& data, std::size_t cells, std::size_t votes,
                               Geometry geometry, RandomStream stream)
{
    if (data.empty())
        throw ValidationError("stage one needs training data");
    if (cells == 0)
        throw ValidationError("stage one needs at least one cell");
    Cell root;
    root.shape = geometry == Geometry::Oblique ? CellShape::Polytope : CellShape::AxisBox;
    root.bounds = bounding_box(data.feature_data(), data.dim(), kRootMargin);
    std::vector<std::size_t> pool(data.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    GrowOptions options{geometry, votes, false};
    return grow_partition(std::move(root), data, std::move(pool), cells - 1, options, std::move(stream));
}

GrownPartition build_stage_two(const Cell& cell, const Dataset& data,
                               std::vector<std::size_t> cell_indices, std::size_t splits,
                               std::size_t votes, Geometry geometry, bool pure, RandomStream stream)
{
    GrowOptions options{geometry, votes, pure};
    return grow_partition(cell, data, std::move(cell_indices), splits, options, std::move(stream));
}

} // namespace tbrf
