#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tbrf {

struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const { return lower.size(); }
    bool valid() const;
    bool contains(std::span<const double> x) const;
    double volume() const;
    double l1_diameter() const;
    std::vector<double> center() const;
    /// Nearest point of the box.
    std::vector<double> clamp(std::span<const double> x) const;
};

/// Tight bounding box of row-major points, each side widened by
/// `relative_margin` times its extent (or by `relative_margin` in absolute
/// terms when the extent is zero).
Box bounding_box(std::span<const double> points, std::size_t dim, double relative_margin);

/// { x : normal . x + offset <= 0 }, or < 0 when strict.
struct Halfspace {
    std::vector<double> normal;
    double offset = 0.0;
    bool strict = false;

    double evaluate(std::span<const double> x) const;
    bool contains(std::span<const double> x) const;
    /// The closure of the complement, with strictness flipped so that the
    /// pair classifies every point exactly once.
    Halfspace complement() const;
};

enum class CellShape { AxisBox, Polytope };

/// Convex region of feature space: an axis-aligned box, or the intersection
/// of half-spaces inside a bounding box.
struct Cell {
    std::size_t id = 0;
    CellShape shape = CellShape::AxisBox;
    Box bounds;
    std::vector<Halfspace> halfspaces; // empty for AxisBox

    bool contains(std::span<const double> x) const;
    std::vector<double> center() const { return bounds.center(); }
};

double dot(std::span<const double> a, std::span<const double> b);

} // namespace tbrf
