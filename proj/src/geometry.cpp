#include "tbrf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tbrf/error.hpp"

namespace tbrf {

bool Box::valid() const
{
    if (lower.size() != upper.size() || lower.empty())
        return false;
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] < upper[i]))
            return false;
    return true;
}

bool Box::contains(std::span<const double> x) const
{
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (x[i] < lower[i] || x[i] > upper[i])
            return false;
    return true;
}

double Box::volume() const
{
    double v = 1.0;
    for (std::size_t i = 0; i < lower.size(); ++i)
        v *= upper[i] - lower[i];
    return v;
}

double Box::l1_diameter() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < lower.size(); ++i)
        s += upper[i] - lower[i];
    return s;
}

std::vector<double> Box::center() const
{
    std::vector<double> c(lower.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
}

std::vector<double> Box::clamp(std::span<const double> x) const
{
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i], lower[i], upper[i]);
    return out;
}

Box bounding_box(std::span<const double> points, std::size_t dim, double relative_margin)
{
    if (dim == 0 || points.empty() || points.size() % dim != 0)
        throw ValidationError("bounding_box: need at least one point of positive dimension");
    Box box{std::vector<double>(dim, std::numeric_limits<double>::infinity()),
            std::vector<double>(dim, -std::numeric_limits<double>::infinity())};
    for (std::size_t offset = 0; offset < points.size(); offset += dim) {
        for (std::size_t c = 0; c < dim; ++c) {
            box.lower[c] = std::min(box.lower[c], points[offset + c]);
            box.upper[c] = std::max(box.upper[c], points[offset + c]);
        }
    }
    for (std::size_t c = 0; c < dim; ++c) {
        double extent = box.upper[c] - box.lower[c];
        double margin = extent > 0.0 ? relative_margin * extent
                                     : std::max(relative_margin, 1e-3) * std::max(1.0, std::abs(box.lower[c]));
        box.lower[c] -= margin;
        box.upper[c] += margin;
    }
    return box;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double Halfspace::evaluate(std::span<const double> x) const
{
    return dot(normal, x) + offset;
}

bool Halfspace::contains(std::span<const double> x) const
{
    double v = evaluate(x);
    return strict ? v < 0.0 : v <= 0.0;
}

Halfspace Halfspace::complement() const
{
    // Negation is exact in IEEE arithmetic, so -(n.x + o) == (-n).x + (-o)
    // and the two sides never both claim a point.
    Halfspace h{normal, -offset, !strict};
    for (double& v : h.normal)
        v = -v;
    return h;
}

bool Cell::contains(std::span<const double> x) const
{
    if (!bounds.contains(x))
        return false;
    return std::all_of(halfspaces.begin(), halfspaces.end(),
                       [&](const Halfspace& h) { return h.contains(x); });
}

} // namespace tbrf
