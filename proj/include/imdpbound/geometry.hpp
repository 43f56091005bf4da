#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imdpbound/errors.hpp"
#include "imdpbound/numeric.hpp"

namespace imdpbound {

inline constexpr std::size_t kMaxDim = 8;

/// Absolute tolerance for all geometric comparisons.
inline constexpr double kGeomTol = 1e-12;

/// A point of R^K, K <= kMaxDim, stored inline.
class Point {
public:
    Point() = default;

    explicit Point(std::size_t dim) : dim_(dim) {
        if (dim == 0 || dim > kMaxDim)
            throw InvalidArgument("point dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    }

    Point(std::initializer_list<double> coords) : Point(coords.size()) {
        std::copy(coords.begin(), coords.end(), c_.begin());
    }

    static Point from(std::span<const double> coords) {
        Point p(coords.size());
        std::copy(coords.begin(), coords.end(), p.c_.begin());
        return p;
    }

    static Point filled(std::size_t dim, double value) {
        Point p(dim);
        std::fill_n(p.c_.begin(), dim, value);
        return p;
    }

    std::size_t dim() const noexcept { return dim_; }
    double operator[](std::size_t d) const noexcept { return c_[d]; }
    double& operator[](std::size_t d) noexcept { return c_[d]; }
    std::span<const double> coords() const noexcept { return {c_.data(), dim_}; }

    friend Point operator+(Point a, const Point& b) {
        for (std::size_t d = 0; d < a.dim_; ++d) a.c_[d] += b.c_[d];
        return a;
    }

    friend bool operator==(const Point& a, const Point& b) {
        return a.dim_ == b.dim_ && std::equal(a.c_.begin(), a.c_.begin() + a.dim_, b.c_.begin());
    }

    std::string to_string() const {
        std::string s = "(";
        for (std::size_t d = 0; d < dim_; ++d) {
            if (d) s += ", ";
            s += format_double(c_[d]);
        }
        return s + ")";
    }

private:
    std::array<double, kMaxDim> c_{};
    std::size_t dim_ = 0;
};

/// Closed axis-aligned box [lo, hi].
class Box {
public:
    Box() = default;

    Box(Point lo, Point hi) : lo_(lo), hi_(hi) {
        if (lo.dim() != hi.dim() || lo.dim() == 0) throw InvalidArgument("box corners differ in dimension");
        for (std::size_t d = 0; d < lo.dim(); ++d)
            if (!(lo[d] <= hi[d]))
                throw InvalidArgument("box has lo > hi in dimension " + std::to_string(d));
    }

    /// Box centered at c with half-width r in every dimension.
    static Box centered(const Point& c, double r) {
        Point lo = c, hi = c;
        for (std::size_t d = 0; d < c.dim(); ++d) {
            lo[d] -= r;
            hi[d] += r;
        }
        return Box(lo, hi);
    }

    const Point& lo() const noexcept { return lo_; }
    const Point& hi() const noexcept { return hi_; }
    std::size_t dim() const noexcept { return lo_.dim(); }
    double width(std::size_t d) const noexcept { return hi_[d] - lo_[d]; }

    double volume() const noexcept {
        double v = 1.0;
        for (std::size_t d = 0; d < dim(); ++d) v *= width(d);
        return v;
    }

    double diameter() const noexcept {
        double s = 0.0;
        for (std::size_t d = 0; d < dim(); ++d) s += width(d) * width(d);
        return std::sqrt(s);
    }

    Point center() const {
        Point c = lo_;
        for (std::size_t d = 0; d < dim(); ++d) c[d] = 0.5 * (lo_[d] + hi_[d]);
        return c;
    }

    bool contains(const Point& p, double tol = kGeomTol) const noexcept {
        for (std::size_t d = 0; d < dim(); ++d)
            if (p[d] < lo_[d] - tol || p[d] > hi_[d] + tol) return false;
        return true;
    }

    bool contains(const Box& b, double tol = kGeomTol) const noexcept {
        for (std::size_t d = 0; d < dim(); ++d)
            if (b.lo_[d] < lo_[d] - tol || b.hi_[d] > hi_[d] + tol) return false;
        return true;
    }

    bool approx_equal(const Box& b, double tol = kGeomTol) const noexcept {
        return contains(b, tol) && b.contains(*this, tol);
    }

    std::string to_string() const { return "[" + lo_.to_string() + ", " + hi_.to_string() + "]"; }

private:
    Point lo_, hi_;
};

/// Intersection of two boxes, or nullopt when they are disjoint in some dimension.
inline std::optional<Box> intersect(const Box& a, const Box& b) {
    Point lo = a.lo(), hi = a.hi();
    for (std::size_t d = 0; d < a.dim(); ++d) {
        lo[d] = std::max(a.lo()[d], b.lo()[d]);
        hi[d] = std::min(a.hi()[d], b.hi()[d]);
        if (hi[d] < lo[d]) return std::nullopt;
    }
    return Box(lo, hi);
}

inline double intersection_volume(const Box& a, const Box& b) {
    double v = 1.0;
    for (std::size_t d = 0; d < a.dim(); ++d) {
        const double w = std::min(a.hi()[d], b.hi()[d]) - std::max(a.lo()[d], b.lo()[d]);
        if (w <= 0.0) return 0.0;
        v *= w;
    }
    return v;
}

/// Membership under the half-open convention [lo, hi), with faces that lie on the
/// domain's upper boundary closed. Matches GridPartition::region_of.
inline bool in_half_open(const Box& box, const Point& p, const Box& domain) noexcept {
    for (std::size_t d = 0; d < box.dim(); ++d) {
        if (p[d] < box.lo()[d] - kGeomTol) return false;
        const bool upper_closed = std::abs(box.hi()[d] - domain.hi()[d]) <= kGeomTol;
        if (upper_closed ? p[d] > box.hi()[d] + kGeomTol : p[d] >= box.hi()[d] - kGeomTol) return false;
    }
    return true;
}

/// Per-dimension integer cell coordinates.
struct RegionId {
    std::array<std::size_t, kMaxDim> index{};
    std::size_t dim = 0;

    std::size_t operator[](std::size_t d) const noexcept { return index[d]; }
    std::size_t& operator[](std::size_t d) noexcept { return index[d]; }

    friend bool operator==(const RegionId& a, const RegionId& b) {
        return a.dim == b.dim && std::equal(a.index.begin(), a.index.begin() + a.dim, b.index.begin());
    }

    std::string to_string() const {
        std::string s = "(";
        for (std::size_t d = 0; d < dim; ++d) {
            if (d) s += ",";
            s += std::to_string(index[d]);
        }
        return s + ")";
    }
};

/// Inclusive-exclusive range of cell indices in one dimension.
struct IndexRange {
    std::size_t begin = 0, end = 0;
    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
};

/// Regular grid over a box. Cell i in dimension d spans [lo + i*w, lo + (i+1)*w),
/// the last cell is clipped to the domain and may be narrower. Linear region
/// indices run with dimension 0 fastest.
class GridPartition {
public:
    GridPartition(Box domain, Point widths) : domain_(domain), widths_(widths) {
        if (widths.dim() != domain.dim()) throw InvalidArgument("widths and domain differ in dimension");
        size_ = 1;
        for (std::size_t d = 0; d < dim(); ++d) {
            if (!(widths[d] > 0.0) || !std::isfinite(widths[d]))
                throw InvalidArgument("cell width must be positive in dimension " + std::to_string(d));
            if (!(domain.width(d) > 0.0))
                throw InvalidArgument("partition domain has zero extent in dimension " + std::to_string(d));
            const double ratio = domain.width(d) / widths[d];
            counts_[d] = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
            if (counts_[d] == 0) counts_[d] = 1;
            strides_[d] = size_;
            size_ *= counts_[d];
        }
    }

    static GridPartition uniform(const Box& domain, double width) {
        return GridPartition(domain, Point::filled(domain.dim(), width));
    }

    const Box& domain() const noexcept { return domain_; }
    const Point& widths() const noexcept { return widths_; }
    std::size_t dim() const noexcept { return domain_.dim(); }
    std::size_t count(std::size_t d) const noexcept { return counts_[d]; }
    std::size_t size() const noexcept { return size_; }

    double cell_lo(std::size_t d, std::size_t i) const noexcept {
        return domain_.lo()[d] + static_cast<double>(i) * widths_[d];
    }
    double cell_hi(std::size_t d, std::size_t i) const noexcept {
        return i + 1 >= counts_[d] ? domain_.hi()[d] : domain_.lo()[d] + static_cast<double>(i + 1) * widths_[d];
    }

    /// Cell index in dimension d containing coordinate x (half-open, top face closed).
    std::size_t index_of_coord(std::size_t d, double x) const {
        if (x < domain_.lo()[d] - kGeomTol || x > domain_.hi()[d] + kGeomTol)
            throw DomainViolation("coordinate " + format_double(x) + " outside domain in dimension " +
                                  std::to_string(d));
        const double k = std::floor((x - domain_.lo()[d] + kGeomTol) / widths_[d]);
        if (k <= 0.0) return 0;
        return std::min(static_cast<std::size_t>(k), counts_[d] - 1);
    }

    RegionId region_of(const Point& s) const {
        if (s.dim() != dim()) throw InvalidArgument("point dimension does not match partition");
        if (!domain_.contains(s)) throw DomainViolation("point " + s.to_string() + " outside domain");
        RegionId r;
        r.dim = dim();
        for (std::size_t d = 0; d < dim(); ++d) r[d] = index_of_coord(d, s[d]);
        return r;
    }

    std::size_t linear_index(const RegionId& r) const noexcept {
        std::size_t k = 0;
        for (std::size_t d = 0; d < dim(); ++d) k += r[d] * strides_[d];
        return k;
    }

    std::size_t index_of(const Point& s) const { return linear_index(region_of(s)); }

    RegionId region_at(std::size_t linear) const noexcept {
        RegionId r;
        r.dim = dim();
        for (std::size_t d = 0; d < dim(); ++d) {
            r[d] = linear % counts_[d];
            linear /= counts_[d];
        }
        return r;
    }

    Box region_box(const RegionId& r) const {
        Point lo = domain_.lo(), hi = domain_.hi();
        for (std::size_t d = 0; d < dim(); ++d) {
            lo[d] = cell_lo(d, r[d]);
            hi[d] = cell_hi(d, r[d]);
        }
        return Box(lo, hi);
    }

    Box region_box(std::size_t linear) const { return region_box(region_at(linear)); }

    /// Max cell diameter.
    double granularity() const noexcept {
        double s = 0.0;
        for (std::size_t d = 0; d < dim(); ++d) {
            const double w = std::min(widths_[d], domain_.width(d));
            s += w * w;
        }
        return std::sqrt(s);
    }

    GridPartition refine(std::size_t factor) const {
        if (factor == 0) throw InvalidArgument("refinement factor must be positive");
        Point w = widths_;
        for (std::size_t d = 0; d < dim(); ++d) w[d] /= static_cast<double>(factor);
        return GridPartition(domain_, w);
    }

    /// Index of the cell of `coarse` containing cell `fine_linear` of this partition,
    /// or nullopt when that cell is not contained in a single coarse cell.
    std::optional<std::size_t> parent_in(const GridPartition& coarse, std::size_t fine_linear) const {
        const Box fine = region_box(fine_linear);
        const std::size_t parent = coarse.index_of(fine.center());
        if (!coarse.region_box(parent).contains(fine, 1e-9)) return std::nullopt;
        return parent;
    }

    /// True when every cell of this partition lies inside exactly one cell of `coarse`.
    bool refines(const GridPartition& coarse) const {
        if (coarse.dim() != dim() || !coarse.domain().approx_equal(domain_)) return false;
        for (std::size_t k = 0; k < size_; ++k)
            if (!parent_in(coarse, k)) return false;
        return true;
    }

    /// Cells in dimension d whose extent meets the open interval (a, b) with positive length.
    IndexRange cells_overlapping(std::size_t d, double a, double b) const noexcept {
        a = std::max(a, domain_.lo()[d]);
        b = std::min(b, domain_.hi()[d]);
        if (!(b > a)) return {};
        auto first = static_cast<std::size_t>(std::max(0.0, std::floor((a - domain_.lo()[d]) / widths_[d])));
        first = std::min(first, counts_[d] - 1);
        while (first + 1 < counts_[d] && cell_hi(d, first) <= a) ++first;
        while (first > 0 && cell_lo(d, first) > a) --first;
        std::size_t last = first;
        while (last + 1 < counts_[d] && cell_lo(d, last + 1) < b) ++last;
        return {first, last + 1};
    }

    bool same_as(const GridPartition& o) const {
        if (o.dim() != dim() || !o.domain_.approx_equal(domain_)) return false;
        for (std::size_t d = 0; d < dim(); ++d)
            if (o.counts_[d] != counts_[d] || std::abs(o.widths_[d] - widths_[d]) > kGeomTol) return false;
        return true;
    }

private:
    Box domain_;
    Point widths_;
    std::array<std::size_t, kMaxDim> counts_{};
    std::array<std::size_t, kMaxDim> strides_{};
    std::size_t size_ = 0;
};

/// Length of [a0, a1] ∩ [b0, b1], zero when disjoint.
inline double overlap_length(double a0, double a1, double b0, double b1) noexcept {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

/// One-dimensional factor of the truncated-uniform kernel: the fraction of
/// [c - r, c + r] ∩ [dom_lo, dom_hi] that falls into [t_lo, t_hi].
inline double overlap_ratio_1d(double c, double r, double t_lo, double t_hi, double dom_lo, double dom_hi) {
    const double a = std::max(c - r, dom_lo);
    const double b = std::min(c + r, dom_hi);
    if (!(b > a))
        throw DegenerateKernel("kernel interval [" + format_double(c - r) + ", " + format_double(c + r) +
                               "] misses the domain");
    return overlap_length(a, b, t_lo, t_hi) / (b - a);
}

/// vol(kernel ∩ region ∩ domain) / vol(kernel ∩ domain).
inline double overlap_fraction(const Box& kernel, const Box& region, const Box& domain) {
    double p = 1.0;
    for (std::size_t d = 0; d < kernel.dim(); ++d) {
        const double a = std::max(kernel.lo()[d], domain.lo()[d]);
        const double b = std::min(kernel.hi()[d], domain.hi()[d]);
        if (!(b > a)) throw DegenerateKernel("kernel box " + kernel.to_string() + " has no volume inside the domain");
        p *= overlap_length(a, b, region.lo()[d], region.hi()[d]) / (b - a);
    }
    return p;
}

struct ProbabilityBounds {
    double low = 0.0;
    double high = 0.0;
};

/// Exact min and max of overlap_ratio_1d over kernel centers c in [c_lo, c_hi].
/// The ratio is piecewise linear-fractional in c with breakpoints where a kernel
/// edge crosses a target or domain edge, and monotone between breakpoints, so
/// the extremes are attained at the interval ends or at a breakpoint.
inline ProbabilityBounds overlap_bounds_1d(double c_lo, double c_hi, double r, double t_lo, double t_hi,
                                           double dom_lo, double dom_hi) {
    std::array<double, 10> candidates{};
    std::size_t n = 0;
    candidates[n++] = c_lo;
    candidates[n++] = c_hi;
    for (double edge : {t_lo, t_hi, dom_lo, dom_hi}) {
        for (double c : {edge - r, edge + r})
            if (c > c_lo && c < c_hi) candidates[n++] = c;
    }
    ProbabilityBounds b{1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double f = overlap_ratio_1d(candidates[i], r, t_lo, t_hi, dom_lo, dom_hi);
        b.low = std::min(b.low, f);
        b.high = std::max(b.high, f);
    }
    return b;
}

/// Bounds on the probability that a kernel box of half-width `half_width` centered
/// at s + drift lands in `target`, over all s in `source`. Kernel, target and
/// domain are all products of intervals, so the probability factorizes and the
/// per-dimension extremes multiply.
inline ProbabilityBounds overlap_bounds(const Box& source, const Point& drift, double half_width, const Box& target,
                                        const Box& domain) {
    if (!(half_width > 0.0)) throw InvalidArgument("kernel half-width must be positive");
    ProbabilityBounds b{1.0, 1.0};
    for (std::size_t d = 0; d < source.dim(); ++d) {
        const auto f = overlap_bounds_1d(source.lo()[d] + drift[d], source.hi()[d] + drift[d], half_width,
                                         target.lo()[d], target.hi()[d], domain.lo()[d], domain.hi()[d]);
        b.low *= f.low;
        b.high *= f.high;
    }
    return b;
}

} // namespace imdpbound
