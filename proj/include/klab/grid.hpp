#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "klab/phase.hpp"

namespace klab {

enum class Boundary { Periodic, ZeroExtended };

/// Scalar field sampled on a rectangular lattice over a box symmetric about
/// the origin. Axis a covers [-L_a, L_a) with n nodes at -L_a + i*(2 L_a / n);
/// for phase-space grids the first half of the axes are the x-block and the
/// second half the v-block. Values are row-major with axis 0 slowest.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(std::vector<double> half_widths, int n, Boundary boundary);

    /// Uniform box [-L, L)^rank.
    static GridFunction uniform(int rank, double L, int n, Boundary boundary);

    int rank() const { return static_cast<int>(L_.size()); }
    int n() const { return n_; }
    Boundary boundary() const { return boundary_; }
    const std::vector<double>& half_widths() const { return L_; }
    double half_width(int axis) const { return L_[axis]; }
    double step(int axis) const { return 2.0 * L_[axis] / n_; }
    double node(int axis, int i) const { return -L_[axis] + i * step(axis); }
    std::size_t size() const { return values_.size(); }
    double cell_volume() const;

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::size_t index(const std::vector<int>& multi) const;
    void unravel(std::size_t flat, std::vector<int>& multi) const;
    /// Coordinates of the node with flat index `flat`.
    void node_coords(std::size_t flat, std::vector<double>& z) const;

    /// Fill from a callable taking node coordinates (flat layout).
    void fill(const std::function<double(const std::vector<double>&)>& f);

    /// Multilinear interpolation at an arbitrary point; respects the boundary
    /// rule (wrap or zero outside).
    double interpolate(const std::vector<double>& z) const;
    double interpolate(const double* z) const;

    /// Value at the nearest node (periodic wrap or zero outside).
    double nearest(const double* z) const;

    /// Box-restricted grid L^p norm (rectangle-rule quadrature).
    double lp_norm(double p) const;
    double sup_norm() const;

    /// Self-describing on-disk format: one-line JSON header + little-endian
    /// float64 payload. Round-trips bit-exactly.
    void save(const std::string& path) const;
    static GridFunction load(const std::string& path);

private:
    std::vector<double> L_;
    int n_ = 0;
    Boundary boundary_ = Boundary::Periodic;
    std::vector<double> values_;
};

/// Pointwise lattice algebra. Shapes must match.
GridFunction grid_add(const GridFunction& a, const GridFunction& b);
GridFunction grid_sub(const GridFunction& a, const GridFunction& b);
GridFunction grid_scale(const GridFunction& a, double c);
GridFunction grid_mul(const GridFunction& a, const GridFunction& b);
double grid_sup_diff(const GridFunction& a, const GridFunction& b);

}  // namespace klab
