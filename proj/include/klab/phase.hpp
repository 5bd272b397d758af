#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace klab {

using Vec = std::vector<double>;

/// A point z = (x, v) in 2d-dimensional phase space.
struct PhasePoint {
    Vec x;
    Vec v;

    PhasePoint() = default;
    PhasePoint(Vec x_, Vec v_) : x(std::move(x_)), v(std::move(v_)) {
        assert(x.size() == v.size());
    }
    /// d = 1 convenience.
    PhasePoint(double x1, double v1) : x{x1}, v{v1} {}

    int dim() const { return static_cast<int>(x.size()); }

    /// Flat layout [x_1..x_d, v_1..v_d] used by integrators and grids.
    Vec flat() const {
        Vec z(x.size() + v.size());
        for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i];
        for (std::size_t i = 0; i < v.size(); ++i) z[x.size() + i] = v[i];
        return z;
    }
    static PhasePoint from_flat(const double* z, int d) {
        PhasePoint p;
        p.x.assign(z, z + d);
        p.v.assign(z + d, z + 2 * d);
        return p;
    }
    static PhasePoint from_flat(const Vec& z) {
        return from_flat(z.data(), static_cast<int>(z.size() / 2));
    }

    double norm() const {
        double s = 0.0;
        for (double c : x) s += c * c;
        for (double c : v) s += c * c;
        return std::sqrt(s);
    }
};

inline double phase_distance(const PhasePoint& a, const PhasePoint& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        const double dx = a.x[i] - b.x[i];
        const double dv = a.v[i] - b.v[i];
        s += dx * dx + dv * dv;
    }
    return std::sqrt(s);
}

// Flat-state helpers shared by the integrators; z has layout [x, v].
inline double flat_norm(const double* z, int two_d) {
    double s = 0.0;
    for (int i = 0; i < two_d; ++i) s += z[i] * z[i];
    return std::sqrt(s);
}

inline double flat_distance(const double* a, const double* b, int two_d) {
    double s = 0.0;
    for (int i = 0; i < two_d; ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return std::sqrt(s);
}

}  // namespace klab
