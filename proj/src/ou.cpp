#include "klab/ou.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "klab/fft_util.hpp"

namespace klab {

namespace {
constexpr double kSmallTimeFloor = 1e-6;
}

PhasePoint ou_mean(double t, const PhasePoint& z) {
    if (t < 0.0) throw std::invalid_argument("ou_mean: t must be >= 0");
    PhasePoint out = z;
    for (int i = 0; i < z.dim(); ++i) out.x[i] += t * z.v[i];
    return out;
}

void ou_mean_flat(double t, int d, const double* z, double* out) {
    for (int i = 0; i < d; ++i) out[i] = z[i] + t * z[d + i];
    for (int i = 0; i < d; ++i) out[d + i] = z[d + i];
}

OuTransition ou_covariance(double t, int d) {
    if (t < 0.0) throw std::invalid_argument("ou_covariance: t must be >= 0");
    OuTransition tr;
    tr.t = t;
    tr.d = d;
    tr.cov = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    tr.chol = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    for (int i = 0; i < d; ++i) {
        tr.cov(i, i) = t * t * t / 3.0;
        tr.cov(i, d + i) = t * t / 2.0;
        tr.cov(d + i, i) = t * t / 2.0;
        tr.cov(d + i, d + i) = t;
    }
    if (t < kSmallTimeFloor) {
        tr.degenerate = true;
        tr.logdet = -std::numeric_limits<double>::infinity();
        return tr;
    }
    // Closed-form lower Cholesky of each (x_i, v_i) pair.
    const double lxx = std::sqrt(t * t * t / 3.0);
    const double lvx = std::sqrt(3.0 * t) / 2.0;
    const double lvv = std::sqrt(t) / 2.0;
    for (int i = 0; i < d; ++i) {
        tr.chol(i, i) = lxx;
        tr.chol(d + i, i) = lvx;
        tr.chol(d + i, d + i) = lvv;
    }
    tr.logdet = d * std::log(t * t * t * t / 12.0);
    return tr;
}

PhasePoint ou_sample(const PhasePoint& z, double t, Rng& rng) {
    if (!(t > 0.0)) throw std::invalid_argument("ou_sample: t must be > 0");
    const int d = z.dim();
    const OuTransition tr = ou_covariance(t, d);
    PhasePoint out = ou_mean(t, z);
    if (tr.degenerate) return out;
    for (int i = 0; i < d; ++i) {
        const double g1 = rng.normal();
        const double g2 = rng.normal();
        out.x[i] += tr.chol(i, i) * g1;
        out.v[i] += tr.chol(d + i, i) * g1 + tr.chol(d + i, d + i) * g2;
    }
    return out;
}

double ou_density(double t, const PhasePoint& z, const PhasePoint& zp) {
    if (!(t > 0.0)) throw std::invalid_argument("ou_density: t must be > 0");
    const int d = z.dim();
    const double a = t * t * t / 3.0, b = t * t / 2.0, c = t;
    const double det_pair = a * c - b * b;  // == t^4 / 12
    double quad = 0.0;
    for (int i = 0; i < d; ++i) {
        const double rx = zp.x[i] - (z.x[i] + t * z.v[i]);
        const double rv = zp.v[i] - z.v[i];
        quad += (c * rx * rx - 2.0 * b * rx * rv + a * rv * rv) / det_pair;
    }
    const double log_norm = -d * std::log(2.0 * M_PI) - 0.5 * d * std::log(det_pair);
    return std::exp(log_norm - 0.5 * quad);
}

QuadPoly QuadPoly::zero(int two_d) {
    QuadPoly p;
    p.b = Eigen::VectorXd::Zero(two_d);
    p.M = Eigen::MatrixXd::Zero(two_d, two_d);
    return p;
}

double QuadPoly::eval(const double* z) const {
    const int n = static_cast<int>(b.size());
    double acc = c;
    for (int a = 0; a < n; ++a) {
        acc += b(a) * z[a];
        acc += M(a, a) * z[a] * z[a];
        for (int bb = a + 1; bb < n; ++bb) acc += 2.0 * M(a, bb) * z[a] * z[bb];
    }
    return acc;
}

QuadPoly quad_fit(const GridFunction& g) {
    const int r = g.rank();
    // Basis: 1, z_a, z_a z_b (a <= b).
    const int nb = 1 + r + r * (r + 1) / 2;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
    std::vector<double> z(r), phi(nb);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.node_coords(i, z);
        int k = 0;
        phi[k++] = 1.0;
        for (int a = 0; a < r; ++a) phi[k++] = z[a];
        for (int a = 0; a < r; ++a)
            for (int b = a; b < r; ++b) phi[k++] = z[a] * z[b];
        for (int p = 0; p < nb; ++p) {
            rhs(p) += phi[p] * g[i];
            for (int q = p; q < nb; ++q) gram(p, q) += phi[p] * phi[q];
        }
    }
    gram = gram.selfadjointView<Eigen::Upper>();
    Eigen::VectorXd coef = gram.ldlt().solve(rhs);

    QuadPoly poly = QuadPoly::zero(r);
    int k = 0;
    poly.c = coef(k++);
    for (int a = 0; a < r; ++a) poly.b(a) = coef(k++);
    for (int a = 0; a < r; ++a)
        for (int b = a; b < r; ++b) {
            if (a == b) poly.M(a, a) = coef(k);
            else {
                poly.M(a, b) = 0.5 * coef(k);
                poly.M(b, a) = 0.5 * coef(k);
            }
            ++k;
        }
    return poly;
}

GridFunction quad_subtract(const GridFunction& g, const QuadPoly& p) {
    GridFunction out = g;
    std::vector<double> z(g.rank());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.node_coords(i, z);
        out[i] -= p.eval(z.data());
    }
    return out;
}

void quad_add_inplace(GridFunction& g, const QuadPoly& p) {
    std::vector<double> z(g.rank());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.node_coords(i, z);
        g[i] += p.eval(z.data());
    }
}

QuadPoly ou_transport_poly(const QuadPoly& p, double t, int d) {
    // S = e^{tA}; P_t p(z) = p(Sz) + tr(M Q_t).
    const int n = 2 * d;
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < d; ++i) S(i, d + i) = t;
    QuadPoly out = QuadPoly::zero(n);
    out.M = S.transpose() * p.M * S;
    out.b = S.transpose() * p.b;
    const OuTransition tr = ou_covariance(t, d);
    out.c = p.c + (p.M * tr.cov).trace();
    return out;
}

namespace {

// Cubic Catmull-Rom on a line of samples with periodic wrap.
double cubic_line(const std::vector<double>& line, double u, int n) {
    u -= std::floor(u / n) * n;
    int i1 = static_cast<int>(std::floor(u));
    const double s = u - i1;
    i1 %= n;
    const int i0 = (i1 + n - 1) % n;
    const int i2 = (i1 + 1) % n;
    const int i3 = (i1 + 2) % n;
    const double p0 = line[i0], p1 = line[i1], p2 = line[i2], p3 = line[i3];
    return p1 + 0.5 * s * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)));
}

// For ZeroExtended grids extend the line by zero instead of wrapping.
double cubic_line_zero(const std::vector<double>& line, double u, int n) {
    const int i1 = static_cast<int>(std::floor(u));
    const double s = u - i1;
    double p[4];
    for (int j = 0; j < 4; ++j) {
        const int idx = i1 - 1 + j;
        p[j] = (idx >= 0 && idx < n) ? line[idx] : 0.0;
    }
    return p[1] + 0.5 * s * (p[2] - p[0] + s * (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3] + s * (3.0 * (p[1] - p[2]) + p[3] - p[0])));
}

// Shear x_i <- x_i + t v_i by per-line cubic resampling along axis i.
void shear_axis(GridFunction& g, int axis_x, int axis_v, double t) {
    const int r = g.rank();
    const int n = g.n();
    const double hx = g.step(axis_x);
    std::vector<std::size_t> stride(r, 1);
    for (int a = r - 2; a >= 0; --a) stride[a] = stride[a + 1] * n;

    const std::size_t total = g.size();
    const std::size_t line_count = total / n;
    std::vector<double> line(n);
    for (std::size_t lc = 0; lc < line_count; ++lc) {
        // Decode the fixed multi-index of this line (axis_x coordinate free).
        std::size_t rem = lc;
        std::size_t base = 0;
        int v_index = 0;
        for (int a = r - 1; a >= 0; --a) {
            if (a == axis_x) continue;
            const int ia = static_cast<int>(rem % n);
            rem /= n;
            base += ia * stride[a];
            if (a == axis_v) v_index = ia;
        }
        const double v_val = g.node(axis_v, v_index);
        const double shift = t * v_val / hx;  // in units of grid cells
        for (int i = 0; i < n; ++i) line[i] = g[base + i * stride[axis_x]];
        for (int i = 0; i < n; ++i) {
            const double u = i + shift;
            const double val = g.boundary() == Boundary::Periodic ? cubic_line(line, u, n)
                                                                  : cubic_line_zero(line, u, n);
            g[base + i * stride[axis_x]] = val;
        }
    }
}

}  // namespace

GridFunction semigroup_apply_remainder(const GridFunction& g, double t, SemigroupInfo* info) {
    if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be >= 0");
    const int r = g.rank();
    if (r % 2 != 0) throw std::invalid_argument("semigroup_apply: grid rank must be 2d");
    const int d = r / 2;
    const int n = g.n();

    GridFunction out = g;
    if (t == 0.0) return out;

    if (t >= kSmallTimeFloor) {
        // Correlated Gaussian blur: multiplier exp(-xi^T Q_t xi / 2).
        const double qxx = t * t * t / 3.0, qxv = t * t / 2.0, qvv = t;
        if (info) {
            double hmin = g.step(0);
            for (int a = 0; a < r; ++a) hmin = std::min(hmin, g.step(a));
            if (std::sqrt(qxx) < hmin && std::sqrt(qvv) < hmin) info->coarse_warning = true;
        }
        std::vector<std::complex<double>> spec(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) spec[i] = out[i];
        fft_forward(r, n, spec);
        std::vector<int> multi(r);
        for (std::size_t i = 0; i < spec.size(); ++i) {
            out.unravel(i, multi);
            double quad = 0.0;
            for (int a = 0; a < d; ++a) {
                const double xix = fft_freq(multi[a], n, g.half_width(a));
                const double xiv = fft_freq(multi[d + a], n, g.half_width(d + a));
                quad += qxx * xix * xix + 2.0 * qxv * xix * xiv + qvv * xiv * xiv;
            }
            spec[i] *= std::exp(-0.5 * quad);
        }
        fft_inverse(r, n, spec);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec[i].real();
    }

    for (int i = 0; i < d; ++i) shear_axis(out, i, d + i, t);
    return out;
}

bool is_quadratic_content(const GridFunction& g, QuadPoly& poly) {
    poly = quad_fit(g);
    const GridFunction rem = quad_subtract(g, poly);
    return rem.sup_norm() <= 1e-9 * (g.sup_norm() + 1.0);
}

GridFunction semigroup_apply(const GridFunction& g, double t, SemigroupInfo* info) {
    const int d = g.rank() / 2;
    // Polynomial inputs (the box carries non-decaying content) transport in
    // closed form; everything else goes through the spectral path, which is
    // clean for fields that decay inside the box.
    QuadPoly poly;
    if (is_quadratic_content(g, poly)) {
        GridFunction out = g;
        for (auto& v : out.values()) v = 0.0;
        quad_add_inplace(out, ou_transport_poly(poly, t, d));
        if (info) info->coarse_warning = false;
        return out;
    }
    return semigroup_apply_remainder(g, t, info);
}

}  // namespace klab
