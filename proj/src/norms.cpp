#include "klab/norms.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "klab/fft_util.hpp"
#include "klab/resolvent.hpp"

namespace klab {

void NormParams::validate_p() const {
    if (p < 2 || p % 2 != 0 || p > 10)
        throw std::invalid_argument("NormParams: p restricted to even integers {2,...,10}");
    if (q < 2) throw std::invalid_argument("NormParams: q must be >= 2");
}

namespace {

double lp_of(const std::vector<double>& vals, double cell, int p) {
    double acc = 0.0;
    for (double v : vals) {
        double pw = 1.0;
        const double a = std::abs(v);
        for (int k = 0; k < p; ++k) pw *= a;
        acc += pw;
    }
    return std::pow(acc * cell, 1.0 / p);
}

}  // namespace

BesselNorm bessel_norm(const GridFunction& f, const NormParams& params) {
    params.validate_p();
    if (f.boundary() != Boundary::Periodic)
        throw std::invalid_argument("bessel_norm: requires Periodic boundary (Fourier basis)");
    const int r = f.rank();
    const int n = f.n();

    std::vector<std::complex<double>> spec(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) spec[i] = f[i];
    fft_forward(r, n, spec);
    std::vector<int> multi(r);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        f.unravel(i, multi);
        double xi2 = 0.0;
        for (int a = 0; a < r; ++a) {
            const double xi = fft_freq(multi[a], n, f.half_width(a));
            xi2 += xi * xi;
        }
        spec[i] *= std::pow(xi2, 0.5 * params.s);
    }
    fft_inverse(r, n, spec);

    std::vector<double> semis(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) semis[i] = spec[i].real();

    BesselNorm out;
    out.lp = f.lp_norm(params.p);
    out.seminorm = lp_of(semis, f.cell_volume(), params.p);
    out.total = out.lp + out.seminorm;
    return out;
}

namespace {

// f(. + h) on the lattice; spectral phase shift under Periodic (exact for
// band-limited data), multilinear resample otherwise.
GridFunction shift_field(const GridFunction& f, const std::vector<double>& h) {
    const int r = f.rank();
    const int n = f.n();
    GridFunction out = f;
    if (f.boundary() == Boundary::Periodic) {
        std::vector<std::complex<double>> spec(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) spec[i] = f[i];
        fft_forward(r, n, spec);
        std::vector<int> multi(r);
        for (std::size_t i = 0; i < spec.size(); ++i) {
            f.unravel(i, multi);
            double phase = 0.0;
            for (int a = 0; a < r; ++a) phase += fft_freq(multi[a], n, f.half_width(a)) * h[a];
            spec[i] *= std::complex<double>(std::cos(phase), std::sin(phase));
        }
        fft_inverse(r, n, spec);
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = spec[i].real();
        return out;
    }
    std::vector<double> z(r);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.node_coords(i, z);
        for (int a = 0; a < r; ++a) z[a] += h[a];
        out[i] = f.interpolate(z);
    }
    return out;
}

// Unit directions for the shift integral: +-e in 1-d, 8 spokes in 2-d, axis
// pairs above.
std::vector<std::vector<double>> shift_directions(int r) {
    std::vector<std::vector<double>> dirs;
    if (r == 1) {
        dirs.push_back({1.0});
        dirs.push_back({-1.0});
    } else if (r == 2) {
        for (int k = 0; k < 8; ++k) {
            const double a = 2.0 * M_PI * k / 8.0;
            dirs.push_back({std::cos(a), std::sin(a)});
        }
    } else {
        for (int a = 0; a < r; ++a)
            for (double s : {1.0, -1.0}) {
                std::vector<double> e(r, 0.0);
                e[a] = s;
                dirs.push_back(e);
            }
    }
    return dirs;
}

double sphere_area(int r) {
    if (r == 1) return 2.0;
    if (r == 2) return 2.0 * M_PI;
    if (r == 3) return 4.0 * M_PI;
    return 2.0 * std::pow(M_PI, r / 2.0) / std::tgamma(r / 2.0);
}

// q-th power of the L^p norm of g, as needed inside the shell integral.
double lp_pow_q(const GridFunction& g, int p, int q) {
    return std::pow(g.lp_norm(p), q);
}

double shell_integral(const GridFunction& f, const NormParams& params,
                      const std::function<GridFunction(const std::vector<double>&)>& difference,
                      double s_eff, int n_shells, double r_min_factor) {
    const int r = f.rank();
    const auto dirs = shift_directions(r);
    const double dir_weight = sphere_area(r) / static_cast<double>(dirs.size());

    double diam = 0.0;
    for (int a = 0; a < r; ++a) diam += 4.0 * f.half_width(a) * f.half_width(a);
    diam = std::sqrt(diam);
    const double r_min = r_min_factor * f.half_width(0);

    const double u0 = std::log(r_min), u1 = std::log(diam);
    const double du = (u1 - u0) / (n_shells - 1);
    double acc = 0.0;
    std::vector<double> h(r);
    for (int j = 0; j < n_shells; ++j) {
        const double radius = std::exp(u0 + j * du);
        const double trap = (j == 0 || j == n_shells - 1) ? 0.5 : 1.0;
        double ang = 0.0;
        for (const auto& dir : dirs) {
            for (int a = 0; a < r; ++a) h[a] = radius * dir[a];
            ang += dir_weight * lp_pow_q(difference(h), params.p, params.q);
        }
        // dh = r^{D-1} dr dOmega against the kernel r^{-D - s q}.
        acc += trap * du * radius * std::pow(radius, r - 1) * std::pow(radius, -r - s_eff * params.q) * ang;
    }
    return std::pow(acc, 1.0 / params.q);
}

}  // namespace

double besov_seminorm(const GridFunction& f, const NormParams& params, int n_shells,
                      double r_min_factor) {
    params.validate_p();
    if (!(params.s > 0.0) || !(params.s < 2.0))
        throw std::invalid_argument("besov_seminorm: s must lie in (0, 2)");

    if (params.s < 1.0) {
        auto diff = [&](const std::vector<double>& h) { return grid_sub(shift_field(f, h), f); };
        return shell_integral(f, params, diff, params.s, n_shells, r_min_factor);
    }
    if (params.s == 1.0) {
        auto diff = [&](const std::vector<double>& h) {
            std::vector<double> h2(h.size());
            for (std::size_t a = 0; a < h.size(); ++a) h2[a] = 2.0 * h[a];
            GridFunction second = shift_field(f, h2);
            GridFunction mid = shift_field(f, h);
            for (std::size_t i = 0; i < second.size(); ++i) second[i] += -2.0 * mid[i] + f[i];
            return second;
        };
        return shell_integral(f, params, diff, 1.0, n_shells, r_min_factor);
    }
    // s in (1, 2): sum over partial derivatives of the first-difference integral.
    double total = 0.0;
    for (int a = 0; a < f.rank(); ++a) {
        const GridFunction da = derivative_axis(f, a, f.boundary() == Boundary::Periodic
                                                         ? GradMethod::Spectral
                                                         : GradMethod::FiniteDifference);
        auto diff = [&](const std::vector<double>& h) { return grid_sub(shift_field(da, h), da); };
        total += shell_integral(da, params, diff, params.s - 1.0, n_shells, r_min_factor);
    }
    return total;
}

double mixed_norm(const GridFunction& f, const NormParams& params) {
    params.validate_p();
    if (f.boundary() != Boundary::Periodic)
        throw std::invalid_argument("mixed_norm: requires Periodic boundary");
    const int r = f.rank();
    if (r % 2 != 0) throw std::invalid_argument("mixed_norm: need a rank-2d phase grid");
    const int d = r / 2;
    const int n = f.n();

    // Slice over the v-block (last d axes are fastest in row-major order with
    // axis 0 slowest; the x-block axes are the leading ones). For each
    // v-multi-index gather the x-slab, Bessel-transform it, accumulate |.|^p.
    std::size_t x_count = 1, v_count = 1;
    for (int a = 0; a < d; ++a) x_count *= static_cast<std::size_t>(n);
    for (int a = 0; a < d; ++a) v_count *= static_cast<std::size_t>(n);

    // values index = x_flat * v_count + v_flat (x axes are slower).
    double cell_x = 1.0, cell_v = 1.0;
    for (int a = 0; a < d; ++a) cell_x *= f.step(a);
    for (int a = 0; a < d; ++a) cell_v *= f.step(d + a);

    std::vector<std::complex<double>> slab(x_count);
    std::vector<int> multi(d);
    double acc_v = 0.0;
    for (std::size_t vf = 0; vf < v_count; ++vf) {
        for (std::size_t xf = 0; xf < x_count; ++xf) slab[xf] = f[xf * v_count + vf];
        fft_forward(d, n, slab);
        // Bessel potential J^s = (1 + |xi|^2)^{s/2}; s = 0 reduces slice-wise
        // H^0_p to plain L^p.
        for (std::size_t xf = 0; xf < x_count; ++xf) {
            std::size_t rem = xf;
            double xi2 = 0.0;
            for (int a = d - 1; a >= 0; --a) {
                const int idx = static_cast<int>(rem % n);
                rem /= n;
                const double xi = fft_freq(idx, n, f.half_width(a));
                xi2 += xi * xi;
            }
            slab[xf] *= std::pow(1.0 + xi2, 0.5 * params.s);
        }
        fft_inverse(d, n, slab);
        double acc_x = 0.0;
        for (std::size_t xf = 0; xf < x_count; ++xf) {
            const double a = std::abs(slab[xf].real());
            double pw = 1.0;
            for (int k = 0; k < params.p; ++k) pw *= a;
            acc_x += pw;
        }
        acc_v += acc_x * cell_x;
    }
    return std::pow(acc_v * cell_v, 1.0 / params.p);
}

XpsBreakdown xps_norm(const GridFunction& f, const NormParams& params) {
    params.validate_p();
    const int r = f.rank();
    const int d = r / 2;

    XpsBreakdown out;
    // W^{1,p} part: |f|_p + sum_a |d_a f|_p.
    out.w1p = f.lp_norm(params.p);
    std::vector<GridFunction> grads;
    for (int a = 0; a < r; ++a) {
        grads.push_back(derivative_axis(f, a));
        out.w1p += grads.back().lp_norm(params.p);
    }

    // |D^2_v f| mixed norm: vector convention (sum of p-th powers)^{1/p}.
    double acc_d2 = 0.0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const GridFunction dij = derivative_axis(grads[d + i], d + j);
            acc_d2 += std::pow(mixed_norm(dij, params), params.p);
        }
    }
    out.d2v_mixed = std::pow(acc_d2, 1.0 / params.p);

    // v . D_x f pointwise, then mixed norm.
    GridFunction vdx = f;
    std::vector<double> z(r);
    for (std::size_t idx = 0; idx < vdx.size(); ++idx) {
        vdx.node_coords(idx, z);
        double acc = 0.0;
        for (int i = 0; i < d; ++i) acc += z[d + i] * grads[i][idx];
        vdx[idx] = acc;
    }
    out.vdx_mixed = mixed_norm(vdx, params);
    out.total = out.w1p + out.d2v_mixed + out.vdx_mixed;
    return out;
}

namespace {

double drift_mixed_norm_pow(const DriftField& F, double s, int p, const GridFunction& proto) {
    const int d = proto.rank() / 2;
    NormParams params;
    params.s = s;
    params.p = p;
    params.q = p;
    double acc = 0.0;
    std::vector<double> z(proto.rank());
    std::vector<double> Fz(d);
    for (int i = 0; i < d; ++i) {
        GridFunction gi = proto;
        for (std::size_t idx = 0; idx < gi.size(); ++idx) {
            gi.node_coords(idx, z);
            F.eval(z.data(), Fz.data());
            gi[idx] = Fz[i];
        }
        acc += std::pow(mixed_norm(gi, params), p);
    }
    return acc;
}

}  // namespace

HypothesisVerdict hypothesis_check(const DriftField& F, double s, int p, const GridFunction& proto) {
    if (!(s > 2.0 / 3.0) || !(s < 1.0))
        throw std::invalid_argument("hypothesis_check: s must lie in (2/3, 1)");
    const int d = proto.rank() / 2;
    if (p <= 6 * d) throw std::invalid_argument("hypothesis_check: need p > 6d");

    HypothesisVerdict v;
    const double base_pow = drift_mixed_norm_pow(F, s, p, proto);
    v.value = std::pow(base_pow, 1.0 / p);

    GridFunction refined(proto.half_widths(), 2 * proto.n(), proto.boundary());
    const double refined_pow = drift_mixed_norm_pow(F, s, p, refined);
    v.refined = std::pow(refined_pow, 1.0 / p);

    std::vector<double> widths = proto.half_widths();
    for (double& w : widths) w *= 2.0;
    GridFunction grown(widths, 2 * proto.n(), proto.boundary());
    const double grown_pow = drift_mixed_norm_pow(F, s, p, grown);
    v.box_grown = std::pow(grown_pow, 1.0 / p);

    v.refine_change = base_pow > 0.0 ? std::abs(refined_pow - base_pow) / base_pow : 0.0;
    v.box_change = base_pow > 0.0 ? std::abs(grown_pow - base_pow) / base_pow : 0.0;
    v.pass = std::isfinite(v.value) && v.refine_change < 0.2 && v.box_change < 0.2;
    return v;
}

}  // namespace klab
