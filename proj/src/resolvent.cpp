#include "klab/resolvent.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <limits>

#include "klab/fft_util.hpp"

namespace klab {

void ResolventConfig::validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("ResolventConfig: lambda must be > 0");
    if (n_quad < 2) throw std::invalid_argument("ResolventConfig: n_quad must be >= 2");
    if (rule == QuadRule::LogUniform) {
        if (!(t_min > 0.0) || !(t_max > t_min))
            throw std::invalid_argument("ResolventConfig: need 0 < t_min < t_max");
        if (std::exp(-lambda * t_max) >= 1e-10)
            throw std::invalid_argument("ResolventConfig: t_max violates the e^{-lambda t_max} < 1e-10 tail bound");
    }
}

namespace {

TimeQuadrature gauss_laguerre(int m, double lambda) {
    // Golub-Welsch for the Laguerre weight e^{-x} on [0, inf).
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        J(k, k) = 2.0 * k + 1.0;
        if (k + 1 < m) {
            J(k, k + 1) = k + 1.0;
            J(k + 1, k) = k + 1.0;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    TimeQuadrature q;
    q.t.resize(m);
    q.w.resize(m);
    for (int k = 0; k < m; ++k) {
        const double x = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        q.t[k] = x / lambda;
        q.w[k] = v0 * v0 / lambda;
    }
    return q;
}

TimeQuadrature log_uniform(const ResolventConfig& cfg) {
    TimeQuadrature q;
    const int m = cfg.n_quad;
    q.t.resize(m);
    q.w.resize(m);
    const double u0 = std::log(cfg.t_min), u1 = std::log(cfg.t_max);
    const double du = (u1 - u0) / (m - 1);
    for (int k = 0; k < m; ++k) {
        const double t = std::exp(u0 + k * du);
        const double trap = (k == 0 || k == m - 1) ? 0.5 : 1.0;
        q.t[k] = t;
        q.w[k] = std::exp(-cfg.lambda * t) * t * du * trap;
    }
    // [0, t_min] contribution with P_t ~ identity.
    q.near_zero_weight = (1.0 - std::exp(-cfg.lambda * cfg.t_min)) / cfg.lambda;
    return q;
}

}  // namespace

TimeQuadrature time_quadrature(const ResolventConfig& cfg) {
    cfg.validate();
    return cfg.rule == QuadRule::GaussLaguerre ? gauss_laguerre(cfg.n_quad, cfg.lambda)
                                               : log_uniform(cfg);
}

QuadPoly resolvent_poly(const QuadPoly& p, double lambda, int d) {
    // S(t) = I + tN, N the shear generator; all time moments are
    // int e^{-lambda t} t^k dt = k!/lambda^{k+1}.
    const int n = 2 * d;
    const double m0 = 1.0 / lambda;
    const double m1 = 1.0 / (lambda * lambda);
    const double m2 = 2.0 / (lambda * lambda * lambda);
    const double m3 = 6.0 / (lambda * lambda * lambda * lambda);

    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < d; ++i) N(i, d + i) = 1.0;

    QuadPoly out = QuadPoly::zero(n);
    const Eigen::MatrixXd cross = N.transpose() * p.M + p.M * N;
    out.M = p.M * m0 + cross * m1 + N.transpose() * p.M * N * m2;
    out.b = p.b * m0 + N.transpose() * p.b * m1;

    double tr_xx = 0.0, tr_xv = 0.0, tr_vv = 0.0;
    for (int i = 0; i < d; ++i) {
        tr_xx += p.M(i, i);
        tr_xv += p.M(i, d + i);
        tr_vv += p.M(d + i, d + i);
    }
    out.c = p.c * m0 + tr_xx / 3.0 * m3 + tr_xv * m2 + tr_vv * m1;
    return out;
}

GridFunction resolvent_apply(const GridFunction& g, const ResolventConfig& cfg) {
    cfg.validate();
    const int d = g.rank() / 2;

    // Exact Laplace transform for polynomial content; quadrature of the
    // spectral semigroup otherwise (matching the dispatch in semigroup_apply).
    QuadPoly poly;
    if (is_quadratic_content(g, poly)) {
        GridFunction out = g;
        for (auto& v : out.values()) v = 0.0;
        quad_add_inplace(out, resolvent_poly(poly, cfg.lambda, d));
        return out;
    }

    const TimeQuadrature q = time_quadrature(cfg);
    GridFunction acc = grid_scale(g, q.near_zero_weight);
    for (std::size_t k = 0; k < q.t.size(); ++k) {
        GridFunction pt = semigroup_apply_remainder(g, q.t[k]);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += q.w[k] * pt[i];
    }
    return acc;
}

namespace {

// 4th-order first-derivative stencils, one-sided at the edges.
void derivative_line(const std::vector<double>& f, std::vector<double>& out, double h, int n) {
    const double inv12h = 1.0 / (12.0 * h);
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * inv12h;
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * inv12h;
    for (int i = 2; i < n - 2; ++i)
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * inv12h;
    out[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * inv12h;
    out[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) * inv12h;
}

}  // namespace

GridFunction derivative_axis(const GridFunction& f, int axis, GradMethod method) {
    const int r = f.rank();
    const int n = f.n();
    if (axis < 0 || axis >= r) throw std::invalid_argument("derivative_axis: axis out of range");

    GridFunction out = f;
    if (method == GradMethod::Spectral) {
        if (f.boundary() != Boundary::Periodic)
            throw std::invalid_argument("derivative_axis: spectral method requires Periodic boundary");
        std::vector<std::complex<double>> spec(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) spec[i] = f[i];
        fft_forward(r, n, spec);
        std::vector<int> multi(r);
        for (std::size_t i = 0; i < spec.size(); ++i) {
            out.unravel(i, multi);
            const double xi = fft_freq(multi[axis], n, f.half_width(axis));
            spec[i] *= std::complex<double>(0.0, xi);
        }
        fft_inverse(r, n, spec);
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = spec[i].real();
        return out;
    }

    std::vector<std::size_t> stride(r, 1);
    for (int a = r - 2; a >= 0; --a) stride[a] = stride[a + 1] * n;
    const std::size_t line_count = f.size() / n;
    std::vector<double> line(n), dline(n);
    const double h = f.step(axis);
    for (std::size_t lc = 0; lc < line_count; ++lc) {
        std::size_t rem = lc;
        std::size_t base = 0;
        for (int a = r - 1; a >= 0; --a) {
            if (a == axis) continue;
            base += (rem % n) * stride[a];
            rem /= n;
        }
        for (int i = 0; i < n; ++i) line[i] = f[base + i * stride[axis]];
        derivative_line(line, dline, h, n);
        for (int i = 0; i < n; ++i) out[base + i * stride[axis]] = dline[i];
    }
    return out;
}

std::vector<GridFunction> grid_gradient(const GridFunction& f, AxisBlock block, GradMethod method) {
    const int d = f.rank() / 2;
    std::vector<GridFunction> comps;
    comps.reserve(d);
    const int offset = block == AxisBlock::X ? 0 : d;
    for (int i = 0; i < d; ++i) comps.push_back(derivative_axis(f, offset + i, method));
    return comps;
}

GridFunction t_lambda_apply(const DriftField& F, const GridFunction& f, const ResolventConfig& cfg) {
    const int d = f.rank() / 2;
    const GridFunction G = resolvent_apply(f, cfg);
    const std::vector<GridFunction> dv = grid_gradient(G, AxisBlock::V);
    GridFunction out = f;
    std::vector<double> z(f.rank());
    std::vector<double> Fz(d);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.node_coords(i, z);
        F.eval(z.data(), Fz.data());
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += Fz[k] * dv[k][i];
        out[i] = acc;
    }
    return out;
}

DriftSolveResult solve_with_drift(const GridFunction& g, const DriftField& F,
                                  const ResolventConfig& cfg, double tol, int max_iter) {
    cfg.validate();
    const int d = g.rank() / 2;

    // Precompute F at the nodes once; every Picard step needs the pointwise product.
    std::vector<std::vector<double>> F_nodes(d, std::vector<double>(g.size()));
    {
        std::vector<double> z(g.rank());
        std::vector<double> Fz(d);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.node_coords(i, z);
            F.eval(z.data(), Fz.data());
            for (int k = 0; k < d; ++k) F_nodes[k][i] = Fz[k];
        }
    }

    auto apply_T = [&](const GridFunction& f) {
        const GridFunction G = resolvent_apply(f, cfg);
        const std::vector<GridFunction> dv = grid_gradient(G, AxisBlock::V);
        GridFunction out = f;
        for (std::size_t i = 0; i < out.size(); ++i) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += F_nodes[k][i] * dv[k][i];
            out[i] = acc;
        }
        return out;
    };

    constexpr int kWarmup = 3;
    constexpr int kDivergenceCap = 24;

    GridFunction f = g;
    double prev_diff = -1.0;
    double estimate = 0.0;
    int ratios = 0;
    int k = 0;
    for (; k < max_iter; ++k) {
        GridFunction tf = apply_T(f);
        GridFunction next = grid_add(g, tf);
        const double diff = grid_sup_diff(next, f);
        if (prev_diff > 0.0 && k >= kWarmup) {
            estimate = std::max(estimate, diff / prev_diff);
            ++ratios;
        }
        prev_diff = diff;
        f = std::move(next);
        if (diff < tol) break;
        if (k + 1 >= kDivergenceCap && ratios >= 4 && estimate >= 1.0)
            throw divergence_error(estimate, k + 1);
    }
    if (k == max_iter) throw divergence_error(estimate, k);

    DriftSolveResult result{resolvent_apply(f, cfg), k + 1, estimate};
    return result;
}

void ZvonkinCorrector::eval_u(const double* z, double* out_2d) const {
    for (int i = 0; i < d; ++i) out_2d[i] = 0.0;
    for (int i = 0; i < d; ++i) out_2d[d + i] = empty() ? 0.0 : u_tilde[i].interpolate(z);
}

void ZvonkinCorrector::eval_du(const double* z, double* out) const {
    const int cols = 2 * d;
    for (int i = 0; i < d; ++i)
        for (int a = 0; a < cols; ++a)
            out[i * cols + a] = empty() ? 0.0 : du[i][a].interpolate(z);
}

ZvonkinCorrector ZvonkinCorrector::identity(int d) {
    ZvonkinCorrector c;
    c.d = d;
    return c;
}

ZvonkinCorrector build_zvonkin_U(const DriftField& F, const GridFunction& proto,
                                 const std::vector<double>& lambda_sweep, QuadRule rule,
                                 int n_quad, double tol, int max_iter) {
    const int d = proto.rank() / 2;
    std::vector<double> achieved;
    for (double lambda : lambda_sweep) {
        const ResolventConfig cfg = ResolventConfig::for_lambda(lambda, rule, n_quad);
        ZvonkinCorrector corr;
        corr.d = d;
        corr.lambda_used = lambda;
        bool diverged = false;
        double worst_estimate = 0.0;
        for (int i = 0; i < d && !diverged; ++i) {
            GridFunction gi = proto;
            std::vector<double> z(proto.rank());
            std::vector<double> Fz(d);
            for (std::size_t idx = 0; idx < gi.size(); ++idx) {
                gi.node_coords(idx, z);
                F.eval(z.data(), Fz.data());
                gi[idx] = Fz[i];
            }
            try {
                DriftSolveResult r = solve_with_drift(gi, F, cfg, tol, max_iter);
                worst_estimate = std::max(worst_estimate, r.contraction_estimate);
                corr.iterations = std::max(corr.iterations, r.iterations);
                corr.u_tilde.push_back(std::move(r.psi));
            } catch (const divergence_error&) {
                diverged = true;
            }
        }
        if (diverged) {
            achieved.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        corr.contraction_estimate = worst_estimate;
        corr.du.resize(d);
        for (int i = 0; i < d; ++i) {
            corr.du[i].reserve(2 * d);
            for (int a = 0; a < 2 * d; ++a)
                corr.du[i].push_back(derivative_axis(corr.u_tilde[i], a));
        }
        double sup_u = 0.0, sup_du = 0.0;
        for (std::size_t idx = 0; idx < proto.size(); ++idx) {
            double su = 0.0, sd = 0.0;
            for (int i = 0; i < d; ++i) {
                su += corr.u_tilde[i][idx] * corr.u_tilde[i][idx];
                for (int a = 0; a < 2 * d; ++a) sd += corr.du[i][a][idx] * corr.du[i][a][idx];
            }
            sup_u = std::max(sup_u, std::sqrt(su));
            sup_du = std::max(sup_du, std::sqrt(sd));
        }
        corr.sup_u = sup_u;
        corr.sup_du = sup_du;
        achieved.push_back(corr.certificate());
        if (corr.certificate() < 0.5) return corr;
    }
    throw no_admissible_lambda(lambda_sweep, achieved);
}

}  // namespace klab
