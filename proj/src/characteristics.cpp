#include "klab/characteristics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace klab {

std::pair<double, double> branch_params(double alpha) {
    if (!(alpha > 0.5) || !(alpha < 1.0))
        throw std::invalid_argument("branch_params: alpha must lie in (1/2, 1)");
    const double beta = 2.0 / (1.0 - alpha);
    if (!std::isfinite(beta)) throw std::overflow_error("branch_params: beta overflow as alpha -> 1");
    const double a_mag = std::pow(1.0 / (beta * (beta - 1.0)), 1.0 / (1.0 - alpha));
    return {beta, a_mag};
}

BranchSolution BranchSolution::make(double alpha, int sign, double t0) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("BranchSolution: sign must be +-1");
    if (t0 < 0.0) throw std::invalid_argument("BranchSolution: t0 must be >= 0");
    const auto [beta, a_mag] = branch_params(alpha);
    BranchSolution b;
    b.alpha = alpha;
    b.beta = beta;
    b.amplitude = sign * a_mag;
    b.t0 = t0;
    b.sign = sign;
    return b;
}

PhasePoint branch_solution(const BranchSolution& b, double t) {
    if (t <= b.t0) return PhasePoint(0.0, 0.0);
    const double s = t - b.t0;
    const double x = b.amplitude * std::pow(s, b.beta);
    const double v = b.amplitude * b.beta * std::pow(s, b.beta - 1.0);
    return PhasePoint(x, v);
}

double branch_validity_window(const BranchSolution& b, const CutoffSpec& cutoff) {
    const double r_limit = 0.9 * cutoff.r_inner;
    // |state| is increasing in t - t0; bisect the exit time.
    double lo = 0.0, hi = 1.0;
    while (branch_solution(b, b.t0 + hi).norm() < r_limit) {
        hi *= 2.0;
        if (hi > 1e6) return b.t0 + hi;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (branch_solution(b, b.t0 + mid).norm() < r_limit) lo = mid;
        else hi = mid;
    }
    return b.t0 + lo;
}

double branch_ode_residual(const BranchSolution& b, const DriftField& F, double t) {
    if (t <= b.t0) return 0.0;
    const double s = t - b.t0;
    const PhasePoint z = branch_solution(b, t);
    const double vprime = b.amplitude * b.beta * (b.beta - 1.0) * std::pow(s, b.beta - 2.0);
    const Vec f = F.eval(z);
    return std::abs(vprime - f[0]);
}

namespace {

inline void ode_rhs(const DriftField& F, const double* z, double* out, int d, double* scratch) {
    F.eval(z, scratch);
    for (int i = 0; i < d; ++i) out[i] = z[d + i];
    for (int i = 0; i < d; ++i) out[d + i] = scratch[i];
}

// One RK4 step of z' = sgn * (v, F(z)).
void rk4_step(const DriftField& F, double* z, double dt, double sgn, int d, std::vector<double>& work) {
    const int n = 2 * d;
    double* k1 = work.data();
    double* k2 = k1 + n;
    double* k3 = k2 + n;
    double* k4 = k3 + n;
    double* tmp = k4 + n;
    double* scratch = tmp + n;

    ode_rhs(F, z, k1, d, scratch);
    for (int i = 0; i < n; ++i) tmp[i] = z[i] + sgn * 0.5 * dt * k1[i];
    ode_rhs(F, tmp, k2, d, scratch);
    for (int i = 0; i < n; ++i) tmp[i] = z[i] + sgn * 0.5 * dt * k2[i];
    ode_rhs(F, tmp, k3, d, scratch);
    for (int i = 0; i < n; ++i) tmp[i] = z[i] + sgn * dt * k3[i];
    ode_rhs(F, tmp, k4, d, scratch);
    for (int i = 0; i < n; ++i)
        z[i] += sgn * dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

OdeTrajectory integrate_ode(const DriftField& F, const PhasePoint& z0, double T, double dt, int thin) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_ode: dt must be > 0");
    const int d = z0.dim();
    const long long steps = std::llround(T / dt);
    Vec z = z0.flat();
    std::vector<double> work(2 * 5 * d + d);

    OdeTrajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(z0);
    for (long long k = 0; k < steps; ++k) {
        rk4_step(F, z.data(), dt, 1.0, d, work);
        if ((k + 1) % thin == 0 || k + 1 == steps) {
            traj.times.push_back((k + 1) * dt);
            traj.states.push_back(PhasePoint::from_flat(z));
        }
    }
    return traj;
}

std::vector<ReachedSetPoint> reached_set(double alpha, double t, int n_onsets) {
    std::vector<ReachedSetPoint> pts;
    pts.reserve(2 * n_onsets);
    for (int sign : {1, -1}) {
        for (int k = 0; k < n_onsets; ++k) {
            const double t0 = n_onsets == 1 ? 0.0 : t * k / (n_onsets - 1);
            const BranchSolution b = BranchSolution::make(alpha, sign, t0);
            pts.push_back({t0, sign, branch_solution(b, t)});
        }
    }
    return pts;
}

std::pair<PhasePoint, PhasePoint> coalescing_pair(double alpha, double t0) {
    if (!(t0 > 0.0)) throw std::invalid_argument("coalescing_pair: t0 must be > 0");
    const auto [beta, a_mag] = branch_params(alpha);
    const double x = a_mag * std::pow(t0, beta);
    const double v = a_mag * beta * std::pow(t0, beta - 1.0);
    return {PhasePoint(x, -v), PhasePoint(-x, v)};
}

TransportEval deterministic_transport_eval(const InitialDatum& f0, const DriftField& F, double t,
                                           const PhasePoint& z, double dt, double flag_radius) {
    const int d = z.dim();
    const long long steps = std::llround(t / dt);
    Vec state = z.flat();
    std::vector<double> work(2 * 5 * d + d);

    TransportEval out;
    for (long long k = 0; k < steps; ++k) {
        rk4_step(F, state.data(), dt, -1.0, d, work);
        if (flat_norm(state.data(), 2 * d) < flag_radius) out.near_origin_flag = true;
    }
    out.foot = PhasePoint::from_flat(state);
    out.value = f0(out.foot);
    return out;
}

void write_trajectory_csv(const std::string& path, const std::vector<OdeTrajectory>& trajs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
    if (trajs.empty()) return;
    const int d = trajs.front().states.front().dim();
    out << "t";
    for (int i = 1; i <= d; ++i) out << ",x" << i;
    for (int i = 1; i <= d; ++i) out << ",v" << i;
    out << ",branch_id\n";
    out.precision(17);
    for (std::size_t b = 0; b < trajs.size(); ++b) {
        const auto& traj = trajs[b];
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            out << traj.times[k];
            for (int i = 0; i < d; ++i) out << ',' << traj.states[k].x[i];
            for (int i = 0; i < d; ++i) out << ',' << traj.states[k].v[i];
            out << ',' << b << '\n';
        }
    }
}

}  // namespace klab
