#include "klab/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "klab/fft_util.hpp"
#include "klab/ou.hpp"

namespace klab {

GirsanovWeight girsanov_weight(const DriftField& F, const NoisePath& path, const PhasePoint& z,
                               double dt, double T) {
    const int d = z.dim();
    const int group = static_cast<int>(std::llround(dt / path.dt));
    if (group < 1 || std::abs(dt / path.dt - group) > 1e-9)
        throw std::invalid_argument("girsanov_weight: dt must be a multiple of the path step");
    int nsteps = path.steps() / group;
    if (T >= 0.0) nsteps = std::min<int>(nsteps, static_cast<int>(std::llround(T / dt)));

    Vec state = z.flat();
    Vec force(d), dW(d);
    GirsanovWeight w;
    for (int k = 0; k < nsteps; ++k) {
        for (int i = 0; i < d; ++i) dW[i] = 0.0;
        for (int j = 0; j < group; ++j) {
            const double* inc = path.increment(k * group + j);
            for (int i = 0; i < d; ++i) dW[i] += inc[i];
        }
        // Left-point evaluation along the OU base dynamics.
        F.eval(state.data(), force.data());
        for (int i = 0; i < d; ++i) {
            w.stochastic_integral += force[i] * dW[i];
            w.quadratic_term += 0.5 * force[i] * force[i] * dt;
        }
        for (int i = 0; i < d; ++i) state[i] += dt * state[d + i] + 0.5 * dt * dW[i];
        for (int i = 0; i < d; ++i) state[d + i] += dW[i];
    }
    w.log_phi = w.stochastic_integral - w.quadratic_term;
    w.phi = std::exp(w.log_phi);
    return w;
}

ReweightedComparison weak_expectation_reweighted(const Observable& h, const DriftField& F, double T,
                                                 int n_paths, const PhasePoint& z, double dt,
                                                 std::uint64_t seed) {
    const int d = z.dim();
    std::vector<double> direct(n_paths), weighted(n_paths), weights(n_paths);
    const DriftField zero = DriftField::zero(d);

    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t i) {
        // Independent streams for the two estimators.
        const NoisePath path_a = brownian_path(derive_seed(seed, 2 * i), T, dt, d);
        SdeOptions opt;
        opt.dt = dt;
        opt.scheme = Scheme::EulerMaruyama;
        Trajectory traj = integrate_sde(F, z, path_a, opt);
        direct[i] = h(traj.back_state());

        const NoisePath path_b = brownian_path(derive_seed(seed, 2 * i + 1), T, dt, d);
        opt.scheme = Scheme::OuSplitting;
        Trajectory base = integrate_sde(zero, z, path_b, opt);
        const GirsanovWeight w = girsanov_weight(F, path_b, z, dt, T);
        weights[i] = w.phi;
        weighted[i] = h(base.back_state()) * w.phi;
    });

    ReweightedComparison out;
    out.direct = mc_estimate(direct);
    out.reweighted = mc_estimate(weighted);
    double sw = 0.0, sw2 = 0.0;
    for (double w : weights) {
        sw += w;
        sw2 += w * w;
    }
    out.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
    out.ess_flag = out.ess < n_paths / 10.0;
    return out;
}

KhasminskiiReport khasminskii_exp_moment(const PhaseObservable& f, double T, int n_paths,
                                         const std::vector<PhasePoint>& starters, double dt,
                                         std::uint64_t seed) {
    KhasminskiiReport report;
    report.per_starter.resize(starters.size());
    std::vector<double> alphas(starters.size());
    const int d = starters.empty() ? 1 : starters.front().dim();
    const DriftField zero = DriftField::zero(d);

    parallel_for(starters.size(), [&](std::size_t si) {
        std::vector<double> log_integrals(n_paths);
        std::vector<double> integrals(n_paths);
        for (int pi = 0; pi < n_paths; ++pi) {
            const NoisePath path =
                brownian_path(derive_seed(seed, si * static_cast<std::size_t>(n_paths) + pi), T, dt, d);
            SdeOptions opt;
            opt.dt = dt;
            opt.scheme = Scheme::OuSplitting;
            opt.thin = 1;
            Trajectory traj = integrate_sde(zero, starters[si], path, opt);
            double acc = 0.0;
            for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) acc += f(traj.states[k]) * dt;
            log_integrals[pi] = acc;  // exponent of exp(int f)
            integrals[pi] = acc;
        }
        report.per_starter[si] = std::exp(log_mean_exp(log_integrals));
        alphas[si] = mean(integrals);
    });
    report.sup = *std::max_element(report.per_starter.begin(), report.per_starter.end());
    report.alpha = *std::max_element(alphas.begin(), alphas.end());
    return report;
}

std::vector<double> at_process(const ZvonkinCorrector& U, const Trajectory& a, const Trajectory& b) {
    if (a.times.size() != b.times.size())
        throw std::invalid_argument("at_process: trajectories must share output times");
    const int d = U.d;
    std::vector<double> at(a.times.size(), 0.0);
    Vec dua(static_cast<std::size_t>(d) * 2 * d), dub(dua.size());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < a.times.size(); ++k) {
        const double dt = a.times[k + 1] - a.times[k];
        const Vec za = a.states[k].flat();
        const Vec zb = b.states[k].flat();
        const double dist = flat_distance(za.data(), zb.data(), 2 * d);
        if (dist > 1e-14 && !U.empty()) {
            U.eval_du(za.data(), dua.data());
            U.eval_du(zb.data(), dub.data());
            // |[DU(Z)-DU(Y)]R|_HS^2 keeps only the v-columns of the u~ rows.
            double hs = 0.0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    const double diff = dua[i * 2 * d + d + j] - dub[i * 2 * d + d + j];
                    hs += diff * diff;
                }
            acc += hs / (dist * dist) * dt;
        }
        at[k + 1] = acc;
    }
    return at;
}

HolderRegression holder_exponent_regression(const DriftField& F, double a, double T,
                                            const std::vector<double>& separations, int n_paths,
                                            const PhasePoint& center, const Vec& direction,
                                            double dt, std::uint64_t seed) {
    const int d = center.dim();
    HolderRegression reg;
    reg.separations = separations;
    reg.moments.assign(separations.size(), 0.0);

    double dn = 0.0;
    for (double c : direction) dn += c * c;
    dn = std::sqrt(dn);

    for (std::size_t si = 0; si < separations.size(); ++si) {
        const double sep = separations[si];
        Vec zp = center.flat(), zm = center.flat();
        for (int i = 0; i < 2 * d; ++i) {
            const double off = 0.5 * sep * direction[i] / dn;
            zp[i] += off;
            zm[i] -= off;
        }
        std::vector<double> samples(n_paths);
        parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t pi) {
            const NoisePath path = brownian_path(derive_seed(seed, pi), T, dt, d);
            SdeOptions opt;
            opt.dt = dt;
            Trajectory ta = integrate_sde(F, PhasePoint::from_flat(zp), path, opt);
            Trajectory tb = integrate_sde(F, PhasePoint::from_flat(zm), path, opt);
            samples[pi] = std::pow(phase_distance(ta.back_state(), tb.back_state()), a);
        });
        reg.moments[si] = mean(samples);
    }

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < separations.size(); ++i) {
        lx.push_back(std::log(separations[i]));
        ly.push_back(std::log(reg.moments[i]));
    }
    const LinearFit fit = linear_fit(lx, ly);
    reg.slope = fit.slope;
    reg.slope_se = fit.slope_se;
    return reg;
}

InjectivityReport injectivity_margin(const DriftField& F,
                                     const std::vector<std::pair<PhasePoint, PhasePoint>>& pairs,
                                     double a, double T, int n_paths_per_pair, double dt,
                                     std::uint64_t seed, double collapse_eps) {
    if (a >= 0.0) throw std::invalid_argument("injectivity_margin: a must be negative");
    InjectivityReport report;
    report.pairs = static_cast<int>(pairs.size());
    std::vector<double> samples(pairs.size() * static_cast<std::size_t>(n_paths_per_pair), 0.0);
    std::vector<int> collapses(pairs.size(), 0);
    const int d = pairs.empty() ? 1 : pairs.front().first.dim();

    parallel_for(pairs.size(), [&](std::size_t qi) {
        for (int pi = 0; pi < n_paths_per_pair; ++pi) {
            const NoisePath path = brownian_path(
                derive_seed(seed, qi * static_cast<std::size_t>(n_paths_per_pair) + pi), T, dt, d);
            SdeOptions opt;
            opt.dt = dt;
            Trajectory ta = integrate_sde(F, pairs[qi].first, path, opt);
            Trajectory tb = integrate_sde(F, pairs[qi].second, path, opt);
            const double dist = phase_distance(ta.back_state(), tb.back_state());
            if (dist < collapse_eps) {
                ++collapses[qi];
                samples[qi * n_paths_per_pair + pi] = 0.0;  // excluded
            } else {
                samples[qi * n_paths_per_pair + pi] = std::pow(dist, a);
            }
        }
    });
    report.estimate = median_of_means(samples, 32);
    for (int c : collapses) report.collapse_events += c;
    return report;
}

CoverageReport surjectivity_coverage(const DriftField& F, const FlowMap& map, const NoisePath& path,
                                     const SdeOptions& opt, const Vec& box_lo, const Vec& box_hi,
                                     int probes_per_axis, double residual_tol) {
    CoverageReport report;
    if (probes_per_axis <= 0) {
        report.fraction = 1.0;  // vacuous coverage
        return report;
    }
    InverseFlowIndex index(map);
    SdeOptions run = opt;
    run.T = map.t;

    const int r = 2 * map.d;
    std::vector<int> counts(r, probes_per_axis);
    std::size_t total = 1;
    for (int c : counts) total *= static_cast<std::size_t>(c);
    report.probes = static_cast<int>(total);

    std::vector<int> covered(total, 0);
    parallel_for(total, [&](std::size_t flat) {
        Vec z(r);
        std::size_t rem = flat;
        for (int aix = r - 1; aix >= 0; --aix) {
            const int idx = static_cast<int>(rem % probes_per_axis);
            rem /= probes_per_axis;
            z[aix] = probes_per_axis == 1
                         ? box_lo[aix]
                         : box_lo[aix] + (box_hi[aix] - box_lo[aix]) * idx / (probes_per_axis - 1);
        }
        const PhasePoint query = PhasePoint::from_flat(z);
        PhasePoint foot;
        try {
            foot = index.query(query);
        } catch (const query_outside_image&) {
            return;
        }
        Trajectory fwd = integrate_sde(F, foot, path, run);
        if (phase_distance(fwd.back_state(), query) <= residual_tol) covered[flat] = 1;
    });
    for (int c : covered) report.covered += c;
    report.fraction = total == 0 ? 1.0 : static_cast<double>(report.covered) / total;
    return report;
}

DriftField mollify_drift(const DriftField& F, const GridFunction& proto, double h) {
    const int d = proto.rank() / 2;
    const int n = proto.n();
    auto comps = std::make_shared<std::vector<GridFunction>>();
    comps->reserve(d);
    std::vector<double> z(proto.rank());
    std::vector<double> Fz(d);
    for (int i = 0; i < d; ++i) {
        GridFunction gi = proto;
        for (std::size_t idx = 0; idx < gi.size(); ++idx) {
            gi.node_coords(idx, z);
            F.eval(z.data(), Fz.data());
            gi[idx] = Fz[i];
        }
        if (h > 0.0) {
            // Isotropic Gaussian blur of width h (spectral, periodic).
            std::vector<std::complex<double>> spec(gi.size());
            for (std::size_t k = 0; k < gi.size(); ++k) spec[k] = gi[k];
            fft_forward(gi.rank(), n, spec);
            std::vector<int> multi(gi.rank());
            for (std::size_t k = 0; k < spec.size(); ++k) {
                gi.unravel(k, multi);
                double xi2 = 0.0;
                for (int aix = 0; aix < gi.rank(); ++aix) {
                    const double xi = fft_freq(multi[aix], n, gi.half_width(aix));
                    xi2 += xi * xi;
                }
                spec[k] *= std::exp(-0.5 * h * h * xi2);
            }
            fft_inverse(gi.rank(), n, spec);
            for (std::size_t k = 0; k < gi.size(); ++k) gi[k] = spec[k].real();
        }
        comps->push_back(std::move(gi));
    }
    return DriftField::grid_sampled(comps, d);
}

MollifiedConvergence mollified_convergence(const DriftField& F, const std::vector<double>& widths,
                                           const std::vector<PhasePoint>& starters,
                                           const GridFunction& proto, double T, int n_paths,
                                           double dt, std::uint64_t seed, int snapshots) {
    MollifiedConvergence out;
    out.widths = widths;
    out.discrepancy.assign(widths.size(), 0.0);
    const int d = proto.rank() / 2;
    const int total_steps = static_cast<int>(std::llround(T / dt));
    const int thin = std::max(1, total_steps / snapshots);

    std::vector<DriftField> mollified;
    mollified.reserve(widths.size());
    for (double h : widths) mollified.push_back(mollify_drift(F, proto, h));

    // sup over starters and output times of the MC mean pathwise difference.
    std::vector<std::vector<double>> sums(widths.size());
    std::size_t n_snap = 0;
    for (int pi = 0; pi < n_paths; ++pi) {
        const NoisePath path = brownian_path(derive_seed(seed, pi), T, dt, d);
        SdeOptions opt;
        opt.dt = dt;
        opt.thin = thin;
        for (const auto& z0 : starters) {
            Trajectory ref = integrate_sde(F, z0, path, opt);
            n_snap = ref.states.size();
            for (std::size_t wi = 0; wi < widths.size(); ++wi) {
                Trajectory moll = integrate_sde(mollified[wi], z0, path, opt);
                auto& acc = sums[wi];
                if (acc.empty()) acc.assign(starters.size() * n_snap, 0.0);
                const std::size_t base = (&z0 - starters.data()) * n_snap;
                for (std::size_t k = 0; k < n_snap; ++k)
                    acc[base + k] += phase_distance(moll.states[k], ref.states[k]);
            }
        }
    }
    for (std::size_t wi = 0; wi < widths.size(); ++wi) {
        double sup = 0.0;
        for (double s : sums[wi]) sup = std::max(sup, s / n_paths);
        out.discrepancy[wi] = sup;
    }
    return out;
}

}  // namespace klab
