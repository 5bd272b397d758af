#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "klab/diagnostics.hpp"
#include "klab/resolvent.hpp"

using namespace klab;

namespace {
const CutoffSpec kCut{2.0, 4.0};
const DriftField kCounter = DriftField::counterexample(1, 0.6, 1, kCut);
}  // namespace

TEST_CASE("girsanov weight: zero drift and constant drift closed form") {
    const NoisePath path = brownian_path(9, 1.0, 1e-3, 1);
    const GirsanovWeight w0 = girsanov_weight(DriftField::zero(1), path, PhasePoint(0.0, 0.0), 1e-3);
    CHECK(w0.phi == 1.0);
    CHECK(w0.log_phi == 0.0);

    const double c = 0.8;
    const GirsanovWeight wc =
        girsanov_weight(DriftField::constant({c}), path, PhasePoint(0.0, 0.0), 1e-3);
    const double wt = path.total()[0];
    CHECK(wc.log_phi == doctest::Approx(c * wt - 0.5 * c * c * 1.0).epsilon(1e-12));
    CHECK(wc.phi == doctest::Approx(std::exp(wc.log_phi)).epsilon(1e-15));
}

TEST_CASE("girsanov ensemble mean is one within 3 SE") {
    const int n = 20000;
    std::vector<double> phis(n);
    parallel_for(n, [&](std::size_t i) {
        const NoisePath path = brownian_path(derive_seed(1234, i), 1.0, 1e-3, 1);
        phis[i] = girsanov_weight(kCounter, path, PhasePoint(0.0, 0.5), 1e-3).phi;
    });
    const McEstimate m = mc_estimate(phis);
    CHECK(std::abs(m.value - 1.0) <= m.band(3.0));
}

TEST_CASE("reweighted weak expectations agree with direct simulation") {
    // F = c, h(z) = v: closed-form drifted mean v0 + cT
    const DriftField Fc = DriftField::constant({0.6});
    const Observable h = [](const PhasePoint& p) { return p.v[0]; };
    const ReweightedComparison cmp =
        weak_expectation_reweighted(h, Fc, 1.0, 4000, PhasePoint(0.0, 0.2), 1e-3, 88);
    CHECK(std::abs(cmp.reweighted.value - (0.2 + 0.6)) <= cmp.reweighted.band(4.0));
    CHECK(std::abs(cmp.direct.value - cmp.reweighted.value) <=
          2.0 * (cmp.direct.band(3.0) + cmp.reweighted.band(3.0)));
    CHECK_FALSE(cmp.ess_flag);
}

TEST_CASE("khasminskii exponential moment: constants and stability") {
    // f = c: E exp(int c ds) = e^{cT} exactly
    const double c = 0.7, T = 1.0;
    const KhasminskiiReport rep = khasminskii_exp_moment(
        [c](const PhasePoint&) { return c; }, T, 200, {PhasePoint(0.0, 0.0)}, 1e-2, 5);
    CHECK(rep.sup == doctest::Approx(std::exp(c * T)).epsilon(1e-9));
    CHECK(rep.alpha == doctest::Approx(c * T).epsilon(1e-9));

    // f = |F|^2 for F = 0 gives exactly 1
    const KhasminskiiReport zero = khasminskii_exp_moment(
        [](const PhasePoint&) { return 0.0; }, T, 50, {PhasePoint(0.0, 0.0)}, 1e-2, 6);
    CHECK(zero.sup == doctest::Approx(1.0).epsilon(1e-12));

    // f = |F|^2 for the counterexample: finite and stable as paths double
    auto f2 = [&](const PhasePoint& p) {
        const Vec F = kCounter.eval(p);
        return F[0] * F[0];
    };
    std::vector<PhasePoint> starters = {PhasePoint(0.0, 0.0), PhasePoint(1.0, 1.0),
                                        PhasePoint(-2.0, 0.5)};
    const KhasminskiiReport a = khasminskii_exp_moment(f2, 1.0, 1000, starters, 2e-3, 7);
    const KhasminskiiReport b = khasminskii_exp_moment(f2, 1.0, 2000, starters, 2e-3, 8);
    CHECK(std::isfinite(a.sup));
    CHECK(std::abs(b.sup - a.sup) / a.sup < 0.10);
}

TEST_CASE("occupation estimator is exactly linear in the integrand scale") {
    auto f = [](const PhasePoint& p) { return std::abs(p.x[0]); };
    auto f2 = [](const PhasePoint& p) { return 2.0 * std::abs(p.x[0]); };
    std::vector<PhasePoint> starters = {PhasePoint(0.2, -0.1)};
    const KhasminskiiReport a = khasminskii_exp_moment(f, 0.5, 300, starters, 2e-3, 9);
    const KhasminskiiReport b = khasminskii_exp_moment(f2, 0.5, 300, starters, 2e-3, 9);
    CHECK(b.alpha == doctest::Approx(2.0 * a.alpha).epsilon(1e-12));
}

TEST_CASE("A_t process: indicator zero cases and monotonicity") {
    const GridFunction proto = GridFunction::uniform(2, 8.0, 64, Boundary::Periodic);
    const ZvonkinCorrector U = build_zvonkin_U(kCounter, proto, {40.0, 80.0, 160.0});

    const NoisePath path = brownian_path(15, 0.5, 1e-3, 1);
    SdeOptions opt;
    opt.dt = 1e-3;
    const Trajectory a = integrate_sde(kCounter, PhasePoint(0.1, 0.0), path, opt);
    const Trajectory a2 = integrate_sde(kCounter, PhasePoint(0.1, 0.0), path, opt);
    const Trajectory b = integrate_sde(kCounter, PhasePoint(-0.1, 0.0), path, opt);

    // identical trajectories: indicator kills the integrand
    const std::vector<double> same = at_process(U, a, a2);
    CHECK(same.back() == 0.0);

    // zero corrector: A_t == 0
    const std::vector<double> zero = at_process(ZvonkinCorrector::identity(1), a, b);
    CHECK(zero.back() == 0.0);

    // general case: nonnegative and nondecreasing
    const std::vector<double> at = at_process(U, a, b);
    for (std::size_t k = 1; k < at.size(); ++k) CHECK(at[k] >= at[k - 1]);
    CHECK(at.back() >= 0.0);
}

TEST_CASE("E[exp A_T] finite and stable under path-count doubling") {
    const GridFunction proto = GridFunction::uniform(2, 8.0, 64, Boundary::Periodic);
    const ZvonkinCorrector U = build_zvonkin_U(kCounter, proto, {40.0, 80.0, 160.0});
    auto estimate = [&](int n_pairs, std::uint64_t seed) {
        std::vector<double> ats(n_pairs);
        parallel_for(n_pairs, [&](std::size_t i) {
            const NoisePath path = brownian_path(derive_seed(seed, i), 0.5, 2e-3, 1);
            SdeOptions opt;
            opt.dt = 2e-3;
            const Trajectory a = integrate_sde(kCounter, PhasePoint(0.05, 0.0), path, opt);
            const Trajectory b = integrate_sde(kCounter, PhasePoint(-0.05, 0.0), path, opt);
            ats[i] = at_process(U, a, b).back();
        });
        double acc = 0.0;
        for (double v : ats) acc += std::exp(v);
        return acc / n_pairs;
    };
    const double e1 = estimate(500, 77);
    const double e2 = estimate(1000, 78);
    CHECK(std::isfinite(e1));
    CHECK(std::isfinite(e2));
    CHECK(std::abs(e2 - e1) / e1 < 0.2);
}

TEST_CASE("holder regression: exact slope for the linear flow") {
    std::vector<double> seps = {1e-3, 1e-2, 1e-1};
    const HolderRegression reg = holder_exponent_regression(
        DriftField::zero(1), 2.0, 0.5, seps, 4, PhasePoint(0.0, 0.0), {1.0, 0.0}, 1e-2, 3);
    CHECK(reg.slope == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("deterministic contrast: the coalescing pair ratio collapses at t0") {
    const double t0 = 0.3;
    NoisePath path = brownian_path(1, t0, 1e-5, 1);
    for (auto& w : path.increments) w = 0.0;
    SdeOptions opt;
    opt.dt = 1e-5;
    // straddling pair from the closed form
    const auto [beta, a] = std::make_pair(5.0, std::pow(0.05, 2.5));
    const PhasePoint p(a * std::pow(t0, beta), -a * beta * std::pow(t0, beta - 1.0));
    const PhasePoint m(-p.x[0], -p.v[0]);
    const Trajectory ta = integrate_sde(kCounter, p, path, opt);
    const Trajectory tb = integrate_sde(kCounter, m, path, opt);
    const double start_sep = phase_distance(p, m);
    const double end_sep = phase_distance(ta.back_state(), tb.back_state());
    // Euler-Maruyama at dt=1e-5 resolves the collapse to O(dt); the sharper
    // absolute threshold lives in the RK4 acceptance check.
    CHECK(end_sep < 0.05 * start_sep);
}

TEST_CASE("injectivity margin: exact value for the linear flow and scaling") {
    // F = 0, a = -2: deterministic difference e^{TA}(z - y)
    const double T = 0.5;
    const PhasePoint z(0.1, 0.05), y(-0.1, -0.05);
    const InjectivityReport rep =
        injectivity_margin(DriftField::zero(1), {{z, y}}, -2.0, T, 64, 1e-2, 11);
    const double dx = (z.x[0] - y.x[0]) + T * (z.v[0] - y.v[0]);
    const double dv = z.v[0] - y.v[0];
    CHECK(rep.estimate == doctest::Approx(1.0 / (dx * dx + dv * dv)).epsilon(1e-10));
    CHECK(rep.collapse_events == 0);

    // halving |z - y| scales the estimate by about 2^{|a|}
    const PhasePoint z2(0.05, 0.025), y2(-0.05, -0.025);
    const InjectivityReport rep2 =
        injectivity_margin(DriftField::zero(1), {{z2, y2}}, -2.0, T, 64, 1e-2, 11);
    CHECK(rep2.estimate == doctest::Approx(4.0 * rep.estimate).epsilon(1e-9));
}

TEST_CASE("surjectivity coverage is full for the linear flow") {
    const double T = 0.4, dt = 1e-3;
    const NoisePath path = brownian_path(21, T, dt, 1);
    StarterLattice lat;
    lat.d = 1;
    lat.lo = {-4.0, -4.0};
    lat.hi = {4.0, 4.0};
    lat.counts = {61, 61};
    SdeOptions opt;
    opt.dt = dt;
    const FlowMap map = flow_ensemble(DriftField::zero(1), lat, path, opt, T);

    // image of the shrunken box under e^{TA} plus the noise offset
    double w = 0.0, iw = 0.0;
    for (int k = 0; k < path.steps(); ++k) {
        iw += w * dt;
        w += path.increment(k)[0];
    }
    const Vec lo = {-1.0 + iw, -1.0 + w};
    const Vec hi = {1.0 + iw, 1.0 + w};
    const CoverageReport rep =
        surjectivity_coverage(DriftField::zero(1), map, path, opt, lo, hi, 7, 10.0 * 8.0 / 60.0);
    CHECK(rep.fraction == 1.0);

    // empty probe lattice: vacuous coverage
    const CoverageReport vac =
        surjectivity_coverage(DriftField::zero(1), map, path, opt, lo, hi, 0, 1.0);
    CHECK(vac.fraction == 1.0);
}

TEST_CASE("mollified flows: fixed width is constant, smooth drift error is quadratic") {
    const GridFunction proto = GridFunction::uniform(2, 8.0, 128, Boundary::Periodic);
    // fixed width repeated: constant sequence
    const DriftField F =
        DriftField::product(1, Profile1D{Profile1D::Kind::Gaussian, 2.0, 0.0},
                            Profile1D{Profile1D::Kind::Gaussian, 1.5, 0.0});
    std::vector<PhasePoint> starters = {PhasePoint(0.3, -0.2)};
    const MollifiedConvergence fixed = mollified_convergence(
        F, {0.25, 0.25, 0.25}, starters, proto, 0.25, 16, 2e-3, 91);
    CHECK(fixed.discrepancy[0] == doctest::Approx(fixed.discrepancy[1]).epsilon(1e-12));
    CHECK(fixed.discrepancy[1] == doctest::Approx(fixed.discrepancy[2]).epsilon(1e-12));

    // smooth drift: discrepancy shrinks roughly like h^2
    const MollifiedConvergence smooth = mollified_convergence(
        F, {0.4, 0.2, 0.1}, starters, proto, 0.25, 16, 2e-3, 92);
    CHECK(smooth.discrepancy[1] < smooth.discrepancy[0]);
    CHECK(smooth.discrepancy[2] < smooth.discrepancy[1]);
    const double rate = std::log(smooth.discrepancy[0] / smooth.discrepancy[2]) / std::log(4.0);
    CHECK(rate > 1.2);
}

TEST_CASE("mollified counterexample flows converge monotonically") {
    const GridFunction proto = GridFunction::uniform(2, 8.0, 256, Boundary::Periodic);
    std::vector<double> widths;
    for (int n = 2; n <= 5; ++n) widths.push_back(std::pow(2.0, -n));
    std::vector<PhasePoint> starters = {PhasePoint(0.0, 0.0), PhasePoint(0.2, -0.3)};
    const MollifiedConvergence mc =
        mollified_convergence(kCounter, widths, starters, proto, 0.4, 48, 1e-3, 93);
    for (std::size_t i = 1; i < mc.discrepancy.size(); ++i)
        CHECK(mc.discrepancy[i] <= mc.discrepancy[i - 1] * 1.1);
    CHECK(mc.discrepancy.back() < mc.discrepancy.front());
}

TEST_CASE("difference-quotient moments uniformly bounded across the mollifier sweep") {
    const GridFunction proto = GridFunction::uniform(2, 8.0, 128, Boundary::Periodic);
    const double T = 0.4, dt = 2e-3;
    double worst = 0.0;
    for (double h : {0.25, 0.125, 0.0625}) {
        const DriftField Fh = mollify_drift(kCounter, proto, h);
        std::vector<double> sq(64);
        parallel_for(sq.size(), [&](std::size_t i) {
            const NoisePath path = brownian_path(derive_seed(55, i), T, dt, 1);
            SdeOptions opt;
            opt.dt = dt;
            const Vec theta =
                difference_quotient(Fh, PhasePoint(0.0, 0.0), 1e-3, 0, path, opt, T);
            sq[i] = theta[0] * theta[0] + theta[1] * theta[1];
        });
        worst = std::max(worst, mean(sq));
    }
    CHECK(worst < 100.0);
}
