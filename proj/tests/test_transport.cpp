#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "klab/transport.hpp"

using namespace klab;

namespace {
const CutoffSpec kCut{2.0, 4.0};
const InitialField kSmooth = [](const PhasePoint& p) {
    return std::exp(-0.5 * (p.x[0] * p.x[0] + p.v[0] * p.v[0])) * (1.0 + 0.4 * p.x[0] - 0.2 * p.v[0]);
};
}  // namespace

TEST_CASE("spde_solve: free transport with zero noise is f0(x - tv, v)") {
    NoisePath path = brownian_path(3, 0.5, 1e-3, 1);
    for (auto& w : path.increments) w = 0.0;
    const GridFunction proto = GridFunction::uniform(2, 2.0, 40, Boundary::ZeroExtended);
    SpdeSolveConfig cfg;
    cfg.dt = 1e-3;
    cfg.starter_per_axis = 120;
    const TransportField tf = spde_solve(kSmooth, DriftField::zero(1), 0.5, proto, path, cfg);
    double e = 0.0;
    std::vector<double> z(2);
    for (std::size_t i = 0; i < tf.field.size(); ++i) {
        tf.field.node_coords(i, z);
        e = std::max(e, std::abs(tf.field[i] - kSmooth(PhasePoint(z[0] - 0.5 * z[1], z[1]))));
    }
    CHECK(e < 1e-6);
}

TEST_CASE("spde_solve with noise matches the closed-form linear inversion") {
    const double T = 0.5, dt = 1e-3;
    const NoisePath path = brownian_path(17, T, dt, 1);
    const GridFunction proto = GridFunction::uniform(2, 2.0, 40, Boundary::ZeroExtended);
    SpdeSolveConfig cfg;
    cfg.dt = dt;
    cfg.starter_per_axis = 160;
    const TransportField tf = spde_solve(kSmooth, DriftField::zero(1), T, proto, path, cfg);

    double w = 0.0, iw = 0.0;
    for (int k = 0; k < path.steps(); ++k) {
        iw += w * dt;
        w += path.increment(k)[0];
    }
    double e = 0.0;
    std::vector<double> z(2);
    for (std::size_t i = 0; i < tf.field.size(); ++i) {
        tf.field.node_coords(i, z);
        const double v0 = z[1] - w;
        const double x0 = z[0] - T * v0 - iw;
        e = std::max(e, std::abs(tf.field[i] - kSmooth(PhasePoint(x0, v0))));
    }
    const double spacing = proto.step(0);
    CHECK(e < 10.0 * spacing);
}

TEST_CASE("representation consistency: t = 0 returns f0 and constants are preserved") {
    NoisePath path = brownian_path(5, 0.1, 1e-3, 1);
    const GridFunction proto = GridFunction::uniform(2, 2.0, 24, Boundary::ZeroExtended);
    SpdeSolveConfig cfg;
    cfg.dt = 1e-3;
    cfg.starter_per_axis = 80;
    const TransportField at0 = spde_solve(kSmooth, DriftField::zero(1), 0.0, proto, path, cfg);
    double e = 0.0;
    std::vector<double> z(2);
    for (std::size_t i = 0; i < at0.field.size(); ++i) {
        at0.field.node_coords(i, z);
        e = std::max(e, std::abs(at0.field[i] - kSmooth(PhasePoint(z[0], z[1]))));
    }
    CHECK(e < 1e-9);

    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const InitialField one = [](const PhasePoint&) { return 1.0; };
    const TransportField tf = spde_solve(one, F, 0.1, proto, path, cfg);
    for (std::size_t i = 0; i < tf.field.size(); ++i) CHECK(tf.field[i] == 1.0);
}

TEST_CASE("range preservation and the pathwise transport identity") {
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const double T = 0.3, dt = 1e-3;
    const NoisePath path = brownian_path(29, T, dt, 1);
    const GridFunction proto = GridFunction::uniform(2, 2.0, 64, Boundary::ZeroExtended);
    SpdeSolveConfig cfg;
    cfg.dt = dt;
    cfg.starter_per_axis = 220;
    const TransportField tf = spde_solve(kSmooth, F, T, proto, path, cfg);

    // min/max of f0 over a box comfortably containing all preimages
    double f0_min = 1e300, f0_max = -1e300;
    for (double x = -8.0; x <= 8.0; x += 0.005)
        for (double v = -8.0; v <= 8.0; v += 0.005) {
            const double val = kSmooth(PhasePoint(x, v));
            f0_min = std::min(f0_min, val);
            f0_max = std::max(f0_max, val);
        }
    for (std::size_t i = 0; i < tf.field.size(); ++i) {
        CHECK(tf.field[i] >= f0_min - 1e-9);
        CHECK(tf.field[i] <= f0_max + 1e-9);
    }

    // forward-integrate starters and read the solved field at their images
    SdeOptions opt;
    opt.dt = dt;
    for (const PhasePoint z0 : {PhasePoint(0.1, 0.2), PhasePoint(-0.4, 0.0)}) {
        const Trajectory traj = integrate_sde(F, z0, path, opt);
        const PhasePoint zt = traj.back_state();
        if (std::abs(zt.x[0]) < 1.8 && std::abs(zt.v[0]) < 1.8) {
            const Vec ztf = zt.flat();
            CHECK(std::abs(tf.field.interpolate(ztf.data()) - kSmooth(z0)) < 5e-3);
        }
    }
}

TEST_CASE("weak form residual: trivial zeros") {
    const GridFunction proto = GridFunction::uniform(2, 4.0, 32, Boundary::ZeroExtended);
    const TestFunction phi = test_function_catalog(1, 2.0)[0];

    // t = 0: the identity collapses to int f0 phi = int f0 phi
    const WeakFormResult at0 =
        weak_form_residual(kSmooth, DriftField::zero(1), 0.0, phi, 2, 1e-2, proto, 3);
    CHECK(at0.rms < 1e-14);

    // test function supported away from the data: every term vanishes
    TestFunction far = phi;
    far.center = {3.5, 3.5};
    far.scale = {0.3, 0.3};
    const InitialField bump_origin = [](const PhasePoint& p) {
        const double r2 = p.x[0] * p.x[0] + p.v[0] * p.v[0];
        return r2 < 0.25 ? std::exp(1.0 - 1.0 / (1.0 - 4.0 * r2)) : 0.0;
    };
    const WeakFormResult off =
        weak_form_residual(bump_origin, DriftField::zero(1), 0.3, far, 2, 1e-2, proto, 4);
    CHECK(off.rms < 1e-14);
}

TEST_CASE("weak form residual decreases as dt halves (common noise)") {
    const GridFunction proto = GridFunction::uniform(2, 4.0, 48, Boundary::ZeroExtended);
    const TestFunction phi = test_function_catalog(1, 2.0)[0];
    const double dt_base = 2.5e-3;
    std::vector<double> rms;
    for (double dt : {1e-2, 5e-3, 2.5e-3})
        rms.push_back(
            weak_form_residual(kSmooth, DriftField::zero(1), 0.5, phi, 8, dt, proto, 7, dt_base)
                .rms);
    CHECK(rms[1] < rms[0]);
    CHECK(rms[2] < rms[1]);
    const double slope = std::log(rms[0] / rms[2]) / std::log(4.0);
    CHECK(slope >= 0.4);
}

TEST_CASE("sobolev diagnostic equals the analytic norm for sheared smooth data") {
    // free transport of smooth f0: f(t) = f0(x - tv, v)
    const double t = 0.4;
    GridFunction field = GridFunction::uniform(2, 2.0, 96, Boundary::ZeroExtended);
    field.fill([t](const std::vector<double>& z) {
        const PhasePoint p(z[0] - t * z[1], z[1]);
        return std::exp(-(p.x[0] * p.x[0] + p.v[0] * p.v[0]));
    });
    const Vec lo = {-1.0, -1.0}, hi = {1.0, 1.0};
    const double numeric = sobolev_subbox_norm(field, 4.0, lo, hi);

    // oracle on the same lattice from the chain rule
    GridFunction f2 = field, gx = field, gv = field;
    f2.fill([t](const std::vector<double>& z) {
        const double a = z[0] - t * z[1], b = z[1];
        return std::exp(-(a * a + b * b));
    });
    double acc = 0.0;
    std::vector<double> z(2);
    for (std::size_t i = 0; i < f2.size(); ++i) {
        f2.node_coords(i, z);
        const double a = z[0] - t * z[1], b = z[1];
        const double val = std::exp(-(a * a + b * b));
        const double fa = -2.0 * a * val;                 // d/da
        const double fx = fa;                             // df/dx
        const double fv = -t * fa - 2.0 * b * val;        // df/dv
        bool inside = z[0] >= -1 && z[0] <= 1 && z[1] >= -1 && z[1] <= 1;
        if (!inside) continue;
        acc += std::pow(std::abs(val), 4.0) + std::pow(std::hypot(fx, fv), 4.0);
    }
    const double oracle = std::pow(acc * f2.cell_volume(), 0.25);
    CHECK(numeric == doctest::Approx(oracle).epsilon(5e-3));
}

TEST_CASE("div_v of the counterexample drift vanishes inside the plateau") {
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const GridFunction inner = GridFunction::uniform(2, 1.0, 16, Boundary::Periodic);
    CHECK(div_v_sup_norm(F, inner) < 1e-9);
    // the cutoff shell contributes
    const GridFunction full = GridFunction::uniform(2, 8.0, 64, Boundary::Periodic);
    CHECK(div_v_sup_norm(F, full) > 0.0);
}

TEST_CASE("energy check: zero datum stays identically zero") {
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const GridFunction proto = GridFunction::uniform(2, 4.0, 32, Boundary::Periodic);
    const EnergyReport rep =
        energy_uniqueness_check(F, 0.0, {0.0, 0.15, 0.3}, 2, proto, 1e-3, 5);
    for (double g : rep.g_hat) CHECK(g <= 1e-20);
}

TEST_CASE("energy check: free flow conserves the white-noise energy in expectation") {
    const GridFunction proto = GridFunction::uniform(2, 4.0, 48, Boundary::Periodic);
    const EnergyReport rep =
        energy_uniqueness_check(DriftField::zero(1), 1e-3, {0.0, 0.2}, 12, proto, 2e-3, 6);
    CHECK(rep.div_v_sup < 1e-12);
    CHECK(rep.g_hat[1] == doctest::Approx(rep.g_hat[0]).epsilon(0.06));
}

TEST_CASE("energy check: Gronwall envelope holds for the cutoff drift") {
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const GridFunction proto = GridFunction::uniform(2, 4.0, 48, Boundary::Periodic);
    const EnergyReport rep =
        energy_uniqueness_check(F, 1e-3, {0.0, 0.15, 0.3}, 12, proto, 2e-3, 7);
    CHECK(rep.worst_ratio <= 1.1);
}
