#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "klab/characteristics.hpp"
#include "klab/stats.hpp"

using namespace klab;

namespace {
const CutoffSpec kCut{2.0, 4.0};
}

TEST_CASE("branch_params closed forms") {
    {
        // alpha -> 1/2: beta = 4, |A| = (1/12)^2
        const auto [beta, a] = branch_params(0.5 + 1e-12);
        CHECK(beta == doctest::Approx(4.0).epsilon(1e-9));
        CHECK(a == doctest::Approx(1.0 / 144.0).epsilon(1e-6));
    }
    {
        const auto [beta, a] = branch_params(0.6);
        CHECK(beta == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(a == doctest::Approx(std::pow(0.05, 2.5)).epsilon(1e-12));
        CHECK(a == doctest::Approx(5.590e-4).epsilon(1e-3));
    }
    CHECK_THROWS(branch_params(0.4));
    CHECK_THROWS(branch_params(1.0));
    CHECK_THROWS(branch_params(1.2));
}

TEST_CASE("branch defining relations hold to 1e-12") {
    for (double alpha : {0.55, 0.6, 0.7, 0.8, 0.9}) {
        const auto [beta, a] = branch_params(alpha);
        CHECK(alpha * beta == doctest::Approx(beta - 2.0).epsilon(1e-12));
        CHECK(a * beta * (beta - 1.0) == doctest::Approx(std::pow(a, alpha)).epsilon(1e-12));
    }
}

TEST_CASE("branch_solution onset and symmetry") {
    const BranchSolution plus = BranchSolution::make(0.6, 1, 0.2);
    const PhasePoint at_onset = branch_solution(plus, 0.2);
    CHECK(at_onset.x[0] == 0.0);
    CHECK(at_onset.v[0] == 0.0);

    const BranchSolution minus = BranchSolution::make(0.6, -1, 0.2);
    const PhasePoint p = branch_solution(plus, 0.7);
    const PhasePoint m = branch_solution(minus, 0.7);
    CHECK(p.x[0] == doctest::Approx(-m.x[0]).epsilon(1e-14));
    CHECK(p.v[0] == doctest::Approx(-m.v[0]).epsilon(1e-14));
}

TEST_CASE("branch ODE residual vanishes inside the validity window") {
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const BranchSolution b = BranchSolution::make(0.6, 1);
    const double t_valid = branch_validity_window(b, kCut);
    CHECK(t_valid > 1.0);
    double worst = 0.0;
    for (int k = 1; k <= 100; ++k)
        worst = std::max(worst, branch_ode_residual(b, F, t_valid * k / 100.0));
    CHECK(worst < 1e-9);
}

TEST_CASE("RK4: free transport and constant force") {
    const OdeTrajectory free = integrate_ode(DriftField::zero(1), PhasePoint(0.0, 1.0), 1.0, 1e-3);
    CHECK(std::abs(free.back_state().x[0] - 1.0) < 1e-12);
    CHECK(std::abs(free.back_state().v[0] - 1.0) < 1e-12);

    const double c = 0.75, T = 2.0;
    const OdeTrajectory forced =
        integrate_ode(DriftField::constant({c}), PhasePoint(0.25, -0.5), T, 1e-3);
    CHECK(std::abs(forced.back_state().v[0] - (-0.5 + c * T)) < 1e-10);
    CHECK(std::abs(forced.back_state().x[0] - (0.25 - 0.5 * T + 0.5 * c * T * T)) < 1e-10);
}

TEST_CASE("RK4 is 4th order on a smooth nonlinear drift") {
    // product drift with smooth profiles keeps F Lipschitz
    const DriftField F =
        DriftField::product(1, Profile1D{Profile1D::Kind::Gaussian, 1.0, 0.0},
                            Profile1D{Profile1D::Kind::Gaussian, 2.0, 0.0});
    const PhasePoint z0(0.3, 0.4);
    const PhasePoint ref = integrate_ode(F, z0, 1.0, 1e-5).back_state();
    std::vector<double> dts = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
    std::vector<double> lx, ly;
    for (double dt : dts) {
        const PhasePoint end = integrate_ode(F, z0, 1.0, dt).back_state();
        lx.push_back(std::log(dt));
        ly.push_back(std::log(phase_distance(end, ref)));
    }
    const double slope = linear_fit(lx, ly).slope;
    CHECK(slope > 3.8);
    CHECK(slope < 4.2);
}

TEST_CASE("two RK4 solutions from indistinguishable data diverge") {
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const BranchSolution b = BranchSolution::make(0.6, 1);
    const double eps = 1e-6;
    const PhasePoint seed = branch_solution(b, eps);

    const double T = 2.0;
    const OdeTrajectory rest = integrate_ode(F, PhasePoint(0.0, 0.0), T, 1e-4);
    // near the onset F has unbounded local Lipschitz constant ~ x^{alpha-1};
    // fixed-step RK4 turns that into an O(dt) onset-time shift, so tracking
    // to 1e-6 needs the finer step
    const OdeTrajectory tracked = integrate_ode(F, seed, T, 1e-6, 100000);

    // the rest solution stays put
    CHECK(rest.back_state().norm() == 0.0);
    // the seeded one tracks the closed-form branch
    const PhasePoint predicted = branch_solution(b, T + eps);
    CHECK(phase_distance(tracked.back_state(), predicted) < 1e-6);
    // macroscopically distinct solutions from indistinguishable data
    CHECK(phase_distance(rest.back_state(), tracked.back_state()) > 1e4 * seed.norm());
}

TEST_CASE("reached set endpoints and symmetry") {
    const double t = 1.5;
    const auto pts = reached_set(0.6, t, 33);
    REQUIRE(pts.size() == 66);
    // t0 = t endpoint is the origin
    CHECK(pts[32].z.norm() == 0.0);
    // t0 = 0 endpoint matches the closed form
    const auto [beta, a] = branch_params(0.6);
    CHECK(pts[0].z.x[0] == doctest::Approx(a * std::pow(t, beta)).epsilon(1e-12));
    CHECK(pts[0].z.v[0] == doctest::Approx(a * beta * std::pow(t, beta - 1.0)).epsilon(1e-12));
    // symmetric under z -> -z between the sign families
    for (int k = 0; k < 33; ++k) {
        CHECK(pts[k].z.x[0] == doctest::Approx(-pts[33 + k].z.x[0]).epsilon(1e-14));
        CHECK(pts[k].z.v[0] == doctest::Approx(-pts[33 + k].z.v[0]).epsilon(1e-14));
    }
    // every sampled point returns to (0,0) backward by RK4
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    for (int k = 0; k < 33; k += 8) {
        if (pts[k].z.norm() == 0.0) continue;
        const TransportEval ev = deterministic_transport_eval(
            [](const PhasePoint& p) { return p.norm(); }, F, t - pts[k].t0, pts[k].z, 1e-4);
        CHECK(ev.foot.norm() < 1e-4);
    }
}

TEST_CASE("coalescing pair reaches the origin at t0") {
    const double t0 = 0.3;
    const auto [p, m] = coalescing_pair(0.6, t0);
    CHECK(p.x[0] > 0.0);
    CHECK(p.v[0] < 0.0);
    CHECK(phase_distance(p, m) > 0.0);
    CHECK(p.x[0] == doctest::Approx(-m.x[0]).epsilon(1e-15));

    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const OdeTrajectory a = integrate_ode(F, p, t0, 1e-5);
    const OdeTrajectory b = integrate_ode(F, m, t0, 1e-5);
    CHECK(a.back_state().norm() < 1e-5);
    CHECK(b.back_state().norm() < 1e-5);
}

TEST_CASE("deterministic transport: free flow and constants") {
    const DriftField zero = DriftField::zero(1);
    const InitialDatum f0 = [](const PhasePoint& p) { return std::sin(p.x[0]) + 0.5 * p.v[0]; };
    const PhasePoint z(0.7, -0.3);
    const double t = 0.9;
    const TransportEval ev = deterministic_transport_eval(f0, zero, t, z, 1e-4);
    CHECK(ev.value ==
          doctest::Approx(std::sin(z.x[0] - t * z.v[0]) + 0.5 * z.v[0]).epsilon(1e-8));
    CHECK_FALSE(ev.near_origin_flag);

    const InitialDatum one = [](const PhasePoint&) { return 1.0; };
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    CHECK(deterministic_transport_eval(one, F, 0.5, PhasePoint(0.5, 0.5), 1e-4).value == 1.0);
}

TEST_CASE("transported value gap across the coalescence point") {
    const DriftField F = DriftField::counterexample(1, 0.6, 1, kCut);
    const double t0 = 0.3;
    const auto [p, m] = coalescing_pair(0.6, t0);
    const double scale = p.norm();
    const InitialDatum f0 = [&](const PhasePoint& q) {
        return std::tanh((q.x[0] * p.x[0] + q.v[0] * p.v[0]) / (scale * scale));
    };
    const double asym = std::abs(f0(p) - f0(m));
    CHECK(asym > 1.0);

    // probes along the incoming direction, shrinking radius
    const double ux = p.x[0] / scale, uv = p.v[0] / scale;
    double prev_gap = -1.0;
    for (double r : {1e-1, 1e-2, 1e-3}) {
        const TransportEval a =
            deterministic_transport_eval(f0, F, t0, PhasePoint(r * ux, r * uv), 1e-4);
        const TransportEval b =
            deterministic_transport_eval(f0, F, t0, PhasePoint(-r * ux, -r * uv), 1e-4);
        const double gap = std::abs(a.value - b.value);
        CHECK(gap >= 0.5 * asym);
        prev_gap = gap;
    }
    CHECK(prev_gap >= 0.5 * asym);
}
