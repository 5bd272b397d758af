#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "klab/drift.hpp"
#include "klab/phase.hpp"

namespace klab {

/// Closed-form non-unique branch of x' = v, v' = sign(x)|x|^alpha from rest
/// at the origin: t -> (A (t-t0)^beta, A beta (t-t0)^{beta-1}) for t >= t0,
/// beta = 2/(1-alpha), |A| = (beta(beta-1))^{-1/(1-alpha)}.
struct BranchSolution {
    double alpha = 0.6;
    double beta = 5.0;
    double amplitude = 0.0;  // signed A
    double t0 = 0.0;
    int sign = 1;

    static BranchSolution make(double alpha, int sign, double t0 = 0.0);
};

/// (beta, |A|) for alpha in (1/2, 1); rejects out-of-range alpha.
std::pair<double, double> branch_params(double alpha);

/// d = 1 branch state at time t (the zero state for t < t0).
PhasePoint branch_solution(const BranchSolution& b, double t);

/// Largest t such that the branch stays inside B(0, 0.9 r_inner); the closed
/// form is only a solution while the cutoff plateau is active.
double branch_validity_window(const BranchSolution& b, const CutoffSpec& cutoff);

/// |v' - F(x,v)| of the closed form at time t (x' = v holds identically).
double branch_ode_residual(const BranchSolution& b, const DriftField& F, double t);

struct OdeTrajectory {
    std::vector<double> times;
    std::vector<PhasePoint> states;

    const PhasePoint& back_state() const { return states.back(); }
};

/// Classical fixed-step RK4 for x' = v, v' = F(x, v).
OdeTrajectory integrate_ode(const DriftField& F, const PhasePoint& z0, double T, double dt,
                            int thin = 1);

/// The set Lambda_t of points reached from the origin at time t: branch states
/// with onset t0 sampled uniformly on [0, t], both sign branches.
struct ReachedSetPoint {
    double t0;
    int sign;
    PhasePoint z;
};
std::vector<ReachedSetPoint> reached_set(double alpha, double t, int n_onsets);

/// The two initial conditions (A t0^beta, -A beta t0^{beta-1}) and its mirror
/// whose forward solutions coalesce at the origin at time t0.
std::pair<PhasePoint, PhasePoint> coalescing_pair(double alpha, double t0);

using InitialDatum = std::function<double(const PhasePoint&)>;

struct TransportEval {
    double value = 0.0;
    bool near_origin_flag = false;  // backward path entered B(0, flag_radius)
    PhasePoint foot;                // backward characteristic at time 0
};

/// f(t, z) by backward RK4 characteristics: integrates z' = -(v, F) for time t
/// and evaluates f0 at the foot. Near-origin passes are flagged because the
/// backward problem is non-unique there and RK4 silently selects a branch.
TransportEval deterministic_transport_eval(const InitialDatum& f0, const DriftField& F, double t,
                                           const PhasePoint& z, double dt,
                                           double flag_radius = 1e-4);

/// CSV dump: columns t, x_1..x_d, v_1..v_d, branch_id.
void write_trajectory_csv(const std::string& path, const std::vector<OdeTrajectory>& trajs);

}  // namespace klab
