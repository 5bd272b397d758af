#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "klab/drift.hpp"
#include "klab/noise.hpp"
#include "klab/sde.hpp"
#include "klab/stats.hpp"

namespace klab {

/// Exponential Girsanov density along one OU base path:
/// Phi_T = exp( int <F(L_s), dW_s> - 1/2 int |F(L_s)|^2 ds ), left-point sums.
struct GirsanovWeight {
    double stochastic_integral = 0.0;
    double quadratic_term = 0.0;
    double log_phi = 0.0;
    double phi = 1.0;
};

GirsanovWeight girsanov_weight(const DriftField& F, const NoisePath& path, const PhasePoint& z,
                               double dt, double T = -1.0);

using Observable = std::function<double(const PhasePoint&)>;

struct ReweightedComparison {
    McEstimate direct;      // E[h(Z_T)] by simulating the drifted SDE
    McEstimate reweighted;  // E[h(L_T) Phi_T] over OU paths
    double ess = 0.0;       // effective sample size of the weights
    bool ess_flag = false;  // degeneracy warning (ess below n/10)
};

ReweightedComparison weak_expectation_reweighted(const Observable& h, const DriftField& F, double T,
                                                 int n_paths, const PhasePoint& z, double dt,
                                                 std::uint64_t seed);

using PhaseObservable = std::function<double(const PhasePoint&)>;

struct KhasminskiiReport {
    std::vector<double> per_starter;  // E[exp int f(L_s) ds], log-sum-exp based
    double sup = 0.0;
    double alpha = 0.0;  // sup_z mean of int f(L_s) ds (the Lemma small-norm statistic)
};

KhasminskiiReport khasminskii_exp_moment(const PhaseObservable& f, double T, int n_paths,
                                         const std::vector<PhasePoint>& starters, double dt,
                                         std::uint64_t seed);

/// A_t = int 1_{Z != Y} |[DU(Z)-DU(Y)]R|_HS^2 / |Z-Y|^2 ds along two
/// trajectories sharing times and noise. Nondecreasing by construction.
std::vector<double> at_process(const ZvonkinCorrector& U, const Trajectory& a, const Trajectory& b);

struct HolderRegression {
    std::vector<double> separations;
    std::vector<double> moments;  // E |Z^z - Z^y|^a per separation
    double slope = 0.0;
    double slope_se = 0.0;
};

HolderRegression holder_exponent_regression(const DriftField& F, double a, double T,
                                            const std::vector<double>& separations, int n_paths,
                                            const PhasePoint& center, const Vec& direction,
                                            double dt, std::uint64_t seed);

struct InjectivityReport {
    double estimate = 0.0;  // median-of-means of |Z - Y|^a, a < 0
    int collapse_events = 0;
    int pairs = 0;
};

InjectivityReport injectivity_margin(const DriftField& F,
                                     const std::vector<std::pair<PhasePoint, PhasePoint>>& pairs,
                                     double a, double T, int n_paths_per_pair, double dt,
                                     std::uint64_t seed, double collapse_eps = 1e-14);

struct CoverageReport {
    double fraction = 0.0;
    int probes = 0;
    int covered = 0;
};

/// Fraction of probe-lattice points inside the image hull with a successful
/// inverse query whose forward re-integration residual passes tol.
CoverageReport surjectivity_coverage(const DriftField& F, const FlowMap& map, const NoisePath& path,
                                     const SdeOptions& opt, const Vec& box_lo, const Vec& box_hi,
                                     int probes_per_axis, double residual_tol);

/// Gaussian mollification of a drift on a lattice: returns a GridSampled
/// field with blur width h per axis.
DriftField mollify_drift(const DriftField& F, const GridFunction& proto, double h);

struct MollifiedConvergence {
    std::vector<double> widths;
    std::vector<double> discrepancy;  // sup over starters/output times of E|phi_n - phi|
};

MollifiedConvergence mollified_convergence(const DriftField& F, const std::vector<double>& widths,
                                           const std::vector<PhasePoint>& starters,
                                           const GridFunction& proto, double T, int n_paths,
                                           double dt, std::uint64_t seed, int snapshots = 8);

}  // namespace klab
