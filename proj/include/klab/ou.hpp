#pragma once

#include <Eigen/Dense>

#include "klab/grid.hpp"
#include "klab/phase.hpp"
#include "klab/rng.hpp"

namespace klab {

/// Exact transition machinery of the free kinetic (hypoelliptic OU) dynamics:
/// mean map e^{tA} : (x,v) -> (x+tv, v) and covariance
/// Q_t = [[t^3/3 I, t^2/2 I], [t^2/2 I, t I]], det Q_t = (t^4/12)^d.
struct OuTransition {
    double t = 0.0;
    int d = 1;
    Eigen::MatrixXd cov;   // 2d x 2d
    Eigen::MatrixXd chol;  // lower-triangular, closed form
    double logdet = 0.0;
    bool degenerate = false;  // t below the 1e-6 floor; chol not usable
};

PhasePoint ou_mean(double t, const PhasePoint& z);
void ou_mean_flat(double t, int d, const double* z, double* out);

OuTransition ou_covariance(double t, int d);

/// One exact-in-distribution sample of the transition from z over time t.
PhasePoint ou_sample(const PhasePoint& z, double t, Rng& rng);

/// Transition density of the OU process, N(e^{tA} z, Q_t) evaluated at zp.
double ou_density(double t, const PhasePoint& z, const PhasePoint& zp);

/// Degree <= 2 polynomial on R^{2d}: c + b.z + z^T M z. The OU semigroup maps
/// this class to itself exactly, which anchors the spectral path on
/// non-decaying inputs.
struct QuadPoly {
    double c = 0.0;
    Eigen::VectorXd b;  // size 2d
    Eigen::MatrixXd M;  // 2d x 2d symmetric

    static QuadPoly zero(int two_d);
    double eval(const double* z) const;
};

/// Least-squares fit of the quadratic content of g over its lattice.
QuadPoly quad_fit(const GridFunction& g);
GridFunction quad_subtract(const GridFunction& g, const QuadPoly& p);
void quad_add_inplace(GridFunction& g, const QuadPoly& p);

/// Exact action of P_t on a quadratic polynomial.
QuadPoly ou_transport_poly(const QuadPoly& p, double t, int d);

struct SemigroupInfo {
    bool coarse_warning = false;  // blur narrower than the grid step
};

/// True when g is (numerically) a degree <= 2 polynomial; fills the fit.
bool is_quadratic_content(const GridFunction& g, QuadPoly& poly);

/// P_t g by correlated spectral blur (multiplier exp(-xi^T Q_t xi / 2)) under
/// the declared boundary rule followed by the unit-Jacobian shear, applied
/// per x-row with cubic interpolation. Inputs that are exactly polynomial
/// (degree <= 2) are transported in closed form instead, which keeps the
/// non-decaying oracles exact on the periodic box.
GridFunction semigroup_apply(const GridFunction& g, double t, SemigroupInfo* info = nullptr);

/// Spectral blur + shear, no polynomial dispatch; building block reused by
/// the resolvent quadrature.
GridFunction semigroup_apply_remainder(const GridFunction& g, double t, SemigroupInfo* info = nullptr);

}  // namespace klab
