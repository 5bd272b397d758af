#pragma once

#include <stdexcept>
#include <vector>

#include "klab/drift.hpp"
#include "klab/grid.hpp"
#include "klab/ou.hpp"

namespace klab {

enum class QuadRule { LogUniform, GaussLaguerre };

/// Time quadrature of the Laplace transform G_lambda g = int e^{-lambda t} P_t g dt.
struct ResolventConfig {
    double lambda = 10.0;
    double t_max = 2.4;   // tail bound e^{-lambda t_max} < 1e-10 enforced
    double t_min = 1e-4;  // LogUniform lower node; [0, t_min] handled as P_t ~ I
    int n_quad = 64;
    QuadRule rule = QuadRule::LogUniform;

    static ResolventConfig for_lambda(double lambda, QuadRule rule = QuadRule::LogUniform,
                                      int n_quad = 64) {
        ResolventConfig cfg;
        cfg.lambda = lambda;
        cfg.rule = rule;
        cfg.n_quad = n_quad;
        cfg.t_max = 24.0 / lambda;
        return cfg;
    }
    void validate() const;
};

/// Nodes/weights for int_0^infty e^{-lambda t} f(t) dt ~ sum w_i f(t_i).
/// GaussLaguerre is exact on polynomial f up to degree 2 n_quad - 1.
struct TimeQuadrature {
    std::vector<double> t;
    std::vector<double> w;
    double near_zero_weight = 0.0;  // weight of the implicit t=0 node (LogUniform)
};
TimeQuadrature time_quadrature(const ResolventConfig& cfg);

/// Exact resolvent of a quadratic polynomial (moments k!/lambda^{k+1}).
QuadPoly resolvent_poly(const QuadPoly& p, double lambda, int d);

/// G_lambda g on the lattice: quadratic content resolved in closed form, the
/// remainder by time quadrature of the spectral semigroup.
GridFunction resolvent_apply(const GridFunction& g, const ResolventConfig& cfg);

enum class AxisBlock { X, V };
enum class GradMethod { FiniteDifference, Spectral };

/// Partial derivative along one axis; 4th-order stencils (one-sided at the
/// box edges) or the spectral ik multiplier under Periodic.
GridFunction derivative_axis(const GridFunction& f, int axis,
                             GradMethod method = GradMethod::FiniteDifference);

/// Gradient over the x- or v-block of a phase-space grid.
std::vector<GridFunction> grid_gradient(const GridFunction& f, AxisBlock block,
                                        GradMethod method = GradMethod::FiniteDifference);

/// T_lambda f = F . D_v(G_lambda f).
GridFunction t_lambda_apply(const DriftField& F, const GridFunction& f, const ResolventConfig& cfg);

struct DriftSolveResult {
    GridFunction psi;
    int iterations = 0;
    double contraction_estimate = 0.0;
};

class divergence_error : public std::runtime_error {
public:
    divergence_error(double estimate, int iterations)
        : std::runtime_error("solve_with_drift: Picard iteration not contractive (lambda below the admissible regime)"),
          contraction_estimate(estimate),
          iterations(iterations) {}
    double contraction_estimate;
    int iterations;
};

/// Fixed point f = g + T_lambda f, then psi = G_lambda f.
DriftSolveResult solve_with_drift(const GridFunction& g, const DriftField& F,
                                  const ResolventConfig& cfg, double tol = 1e-8,
                                  int max_iter = 200);

/// Zvonkin corrector U = (0, u~) solving lambda U - L U = B, B = (0, F),
/// with the smallness certificate |U|_inf + |DU|_inf < 1/2.
struct ZvonkinCorrector {
    int d = 1;
    double lambda_used = 0.0;
    double sup_u = 0.0;
    double sup_du = 0.0;
    double contraction_estimate = 0.0;
    int iterations = 0;  // worst componentwise Picard count
    std::vector<GridFunction> u_tilde;              // d components (the v-block of U)
    std::vector<std::vector<GridFunction>> du;      // du[i][a] = d_a u~_i, a in [0, 2d)

    double certificate() const { return sup_u + sup_du; }

    /// U(z): first d components identically zero, last d interpolated.
    void eval_u(const double* z, double* out_2d) const;
    /// Full Jacobian rows of the nonzero block: out[i*2d + a] = d_a u~_i.
    void eval_du(const double* z, double* out_d_by_2d) const;

    static ZvonkinCorrector identity(int d);  // U == 0 (zero drift)
    bool empty() const { return u_tilde.empty(); }
};

class no_admissible_lambda : public std::runtime_error {
public:
    no_admissible_lambda(std::vector<double> lambdas, std::vector<double> norms)
        : std::runtime_error("build_zvonkin_U: no swept lambda certifies |U|+|DU| < 1/2"),
          swept(std::move(lambdas)),
          achieved(std::move(norms)) {}
    std::vector<double> swept;
    std::vector<double> achieved;  // |U|+|DU| per swept lambda (inf when divergent)
};

/// Sweep lambdas in ascending order, solve the vector equation componentwise,
/// return the first corrector satisfying the certificate.
ZvonkinCorrector build_zvonkin_U(const DriftField& F, const GridFunction& proto,
                                 const std::vector<double>& lambda_sweep,
                                 QuadRule rule = QuadRule::LogUniform, int n_quad = 64,
                                 double tol = 1e-8, int max_iter = 200);

}  // namespace klab
