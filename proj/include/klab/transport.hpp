#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "klab/drift.hpp"
#include "klab/grid.hpp"
#include "klab/noise.hpp"
#include "klab/sde.hpp"

namespace klab {

using InitialField = std::function<double(const PhasePoint&)>;

/// One realization of the transported field f(t, z) = f0(phi_0^t(z)) on a
/// query lattice, under one noise path.
struct TransportField {
    double t = 0.0;
    GridFunction field;  // rank-2d lattice of values
    std::uint64_t path_seed = 0;
    int outside_queries = 0;  // nodes not covered by the deformed lattice
};

struct SpdeSolveConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::EulerMaruyama;
    int starter_per_axis = 96;
    double margin = 0.0;  // extra starter box padding; 0 -> auto from the path
    const ZvonkinCorrector* corrector = nullptr;  // required for the Zvonkin scheme
    double lambda = 0.0;
};

/// Characteristics representation: inverse flow by triangulated lattice
/// inversion, then composition with f0. d = 1.
TransportField spde_solve(const InitialField& f0, const DriftField& F, double t,
                          const GridFunction& query_proto, const NoisePath& path,
                          const SpdeSolveConfig& cfg);

/// Smooth compactly supported tensor test function with the derivatives the
/// weak form needs.
struct TestFunction {
    Vec center;  // flat 2d layout
    Vec scale;   // per axis

    double value(const double* z) const;
    double dv(const double* z, int i) const;       // d phi / d v_i
    double laplace_v(const double* z) const;       // sum_i d^2 phi / d v_i^2
};

/// Fixed catalog: tensor bumps at 3 scales and 5 centers (versioned in reports).
std::vector<TestFunction> test_function_catalog(int d, double box_half_width);

struct WeakFormResult {
    std::vector<double> per_path;  // |residual| per path
    double rms = 0.0;
};

/// Residual of the weak-form identity, per path: all field integrals are
/// evaluated in Lagrangian form (change of variables along the forward flow,
/// Jacobian dJ = div_v F J ds; the drift term is integrated by parts onto the
/// test function). Time integrals: composite trapezoid over snapshots;
/// stochastic integral: left-point sums. Paths are generated at dt_base
/// (default dt) and coarsened, so a dt-refinement sweep sees common noise.
WeakFormResult weak_form_residual(const InitialField& f0, const DriftField& F, double t,
                                  const TestFunction& phi, int n_paths, double dt,
                                  const GridFunction& starter_proto, std::uint64_t seed,
                                  double dt_base = 0.0);

/// Grid W^{1,r} norm of a field restricted to a sub-box: ( int |f|^r + |Df|^r )^{1/r}
/// with 4th-order finite-difference gradients.
double sobolev_subbox_norm(const GridFunction& field, double r, const Vec& lo, const Vec& hi);

struct EnergyReport {
    std::vector<double> times;
    std::vector<double> g_hat;     // lattice integral of the ensemble mean of f^2
    double div_v_sup = 0.0;        // measured |div_v F|_inf on the lattice
    double worst_ratio = 0.0;      // max over t of g(t) / (g(0) e^{|div_v F| t})
    bool zero_datum = false;
};

/// Energy decay check of the uniqueness argument: evolves the lattice
/// integral of E[f^2] from an eps0-perturbed zero datum and compares with the
/// Gronwall envelope g(0) exp(|div_v F|_inf t).
EnergyReport energy_uniqueness_check(const DriftField& F, double eps0,
                                     const std::vector<double>& t_grid, int n_paths,
                                     const GridFunction& query_proto, double dt,
                                     std::uint64_t seed);

/// |div_v F| sup over the lattice (central differences in v; catalog drifts
/// are smooth in v).
double div_v_sup_norm(const DriftField& F, const GridFunction& proto);

}  // namespace klab
