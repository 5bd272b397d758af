#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "klab/drift.hpp"
#include "klab/noise.hpp"
#include "klab/phase.hpp"
#include "klab/resolvent.hpp"

namespace klab {

enum class Scheme { EulerMaruyama, OuSplitting, ZvonkinTransformed };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct Trajectory {
    std::vector<double> times;
    std::vector<PhasePoint> states;
    std::uint64_t path_seed = 0;
    Scheme scheme = Scheme::EulerMaruyama;
    bool truncated = false;  // Zvonkin state left the corrector grid box

    const PhasePoint& back_state() const { return states.back(); }
};

/// x-update uses the current v; v-update applies F dt + dW.
Trajectory euler_maruyama(const DriftField& F, const PhasePoint& z0, const NoisePath& path,
                          double dt, int thin = 1);

/// Exact shear + noise injection (dW dt/2 into x, dW into v) + drift kick.
/// The x-channel term is the trapezoid stand-in for int e^{(dt-s)A} R dW.
PhasePoint ou_splitting_step(const DriftField& F, const PhasePoint& z, const double* dW, double dt);
Trajectory ou_splitting(const DriftField& F, const PhasePoint& z0, const NoisePath& path,
                        double dt, int thin = 1);

/// gamma(z) = z + U(z) and its inverse by the contraction z <- y - U(z);
/// converges geometrically with ratio bounded by |DU|_inf < 1/2.
PhasePoint gamma_apply(const ZvonkinCorrector& U, const PhasePoint& z);
PhasePoint gamma_inverse(const ZvonkinCorrector& U, const PhasePoint& y, int* iterations = nullptr,
                         double tol = 1e-13);

/// Euler-Maruyama in gamma coordinates (drift lambda U + Az, diffusion
/// (DU + I) R), mapped back through gamma^{-1}. Truncates if the state leaves
/// the corrector grid box.
Trajectory zvonkin_integrate(const DriftField& F, const ZvonkinCorrector& U, double lambda,
                             const PhasePoint& z0, const NoisePath& path, double dt, int thin = 1);

struct SdeOptions {
    Scheme scheme = Scheme::EulerMaruyama;
    double dt = 1e-3;
    int thin = 1;
    double T = -1.0;  // horizon; negative means the full path length
    const ZvonkinCorrector* corrector = nullptr;  // ZvonkinTransformed only
    double lambda = 0.0;
};

Trajectory integrate_sde(const DriftField& F, const PhasePoint& z0, const NoisePath& path,
                         const SdeOptions& opt);

/// Rectangular lattice of initial conditions in phase space.
struct StarterLattice {
    int d = 1;
    Vec lo, hi;              // per phase axis, size 2d
    std::vector<int> counts; // per phase axis

    std::size_t size() const;
    PhasePoint point(std::size_t flat) const;
};

/// Ensemble image of a starter lattice under one common noise path.
struct FlowMap {
    double t = 0.0;
    int d = 1;
    StarterLattice lattice;
    std::vector<PhasePoint> starters;
    std::vector<PhasePoint> images;
    std::uint64_t path_seed = 0;
    Scheme scheme = Scheme::EulerMaruyama;

    std::string to_json() const;
};

FlowMap flow_ensemble(const DriftField& F, const StarterLattice& lattice, const NoisePath& path,
                      const SdeOptions& opt, double T);

class query_outside_image : public std::runtime_error {
public:
    explicit query_outside_image(const std::string& what) : std::runtime_error(what) {}
};

/// Triangulation-based scattered inverse of a d=1 flow map: the deformed
/// lattice cells are split into triangles and the starter coordinates are
/// interpolated barycentrically. Build once, query concurrently.
class InverseFlowIndex {
public:
    explicit InverseFlowIndex(const FlowMap& map);
    /// phi_0^t(z); throws query_outside_image when no deformed cell covers z.
    PhasePoint query(const PhasePoint& z) const;
    bool covers(const PhasePoint& z) const;

private:
    const FlowMap& map_;
    int nx_, nv_;
    struct CellBox { double xlo, xhi, vlo, vhi; };
    std::vector<CellBox> boxes_;
    // Uniform bins over the image hull; each bin lists overlapping cells.
    double bxlo_ = 0, bxhi_ = 0, bvlo_ = 0, bvhi_ = 0;
    int bins_ = 1;
    std::vector<std::vector<int>> bin_cells_;
    bool query_impl(const PhasePoint& z, PhasePoint& out) const;
    bool try_cell(int cell, double px, double pv, PhasePoint& out) const;
};

PhasePoint inverse_flow(const FlowMap& map, const PhasePoint& z);

/// Common-noise difference quotient (phi_t(z + h e_i) - phi_t(z)) / h,
/// returned in flat layout (2d components).
Vec difference_quotient(const DriftField& F, const PhasePoint& z, double h, int direction,
                        const NoisePath& path, const SdeOptions& opt, double T);

}  // namespace klab
