#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "klab/grid.hpp"
#include "klab/phase.hpp"

namespace klab {

/// Radial plateau/support radii of the C_c^inf cutoff theta.
struct CutoffSpec {
    double r_inner = 2.0;
    double r_outer = 4.0;
};

/// Radial bump transition: 1 for r <= r_inner, 0 for r >= r_outer, smooth
/// monotone in between (exp(-1/t) blending).
double smooth_cutoff(const CutoffSpec& spec, double radius);
double smooth_cutoff(const CutoffSpec& spec, const PhasePoint& z);

enum class DriftKind { Zero, Constant, Product, Counterexample, GridSampled };

/// Named 1-d profile so Product drifts stay serializable in configs.
struct Profile1D {
    enum class Kind { Gaussian, Bump, SignPower };
    Kind kind = Kind::Gaussian;
    double scale = 1.0;
    double alpha = 0.6;  // SignPower exponent

    double operator()(double t) const;
};

/// Evaluable force field F : R^{2d} -> R^d from the catalog.
/// Counterexample: F_i(z) = sign * theta(|z|) * sign(x_i) |x_i|^alpha.
class DriftField {
public:
    static DriftField zero(int d);
    static DriftField constant(Vec c);
    static DriftField product(int d, Profile1D phi, Profile1D g);
    static DriftField counterexample(int d, double alpha, int sign, CutoffSpec cutoff);
    static DriftField grid_sampled(std::shared_ptr<const std::vector<GridFunction>> comps, int d);

    int dim() const { return d_; }
    DriftKind kind() const { return kind_; }
    double alpha() const { return alpha_; }
    int sign() const { return sign_; }
    const CutoffSpec& cutoff() const { return cutoff_; }

    /// Hot-loop form: z is the flat state [x, v], out has d slots.
    void eval(const double* z, double* out) const;
    Vec eval(const PhasePoint& z) const;

    /// Pointwise sup bound measured on a lattice prototype (catalog fields
    /// are cheap to probe; used for reports).
    double sup_on_grid(const GridFunction& proto) const;

private:
    DriftField() = default;
    DriftKind kind_ = DriftKind::Zero;
    int d_ = 1;
    Vec constant_;
    Profile1D phi_, g_;
    double alpha_ = 0.6;
    int sign_ = 1;
    CutoffSpec cutoff_;
    std::shared_ptr<const std::vector<GridFunction>> grid_;
};

/// Validating constructor used by config parsing ("make_drift").
struct DriftSpec {
    DriftKind kind = DriftKind::Zero;
    int d = 1;
    Vec constant;
    Profile1D phi, g;
    double alpha = 0.6;
    int sign = 1;
    CutoffSpec cutoff;
    std::shared_ptr<const std::vector<GridFunction>> grid;
};

DriftField make_drift(const DriftSpec& spec);

}  // namespace klab
