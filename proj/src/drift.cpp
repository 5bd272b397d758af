#include "klab/drift.hpp"

#include <cmath>

namespace klab {

namespace {
double bump_side(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
}  // namespace

double smooth_cutoff(const CutoffSpec& spec, double radius) {
    if (!(spec.r_inner > 0.0) || !(spec.r_inner < spec.r_outer))
        throw std::invalid_argument("CutoffSpec: need 0 < r_inner < r_outer");
    if (radius <= spec.r_inner) return 1.0;
    if (radius >= spec.r_outer) return 0.0;
    const double t = (spec.r_outer - radius) / (spec.r_outer - spec.r_inner);
    const double a = bump_side(t);
    const double b = bump_side(1.0 - t);
    return a / (a + b);
}

double smooth_cutoff(const CutoffSpec& spec, const PhasePoint& z) {
    return smooth_cutoff(spec, z.norm());
}

double Profile1D::operator()(double t) const {
    switch (kind) {
        case Kind::Gaussian:
            return std::exp(-0.5 * (t / scale) * (t / scale));
        case Kind::Bump: {
            const double u = t / scale;
            if (std::abs(u) >= 1.0) return 0.0;
            return std::exp(1.0 - 1.0 / (1.0 - u * u));
        }
        case Kind::SignPower: {
            if (t == 0.0) return 0.0;
            const double s = t > 0.0 ? 1.0 : -1.0;
            return s * std::pow(std::abs(t), alpha);
        }
    }
    return 0.0;
}

DriftField DriftField::zero(int d) {
    DriftField f;
    f.kind_ = DriftKind::Zero;
    f.d_ = d;
    return f;
}

DriftField DriftField::constant(Vec c) {
    DriftField f;
    f.kind_ = DriftKind::Constant;
    f.d_ = static_cast<int>(c.size());
    f.constant_ = std::move(c);
    return f;
}

DriftField DriftField::product(int d, Profile1D phi, Profile1D g) {
    DriftField f;
    f.kind_ = DriftKind::Product;
    f.d_ = d;
    f.phi_ = phi;
    f.g_ = g;
    return f;
}

DriftField DriftField::counterexample(int d, double alpha, int sign, CutoffSpec cutoff) {
    if (!(alpha > 0.5) || !(alpha < 1.0))
        throw std::invalid_argument("counterexample drift: alpha must lie in (1/2, 1)");
    if (!(cutoff.r_inner > 0.0) || !(cutoff.r_inner < cutoff.r_outer))
        throw std::invalid_argument("counterexample drift: need 0 < r_inner < r_outer");
    if (sign != 1 && sign != -1) throw std::invalid_argument("counterexample drift: sign must be +-1");
    DriftField f;
    f.kind_ = DriftKind::Counterexample;
    f.d_ = d;
    f.alpha_ = alpha;
    f.sign_ = sign;
    f.cutoff_ = cutoff;
    return f;
}

DriftField DriftField::grid_sampled(std::shared_ptr<const std::vector<GridFunction>> comps, int d) {
    if (!comps || static_cast<int>(comps->size()) != d)
        throw std::invalid_argument("grid_sampled drift: need one component grid per dimension");
    DriftField f;
    f.kind_ = DriftKind::GridSampled;
    f.d_ = d;
    f.grid_ = std::move(comps);
    return f;
}

void DriftField::eval(const double* z, double* out) const {
    switch (kind_) {
        case DriftKind::Zero:
            for (int i = 0; i < d_; ++i) out[i] = 0.0;
            return;
        case DriftKind::Constant:
            for (int i = 0; i < d_; ++i) out[i] = constant_[i];
            return;
        case DriftKind::Product:
            for (int i = 0; i < d_; ++i) out[i] = phi_(z[d_ + i]) * g_(z[i]);
            return;
        case DriftKind::Counterexample: {
            const double r = flat_norm(z, 2 * d_);
            const double theta = smooth_cutoff(cutoff_, r);
            if (theta == 0.0) {
                for (int i = 0; i < d_; ++i) out[i] = 0.0;
                return;
            }
            for (int i = 0; i < d_; ++i) {
                const double x = z[i];
                const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                out[i] = sign_ * theta * s * std::pow(std::abs(x), alpha_);
            }
            return;
        }
        case DriftKind::GridSampled:
            for (int i = 0; i < d_; ++i) out[i] = (*grid_)[i].interpolate(z);
            return;
    }
}

Vec DriftField::eval(const PhasePoint& z) const {
    Vec flat = z.flat();
    Vec out(d_);
    eval(flat.data(), out.data());
    return out;
}

double DriftField::sup_on_grid(const GridFunction& proto) const {
    std::vector<double> z(proto.rank());
    Vec out(d_);
    double m = 0.0;
    for (std::size_t i = 0; i < proto.size(); ++i) {
        proto.node_coords(i, z);
        eval(z.data(), out.data());
        double s = 0.0;
        for (double c : out) s += c * c;
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

DriftField make_drift(const DriftSpec& spec) {
    switch (spec.kind) {
        case DriftKind::Zero: return DriftField::zero(spec.d);
        case DriftKind::Constant: return DriftField::constant(spec.constant);
        case DriftKind::Product: return DriftField::product(spec.d, spec.phi, spec.g);
        case DriftKind::Counterexample:
            return DriftField::counterexample(spec.d, spec.alpha, spec.sign, spec.cutoff);
        case DriftKind::GridSampled: return DriftField::grid_sampled(spec.grid, spec.d);
    }
    throw std::invalid_argument("make_drift: unknown kind");
}

}  // namespace klab
