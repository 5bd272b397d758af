#include "klab/sde.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "klab/stats.hpp"

namespace klab {

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::EulerMaruyama: return "em";
        case Scheme::OuSplitting: return "split";
        case Scheme::ZvonkinTransformed: return "zvonkin";
    }
    return "em";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "em") return Scheme::EulerMaruyama;
    if (name == "split") return Scheme::OuSplitting;
    if (name == "zvonkin") return Scheme::ZvonkinTransformed;
    throw std::invalid_argument("unknown scheme: " + name);
}

namespace {

// Steps of the integrator per increment group; dt must be a multiple of the
// path resolution.
int steps_per_increment(const NoisePath& path, double dt) {
    const double ratio = dt / path.dt;
    const int k = static_cast<int>(std::llround(ratio));
    if (k < 1 || std::abs(ratio - k) > 1e-9)
        throw std::invalid_argument("integrator dt must be a positive multiple of the path step");
    return k;
}

struct StepperState {
    Vec z;        // flat [x, v]
    Vec y;        // gamma coordinates (Zvonkin only)
    Vec scratch;  // drift values
    Vec du;       // d x 2d Jacobian rows (Zvonkin only)
    bool truncated = false;
};

bool inside_box(const ZvonkinCorrector& U, const double* z) {
    if (U.empty()) return true;
    const GridFunction& proto = U.u_tilde.front();
    for (int a = 0; a < proto.rank(); ++a)
        if (std::abs(z[a]) > proto.half_width(a)) return false;
    return true;
}

}  // namespace

Trajectory euler_maruyama(const DriftField& F, const PhasePoint& z0, const NoisePath& path,
                          double dt, int thin) {
    SdeOptions opt;
    opt.scheme = Scheme::EulerMaruyama;
    opt.dt = dt;
    opt.thin = thin;
    return integrate_sde(F, z0, path, opt);
}

PhasePoint ou_splitting_step(const DriftField& F, const PhasePoint& z, const double* dW, double dt) {
    const int d = z.dim();
    Vec flat = z.flat();
    Vec force(d);
    for (int i = 0; i < d; ++i) flat[i] += dt * flat[d + i] + 0.5 * dt * dW[i];
    for (int i = 0; i < d; ++i) flat[d + i] += dW[i];
    F.eval(flat.data(), force.data());
    for (int i = 0; i < d; ++i) flat[d + i] += dt * force[i];
    return PhasePoint::from_flat(flat);
}

Trajectory ou_splitting(const DriftField& F, const PhasePoint& z0, const NoisePath& path,
                        double dt, int thin) {
    SdeOptions opt;
    opt.scheme = Scheme::OuSplitting;
    opt.dt = dt;
    opt.thin = thin;
    return integrate_sde(F, z0, path, opt);
}

PhasePoint gamma_apply(const ZvonkinCorrector& U, const PhasePoint& z) {
    const int d = z.dim();
    Vec flat = z.flat();
    Vec u(2 * d);
    U.eval_u(flat.data(), u.data());
    for (int i = 0; i < 2 * d; ++i) flat[i] += u[i];
    return PhasePoint::from_flat(flat);
}

PhasePoint gamma_inverse(const ZvonkinCorrector& U, const PhasePoint& y, int* iterations,
                         double tol) {
    const int d = y.dim();
    Vec target = y.flat();
    Vec z = target;
    Vec u(2 * d);
    int it = 0;
    for (; it < 200; ++it) {
        U.eval_u(z.data(), u.data());
        double delta = 0.0;
        for (int i = 0; i < 2 * d; ++i) {
            const double next = target[i] - u[i];
            delta = std::max(delta, std::abs(next - z[i]));
            z[i] = next;
        }
        if (delta < tol) break;
    }
    if (iterations) *iterations = it + 1;
    return PhasePoint::from_flat(z);
}

Trajectory zvonkin_integrate(const DriftField& /*F*/, const ZvonkinCorrector& U, double lambda,
                             const PhasePoint& z0, const NoisePath& path, double dt, int thin) {
    SdeOptions opt;
    opt.scheme = Scheme::ZvonkinTransformed;
    opt.dt = dt;
    opt.thin = thin;
    opt.corrector = &U;
    opt.lambda = lambda;
    return integrate_sde(DriftField::zero(z0.dim()), z0, path, opt);
}

Trajectory integrate_sde(const DriftField& F, const PhasePoint& z0, const NoisePath& path,
                         const SdeOptions& opt) {
    const int d = z0.dim();
    if (path.d != d) throw std::invalid_argument("integrate_sde: path dimension mismatch");
    const int group = steps_per_increment(path, opt.dt);
    int nsteps = path.steps() / group;
    if (opt.T >= 0.0) nsteps = std::min<int>(nsteps, static_cast<int>(std::llround(opt.T / opt.dt)));
    const double dt = opt.dt;

    const ZvonkinCorrector* U = opt.corrector;
    if (opt.scheme == Scheme::ZvonkinTransformed && (!U))
        throw std::invalid_argument("integrate_sde: Zvonkin scheme needs a corrector");

    Trajectory traj;
    traj.path_seed = path.seed;
    traj.scheme = opt.scheme;
    traj.times.reserve(nsteps / opt.thin + 2);
    traj.states.reserve(nsteps / opt.thin + 2);
    traj.times.push_back(0.0);
    traj.states.push_back(z0);

    Vec z = z0.flat();
    Vec force(d), dW(d);
    Vec y, u, du;
    if (opt.scheme == Scheme::ZvonkinTransformed) {
        u.resize(2 * d);
        du.resize(static_cast<std::size_t>(d) * 2 * d);
        U->eval_u(z.data(), u.data());
        y = z;
        for (int i = 0; i < 2 * d; ++i) y[i] += u[i];
    }

    for (int k = 0; k < nsteps; ++k) {
        for (int i = 0; i < d; ++i) dW[i] = 0.0;
        for (int j = 0; j < group; ++j) {
            const double* inc = path.increment(k * group + j);
            for (int i = 0; i < d; ++i) dW[i] += inc[i];
        }

        switch (opt.scheme) {
            case Scheme::EulerMaruyama: {
                F.eval(z.data(), force.data());
                for (int i = 0; i < d; ++i) z[i] += dt * z[d + i];
                for (int i = 0; i < d; ++i) z[d + i] += dt * force[i] + dW[i];
                break;
            }
            case Scheme::OuSplitting: {
                for (int i = 0; i < d; ++i) z[i] += dt * z[d + i] + 0.5 * dt * dW[i];
                for (int i = 0; i < d; ++i) z[d + i] += dW[i];
                F.eval(z.data(), force.data());
                for (int i = 0; i < d; ++i) z[d + i] += dt * force[i];
                break;
            }
            case Scheme::ZvonkinTransformed: {
                if (!inside_box(*U, z.data())) {
                    traj.truncated = true;
                    break;
                }
                U->eval_u(z.data(), u.data());
                U->eval_du(z.data(), du.data());
                // dy = (lambda U(z) + A z) dt + (DU(z) + I) R dW
                for (int i = 0; i < d; ++i) y[i] += (opt.lambda * u[i] + z[d + i]) * dt;
                for (int i = 0; i < d; ++i) {
                    double diff = dW[i];
                    for (int j = 0; j < d; ++j) diff += du[i * 2 * d + d + j] * dW[j];
                    y[d + i] += opt.lambda * u[d + i] * dt + diff;
                }
                // back to z coordinates
                PhasePoint zp = gamma_inverse(*U, PhasePoint::from_flat(y));
                z = zp.flat();
                break;
            }
        }
        if (traj.truncated) break;
        if ((k + 1) % opt.thin == 0 || k + 1 == nsteps) {
            traj.times.push_back((k + 1) * dt);
            traj.states.push_back(PhasePoint::from_flat(z));
        }
    }
    return traj;
}

std::size_t StarterLattice::size() const {
    std::size_t total = 1;
    for (int c : counts) total *= static_cast<std::size_t>(c);
    return total;
}

PhasePoint StarterLattice::point(std::size_t flat) const {
    const int r = 2 * d;
    Vec z(r);
    for (int a = r - 1; a >= 0; --a) {
        const int c = counts[a];
        const int idx = static_cast<int>(flat % c);
        flat /= c;
        z[a] = c == 1 ? lo[a] : lo[a] + (hi[a] - lo[a]) * idx / (c - 1);
    }
    return PhasePoint::from_flat(z);
}

FlowMap flow_ensemble(const DriftField& F, const StarterLattice& lattice, const NoisePath& path,
                      const SdeOptions& opt, double T) {
    FlowMap map;
    map.t = T;
    map.d = lattice.d;
    map.lattice = lattice;
    map.path_seed = path.seed;
    map.scheme = opt.scheme;
    const std::size_t count = lattice.size();
    map.starters.resize(count);
    map.images.resize(count);

    SdeOptions run = opt;
    run.T = T;
    parallel_for(count, [&](std::size_t i) {
        const PhasePoint z0 = lattice.point(i);
        Trajectory traj = integrate_sde(F, z0, path, run);
        map.starters[i] = z0;
        map.images[i] = traj.back_state();
    });
    return map;
}

std::string FlowMap::to_json() const {
    nlohmann::json j;
    j["t"] = t;
    j["d"] = d;
    j["scheme"] = scheme_name(scheme);
    j["path_seed"] = path_seed;
    j["lattice"] = {{"lo", lattice.lo}, {"hi", lattice.hi}, {"counts", lattice.counts}};
    nlohmann::json imgs = nlohmann::json::array();
    for (const auto& p : images) imgs.push_back(p.flat());
    j["images"] = imgs;
    return j.dump();
}

InverseFlowIndex::InverseFlowIndex(const FlowMap& map) : map_(map) {
    if (map.d != 1)
        throw std::invalid_argument("InverseFlowIndex: triangulated inversion is implemented for d = 1");
    nx_ = map.lattice.counts[0];
    nv_ = map.lattice.counts[1];
    boxes_.resize(static_cast<std::size_t>(nx_ - 1) * (nv_ - 1));
    bxlo_ = 1e300, bxhi_ = -1e300, bvlo_ = 1e300, bvhi_ = -1e300;
    for (int i = 0; i + 1 < nx_; ++i) {
        for (int j = 0; j + 1 < nv_; ++j) {
            CellBox box{1e300, -1e300, 1e300, -1e300};
            for (int di = 0; di <= 1; ++di)
                for (int dj = 0; dj <= 1; ++dj) {
                    const auto& p = map.images[static_cast<std::size_t>(i + di) * nv_ + (j + dj)];
                    box.xlo = std::min(box.xlo, p.x[0]);
                    box.xhi = std::max(box.xhi, p.x[0]);
                    box.vlo = std::min(box.vlo, p.v[0]);
                    box.vhi = std::max(box.vhi, p.v[0]);
                }
            boxes_[static_cast<std::size_t>(i) * (nv_ - 1) + j] = box;
            bxlo_ = std::min(bxlo_, box.xlo);
            bxhi_ = std::max(bxhi_, box.xhi);
            bvlo_ = std::min(bvlo_, box.vlo);
            bvhi_ = std::max(bvhi_, box.vhi);
        }
    }
    // Bin the cells for O(1) point location.
    bins_ = std::max(8, static_cast<int>(std::sqrt(static_cast<double>(boxes_.size()))));
    bin_cells_.assign(static_cast<std::size_t>(bins_) * bins_, {});
    const double wx = (bxhi_ - bxlo_) / bins_, wv = (bvhi_ - bvlo_) / bins_;
    for (std::size_t c = 0; c < boxes_.size(); ++c) {
        const CellBox& b = boxes_[c];
        int i0 = wx > 0 ? static_cast<int>((b.xlo - bxlo_) / wx) : 0;
        int i1 = wx > 0 ? static_cast<int>((b.xhi - bxlo_) / wx) : 0;
        int j0 = wv > 0 ? static_cast<int>((b.vlo - bvlo_) / wv) : 0;
        int j1 = wv > 0 ? static_cast<int>((b.vhi - bvlo_) / wv) : 0;
        i0 = std::clamp(i0, 0, bins_ - 1);
        i1 = std::clamp(i1, 0, bins_ - 1);
        j0 = std::clamp(j0, 0, bins_ - 1);
        j1 = std::clamp(j1, 0, bins_ - 1);
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j)
                bin_cells_[static_cast<std::size_t>(i) * bins_ + j].push_back(static_cast<int>(c));
    }
}

namespace {

// Signed twice-area of (a, b, c).
inline double orient2(double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

// Barycentric coordinates of p in triangle (a, b, c); true if inside.
bool barycentric(double px, double py, const double* a, const double* b, const double* c,
                 double& wa, double& wb, double& wc) {
    const double area = orient2(a[0], a[1], b[0], b[1], c[0], c[1]);
    if (area == 0.0) return false;
    wa = orient2(px, py, b[0], b[1], c[0], c[1]) / area;
    wb = orient2(a[0], a[1], px, py, c[0], c[1]) / area;
    wc = orient2(a[0], a[1], b[0], b[1], px, py) / area;
    const double eps = -1e-12;
    return wa >= eps && wb >= eps && wc >= eps;
}

}  // namespace

bool InverseFlowIndex::try_cell(int cell, double px, double pv, PhasePoint& out) const {
    const CellBox& box = boxes_[cell];
    if (px < box.xlo || px > box.xhi || pv < box.vlo || pv > box.vhi) return false;
    const int i = cell / (nv_ - 1);
    const int j = cell % (nv_ - 1);
    const std::size_t i00 = static_cast<std::size_t>(i) * nv_ + j;
    const std::size_t i01 = i00 + 1;
    const std::size_t i10 = i00 + nv_;
    const std::size_t i11 = i10 + 1;
    const double q00[2] = {map_.images[i00].x[0], map_.images[i00].v[0]};
    const double q01[2] = {map_.images[i01].x[0], map_.images[i01].v[0]};
    const double q10[2] = {map_.images[i10].x[0], map_.images[i10].v[0]};
    const double q11[2] = {map_.images[i11].x[0], map_.images[i11].v[0]};
    const std::size_t tri[2][3] = {{i00, i10, i11}, {i00, i11, i01}};
    const double* corners[2][3] = {{q00, q10, q11}, {q00, q11, q01}};
    for (int t = 0; t < 2; ++t) {
        double wa, wb, wc;
        if (!barycentric(px, pv, corners[t][0], corners[t][1], corners[t][2], wa, wb, wc)) continue;
        const auto& s0 = map_.starters[tri[t][0]];
        const auto& s1 = map_.starters[tri[t][1]];
        const auto& s2 = map_.starters[tri[t][2]];
        out = PhasePoint(wa * s0.x[0] + wb * s1.x[0] + wc * s2.x[0],
                         wa * s0.v[0] + wb * s1.v[0] + wc * s2.v[0]);
        return true;
    }
    return false;
}

bool InverseFlowIndex::query_impl(const PhasePoint& z, PhasePoint& out) const {
    const double px = z.x[0], pv = z.v[0];
    if (px < bxlo_ || px > bxhi_ || pv < bvlo_ || pv > bvhi_) return false;
    const double wx = (bxhi_ - bxlo_) / bins_, wv = (bvhi_ - bvlo_) / bins_;
    const int bi = std::clamp(wx > 0 ? static_cast<int>((px - bxlo_) / wx) : 0, 0, bins_ - 1);
    const int bj = std::clamp(wv > 0 ? static_cast<int>((pv - bvlo_) / wv) : 0, 0, bins_ - 1);
    for (int cell : bin_cells_[static_cast<std::size_t>(bi) * bins_ + bj])
        if (try_cell(cell, px, pv, out)) return true;
    return false;
}

PhasePoint InverseFlowIndex::query(const PhasePoint& z) const {
    PhasePoint out;
    if (!query_impl(z, out))
        throw query_outside_image("inverse_flow: query not covered by the deformed lattice");
    return out;
}

bool InverseFlowIndex::covers(const PhasePoint& z) const {
    PhasePoint out;
    return query_impl(z, out);
}

PhasePoint inverse_flow(const FlowMap& map, const PhasePoint& z) {
    InverseFlowIndex index(map);
    return index.query(z);
}

Vec difference_quotient(const DriftField& F, const PhasePoint& z, double h, int direction,
                        const NoisePath& path, const SdeOptions& opt, double T) {
    if (!(h > 0.0)) throw std::invalid_argument("difference_quotient: h must be > 0");
    const int d = z.dim();
    Vec shifted = z.flat();
    shifted[direction] += h;

    SdeOptions run = opt;
    run.T = T;
    Trajectory base = integrate_sde(F, z, path, run);
    Trajectory bump = integrate_sde(F, PhasePoint::from_flat(shifted), path, run);
    const Vec a = base.back_state().flat();
    const Vec b = bump.back_state().flat();
    Vec out(2 * d);
    for (int i = 0; i < 2 * d; ++i) out[i] = (b[i] - a[i]) / h;
    return out;
}

}  // namespace klab
