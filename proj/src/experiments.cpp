#include "klab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "klab/characteristics.hpp"
#include "klab/diagnostics.hpp"
#include "klab/noise.hpp"
#include "klab/norms.hpp"
#include "klab/ou.hpp"
#include "klab/resolvent.hpp"
#include "klab/sde.hpp"
#include "klab/stats.hpp"
#include "klab/transport.hpp"

namespace klab {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

nlohmann::json drift_to_json(const DriftSpec& spec) {
    nlohmann::json j;
    switch (spec.kind) {
        case DriftKind::Zero: j["kind"] = "zero"; break;
        case DriftKind::Constant:
            j["kind"] = "constant";
            j["c"] = spec.constant;
            break;
        case DriftKind::Product:
            j["kind"] = "product";
            j["phi_scale"] = spec.phi.scale;
            j["g_scale"] = spec.g.scale;
            break;
        case DriftKind::Counterexample:
            j["kind"] = "counterexample";
            j["alpha"] = spec.alpha;
            j["sign"] = spec.sign;
            j["r_inner"] = spec.cutoff.r_inner;
            j["r_outer"] = spec.cutoff.r_outer;
            break;
        case DriftKind::GridSampled: j["kind"] = "grid"; break;
    }
    return j;
}

class ArtifactWriter {
public:
    ArtifactWriter(const ExperimentConfig& cfg, RunReport& report) : cfg_(cfg), report_(report) {
        std::filesystem::create_directories(cfg.out_dir);
    }

    std::string path(const std::string& file) const { return cfg_.out_dir + "/" + file; }

    void csv(const std::string& file, const std::string& header,
             const std::vector<std::vector<double>>& rows) {
        std::ofstream out(path(file));
        out << header << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt(row[i]);
            out << '\n';
        }
        report_.artifacts.push_back(file);
    }

    void json_file(const std::string& file, const nlohmann::json& j) {
        std::ofstream out(path(file));
        out << j.dump(2) << '\n';
        report_.artifacts.push_back(file);
    }

    // Minimal static SVG line chart from one or more (x, y) series.
    void svg(const std::string& file, const std::string& title, bool logx, bool logy,
             const std::vector<std::pair<std::vector<double>, std::vector<double>>>& series) {
        if (!cfg_.plot) return;
        const double W = 640, H = 420, m = 60;
        double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
        auto tx = [&](double v) { return logx ? std::log10(std::max(v, 1e-300)) : v; };
        auto ty = [&](double v) { return logy ? std::log10(std::max(v, 1e-300)) : v; };
        for (const auto& s : series)
            for (std::size_t i = 0; i < s.first.size(); ++i) {
                xlo = std::min(xlo, tx(s.first[i]));
                xhi = std::max(xhi, tx(s.first[i]));
                ylo = std::min(ylo, ty(s.second[i]));
                yhi = std::max(yhi, ty(s.second[i]));
            }
        if (xhi <= xlo) xhi = xlo + 1;
        if (yhi <= ylo) yhi = ylo + 1;
        std::ofstream out(path(file));
        out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
        out << "<rect width='100%' height='100%' fill='white'/>\n";
        out << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
            << "</text>\n";
        out << "<line x1='" << m << "' y1='" << H - m << "' x2='" << W - m << "' y2='" << H - m
            << "' stroke='black'/>\n";
        out << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << H - m
            << "' stroke='black'/>\n";
        const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
        int ci = 0;
        for (const auto& s : series) {
            out << "<polyline fill='none' stroke='" << colors[ci % 5] << "' stroke-width='1.5' points='";
            for (std::size_t i = 0; i < s.first.size(); ++i) {
                const double px = m + (tx(s.first[i]) - xlo) / (xhi - xlo) * (W - 2 * m);
                const double py = H - m - (ty(s.second[i]) - ylo) / (yhi - ylo) * (H - 2 * m);
                out << px << ',' << py << ' ';
            }
            out << "'/>\n";
            ++ci;
        }
        out << "</svg>\n";
        report_.artifacts.push_back(file);
    }

    void manifest() {
        nlohmann::json j;
        j["experiment"] = cfg_.name;
        j["version"] = kVersion;
        j["seed"] = cfg_.seed;
        j["config_hash"] = cfg_.config_hash();
        j["config"] = nlohmann::json::parse(cfg_.canonical_json());
        j["artifacts"] = report_.artifacts;
        nlohmann::json verdicts = nlohmann::json::array();
        for (const auto& v : report_.verdicts)
            verdicts.push_back({{"name", v.name}, {"pass", v.pass}, {"details", v.details}});
        j["verdicts"] = verdicts;
        std::ofstream out(path("manifest.json"));
        out << j.dump(2) << '\n';
    }

private:
    const ExperimentConfig& cfg_;
    RunReport& report_;
};

void add_verdict(RunReport& report, const std::string& name, bool pass, const std::string& details) {
    report.verdicts.push_back({name, pass, details});
}

DriftField build_drift(const ExperimentConfig& cfg) { return make_drift(cfg.drift); }

GridFunction default_grid(const ExperimentConfig& cfg) {
    return GridFunction::uniform(2 * cfg.d, cfg.L, cfg.n, Boundary::Periodic);
}

// ---------------------------------------------------------------------------
// individual experiments
// ---------------------------------------------------------------------------

void run_ou_check(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    std::vector<std::vector<double>> rows;
    double max_entry_err = 0.0, max_logdet_err = 0.0;
    for (double t : {0.1, 1.0, 10.0}) {
        for (int d : {1, 2}) {
            const OuTransition tr = ou_covariance(t, d);
            const double e11 = std::abs(tr.cov(0, 0) - t * t * t / 3.0);
            const double e12 = std::abs(tr.cov(0, d) - t * t / 2.0);
            const double e22 = std::abs(tr.cov(d, d) - t);
            const double elog = std::abs(tr.logdet - d * std::log(t * t * t * t / 12.0));
            max_entry_err = std::max({max_entry_err, e11, e12, e22});
            max_logdet_err = std::max(max_logdet_err, elog);
            rows.push_back({t, static_cast<double>(d), tr.cov(0, 0), tr.cov(0, d), tr.cov(d, d), tr.logdet});
        }
    }
    w.csv("ou_covariance.csv", "t,d,q_xx,q_xv,q_vv,logdet", rows);
    add_verdict(report, "covariance-exact", max_entry_err < 1e-12,
                "max entry error " + fmt(max_entry_err));
    add_verdict(report, "logdet-identity", max_logdet_err < 1e-10,
                "max logdet error " + fmt(max_logdet_err));

    // Sampler moments at t = 1, d = 1.
    const int n_samples = std::max(cfg.n_paths, 1000);
    Rng rng = Rng::for_stream(cfg.seed, 1);
    double sxx = 0, sxv = 0, svv = 0;
    for (int i = 0; i < n_samples; ++i) {
        const PhasePoint p = ou_sample(PhasePoint(0.0, 0.0), 1.0, rng);
        sxx += p.x[0] * p.x[0];
        sxv += p.x[0] * p.v[0];
        svv += p.v[0] * p.v[0];
    }
    sxx /= n_samples;
    sxv /= n_samples;
    svv /= n_samples;
    const double rel = std::max({std::abs(sxx - 1.0 / 3) / (1.0 / 3), std::abs(sxv - 0.5) / 0.5,
                                 std::abs(svv - 1.0)});
    w.csv("ou_sample_cov.csv", "n,q_xx,q_xv,q_vv", {{static_cast<double>(n_samples), sxx, sxv, svv}});
    add_verdict(report, "sampler-cov", rel < 0.05, "max relative error " + fmt(rel));
}

void run_resolvent(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const double lambda = 10.0;
    const GridFunction proto = default_grid(cfg);
    const ResolventConfig rc = ResolventConfig::for_lambda(lambda, QuadRule::GaussLaguerre, 48);

    GridFunction ones = proto, vfun = proto, xfun = proto;
    std::vector<double> z(proto.rank());
    for (std::size_t i = 0; i < proto.size(); ++i) {
        ones.node_coords(i, z);
        ones[i] = 1.0;
        vfun[i] = z[cfg.d];
        xfun[i] = z[0];
    }
    const GridFunction r1 = resolvent_apply(ones, rc);
    const GridFunction rv = resolvent_apply(vfun, rc);
    const GridFunction rx = resolvent_apply(xfun, rc);
    double e1 = 0, ev = 0, ex = 0;
    for (std::size_t i = 0; i < proto.size(); ++i) {
        proto.node_coords(i, z);
        e1 = std::max(e1, std::abs(r1[i] - 1.0 / lambda));
        ev = std::max(ev, std::abs(rv[i] - z[cfg.d] / lambda));
        ex = std::max(ex, std::abs(rx[i] - (z[0] / lambda + z[cfg.d] / (lambda * lambda))));
    }
    w.csv("resolvent_oracles.csv", "oracle,sup_error", {{1, e1}, {2, ev}, {3, ex}});
    add_verdict(report, "resolvent-oracles", e1 < 1e-6 && ev < 1e-6 && ex < 1e-6,
                "sup errors " + fmt(e1) + ", " + fmt(ev) + ", " + fmt(ex));

    nlohmann::json rep;
    rep["lambda"] = lambda;
    rep["rule"] = "gauss-laguerre";
    rep["n_quad"] = 48;
    rep["sup_errors"] = {e1, ev, ex};
    w.json_file("resolvent_report.json", rep);
}

void run_zvonkin(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const DriftField F = build_drift(cfg);
    const GridFunction proto = default_grid(cfg);

    std::vector<std::vector<double>> rows;
    std::vector<double> estimates;
    for (double lambda : cfg.lambda_sweep) {
        const ResolventConfig rc = ResolventConfig::for_lambda(lambda);
        GridFunction g = proto;
        std::vector<double> z(proto.rank());
        Vec Fz(cfg.d);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.node_coords(i, z);
            F.eval(z.data(), Fz.data());
            g[i] = Fz[0];
        }
        double estimate = std::numeric_limits<double>::infinity();
        int iters = 0;
        try {
            const DriftSolveResult r = solve_with_drift(g, F, rc);
            estimate = r.contraction_estimate;
            iters = r.iterations;
        } catch (const divergence_error& e) {
            estimate = e.contraction_estimate;
            iters = e.iterations;
        }
        estimates.push_back(estimate);
        rows.push_back({lambda, estimate, static_cast<double>(iters)});
    }
    w.csv("contraction_sweep.csv", "lambda,contraction_estimate,iterations", rows);
    bool decreasing = true;
    for (std::size_t i = 1; i < estimates.size(); ++i)
        if (!(estimates[i] < estimates[i - 1])) decreasing = false;
    const bool some_contractive =
        std::any_of(estimates.begin(), estimates.end(), [](double e) { return e < 1.0; });
    add_verdict(report, "contraction-sweep", decreasing && some_contractive,
                "estimates decreasing=" + std::string(decreasing ? "yes" : "no"));

    try {
        const ZvonkinCorrector U = build_zvonkin_U(F, proto, cfg.lambda_sweep);
        add_verdict(report, "corrector-certificate", U.certificate() < 0.5,
                    "lambda=" + fmt(U.lambda_used) + " |U|=" + fmt(U.sup_u) + " |DU|=" + fmt(U.sup_du));
        // resolvent report with the a-priori estimate terms for psi = u~_1:
        // lambda |psi|_p, sqrt(lambda) |D_v psi|_p, |D^2_v psi|_p, |v.D_x psi|_p
        const GridFunction& psi = U.u_tilde[0];
        const double p = 2.0;
        const GridFunction dv = derivative_axis(psi, 1);
        const GridFunction dvv = derivative_axis(dv, 1);
        GridFunction vdx = derivative_axis(psi, 0);
        std::vector<double> z(2);
        for (std::size_t i = 0; i < vdx.size(); ++i) {
            vdx.node_coords(i, z);
            vdx[i] *= z[1];
        }
        nlohmann::json rep;
        rep["lambda"] = U.lambda_used;
        rep["contraction_estimate"] = U.contraction_estimate;
        rep["iterations"] = U.iterations;
        rep["sup_u"] = U.sup_u;
        rep["sup_du"] = U.sup_du;
        rep["norms_p2"] = {{"lambda_psi", U.lambda_used * psi.lp_norm(p)},
                           {"sqrt_lambda_dv_psi", std::sqrt(U.lambda_used) * dv.lp_norm(p)},
                           {"d2v_psi", dvv.lp_norm(p)},
                           {"v_dx_psi", vdx.lp_norm(p)}};
        w.json_file("zvonkin_report.json", rep);
        w.svg("contraction.svg", "contraction estimate vs lambda", true, true,
              {{cfg.lambda_sweep, estimates}});
    } catch (const no_admissible_lambda& e) {
        add_verdict(report, "corrector-certificate", false, e.what());
    }
}

void run_counterexample(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const double alpha = cfg.drift.kind == DriftKind::Counterexample ? cfg.drift.alpha : 0.6;
    const DriftField F = DriftField::counterexample(1, alpha, 1, cfg.drift.cutoff);
    const BranchSolution branch = BranchSolution::make(alpha, 1);
    const double t_valid = branch_validity_window(branch, cfg.drift.cutoff);

    // Zero branch vs seeded branch from indistinguishable data.
    const double eps = 1e-6;
    const PhasePoint seed_state = branch_solution(BranchSolution::make(alpha, 1), eps);
    const double T = std::min(0.9 * t_valid, cfg.T > 0 ? std::max(cfg.T, 0.5) : 0.5);
    const double dt = 1e-4;
    const OdeTrajectory rest = integrate_ode(F, PhasePoint(0.0, 0.0), T, dt, 100);
    const OdeTrajectory seeded = integrate_ode(F, seed_state, T, dt, 100);
    write_trajectory_csv(w.path("branches.csv"), {rest, seeded});
    report.artifacts.push_back("branches.csv");

    const double sep = phase_distance(rest.back_state(), seeded.back_state());
    double max_res = 0.0;
    for (int k = 1; k <= 64; ++k)
        max_res = std::max(max_res, branch_ode_residual(branch, F, t_valid * k / 64.0));
    add_verdict(report, "non-uniqueness", sep > 1e3 * seed_state.norm(),
                "separation " + fmt(sep) + " from seed " + fmt(seed_state.norm()));
    add_verdict(report, "branch-residual", max_res < 1e-9, "max residual " + fmt(max_res));

    std::vector<std::vector<double>> rows;
    for (const auto& p : reached_set(alpha, std::min(T, t_valid), 65))
        rows.push_back({p.t0, static_cast<double>(p.sign), p.z.x[0], p.z.v[0]});
    w.csv("reached_set.csv", "t0,sign,x,v", rows);

    std::vector<std::pair<std::vector<double>, std::vector<double>>> series;
    {
        std::vector<double> xs, vs;
        for (const auto& p : reached_set(alpha, std::min(T, t_valid), 65)) {
            xs.push_back(p.z.x[0]);
            vs.push_back(p.z.v[0]);
        }
        series.push_back({xs, vs});
    }
    w.svg("reached_set.svg", "reached set Lambda_t", false, false, series);
}

void run_flow_holder(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const DriftField F = build_drift(cfg);
    std::vector<double> seps;
    for (double s = 1e-3; s < 1.5e-1; s *= std::sqrt(10.0)) seps.push_back(s);
    const int n_paths = std::min(cfg.n_paths, 400);
    const HolderRegression reg = holder_exponent_regression(
        F, 2.0, 0.5, seps, n_paths, PhasePoint(0.0, 0.0), {1.0, 0.0}, cfg.dt, cfg.seed);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < seps.size(); ++i) rows.push_back({seps[i], reg.moments[i]});
    w.csv("holder_regression.csv", "separation,moment_a2", rows);
    w.svg("holder.svg", "E|Z-Y|^2 vs |z-y|", true, true, {{reg.separations, reg.moments}});
    add_verdict(report, "holder-slope", reg.slope >= 1.7, "slope " + fmt(reg.slope));

    std::vector<std::pair<PhasePoint, PhasePoint>> pairs;
    Rng rng = Rng::for_stream(cfg.seed, 7);
    for (int i = 0; i < 1000; ++i) {
        const double sx = 1e-3 * std::pow(10.0, 2.0 * rng.uniform01());
        pairs.push_back({PhasePoint(sx / 2, 0.0), PhasePoint(-sx / 2, 0.0)});
    }
    const InjectivityReport inj = injectivity_margin(F, pairs, -1.0, 0.5, 1, cfg.dt, cfg.seed + 1);
    add_verdict(report, "injectivity-no-collapse", inj.collapse_events == 0,
                "collapses " + std::to_string(inj.collapse_events) + ", estimate " + fmt(inj.estimate));
    w.json_file("injectivity_diag.json",
                {{"estimator", "negative_moment_a-1"},
                 {"n_paths", static_cast<int>(pairs.size())},
                 {"value", inj.estimate},
                 {"SE", 0.0},
                 {"band", 0.0},
                 {"seed", cfg.seed + 1},
                 {"collapse_events", inj.collapse_events}});

    // numeric surjectivity: probe an interior box against the deformed lattice
    const double T = 0.4;
    const NoisePath path = brownian_path(derive_seed(cfg.seed, 0xC0), T, cfg.dt, 1);
    StarterLattice lat;
    lat.d = 1;
    lat.lo = {-4.0, -4.0};
    lat.hi = {4.0, 4.0};
    lat.counts = {61, 61};
    SdeOptions opt;
    opt.dt = cfg.dt;
    opt.scheme = scheme_from_name(cfg.scheme);
    ZvonkinCorrector corrector = ZvonkinCorrector::identity(cfg.d);
    if (opt.scheme == Scheme::ZvonkinTransformed) {
        corrector = build_zvonkin_U(F, default_grid(cfg), cfg.lambda_sweep);
        opt.corrector = &corrector;
        opt.lambda = corrector.lambda_used;
    }
    const FlowMap map = flow_ensemble(F, lat, path, opt, T);
    double wsum = 0.0, iw = 0.0;
    for (int k = 0; k < static_cast<int>(std::llround(T / path.dt)); ++k) {
        iw += wsum * path.dt;
        wsum += path.increment(k)[0];
    }
    const Vec lo = {-1.0 + iw, -1.0 + wsum}, hi = {1.0 + iw, 1.0 + wsum};
    const CoverageReport cov = surjectivity_coverage(F, map, path, opt, lo, hi, 7, 10.0 * 8.0 / 60.0);
    add_verdict(report, "surjectivity-coverage", cov.fraction == 1.0,
                "covered " + std::to_string(cov.covered) + "/" + std::to_string(cov.probes));
}

void run_girsanov(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const DriftField F = build_drift(cfg);
    const int n_paths = std::max(cfg.n_paths, 1000);
    std::vector<double> phis(n_paths);
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t i) {
        const NoisePath path = brownian_path(derive_seed(cfg.seed, i), cfg.T, cfg.dt, cfg.d);
        phis[i] = girsanov_weight(F, path, PhasePoint(0.0, 0.5), cfg.dt).phi;
    });
    const McEstimate m = mc_estimate(phis);
    w.csv("girsanov_mean.csv", "n,mean_phi,se", {{static_cast<double>(n_paths), m.value, m.se}});
    w.json_file("girsanov_diag.json",
                {{"estimator", "mean_phi_T"},
                 {"n_paths", n_paths},
                 {"value", m.value},
                 {"SE", m.se},
                 {"band", m.band(3.0)},
                 {"seed", cfg.seed}});
    add_verdict(report, "martingale-mean-one", std::abs(m.value - 1.0) <= m.band(3.0),
                "mean " + fmt(m.value) + " +- " + fmt(m.se));

    const Observable h = [](const PhasePoint& p) {
        const double r2 = p.x[0] * p.x[0] + p.v[0] * p.v[0];
        return r2 < 4.0 ? std::exp(1.0 - 1.0 / (1.0 - r2 / 4.0)) : 0.0;
    };
    const ReweightedComparison cmp =
        weak_expectation_reweighted(h, F, cfg.T, std::min(cfg.n_paths, 4000), PhasePoint(0.0, 0.5),
                                    cfg.dt, cfg.seed + 1);
    const double gap = std::abs(cmp.direct.value - cmp.reweighted.value);
    const double band = 2.0 * (cmp.direct.band(3.0) + cmp.reweighted.band(3.0));
    w.csv("girsanov_reweighted.csv", "direct,direct_se,reweighted,reweighted_se,ess",
          {{cmp.direct.value, cmp.direct.se, cmp.reweighted.value, cmp.reweighted.se, cmp.ess}});
    add_verdict(report, "reweighted-agreement", gap <= band,
                "gap " + fmt(gap) + " band " + fmt(band));
}

void run_derivative(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const DriftField F = build_drift(cfg);
    const int n_paths = std::min(cfg.n_paths, 300);
    const std::vector<double> hs = {1e-1, 1e-2, 1e-3, 1e-4};
    std::vector<std::vector<double>> rows;
    std::vector<double> means;
    SdeOptions opt;
    opt.dt = cfg.dt;
    for (double h : hs) {
        std::vector<double> sq(n_paths);
        parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t i) {
            const NoisePath path = brownian_path(derive_seed(cfg.seed, i), cfg.T, cfg.dt, cfg.d);
            const Vec theta = difference_quotient(F, PhasePoint(0.3, 0.2), h, 0, path, opt, cfg.T);
            double s = 0.0;
            for (double c : theta) s += c * c;
            sq[i] = s;
        });
        means.push_back(mean(sq));
        rows.push_back({h, means.back()});
    }
    w.csv("difference_quotients.csv", "h,mean_theta_sq", rows);
    const double lo = *std::min_element(means.begin(), means.end());
    const double hi = *std::max_element(means.begin(), means.end());
    add_verdict(report, "h-sweep-stability", (hi - lo) / lo < 0.5,
                "variation " + fmt((hi - lo) / lo));
}

void run_spde_regularity(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const DriftField F = build_drift(cfg);
    const InitialField f0 = [](const PhasePoint& p) {
        return std::exp(-0.5 * (p.x[0] * p.x[0] + p.v[0] * p.v[0])) * (1.0 + 0.5 * p.x[0]);
    };
    // snapshots honor the requested integrator; the Zvonkin scheme needs its
    // corrector, built once from the configured sweep
    const Scheme scheme = scheme_from_name(cfg.scheme);
    ZvonkinCorrector corrector = ZvonkinCorrector::identity(cfg.d);
    if (scheme == Scheme::ZvonkinTransformed)
        corrector = build_zvonkin_U(F, default_grid(cfg), cfg.lambda_sweep);
    // Weak-form residual decay under dt halving.
    const GridFunction proto = GridFunction::uniform(2, 4.0, 48, Boundary::ZeroExtended);
    const TestFunction phi = test_function_catalog(1, 2.0)[0];
    std::vector<double> dts = {cfg.dt * 4, cfg.dt * 2, cfg.dt};
    std::vector<double> rms;
    for (double dt : dts)
        rms.push_back(weak_form_residual(f0, F, 0.5, phi, std::min(cfg.n_paths, 8), dt, proto,
                                         cfg.seed, cfg.dt).rms);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        lx.push_back(std::log(dts[i]));
        ly.push_back(std::log(rms[i]));
    }
    const double slope = linear_fit(lx, ly).slope;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < dts.size(); ++i) rows.push_back({dts[i], rms[i]});
    w.csv("weak_form_rms.csv", "dt,rms_residual", rows);
    w.svg("weakform.svg", "weak-form residual vs dt", true, true, {{dts, rms}});
    add_verdict(report, "weak-form-decay", slope >= 0.4, "slope " + fmt(slope));

    // field snapshots in the lattice format, one file per (t, path)
    const GridFunction qproto = GridFunction::uniform(2, 2.0, 48, Boundary::ZeroExtended);
    nlohmann::json summary;
    summary["snapshots"] = nlohmann::json::array();
    for (std::uint64_t pi : {0ull, 1ull}) {
        const NoisePath path = brownian_path(derive_seed(cfg.seed, 0xF00 + pi), 0.5, cfg.dt, 1);
        for (double t : {0.25, 0.5}) {
            SpdeSolveConfig scfg;
            scfg.dt = cfg.dt;
            scfg.scheme = scheme;
            if (scheme == Scheme::ZvonkinTransformed) {
                scfg.corrector = &corrector;
                scfg.lambda = corrector.lambda_used;
            }
            const TransportField tf = spde_solve(f0, F, t, qproto, path, scfg);
            char name[64];
            std::snprintf(name, sizeof(name), "field_t%03d_p%llu.grid",
                          static_cast<int>(t * 100), static_cast<unsigned long long>(pi));
            tf.field.save(w.path(name));
            report.artifacts.push_back(name);
            summary["snapshots"].push_back({{"t", t},
                                            {"path", pi},
                                            {"path_seed", tf.path_seed},
                                            {"file", name},
                                            {"sup", tf.field.sup_norm()}});
        }
    }
    w.json_file("field_summary.json", summary);
}

void run_uniqueness(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const DriftField F = build_drift(cfg);
    const GridFunction proto = GridFunction::uniform(2, cfg.L, 64, Boundary::Periodic);
    const std::vector<double> t_grid = {0.0, 0.1, 0.2, 0.3};
    const EnergyReport zero =
        energy_uniqueness_check(F, 0.0, t_grid, 1, proto, cfg.dt, cfg.seed);
    const EnergyReport pert =
        energy_uniqueness_check(F, 1e-3, t_grid, std::min(cfg.n_paths, 8), proto, cfg.dt, cfg.seed);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        rows.push_back({t_grid[i], zero.g_hat[i], pert.g_hat[i]});
    w.csv("energy.csv", "t,g_zero,g_perturbed", rows);
    const double zmax = *std::max_element(zero.g_hat.begin(), zero.g_hat.end());
    add_verdict(report, "zero-datum", zmax <= 1e-20, "max g " + fmt(zmax));
    add_verdict(report, "gronwall-envelope", pert.worst_ratio <= 1.1,
                "worst ratio " + fmt(pert.worst_ratio) + " divv " + fmt(pert.div_v_sup));
}

void run_norms(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    std::vector<std::vector<double>> rows;
    bool scaling_ok = true;
    for (double s : {0.5, 0.7}) {
        for (int k : {1, 2, 4}) {
            GridFunction f = GridFunction::uniform(1, M_PI, 256, Boundary::Periodic);
            for (int i = 0; i < f.n(); ++i) f[i] = std::sin(k * f.node(0, i));
            NormParams params;
            params.s = s;
            params.p = 4;
            params.q = 4;
            const BesselNorm bn = bessel_norm(f, params);
            const double ratio = bn.seminorm / bn.lp;
            if (std::abs(ratio - std::pow(k, s)) / std::pow(k, s) > 0.05) scaling_ok = false;
            rows.push_back({s, static_cast<double>(k), bn.lp, bn.seminorm, ratio});
        }
    }
    w.csv("bessel_scaling.csv", "s,k,lp,seminorm,ratio", rows);
    add_verdict(report, "mode-scaling", scaling_ok, "pure-mode |xi|^s multiplier");

    const GridFunction proto = GridFunction::uniform(2, cfg.L, 128, Boundary::Periodic);
    const DriftField F = DriftField::counterexample(1, 0.6, 1, cfg.drift.cutoff);
    const HypothesisVerdict good = hypothesis_check(F, 0.7, 8, proto);
    const DriftField bad = DriftField::product(
        1, Profile1D{Profile1D::Kind::Gaussian, 1e9, 0.0},  // no v decay
        Profile1D{Profile1D::Kind::SignPower, 1.0, 0.0});   // sign(x)
    const HypothesisVerdict synth = hypothesis_check(bad, 0.7, 8, proto);
    nlohmann::json j;
    j["counterexample"] = {{"value", good.value}, {"refined", good.refined},
                           {"box_grown", good.box_grown}, {"pass", good.pass}};
    j["synthetic"] = {{"value", synth.value}, {"refined", synth.refined},
                      {"box_grown", synth.box_grown}, {"pass", synth.pass}};
    w.json_file("hypothesis_check.json", j);
    add_verdict(report, "hypothesis-verdicts", good.pass && !synth.pass,
                "counterexample PASS=" + std::string(good.pass ? "1" : "0") +
                    " synthetic PASS=" + std::string(synth.pass ? "1" : "0"));
}

void run_mollify(const ExperimentConfig& cfg, RunReport& report, ArtifactWriter& w) {
    const DriftField F = build_drift(cfg);
    const GridFunction proto = default_grid(cfg);
    std::vector<double> widths;
    for (int n = 2; n <= 5; ++n) widths.push_back(std::pow(2.0, -n));
    std::vector<PhasePoint> starters = {PhasePoint(0.0, 0.0), PhasePoint(0.5, -0.5),
                                        PhasePoint(-1.0, 0.5)};
    const MollifiedConvergence mc = mollified_convergence(
        F, widths, starters, proto, 0.5, std::min(cfg.n_paths, 64), cfg.dt, cfg.seed);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < widths.size(); ++i) rows.push_back({widths[i], mc.discrepancy[i]});
    w.csv("mollified_convergence.csv", "width,discrepancy", rows);
    w.svg("mollify.svg", "flow discrepancy vs mollifier width", true, true,
          {{mc.widths, mc.discrepancy}});
    bool decreasing = true;
    for (std::size_t i = 1; i < mc.discrepancy.size(); ++i)
        if (mc.discrepancy[i] > 1.1 * mc.discrepancy[i - 1]) decreasing = false;
    add_verdict(report, "mollified-decreasing", decreasing, "sequence within 10% monotone band");
}

}  // namespace

// ---------------------------------------------------------------------------

std::string ExperimentConfig::canonical_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["drift"] = drift_to_json(drift);
    j["numeric"] = {{"d", d}, {"L", L}, {"n", n}, {"dt", dt}, {"T", T},
                    {"lambda_sweep", lambda_sweep}};
    j["mc"] = {{"n_paths", n_paths}, {"seed", seed}};
    j["outputs"] = {{"dir", out_dir}, {"format", format}, {"scheme", scheme}};
    return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const {
    // hash the scientific content only; the destination directory is not part
    // of the run identity
    ExperimentConfig c = *this;
    c.out_dir.clear();
    return fnv1a(c.canonical_json());
}

const std::vector<std::string>& experiment_registry() {
    static const std::vector<std::string> names = {
        "counterexample", "ou-check", "resolvent",       "zvonkin",    "flow-holder", "girsanov",
        "derivative",     "spde-regularity", "uniqueness", "norms",      "mollify"};
    return names;
}

ParseResult parse_config(const std::string& text) {
    ParseResult result;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        result.errors.push_back({"<document>", e.what()});
        return result;
    }
    ExperimentConfig& cfg = result.config;
    auto& errors = result.errors;

    if (j.contains("name")) {
        cfg.name = j["name"].get<std::string>();
        const auto& reg = experiment_registry();
        if (std::find(reg.begin(), reg.end(), cfg.name) == reg.end())
            errors.push_back({"name", "unknown experiment '" + cfg.name + "'"});
    }
    if (j.contains("numeric")) {
        const auto& n = j["numeric"];
        if (n.contains("d")) cfg.d = n["d"].get<int>();
        if (n.contains("L")) cfg.L = n["L"].get<double>();
        if (n.contains("n")) cfg.n = n["n"].get<int>();
        if (n.contains("dt")) cfg.dt = n["dt"].get<double>();
        if (n.contains("T")) cfg.T = n["T"].get<double>();
        if (n.contains("lambda_sweep")) cfg.lambda_sweep = n["lambda_sweep"].get<std::vector<double>>();
        if (cfg.d < 1 || cfg.d > 3) errors.push_back({"numeric.d", "d must lie in {1,2,3}"});
        if (cfg.n < 8) errors.push_back({"numeric.n", "need n >= 8 per axis"});
        if (!(cfg.dt > 0)) errors.push_back({"numeric.dt", "dt must be positive"});
        if (!(cfg.T > 0)) errors.push_back({"numeric.T", "T must be positive"});
        if (!(cfg.L > 0)) errors.push_back({"numeric.L", "L must be positive"});
        if (!std::is_sorted(cfg.lambda_sweep.begin(), cfg.lambda_sweep.end()))
            errors.push_back({"numeric.lambda_sweep", "sweep must ascend"});
    }
    if (j.contains("mc")) {
        const auto& m = j["mc"];
        if (m.contains("n_paths")) cfg.n_paths = m["n_paths"].get<int>();
        if (m.contains("seed")) cfg.seed = m["seed"].get<std::uint64_t>();
        if (cfg.n_paths < 1) errors.push_back({"mc.n_paths", "need n_paths >= 1"});
    }
    if (j.contains("outputs")) {
        const auto& o = j["outputs"];
        if (o.contains("dir")) cfg.out_dir = o["dir"].get<std::string>();
        if (o.contains("format")) cfg.format = o["format"].get<std::string>();
        if (o.contains("scheme")) cfg.scheme = o["scheme"].get<std::string>();
        if (cfg.format != "csv" && cfg.format != "json")
            errors.push_back({"outputs.format", "format must be csv or json"});
        if (cfg.scheme != "em" && cfg.scheme != "split" && cfg.scheme != "zvonkin")
            errors.push_back({"outputs.scheme", "scheme must be em, split or zvonkin"});
    }
    cfg.drift.kind = DriftKind::Counterexample;
    cfg.drift.d = cfg.d;
    if (j.contains("drift")) {
        const auto& dj = j["drift"];
        const std::string kind = dj.value("kind", "counterexample");
        if (kind == "zero") cfg.drift.kind = DriftKind::Zero;
        else if (kind == "constant") {
            cfg.drift.kind = DriftKind::Constant;
            cfg.drift.constant = dj.value("c", Vec(cfg.d, 0.0));
            if (static_cast<int>(cfg.drift.constant.size()) != cfg.d)
                errors.push_back({"drift.c", "constant vector must have d components"});
        } else if (kind == "product") {
            cfg.drift.kind = DriftKind::Product;
            cfg.drift.phi = {Profile1D::Kind::Bump, dj.value("phi_scale", 2.0), 0.0};
            cfg.drift.g = {Profile1D::Kind::SignPower, 1.0, dj.value("alpha", 0.6)};
        } else if (kind == "counterexample") {
            cfg.drift.kind = DriftKind::Counterexample;
            cfg.drift.alpha = dj.value("alpha", 0.6);
            cfg.drift.sign = dj.value("sign", 1);
            cfg.drift.cutoff.r_inner = dj.value("r_inner", 2.0);
            cfg.drift.cutoff.r_outer = dj.value("r_outer", 4.0);
            if (!(cfg.drift.alpha > 0.5) || !(cfg.drift.alpha < 1.0))
                errors.push_back({"drift.alpha", "alpha must lie in (1/2, 1)"});
            if (!(cfg.drift.cutoff.r_inner > 0) ||
                !(cfg.drift.cutoff.r_inner < cfg.drift.cutoff.r_outer))
                errors.push_back({"drift.cutoff", "need 0 < r_inner < r_outer"});
            if (cfg.drift.sign != 1 && cfg.drift.sign != -1)
                errors.push_back({"drift.sign", "sign must be +1 or -1"});
        } else {
            errors.push_back({"drift.kind", "unknown drift kind '" + kind + "'"});
        }
    }
    return result;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
    RunReport report;
    ArtifactWriter writer(cfg, report);

    if (cfg.name == "ou-check") run_ou_check(cfg, report, writer);
    else if (cfg.name == "resolvent") run_resolvent(cfg, report, writer);
    else if (cfg.name == "zvonkin") run_zvonkin(cfg, report, writer);
    else if (cfg.name == "counterexample") run_counterexample(cfg, report, writer);
    else if (cfg.name == "flow-holder") run_flow_holder(cfg, report, writer);
    else if (cfg.name == "girsanov") run_girsanov(cfg, report, writer);
    else if (cfg.name == "derivative") run_derivative(cfg, report, writer);
    else if (cfg.name == "spde-regularity") run_spde_regularity(cfg, report, writer);
    else if (cfg.name == "uniqueness") run_uniqueness(cfg, report, writer);
    else if (cfg.name == "norms") run_norms(cfg, report, writer);
    else if (cfg.name == "mollify") run_mollify(cfg, report, writer);
    else throw std::invalid_argument("run_experiment: '" + cfg.name + "' is not in the registry");

    writer.manifest();
    return report;
}

}  // namespace klab
