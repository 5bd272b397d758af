#pragma once

#include <vector>

#include "klab/drift.hpp"
#include "klab/grid.hpp"

namespace klab {

/// Smoothness / integrability indices. p is restricted to even integers so
/// grid powers stay fast and exact.
struct NormParams {
    double s = 0.7;
    int p = 8;
    int q = 8;

    void validate_p() const;
};

struct BesselNorm {
    double lp = 0.0;        // |f|_p
    double seminorm = 0.0;  // |F^{-1}[|.|^s F f]|_p
    double total = 0.0;
};

/// Bessel norm via the discrete Fourier multiplier |xi|^s over all axes of f.
/// Requires Periodic boundary.
BesselNorm bessel_norm(const GridFunction& f, const NormParams& params);

/// Besov seminorm [f]_{B^s_{p,q}}; branches on s in (0,1), s = 1 (second
/// difference) and s in (1,2) (first difference of the gradient).
double besov_seminorm(const GridFunction& f, const NormParams& params, int n_shells = 64,
                      double r_min_factor = 1e-3);

/// Mixed norm |f|_{L^p(R^d_v; H^s_p(R^d_x))}: slice-wise Bessel in x, then
/// L^p quadrature over the v-block. f must be a rank-2d phase grid.
double mixed_norm(const GridFunction& f, const NormParams& params);

struct XpsBreakdown {
    double w1p = 0.0;
    double d2v_mixed = 0.0;
    double vdx_mixed = 0.0;
    double total = 0.0;
};

/// |f|_{X_{p,s}} = |f|_{W^{1,p}} + |D^2_v f|_{L^p(H^s_p)} + |v . D_x f|_{L^p(H^s_p)}.
XpsBreakdown xps_norm(const GridFunction& f, const NormParams& params);

struct HypothesisVerdict {
    double value = 0.0;       // mixed norm of F on the given grid
    double refined = 0.0;     // same on a 2x refined grid
    double box_grown = 0.0;   // same on a 2x larger box (same density)
    bool pass = false;
    double refine_change = 0.0;
    double box_change = 0.0;
};

/// Drift admissibility test: the mixed norm must be finite and stable both
/// under one grid refinement and under box growth (changes measured on the
/// p-th powers, threshold 20%).
HypothesisVerdict hypothesis_check(const DriftField& F, double s, int p, const GridFunction& proto);

}  // namespace klab
