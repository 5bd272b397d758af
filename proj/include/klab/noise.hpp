#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace klab {

/// One Brownian path stored as increments at a base resolution.
/// increments[k*d + i] ~ N(0, dt) is the i-th component of step k.
/// A coarsened view sums consecutive increments, so refinement studies under
/// common noise all consume the same underlying path.
struct NoisePath {
    std::uint64_t seed = 0;
    double T = 0.0;
    double dt = 0.0;       // step of this view
    double dt_base = 0.0;  // step the path was generated at
    int level = 1;         // dt == level * dt_base
    int d = 1;
    std::vector<double> increments;

    int steps() const { return static_cast<int>(increments.size()) / d; }
    const double* increment(int k) const { return increments.data() + static_cast<std::size_t>(k) * d; }

    /// Sum consecutive groups of k increments; k must divide steps().
    NoisePath coarsen(int k) const;

    /// Total displacement W_T (sum of all increments), one value per component.
    std::vector<double> total() const;

    /// Serialized form carries only the generation parameters; the
    /// increments are regenerated on load.
    std::string to_json() const;
    static NoisePath from_json(const std::string& text);
};

/// Draw a path of i.i.d. N(0, dt_base I_d) increments. Reproducible given seed.
NoisePath brownian_path(std::uint64_t seed, double T, double dt_base, int d);

}  // namespace klab
