#include "klab/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "klab/rng.hpp"

namespace klab {

NoisePath brownian_path(std::uint64_t seed, double T, double dt_base, int d) {
    if (T <= 0.0) throw std::invalid_argument("brownian_path: T must be positive");
    if (dt_base <= 0.0) throw std::invalid_argument("brownian_path: dt_base must be positive");
    if (d < 1) throw std::invalid_argument("brownian_path: d must be >= 1");
    const double ratio = T / dt_base;
    const long long n = std::llround(ratio);
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio + 1e-12)
        throw std::invalid_argument("brownian_path: T/dt_base is not integral");

    NoisePath path;
    path.seed = seed;
    path.T = T;
    path.dt = dt_base;
    path.dt_base = dt_base;
    path.level = 1;
    path.d = d;
    path.increments.resize(static_cast<std::size_t>(n) * d);

    Rng rng = Rng::for_stream(seed, 0);
    const double sigma = std::sqrt(dt_base);
    for (auto& w : path.increments) w = sigma * rng.normal();
    return path;
}

NoisePath NoisePath::coarsen(int k) const {
    if (k < 1) throw std::invalid_argument("NoisePath::coarsen: k must be >= 1");
    const int n = steps();
    if (n % k != 0) throw std::invalid_argument("NoisePath::coarsen: k must divide step count");

    NoisePath out;
    out.seed = seed;
    out.T = T;
    out.dt = dt * k;
    out.dt_base = dt_base;
    out.level = level * k;
    out.d = d;
    out.increments.assign(static_cast<std::size_t>(n / k) * d, 0.0);
    for (int j = 0; j < n; ++j) {
        const int jc = j / k;
        for (int i = 0; i < d; ++i)
            out.increments[static_cast<std::size_t>(jc) * d + i] += increments[static_cast<std::size_t>(j) * d + i];
    }
    return out;
}

std::vector<double> NoisePath::total() const {
    std::vector<double> w(d, 0.0);
    const int n = steps();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i) w[i] += increments[static_cast<std::size_t>(j) * d + i];
    return w;
}

std::string NoisePath::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["T"] = T;
    j["dt_base"] = dt_base;
    j["level"] = level;
    j["d"] = d;
    return j.dump();
}

NoisePath NoisePath::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    NoisePath base = brownian_path(j.at("seed").get<std::uint64_t>(), j.at("T").get<double>(),
                                   j.at("dt_base").get<double>(), j.at("d").get<int>());
    const int level = j.value("level", 1);
    return level == 1 ? base : base.coarsen(level);
}

}  // namespace klab
