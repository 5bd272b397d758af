#include "klab/grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace klab {

GridFunction::GridFunction(std::vector<double> half_widths, int n, Boundary boundary)
    : L_(std::move(half_widths)), n_(n), boundary_(boundary) {
    if (L_.empty()) throw std::invalid_argument("GridFunction: rank must be >= 1");
    if (n < 8) throw std::invalid_argument("GridFunction: need n >= 8 per axis");
    for (double l : L_)
        if (!(l > 0.0)) throw std::invalid_argument("GridFunction: box half-width must be positive");
    std::size_t total = 1;
    for (int a = 0; a < rank(); ++a) total *= static_cast<std::size_t>(n_);
    values_.assign(total, 0.0);
}

GridFunction GridFunction::uniform(int rank, double L, int n, Boundary boundary) {
    return GridFunction(std::vector<double>(rank, L), n, boundary);
}

double GridFunction::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < rank(); ++a) v *= step(a);
    return v;
}

std::size_t GridFunction::index(const std::vector<int>& multi) const {
    std::size_t flat = 0;
    for (int a = 0; a < rank(); ++a) flat = flat * n_ + static_cast<std::size_t>(multi[a]);
    return flat;
}

void GridFunction::unravel(std::size_t flat, std::vector<int>& multi) const {
    multi.resize(rank());
    for (int a = rank() - 1; a >= 0; --a) {
        multi[a] = static_cast<int>(flat % n_);
        flat /= n_;
    }
}

void GridFunction::node_coords(std::size_t flat, std::vector<double>& z) const {
    z.resize(rank());
    for (int a = rank() - 1; a >= 0; --a) {
        z[a] = node(a, static_cast<int>(flat % n_));
        flat /= n_;
    }
}

void GridFunction::fill(const std::function<double(const std::vector<double>&)>& f) {
    std::vector<double> z(rank());
    for (std::size_t i = 0; i < values_.size(); ++i) {
        node_coords(i, z);
        values_[i] = f(z);
    }
}

double GridFunction::interpolate(const std::vector<double>& z) const { return interpolate(z.data()); }

double GridFunction::interpolate(const double* z) const {
    const int r = rank();
    // Per-axis lower cell index and fractional offset.
    int lo[8];
    double w[8];
    for (int a = 0; a < r; ++a) {
        const double h = step(a);
        double u = (z[a] + L_[a]) / h;
        if (boundary_ == Boundary::Periodic) {
            u -= std::floor(u / n_) * n_;
        } else if (u < 0.0 || u > n_ - 1 + 1.0) {
            // strictly outside [first node, one cell past last node)
            return 0.0;
        }
        int i0 = static_cast<int>(std::floor(u));
        if (i0 > n_ - 1) i0 = n_ - 1;
        lo[a] = i0;
        w[a] = u - i0;
    }
    // Sum over the 2^r cell corners.
    double acc = 0.0;
    const int corners = 1 << r;
    std::vector<int> multi(r);
    for (int c = 0; c < corners; ++c) {
        double weight = 1.0;
        bool outside = false;
        for (int a = 0; a < r; ++a) {
            const int bit = (c >> a) & 1;
            weight *= bit ? w[a] : (1.0 - w[a]);
            int idx = lo[a] + bit;
            if (idx >= n_) {
                if (boundary_ == Boundary::Periodic) idx -= n_;
                else { outside = true; break; }
            }
            multi[a] = idx;
        }
        if (!outside && weight != 0.0) acc += weight * values_[index(multi)];
    }
    return acc;
}

double GridFunction::nearest(const double* z) const {
    const int r = rank();
    std::vector<int> multi(r);
    for (int a = 0; a < r; ++a) {
        const double h = step(a);
        double u = (z[a] + L_[a]) / h;
        long i = std::lround(u);
        if (boundary_ == Boundary::Periodic) {
            i %= n_;
            if (i < 0) i += n_;
        } else {
            if (i < 0 || i >= n_) return 0.0;
        }
        multi[a] = static_cast<int>(i);
    }
    return values_[index(multi)];
}

double GridFunction::lp_norm(double p) const {
    double acc = 0.0;
    for (double v : values_) acc += std::pow(std::abs(v), p);
    return std::pow(acc * cell_volume(), 1.0 / p);
}

double GridFunction::sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

void GridFunction::save(const std::string& path) const {
    nlohmann::json header;
    header["format"] = "klab-grid-v1";
    header["rank"] = rank();
    header["box"] = L_;
    header["n"] = n_;
    header["boundary"] = boundary_ == Boundary::Periodic ? "periodic" : "zero";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("GridFunction::save: cannot open " + path);
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(values_.data()),
              static_cast<std::streamsize>(values_.size() * sizeof(double)));
    if (!out) throw std::runtime_error("GridFunction::save: write failed for " + path);
}

GridFunction GridFunction::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("GridFunction::load: cannot open " + path);
    std::string line;
    std::getline(in, line);
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "klab-grid-v1")
        throw std::runtime_error("GridFunction::load: unrecognized header in " + path);
    GridFunction g(header.at("box").get<std::vector<double>>(), header.at("n").get<int>(),
                   header.at("boundary").get<std::string>() == "periodic" ? Boundary::Periodic
                                                                          : Boundary::ZeroExtended);
    in.read(reinterpret_cast<char*>(g.values_.data()),
            static_cast<std::streamsize>(g.values_.size() * sizeof(double)));
    if (!in) throw std::runtime_error("GridFunction::load: truncated payload in " + path);
    return g;
}

namespace {
void check_same_shape(const GridFunction& a, const GridFunction& b) {
    if (a.rank() != b.rank() || a.n() != b.n() || a.half_widths() != b.half_widths())
        throw std::invalid_argument("grid algebra: shape mismatch");
}
}  // namespace

GridFunction grid_add(const GridFunction& a, const GridFunction& b) {
    check_same_shape(a, b);
    GridFunction out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

GridFunction grid_sub(const GridFunction& a, const GridFunction& b) {
    check_same_shape(a, b);
    GridFunction out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

GridFunction grid_scale(const GridFunction& a, double c) {
    GridFunction out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

GridFunction grid_mul(const GridFunction& a, const GridFunction& b) {
    check_same_shape(a, b);
    GridFunction out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

double grid_sup_diff(const GridFunction& a, const GridFunction& b) {
    check_same_shape(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace klab
