#include "klab/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>

namespace klab {

McEstimate mc_estimate(const std::vector<double>& samples) {
    McEstimate e;
    e.n = samples.size();
    if (e.n == 0) return e;
    e.value = mean(samples);
    if (e.n > 1) e.se = std::sqrt(variance(samples) / static_cast<double>(e.n));
    return e;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (hi + v[mid - 1]);
}

double median_of_means(const std::vector<double>& v, int blocks) {
    if (v.empty()) return 0.0;
    blocks = std::max(1, std::min<int>(blocks, static_cast<int>(v.size())));
    std::vector<double> ms(blocks, 0.0);
    const std::size_t per = v.size() / blocks;
    for (int b = 0; b < blocks; ++b) {
        const std::size_t lo = b * per;
        const std::size_t hi = (b == blocks - 1) ? v.size() : lo + per;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += v[i];
        ms[b] = s / static_cast<double>(hi - lo);
    }
    return median(std::move(ms));
}

double log_mean_exp(const std::vector<double>& logs) {
    if (logs.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(logs.begin(), logs.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : logs) s += std::exp(x - m);
    return m + std::log(s / static_cast<double>(logs.size()));
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need >= 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double sse = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            sse += r * r;
        }
        fit.slope_se = std::sqrt(sse / (n - 2.0) / sxx);
    }
    return fit;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double F = cdf(samples[i]);
        ks = std::max(ks, std::abs(F - static_cast<double>(i) / n));
        ks = std::max(ks, std::abs(static_cast<double>(i + 1) / n - F));
    }
    return ks;
}

bool ks_pass(double ks_stat, std::size_t n, double alpha) {
    // Asymptotic two-sided critical values.
    double c;
    if (alpha <= 0.01) c = 1.628;
    else if (alpha <= 0.05) c = 1.358;
    else c = 1.224;
    return ks_stat <= c / std::sqrt(static_cast<double>(n));
}

double normal_cdf(double x, double m, double sd) {
    return 0.5 * std::erfc(-(x - m) / (sd * std::sqrt(2.0)));
}

int worker_count() {
    if (const char* env = std::getenv("KLAB_THREADS")) {
        const int k = std::atoi(env);
        if (k >= 1) return k;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const int workers = std::min<std::size_t>(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) break;
                body(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace klab
