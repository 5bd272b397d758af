#include "klab/fft_util.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace klab {

namespace {

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
    fftw_complex* buf = nullptr;
    std::size_t size = 0;
    std::mutex run_mutex;
};

std::mutex cache_mutex;
std::map<std::pair<int, int>, PlanPair*> plan_cache;

PlanPair* get_plan(int rank, int n) {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto key = std::make_pair(rank, n);
    auto it = plan_cache.find(key);
    if (it != plan_cache.end()) return it->second;

    auto* p = new PlanPair;
    p->size = 1;
    for (int a = 0; a < rank; ++a) p->size *= static_cast<std::size_t>(n);
    p->buf = fftw_alloc_complex(p->size);
    if (!p->buf) throw std::bad_alloc();
    std::vector<int> dims(rank, n);
    p->fwd = fftw_plan_dft(rank, dims.data(), p->buf, p->buf, FFTW_FORWARD, FFTW_ESTIMATE);
    p->inv = fftw_plan_dft(rank, dims.data(), p->buf, p->buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!p->fwd || !p->inv) throw std::runtime_error("fft_util: plan creation failed");
    plan_cache.emplace(key, p);
    return p;
}

void run(int rank, int n, std::vector<std::complex<double>>& data, bool forward) {
    PlanPair* p = get_plan(rank, n);
    if (data.size() != p->size) throw std::invalid_argument("fft_util: size mismatch");
    std::lock_guard<std::mutex> lock(p->run_mutex);
    for (std::size_t i = 0; i < p->size; ++i) {
        p->buf[i][0] = data[i].real();
        p->buf[i][1] = data[i].imag();
    }
    fftw_execute(forward ? p->fwd : p->inv);
    const double scale = forward ? 1.0 : 1.0 / static_cast<double>(p->size);
    for (std::size_t i = 0; i < p->size; ++i)
        data[i] = std::complex<double>(p->buf[i][0] * scale, p->buf[i][1] * scale);
}

}  // namespace

void fft_forward(int rank, int n, std::vector<std::complex<double>>& data) { run(rank, n, data, true); }
void fft_inverse(int rank, int n, std::vector<std::complex<double>>& data) { run(rank, n, data, false); }

double fft_freq(int k, int n, double L) {
    const int ks = k < (n + 1) / 2 ? k : k - n;
    return M_PI * static_cast<double>(ks) / L;
}

}  // namespace klab
