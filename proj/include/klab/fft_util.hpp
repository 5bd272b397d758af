#pragma once

#include <complex>
#include <vector>

namespace klab {

/// In-place complex DFT on a rank-r array with n points per axis, row-major.
/// Forward is unnormalized; inverse divides by n^r. Plans are cached per
/// (rank, n) behind a mutex; execution is serialized per plan, callers
/// parallelize at a higher level.
void fft_forward(int rank, int n, std::vector<std::complex<double>>& data);
void fft_inverse(int rank, int n, std::vector<std::complex<double>>& data);

/// Frequency of index k on an axis with box [-L, L): 2*pi*k' / (2L) with
/// k' the signed index in [-n/2, n/2).
double fft_freq(int k, int n, double L);

}  // namespace klab
