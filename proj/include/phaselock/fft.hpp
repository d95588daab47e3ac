#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace phaselock {

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n);

// In-place radix-2 FFT; size must be a power of two.
// inverse=true applies the conjugate transform including the 1/N factor.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

// Real-input FFT convenience: returns bins 0..N/2 of the DFT of x (N power of two).
std::vector<std::complex<double>> rfft(const std::vector<double>& x);

// Inverse of rfft: takes N/2+1 bins, returns N real samples (N power of two).
std::vector<double> irfft(const std::vector<std::complex<double>>& half, std::size_t n);

}  // namespace phaselock
