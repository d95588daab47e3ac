#include "phaselock/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace phaselock {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (!is_pow2(n)) throw std::invalid_argument("fft_radix2: size must be a power of two");
    if (n < 2) return;

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv_n;
    }
}

std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
    std::vector<std::complex<double>> a(x.begin(), x.end());
    fft_radix2(a, false);
    a.resize(x.size() / 2 + 1);
    return a;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& half, std::size_t n) {
    if (!is_pow2(n)) throw std::invalid_argument("irfft: size must be a power of two");
    if (half.size() != n / 2 + 1) throw std::invalid_argument("irfft: expected n/2+1 bins");
    std::vector<std::complex<double>> a(n);
    for (std::size_t k = 0; k <= n / 2; ++k) a[k] = half[k];
    for (std::size_t k = n / 2 + 1; k < n; ++k) a[k] = std::conj(half[n - k]);
    fft_radix2(a, true);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i].real();
    return out;
}

}  // namespace phaselock
