#include "phaselock/spectrum.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "phaselock/numeric.hpp"

namespace phaselock {

void NoiseSpectrum::validate() const {
    if (frequency.size() != asd.size())
        throw std::invalid_argument("spectrum: frequency/asd size mismatch");
    if (frequency.empty()) throw std::invalid_argument("spectrum: empty");
    double prev = 0.0;
    for (double f : frequency) {
        if (!(f > prev)) throw std::invalid_argument("spectrum: frequencies must be > 0 and strictly increasing");
        prev = f;
    }
    for (double a : asd) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("spectrum: asd values must be finite and >= 0");
    }
}

double NoiseSpectrum::asd_at(double f) const {
    if (frequency.empty()) throw std::invalid_argument("spectrum: empty");
    if (!(f > 0.0)) throw std::invalid_argument("spectrum: frequency must be > 0");
    if (f <= frequency.front()) return asd.front();
    if (f >= frequency.back()) return asd.back();
    // Binary search for the bracketing segment.
    std::size_t lo = 0, hi = frequency.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (frequency[mid] <= f)
            lo = mid;
        else
            hi = mid;
    }
    const double f0 = frequency[lo], f1 = frequency[hi];
    const double a0 = asd[lo], a1 = asd[hi];
    if (a0 <= 0.0 || a1 <= 0.0) {
        // Log interpolation undefined with zeros; fall back to linear.
        const double w = (f - f0) / (f1 - f0);
        return a0 + w * (a1 - a0);
    }
    const double w = std::log(f / f0) / std::log(f1 / f0);
    return std::exp(std::log(a0) + w * (std::log(a1) - std::log(a0)));
}

double NoiseSpectrum::psd_at(double f, Sidedness out) const {
    const double a = asd_at(f);
    double s = a * a;  // PSD in the stored convention
    if (sidedness == Sidedness::TwoSided && out == Sidedness::OneSided) s *= 2.0;
    if (sidedness == Sidedness::OneSided && out == Sidedness::TwoSided) s *= 0.5;
    return s;
}

NoiseSpectrum wiener_equivalent_asd(double d_fiber, double f_lo, double f_hi,
                                    int points_per_decade) {
    if (!(d_fiber >= 0.0)) throw std::invalid_argument("wiener_equivalent_asd: d_fiber must be >= 0");
    if (!(f_lo > 0.0) || !(f_hi > f_lo)) throw std::invalid_argument("wiener_equivalent_asd: bad band");
    if (points_per_decade < 1) throw std::invalid_argument("wiener_equivalent_asd: need >= 1 point/decade");
    NoiseSpectrum spec;
    spec.sidedness = Sidedness::OneSided;
    const double amp = std::sqrt(0.5 * d_fiber) / std::numbers::pi;  // asd(f) = amp / f
    const double decades = std::log10(f_hi / f_lo);
    const int n = std::max(2, static_cast<int>(std::ceil(decades * points_per_decade)) + 1);
    for (int i = 0; i < n; ++i) {
        const double f = f_lo * std::pow(10.0, decades * i / (n - 1));
        spec.frequency.push_back(f);
        spec.asd.push_back(amp / f);
    }
    return spec;
}

double integrated_variance(const NoiseSpectrum& spec, double f_lo, double f_hi, double rel_tol) {
    spec.validate();
    return integrate_log_adaptive([&spec](double f) { return spec.psd_at(f, Sidedness::OneSided); },
                                  f_lo, f_hi, rel_tol);
}

NoiseSpectrum load_asd_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ASD file: " + path);
    NoiseSpectrum spec;
    spec.sidedness = Sidedness::OneSided;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("freq_hz", 0) != 0)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": expected header freq_hz,asd_rad_per_sqrthz");
            header_seen = true;
            continue;
        }
        double f = 0.0, a = 0.0;
        char extra = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf %c", &f, &a, &extra) != 2)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed ASD row");
        spec.frequency.push_back(f);
        spec.asd.push_back(a);
    }
    spec.validate();
    return spec;
}

void save_asd_csv(const NoiseSpectrum& spec, const std::string& path) {
    spec.validate();
    if (spec.sidedness != Sidedness::OneSided)
        throw std::invalid_argument("save_asd_csv: file format is one-sided");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write ASD file: " + path);
    out << "freq_hz,asd_rad_per_sqrthz\n";
    char buf[64];
    for (std::size_t i = 0; i < spec.frequency.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", spec.frequency[i], spec.asd[i]);
        out << buf;
    }
}

}  // namespace phaselock
