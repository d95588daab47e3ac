#pragma once

#include <functional>

namespace phaselock {

// Adaptive Simpson on a log-spaced axis: integrates f over [a, b], 0 < a < b,
// by substituting u = ln f. Suited to band integrals spanning many decades.
// Throws std::runtime_error if the relative tolerance cannot be met.
double integrate_log_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, int max_depth = 60);

// Golden-section minimum of a unimodal function on [lo, hi].
// Returns the abscissa; x_rel_tol is the relative width at which to stop.
double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                          double x_rel_tol = 1e-10, int max_iter = 200);

// Least-squares line fit y = slope*x + intercept.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace phaselock
