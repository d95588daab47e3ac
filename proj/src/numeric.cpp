#include "phaselock/numeric.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace phaselock {

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& g, double a, double fa, double b, double fb,
                double m, double fm, double whole, double eps, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = g(lm);
    const double frm = g(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0) throw std::runtime_error("integrate_log_adaptive: max depth reached");
    if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adaptive(g, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
           adaptive(g, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
}

}  // namespace

double integrate_log_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, int max_depth) {
    if (!(a > 0.0) || !(b > a)) throw std::invalid_argument("integrate_log_adaptive: need 0 < a < b");
    auto g = [&f](double u) {
        const double x = std::exp(u);
        return f(x) * x;
    };
    const double ua = std::log(a);
    const double ub = std::log(b);

    // Coarse trapezoid pass, ~2 panels per e-fold, to scale the tolerance.
    double coarse = 0.0;
    const int n0 = std::max(4, static_cast<int>(std::ceil((ub - ua) * 2.0)));
    std::vector<double> us(static_cast<std::size_t>(n0) + 1);
    std::vector<double> gs(us.size());
    for (std::size_t i = 0; i < us.size(); ++i) {
        us[i] = ua + (ub - ua) * static_cast<double>(i) / static_cast<double>(n0);
        gs[i] = g(us[i]);
    }
    for (int i = 0; i < n0; ++i) coarse += 0.5 * (gs[i] + gs[i + 1]) * (us[i + 1] - us[i]);

    const double eps_abs = std::abs(coarse) * rel_tol;
    double total = 0.0;
    for (int i = 0; i < n0; ++i) {
        const double m = 0.5 * (us[i] + us[i + 1]);
        const double fm = g(m);
        const double whole = simpson(us[i], gs[i], us[i + 1], gs[i + 1], fm);
        total += adaptive(g, us[i], gs[i], us[i + 1], gs[i + 1], m, fm, whole,
                          std::max(eps_abs / n0, 1e-300), max_depth);
    }
    return total;
}

double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                          double x_rel_tol, int max_iter) {
    if (!(hi > lo)) throw std::invalid_argument("golden_section_min: need lo < hi");
    constexpr double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - (b - a) * invphi;
    double d = a + (b - a) * invphi;
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iter && (b - a) > x_rel_tol * (std::abs(a) + std::abs(b)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * invphi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * invphi;
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need >= 2 matching points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

}  // namespace phaselock
