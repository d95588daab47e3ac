#include "phaselock/fringe.hpp"

#include <cmath>
#include <stdexcept>

namespace phaselock {

namespace {
constexpr double kQuarterPi = std::numbers::pi / 4.0;
constexpr double kSqrt2Over8 = 0.17677669529663687;  // sqrt(2)/8
}  // namespace

void FringeModel::validate() const {
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw std::invalid_argument("fringe: visibility must be in [0, 1]");
    if (!std::isfinite(phase_offset))
        throw std::invalid_argument("fringe: phase_offset must be finite");
    if (kind == FringeKind::PulsePairPattern && std::abs(visibility - kInvSqrt8) > 1e-9)
        throw std::invalid_argument("fringe: pulse-pair pattern has fixed visibility 1/sqrt(8)");
}

FringeModel make_pulse_pair_fringe() {
    return FringeModel{FringeKind::PulsePairPattern, kInvSqrt8, 0.0};
}

FringeModel make_simple_fringe(double visibility, double phase_offset) {
    FringeModel m{FringeKind::SimpleFringe, visibility, phase_offset};
    m.validate();
    return m;
}

void DetectorConfig::validate() const {
    if (f_signal < 0 || f_dark_ch0 < 0 || f_dark_ch1 < 0)
        throw std::invalid_argument("detector: rates must be >= 0");
    if (f_total() <= 0)
        throw std::invalid_argument("detector: total rate must be > 0");
}

double click_ratio(const FringeModel& model, double phi) {
    const double x = phi - model.phase_offset;
    if (model.kind == FringeKind::PulsePairPattern) {
        // (cos x + sin x)/8 written as one trig call; the hot simulation
        // loop goes through here for every signal photon.
        return 0.5 + kSqrt2Over8 * std::sin(x + kQuarterPi);
    }
    return 0.5 * (1.0 + model.visibility * std::cos(x));
}

double fringe_slope(const FringeModel& model, double phi) {
    const double x = phi - model.phase_offset;
    if (model.kind == FringeKind::PulsePairPattern) {
        return kSqrt2Over8 * std::cos(x + kQuarterPi);  // = (cos x - sin x)/8
    }
    return -0.5 * model.visibility * std::sin(x);
}

double slope_magnitude(double visibility, double r0) {
    const double c = 2.0 * r0 - 1.0;
    const double disc = visibility * visibility - c * c;
    if (disc < 0.0)
        throw std::domain_error("slope_magnitude: ratio unreachable at this visibility");
    return 0.5 * std::sqrt(disc);
}

LockPoint lock_point_at(const FringeModel& model, double phi0) {
    model.validate();
    return LockPoint{phi0, click_ratio(model, phi0), fringe_slope(model, phi0)};
}

LockPoint apply_darkcounts(const LockPoint& lock, const DetectorConfig& det) {
    det.validate();
    const double f_total = det.f_total();
    LockPoint eff = lock;
    eff.r0 = (det.f_signal * lock.r0 + det.f_dark_ch0) / f_total;
    eff.slope = lock.slope * det.f_signal / f_total;
    return eff;
}

double effective_visibility(double visibility, const DetectorConfig& det) {
    det.validate();
    return visibility * det.f_signal / det.f_total();
}

}  // namespace phaselock
