#include "phaselock/controller.hpp"

#include <cmath>
#include <stdexcept>

namespace phaselock {

StepParams make_step_params(double epsilon, const LockPoint& lock) {
    if (lock.slope == 0.0) throw std::invalid_argument("step params: lock point has zero slope");
    if (!(lock.r0 > 0.0 && lock.r0 < 1.0))
        throw std::invalid_argument("step params: r0 must be in (0, 1)");
    if (epsilon * lock.slope > 0.0)
        throw std::invalid_argument(
            "step params: epsilon and slope must have opposite signs for a stable lock");
    StepParams p;
    p.epsilon = epsilon;
    p.r0 = lock.r0;
    p.eps0 = 2.0 * epsilon * (1.0 - lock.r0);
    p.eps1 = -2.0 * epsilon * lock.r0;
    return p;
}

double ActuatorModel::lsb() const { return range_rad / std::ldexp(1.0, dac_bits); }

void ActuatorModel::validate() const {
    if (dac_bits < 1 || dac_bits > 32) throw std::invalid_argument("actuator: dac_bits out of range");
    if (!(range_rad > 0.0)) throw std::invalid_argument("actuator: range must be > 0");
    if (!(loop_delay_s >= 0.0)) throw std::invalid_argument("actuator: delay must be >= 0");
}

double ActuatorModel::quantize(double command, bool& saturated) const {
    saturated = false;
    double c = command;
    if (c < 0.0) {
        c = 0.0;
        saturated = true;
    } else if (c > range_rad) {
        c = range_rad;
        saturated = true;
    }
    const double step = lsb();
    return std::nearbyint(c / step) * step;
}

Controller::Controller(const StepParams& steps, const ControllerConfig& cfg)
    : steps_(steps), cfg_(cfg) {
    if (cfg_.variant == ControllerVariant::AveragingN && cfg_.averaging_n < 1)
        throw std::invalid_argument("controller: averaging_n must be >= 1");
    if (cfg_.variant == ControllerVariant::PI) {
        if (cfg_.pi_window < 1) throw std::invalid_argument("controller: pi_window must be >= 1");
        window_.assign(static_cast<std::size_t>(cfg_.pi_window), 0);
    }
}

void Controller::reset() {
    command_ = 0.0;
    block_sum_ = 0.0;
    block_count_ = 0;
    win_pos_ = win_fill_ = win_ones_ = 0;
    p_offset_ = 0.0;
    if (!window_.empty()) window_.assign(window_.size(), 0);
}

double Controller::on_detection(int channel) {
    if (channel != 0 && channel != 1) throw std::invalid_argument("controller: channel must be 0 or 1");
    const double step = channel == 0 ? steps_.eps0 : steps_.eps1;

    switch (cfg_.variant) {
        case ControllerVariant::Immediate: {
            command_ += step;
            return step;
        }
        case ControllerVariant::AveragingN: {
            block_sum_ += step;
            if (++block_count_ < cfg_.averaging_n) return 0.0;
            const double delta = block_sum_;
            block_sum_ = 0.0;
            block_count_ = 0;
            command_ += delta;
            return delta;
        }
        case ControllerVariant::PI: {
            // I part: the per-click step, scaled.
            double delta = cfg_.pi_ki * step;
            // P part: offset proportional to the windowed ratio deviation;
            // only its change is emitted so it does not integrate.
            const int one = channel == 0 ? 1 : 0;
            win_ones_ += one - (win_fill_ == cfg_.pi_window ? window_[static_cast<std::size_t>(win_pos_)] : 0);
            window_[static_cast<std::size_t>(win_pos_)] = static_cast<std::uint8_t>(one);
            win_pos_ = (win_pos_ + 1) % cfg_.pi_window;
            if (win_fill_ < cfg_.pi_window) ++win_fill_;
            if (win_fill_ == cfg_.pi_window) {
                const double r_hat = static_cast<double>(win_ones_) / cfg_.pi_window;
                const double p_now =
                    cfg_.pi_kp * 2.0 * steps_.epsilon * cfg_.pi_window * (r_hat - steps_.r0);
                delta += p_now - p_offset_;
                p_offset_ = p_now;
            }
            command_ += delta;
            return delta;
        }
    }
    return 0.0;
}

}  // namespace phaselock
