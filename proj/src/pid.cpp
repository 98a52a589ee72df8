#include "mimopid/pid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mimopid/errors.hpp"

namespace mimopid {

namespace {

double ladder_value(double lo, double hi, int code) {
    return lo + code * (hi - lo) / kMaxCode;
}

std::uint8_t nearest_code(const std::array<double, kCodeLevels>& levels, double target) {
    int best = 0;
    double best_err = std::abs(levels[0] - target);
    for (int c = 1; c < kCodeLevels; ++c) {
        const double err = std::abs(levels[c] - target);
        // Relative slack so an exact midpoint resolves to the lower code
        // despite rounding in the level values.
        const double slack = 1e-12 * std::max(std::abs(levels[c]), std::abs(target));
        if (err < best_err - slack) {
            best = c;
            best_err = err;
        }
    }
    return static_cast<std::uint8_t>(best);
}

}  // namespace

void ComponentLadder::validate() const {
    const auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("ladder: ") + name + " must be positive");
    };
    positive(r1_fixed, "r1");
    positive(r2_min, "r2_min");
    positive(r2_max, "r2_max");
    positive(ri_min, "ri_min");
    positive(ri_max, "ri_max");
    positive(ci_fixed, "ci");
    positive(rd_min, "rd_min");
    positive(rd_max, "rd_max");
    positive(cd_fixed, "cd");
    if (!(r2_min < r2_max)) throw std::invalid_argument("ladder: r2_min must be below r2_max");
    if (!(ri_min < ri_max)) throw std::invalid_argument("ladder: ri_min must be below ri_max");
    if (!(rd_min < rd_max)) throw std::invalid_argument("ladder: rd_min must be below rd_max");
}

std::array<double, kCodeLevels> ComponentLadder::kp_levels() const {
    std::array<double, kCodeLevels> out{};
    for (int c = 0; c < kCodeLevels; ++c) out[c] = ladder_value(r2_min, r2_max, c) / r1_fixed;
    return out;
}

std::array<double, kCodeLevels> ComponentLadder::ki_levels() const {
    std::array<double, kCodeLevels> out{};
    for (int c = 0; c < kCodeLevels; ++c) out[c] = 1.0 / (ladder_value(ri_min, ri_max, c) * ci_fixed);
    return out;
}

std::array<double, kCodeLevels> ComponentLadder::kd_levels() const {
    std::array<double, kCodeLevels> out{};
    for (int c = 0; c < kCodeLevels; ++c) out[c] = ladder_value(rd_min, rd_max, c) * cd_fixed;
    return out;
}

void GainCode::validate() const {
    if (kp_code > kMaxCode || ki_code > kMaxCode || kd_code > kMaxCode) {
        throw std::invalid_argument("gain code fields must be in [0, 15]");
    }
}

std::uint16_t GainCode::pack() const {
    validate();
    return static_cast<std::uint16_t>((kp_code << 8) | (ki_code << 4) | kd_code);
}

GainCode GainCode::unpack(std::uint16_t reg) {
    if (reg > 0x0FFF) throw std::invalid_argument("gain register holds 12 bits");
    return GainCode{static_cast<std::uint8_t>((reg >> 8) & 0xF), static_cast<std::uint8_t>((reg >> 4) & 0xF),
                    static_cast<std::uint8_t>(reg & 0xF)};
}

void PidConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("pid: dt must be positive");
    if (!(u_min < u_max)) throw std::invalid_argument("pid: u_min must be below u_max");
    if (!(d_filter_n > 0.0)) throw std::invalid_argument("pid: d_filter_n must be positive");
}

PidGains decode_gains(const GainCode& code, const ComponentLadder& ladder) {
    code.validate();
    const double r2 = ladder_value(ladder.r2_min, ladder.r2_max, code.kp_code);
    const double ri = ladder_value(ladder.ri_min, ladder.ri_max, code.ki_code);
    const double rd = ladder_value(ladder.rd_min, ladder.rd_max, code.kd_code);
    return PidGains{r2 / ladder.r1_fixed, 1.0 / (ri * ladder.ci_fixed), rd * ladder.cd_fixed};
}

GainCode encode_gains(const PidGains& target, const ComponentLadder& ladder) {
    return GainCode{nearest_code(ladder.kp_levels(), target.kp), nearest_code(ladder.ki_levels(), target.ki),
                    nearest_code(ladder.kd_levels(), target.kd)};
}

double pid_step(PidState& state, double error, const PidGains& gains, const PidConfig& config) {
    if (!std::isfinite(error)) throw FaultError("pid: non-finite error signal");
    const double dt = config.dt;
    if (!state.primed) {
        state.prev_error = error;
        state.d_filter_state = 0.0;
        state.primed = true;
    }

    const double tf = gains.kd / config.d_filter_n;
    state.d_filter_state = (tf * state.d_filter_state + (error - state.prev_error)) / (tf + dt);

    const double increment = 0.5 * dt * (error + state.prev_error);
    const double pd = gains.kp * error + gains.kd * state.d_filter_state;
    const double held = pd + gains.ki * state.integrator;
    const double integrated = pd + gains.ki * (state.integrator + increment);

    bool integrate = true;
    switch (config.anti_windup) {
    case AntiWindup::Clamp:
        integrate = !((integrated > config.u_max && increment > 0.0) ||
                      (integrated < config.u_min && increment < 0.0));
        break;
    case AntiWindup::ConditionalIntegration:
        integrate = held >= config.u_min && held <= config.u_max;
        break;
    }

    double u_raw = held;
    if (integrate) {
        state.integrator += increment;
        u_raw = integrated;
    }
    state.prev_error = error;
    return std::clamp(u_raw, config.u_min, config.u_max);
}

void reset(PidState& state) { state = PidState{}; }

void transfer_integrator(PidState& state, const PidGains& from, const PidGains& to) {
    if (to.ki > 0.0) state.integrator *= from.ki / to.ki;
}

PidController::PidController(const GainCode& code, const ComponentLadder& ladder, const PidConfig& config)
    : ladder_(ladder), config_(config), code_(code), gains_(decode_gains(code, ladder)) {
    config_.validate();
}

void PidController::install(const GainCode& code) {
    const PidGains next = decode_gains(code, ladder_);
    transfer_integrator(state_, gains_, next);
    code_ = code;
    gains_ = next;
}

void PidController::preload(double u) {
    reset(state_);
    if (gains_.ki > 0.0) state_.integrator = u / gains_.ki;
}

}  // namespace mimopid
