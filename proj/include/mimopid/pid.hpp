#pragma once

#include <array>
#include <cstdint>

namespace mimopid {

inline constexpr int kCodeLevels = 16;
inline constexpr int kMaxCode = kCodeLevels - 1;

/// Bit-tunable component ladders of the analog PID stages.
///
/// Each tunable resistor steps linearly over 16 levels between its min and
/// max. Kp = R2/R1, Ki = 1/(Ri*Ci), Kd = Rd*Cd. Because Ki is inversely
/// proportional to Ri, Ki falls as its code rises.
struct ComponentLadder {
    double r1_fixed = 10e3;
    double r2_min = 1e3;
    double r2_max = 100e3;
    double ri_min = 50e3;
    double ri_max = 10e6;
    double ci_fixed = 1e-6;
    double rd_min = 1e3;
    double rd_max = 500e3;
    double cd_fixed = 1e-6;

    void validate() const;

    std::array<double, kCodeLevels> kp_levels() const;
    std::array<double, kCodeLevels> ki_levels() const;
    std::array<double, kCodeLevels> kd_levels() const;
};

/// Contents of the 12-bit gain register: three 4-bit fields.
struct GainCode {
    std::uint8_t kp_code = 0;
    std::uint8_t ki_code = 0;
    std::uint8_t kd_code = 0;

    void validate() const;
    /// kp in bits 11..8, ki in 7..4, kd in 3..0.
    std::uint16_t pack() const;
    static GainCode unpack(std::uint16_t reg);

    friend bool operator==(const GainCode&, const GainCode&) = default;
};

struct PidGains {
    double kp = 0.0;  // dimensionless
    double ki = 0.0;  // 1/s
    double kd = 0.0;  // s
};

struct PidState {
    double integrator = 0.0;      // V*s
    double prev_error = 0.0;      // V
    double d_filter_state = 0.0;  // V/s
    bool primed = false;          // false until the first sample after reset
};

enum class AntiWindup { Clamp, ConditionalIntegration };

struct PidConfig {
    double dt = 1e-3;
    double u_min = 0.0;
    double u_max = 5.0;
    double d_filter_n = 10.0;
    AntiWindup anti_windup = AntiWindup::Clamp;

    void validate() const;
};

PidGains decode_gains(const GainCode& code, const ComponentLadder& ladder);

/// Nearest achievable value per axis; ties go to the lower code.
GainCode encode_gains(const PidGains& target, const ComponentLadder& ladder);

/// One controller sample: u = kp*e + ki*I + kd*D, saturated to [u_min, u_max].
/// I integrates e by the trapezoid rule; D is the backward difference of e
/// through a first-order filter with time constant kd/N. The first sample
/// after a reset treats the error as having been constant, so there is no
/// derivative kick and no half-sample integrator ramp.
/// Throws FaultError for a non-finite error.
double pid_step(PidState& state, double error, const PidGains& gains, const PidConfig& config);

void reset(PidState& state);

/// Rescales the integrator so ki*I is unchanged when switching gains.
void transfer_integrator(PidState& state, const PidGains& from, const PidGains& to);

/// A channel's PID stage: register contents, decoded gains and loop state.
class PidController {
public:
    PidController(const GainCode& code, const ComponentLadder& ladder, const PidConfig& config);

    double step(double error) { return pid_step(state_, error, gains_, config_); }

    /// Programs new codes. The integral contribution carries over.
    void install(const GainCode& code);

    /// Loads the loop so that zero error holds the output at u.
    void preload(double u);

    const GainCode& code() const { return code_; }
    const PidGains& gains() const { return gains_; }
    const PidState& state() const { return state_; }
    const PidConfig& config() const { return config_; }
    const ComponentLadder& ladder() const { return ladder_; }
    void reset_state() { reset(state_); }

private:
    ComponentLadder ladder_;
    PidConfig config_;
    GainCode code_;
    PidGains gains_;
    PidState state_;
};

}  // namespace mimopid
