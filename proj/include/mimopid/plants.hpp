#pragma once

#include <array>
#include <variant>

namespace mimopid {

enum class SensorKind { Temperature, Gyroscope, Tachometer };

/// Linear physical-unit to voltage conversion with a saturating output swing.
///
/// v(x) = offset_volts + scale * (x - zero_reference), clamped to [v_min, v_max].
/// The swing endpoints correspond to physical_min and physical_max.
struct SensorMap {
    SensorKind kind = SensorKind::Tachometer;
    double scale = 1.0;           // volts per physical unit
    double zero_reference = 0.0;  // physical value mapped to offset_volts
    double offset_volts = 0.0;
    double v_min = 0.0;
    double v_max = 5.0;
    double physical_min = 0.0;
    double physical_max = 5.0;

    /// Throws std::invalid_argument when the swing and scale disagree.
    void validate() const;

    /// AD22100-style sensor: 22.5 mV/C, -50 C -> 0.25 V, +150 C -> 4.75 V.
    static SensorMap temperature();
    /// 107.42 mV/(rad/s) centred on 2.5 V over +-23.27 rad/s.
    static SensorMap gyroscope();
    /// Shaft speed mapped linearly onto 0-5 V over [0, full_scale_rpm].
    static SensorMap tachometer(double full_scale_rpm = 3000.0);
};

double sensor_to_voltage(const SensorMap& map, double x);
/// Same line as sensor_to_voltage without the output clamp.
double sensor_to_voltage_unclamped(const SensorMap& map, double x);
/// Inverse of the unclamped mapping. Throws std::out_of_range outside [v_min, v_max].
double voltage_to_physical(const SensorMap& map, double v);

struct TachSpec {
    int teeth = 1;
    double rpm = 0.0;
};

/// Pulse frequency in Hz: rpm * teeth / 60.
double tach_frequency(const TachSpec& spec);

/// tau * y' = -y + K * u
struct FirstOrderPlant {
    double gain_k = 1.0;
    double tau_s = 1.0;
    double y = 0.0;
};

/// y'' + 2 zeta omega_n y' + omega_n^2 y = K omega_n^2 u
///
/// The zero-order-hold transition matrices are cached for the last
/// (dt, parameters) combination, so repeated fixed-step calls cost one
/// 2x2 multiply.
class SecondOrderPlant {
public:
    SecondOrderPlant() = default;
    SecondOrderPlant(double omega_n, double zeta, double gain_k);

    double omega_n() const { return omega_n_; }
    double zeta() const { return zeta_; }
    double gain_k() const { return gain_k_; }
    void set_omega_n(double omega_n);
    void set_gain_k(double gain_k);

    double output() const { return state_[0]; }
    const std::array<double, 2>& state() const { return state_; }
    void set_state(const std::array<double, 2>& s) { state_ = s; }

    double step(double u, double dt);

private:
    void discretize(double dt);

    double omega_n_ = 1.0;
    double zeta_ = 1.0;
    double gain_k_ = 1.0;
    std::array<double, 2> state_{0.0, 0.0};

    double cached_dt_ = 0.0;
    std::array<double, 4> phi_{};    // row-major 2x2
    std::array<double, 2> gamma_{};
};

using Plant = std::variant<FirstOrderPlant, SecondOrderPlant>;

/// Advances the plant by dt with u held constant and returns the new output.
/// Throws std::invalid_argument for dt <= 0 or invalid plant parameters.
double step_plant(Plant& plant, double u, double dt);

double plant_output(const Plant& plant);
double plant_gain(const Plant& plant);
void validate_plant(const Plant& plant);

void scale_plant_gain(Plant& plant, double factor);
/// Scales tau (first order) or 1/omega_n (second order).
void scale_plant_time_constant(Plant& plant, double factor);

/// Puts the plant at rest with output y (derivatives zero).
void settle_plant(Plant& plant, double y);

}  // namespace mimopid
