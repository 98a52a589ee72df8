#include "mimopid/plants.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace mimopid {

namespace {

constexpr double kSwingTolerance = 1e-6;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void require_positive_dt(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("plant step: dt must be positive, got " + std::to_string(dt));
    }
}

}  // namespace

void SensorMap::validate() const {
    if (!(v_min < v_max)) throw std::invalid_argument("sensor map: v_min must be below v_max");
    if (!(physical_min < physical_max)) {
        throw std::invalid_argument("sensor map: physical_min must be below physical_max");
    }
    if (!(scale > 0.0)) throw std::invalid_argument("sensor map: scale must be positive");
    if (std::abs(scale * (physical_max - physical_min) - (v_max - v_min)) > kSwingTolerance) {
        throw std::invalid_argument("sensor map: scale times physical span must equal voltage swing");
    }
    if (std::abs(sensor_to_voltage_unclamped(*this, physical_min) - v_min) > kSwingTolerance) {
        throw std::invalid_argument("sensor map: physical_min must map onto v_min");
    }
}

SensorMap SensorMap::temperature() {
    SensorMap m;
    m.kind = SensorKind::Temperature;
    m.scale = 0.0225;
    m.zero_reference = -50.0;
    m.offset_volts = 0.25;
    m.v_min = 0.25;
    m.v_max = 4.75;
    m.physical_min = -50.0;
    m.physical_max = 150.0;
    return m;
}

SensorMap SensorMap::gyroscope() {
    // The 0-5 V swing is not exactly reachable at 107.42 mV/(rad/s) over
    // +-23.27 rad/s; the swing is the image of the physical range.
    SensorMap m;
    m.kind = SensorKind::Gyroscope;
    m.scale = 0.10742;
    m.zero_reference = 0.0;
    m.offset_volts = 2.5;
    m.physical_min = -23.27;
    m.physical_max = 23.27;
    m.v_min = m.offset_volts + m.scale * m.physical_min;
    m.v_max = m.offset_volts + m.scale * m.physical_max;
    return m;
}

SensorMap SensorMap::tachometer(double full_scale_rpm) {
    SensorMap m;
    m.kind = SensorKind::Tachometer;
    m.scale = 5.0 / full_scale_rpm;
    m.zero_reference = 0.0;
    m.offset_volts = 0.0;
    m.v_min = 0.0;
    m.v_max = 5.0;
    m.physical_min = 0.0;
    m.physical_max = full_scale_rpm;
    return m;
}

double sensor_to_voltage_unclamped(const SensorMap& map, double x) {
    return map.offset_volts + map.scale * (x - map.zero_reference);
}

double sensor_to_voltage(const SensorMap& map, double x) {
    return std::clamp(sensor_to_voltage_unclamped(map, x), map.v_min, map.v_max);
}

double voltage_to_physical(const SensorMap& map, double v) {
    if (!(v >= map.v_min && v <= map.v_max)) {
        throw std::out_of_range("voltage " + std::to_string(v) + " V outside sensor swing");
    }
    return map.zero_reference + (v - map.offset_volts) / map.scale;
}

double tach_frequency(const TachSpec& spec) {
    if (spec.teeth < 1) throw std::invalid_argument("tachometer: teeth must be >= 1");
    if (spec.rpm < 0.0) throw std::invalid_argument("tachometer: rpm must be >= 0");
    return spec.rpm * spec.teeth / 60.0;
}

SecondOrderPlant::SecondOrderPlant(double omega_n, double zeta, double gain_k)
    : omega_n_(omega_n), zeta_(zeta), gain_k_(gain_k) {}

void SecondOrderPlant::set_omega_n(double omega_n) {
    omega_n_ = omega_n;
    cached_dt_ = 0.0;
}

void SecondOrderPlant::set_gain_k(double gain_k) {
    gain_k_ = gain_k;
    cached_dt_ = 0.0;
}

void SecondOrderPlant::discretize(double dt) {
    // exp([[A, B], [0, 0]] dt) = [[Phi, Gamma], [0, 1]]
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    const double wn2 = omega_n_ * omega_n_;
    m(0, 1) = 1.0;
    m(1, 0) = -wn2;
    m(1, 1) = -2.0 * zeta_ * omega_n_;
    m(1, 2) = gain_k_ * wn2;
    const Eigen::Matrix3d e = (m * dt).exp();
    phi_ = {e(0, 0), e(0, 1), e(1, 0), e(1, 1)};
    gamma_ = {e(0, 2), e(1, 2)};
    cached_dt_ = dt;
}

double SecondOrderPlant::step(double u, double dt) {
    require_positive_dt(dt);
    if (dt != cached_dt_) discretize(dt);
    const double y = phi_[0] * state_[0] + phi_[1] * state_[1] + gamma_[0] * u;
    const double yd = phi_[2] * state_[0] + phi_[3] * state_[1] + gamma_[1] * u;
    state_ = {y, yd};
    return y;
}

void validate_plant(const Plant& plant) {
    std::visit(overloaded{
                   [](const FirstOrderPlant& p) {
                       if (!(p.tau_s > 0.0)) throw std::invalid_argument("first-order plant: tau_s must be positive");
                       if (!std::isfinite(p.gain_k)) throw std::invalid_argument("first-order plant: gain_k must be finite");
                   },
                   [](const SecondOrderPlant& p) {
                       if (!(p.omega_n() > 0.0)) throw std::invalid_argument("second-order plant: omega_n must be positive");
                       if (!(p.zeta() > 0.0)) throw std::invalid_argument("second-order plant: zeta must be positive");
                       if (!std::isfinite(p.gain_k())) throw std::invalid_argument("second-order plant: gain_k must be finite");
                   },
               },
               plant);
}

double step_plant(Plant& plant, double u, double dt) {
    require_positive_dt(dt);
    return std::visit(overloaded{
                          [&](FirstOrderPlant& p) {
                              if (!(p.tau_s > 0.0)) throw std::invalid_argument("first-order plant: tau_s must be positive");
                              const double decay = std::exp(-dt / p.tau_s);
                              const double gain = -std::expm1(-dt / p.tau_s);
                              p.y = p.y * decay + p.gain_k * u * gain;
                              return p.y;
                          },
                          [&](SecondOrderPlant& p) { return p.step(u, dt); },
                      },
                      plant);
}

double plant_output(const Plant& plant) {
    return std::visit(overloaded{
                          [](const FirstOrderPlant& p) { return p.y; },
                          [](const SecondOrderPlant& p) { return p.output(); },
                      },
                      plant);
}

double plant_gain(const Plant& plant) {
    return std::visit(overloaded{
                          [](const FirstOrderPlant& p) { return p.gain_k; },
                          [](const SecondOrderPlant& p) { return p.gain_k(); },
                      },
                      plant);
}

void scale_plant_gain(Plant& plant, double factor) {
    std::visit(overloaded{
                   [&](FirstOrderPlant& p) { p.gain_k *= factor; },
                   [&](SecondOrderPlant& p) { p.set_gain_k(p.gain_k() * factor); },
               },
               plant);
}

void scale_plant_time_constant(Plant& plant, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("time-constant factor must be positive");
    std::visit(overloaded{
                   [&](FirstOrderPlant& p) { p.tau_s *= factor; },
                   [&](SecondOrderPlant& p) { p.set_omega_n(p.omega_n() / factor); },
               },
               plant);
}

void settle_plant(Plant& plant, double y) {
    std::visit(overloaded{
                   [&](FirstOrderPlant& p) { p.y = y; },
                   [&](SecondOrderPlant& p) { p.set_state({y, 0.0}); },
               },
               plant);
}

}  // namespace mimopid
