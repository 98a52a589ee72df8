#include "mimopid/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mimopid/errors.hpp"

namespace mimopid {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::string channel_field(ChannelId c, const char* field) {
    return "channel." + std::to_string(c + 1) + "." + field;
}

template <class F>
void collect(std::vector<std::string>& errs, const std::string& prefix, F&& check) {
    try {
        check();
    } catch (const std::exception& e) {
        errs.push_back(prefix.empty() ? std::string(e.what()) : prefix + ": " + e.what());
    }
}

double additive_offset(const Scenario& s, ChannelId c, double t, bool sustained_only) {
    double offset = 0.0;
    for (const auto& d : s.disturbances) {
        if (d.channel != c || t < d.start) continue;
        if (d.kind == DisturbanceKind::SustainedStep) {
            offset += d.magnitude;
        } else if (d.kind == DisturbanceKind::Pulse && !sustained_only) {
            if (!d.stop || t < *d.stop) offset += d.magnitude;
        }
    }
    return offset;
}

/// k * dt, computed as k / rate when the step divides one second evenly so
/// that times like 6.544 come out correctly rounded.
double sample_time(std::size_t k, double dt) {
    const double rate = std::round(1.0 / dt);
    if (rate >= 1.0 && std::abs(1.0 / rate - dt) <= 1e-15 * dt) return static_cast<double>(k) / rate;
    return static_cast<double>(k) * dt;
}

}  // namespace

std::string_view to_string(PlantKind kind) {
    switch (kind) {
    case PlantKind::Motor: return "motor";
    case PlantKind::Temperature: return "temperature";
    case PlantKind::Gyroscope: return "gyro";
    }
    return "?";
}

std::string_view to_string(DisturbanceKind kind) {
    switch (kind) {
    case DisturbanceKind::Pulse: return "pulse";
    case DisturbanceKind::SustainedStep: return "step";
    case DisturbanceKind::ParameterShift: return "parameter_shift";
    }
    return "?";
}

ChannelConfig ChannelConfig::defaults(PlantKind kind) {
    ChannelConfig c;
    c.kind = kind;
    switch (kind) {
    case PlantKind::Motor:
        // 5 V drive -> 3000 RPM
        c.plant = FirstOrderPlant{600.0, 0.5, 0.0};
        c.map = SensorMap::tachometer(3000.0);
        c.reference = ReferenceSpec::constant(2.5);
        c.initial_code = GainCode{8, 0, 1};
        break;
    case PlantKind::Temperature:
        c.plant = FirstOrderPlant{30.0, 20.0, 0.0};
        c.map = SensorMap::temperature();
        c.reference = ReferenceSpec::constant(3.0);
        c.initial_code = GainCode{9, 0, 0};
        break;
    case PlantKind::Gyroscope:
        // 5 V drive -> 23.27 rad/s
        c.plant = SecondOrderPlant{20.0, 0.7, 23.27 / 5.0};
        c.map = SensorMap::gyroscope();
        c.reference = ReferenceSpec::constant(3.5);
        c.initial_code = GainCode{7, 0, 1};
        break;
    }
    return c;
}

Scenario Scenario::defaults() {
    Scenario s;
    s.channels = {ChannelConfig::defaults(PlantKind::Motor), ChannelConfig::defaults(PlantKind::Temperature),
                  ChannelConfig::defaults(PlantKind::Gyroscope)};
    s.pso = PsoConfig::for_ladder(s.ladder);
    s.supervisor.t_o = 3.0 * s.window_s;
    return s;
}

std::size_t Scenario::step_count() const {
    return static_cast<std::size_t>(std::floor(duration / dt + 1e-9));
}

SupervisorConfig Scenario::effective_supervisor() const {
    SupervisorConfig c = supervisor;
    c.n_channels = channels.size();
    c.tuning_duration = static_cast<double>(pso.n_iterations) * window_s;
    return c;
}

std::vector<std::string> Scenario::validation_errors() const {
    std::vector<std::string> errs;
    if (!(duration > 0.0) || !std::isfinite(duration)) errs.push_back("sim.duration: must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) errs.push_back("sim.dt: must be positive");
    else if (dt > duration) errs.push_back("sim.dt: must not exceed duration");
    if (!(window_s > 0.0)) errs.push_back("pso.window: must be positive");
    else if (dt > 0.0 && window_s < dt) errs.push_back("pso.window: must be at least one step");
    if (channels.empty()) errs.push_back("channel: at least one channel is required");

    collect(errs, "", [&] { effective_supervisor().validate(); });
    collect(errs, "", [&] { pso.validate(); });
    collect(errs, "", [&] { weights.validate(); });
    collect(errs, "", [&] { ladder.validate(); });

    for (ChannelId c = 0; c < channels.size(); ++c) {
        const ChannelConfig& ch = channels[c];
        collect(errs, channel_field(c, "plant"), [&] { validate_plant(ch.plant); });
        collect(errs, channel_field(c, "sensor"), [&] { ch.map.validate(); });
        collect(errs, channel_field(c, "pid"), [&] {
            PidConfig p = ch.pid;
            p.dt = dt > 0.0 ? dt : 1.0;
            p.validate();
        });
        collect(errs, channel_field(c, "code"), [&] { ch.initial_code.validate(); });
        for (double v : {ch.reference.initial_v, ch.reference.final_v}) {
            if (!(v >= ch.map.v_min && v <= ch.map.v_max)) {
                errs.push_back(channel_field(c, "ref_v") + ": reference outside the sensor swing");
                break;
            }
        }
        if (ch.start == InitialCondition::Settled && ch.reference.initial_v >= ch.map.v_min &&
            ch.reference.initial_v <= ch.map.v_max) {
            const double k = plant_gain(ch.plant);
            const double y = voltage_to_physical(ch.map, ch.reference.initial_v);
            if (k == 0.0) {
                errs.push_back(channel_field(c, "start") + ": cannot settle a plant with zero gain");
            } else if (const double u = y / k; u < ch.pid.u_min || u > ch.pid.u_max) {
                errs.push_back(channel_field(c, "start") + ": holding the reference needs a drive outside [u_min, u_max]");
            }
        }
    }

    for (std::size_t i = 0; i < disturbances.size(); ++i) {
        const DisturbanceSpec& d = disturbances[i];
        const std::string prefix = "disturbance." + std::to_string(i + 1);
        if (d.channel >= channels.size()) errs.push_back(prefix + ".channel: no such channel");
        if (!(d.start >= 0.0) || !(d.start < duration)) errs.push_back(prefix + ".start: must lie in [0, duration)");
        if (d.stop && d.kind != DisturbanceKind::Pulse) errs.push_back(prefix + ".stop: only pulses have a stop time");
        if (d.kind == DisturbanceKind::Pulse && !d.stop) errs.push_back(prefix + ".stop: pulses need a stop time");
        if (d.stop && !(d.start < *d.stop)) errs.push_back(prefix + ".stop: must be after start");
        if (!std::isfinite(d.magnitude)) errs.push_back(prefix + ".magnitude: must be finite");
        if (d.kind == DisturbanceKind::ParameterShift && !(d.magnitude > 0.0)) {
            errs.push_back(prefix + ".magnitude: parameter shift multiplier must be positive");
        }
    }
    return errs;
}

void Scenario::validate() const {
    const auto errs = validation_errors();
    if (errs.empty()) return;
    std::string msg = "invalid scenario:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ValidationError(msg);
}

MetricsAccumulator::MetricsAccumulator(const ReferenceSpec& reference, double epsilon_v) : epsilon_v_(epsilon_v) {
    const double step = reference.final_v - reference.initial_v;
    direction_ = step >= 0.0 ? 1.0 : -1.0;
    if (std::abs(step) > 1e-12) span_ = std::abs(step);
    else if (std::abs(reference.final_v) > 1e-12) span_ = std::abs(reference.final_v);
    else span_ = 1.0;
}

void MetricsAccumulator::add(double t, double y_v, double error_v) {
    const double abs_e = std::abs(error_v);
    const double sq = error_v * error_v;
    if (!any_) {
        first_t_ = t;
        any_ = true;
    } else {
        const double h = t - prev_t_;
        m_.iae += 0.5 * h * (abs_e + prev_abs_);
        m_.ise += 0.5 * h * (sq + prev_sq_);
        if (last_out_) {
            has_settle_from_ = true;
            settle_from_ = t;
        }
    }
    // y - ref = -error
    peak_excess_ = std::max(peak_excess_, -direction_ * error_v);
    last_out_ = abs_e > epsilon_v_;
    prev_t_ = t;
    prev_abs_ = abs_e;
    prev_sq_ = sq;
    (void)y_v;
}

Metrics MetricsAccumulator::result() const {
    Metrics m = m_;
    m.overshoot = peak_excess_ / span_;
    if (!any_) return m;
    if (last_out_) {
        m.settled = false;
        m.settling_time = prev_t_ - first_t_;
    } else {
        m.settled = true;
        m.settling_time = has_settle_from_ ? settle_from_ - first_t_ : 0.0;
    }
    return m;
}

Metrics compute_metrics(std::span<const TelemetryRecord> telemetry, const ReferenceSpec& reference, double epsilon_v) {
    if (telemetry.empty()) throw std::invalid_argument("compute_metrics: empty telemetry");
    MetricsAccumulator acc(reference, epsilon_v);
    for (const auto& r : telemetry) acc.add(r.t, r.y_v, r.error_v);
    return acc.result();
}

ChannelModel channel_replica(const Scenario& scenario, ChannelId channel, const Plant& current_plant, double t) {
    const ChannelConfig& ch = scenario.channels.at(channel);
    ChannelModel m;
    m.plant = current_plant;
    settle_plant(m.plant, 0.0);
    m.map = ch.map;
    m.pid = ch.pid;
    m.pid.dt = scenario.dt;
    m.ref_v = ch.reference.final_v;
    m.output_offset_v = additive_offset(scenario, channel, t, true);
    m.window_s = scenario.window_s;
    return m;
}

ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& options) {
    scenario.validate();
    const std::size_t n = scenario.channels.size();
    const std::size_t steps = scenario.step_count();
    const SupervisorConfig sup = scenario.effective_supervisor();

    std::vector<Plant> plants;
    std::vector<PidController> controllers;
    std::vector<MetricsAccumulator> accumulators;
    plants.reserve(n);
    controllers.reserve(n);
    accumulators.reserve(n);
    for (const auto& ch : scenario.channels) {
        PidConfig pc = ch.pid;
        pc.dt = scenario.dt;
        plants.push_back(ch.plant);
        controllers.emplace_back(ch.initial_code, scenario.ladder, pc);
        accumulators.emplace_back(ch.reference, sup.epsilon_v);
        if (ch.start == InitialCondition::Settled) {
            const double y = voltage_to_physical(ch.map, ch.reference.at(0.0));
            settle_plant(plants.back(), y);
            controllers.back().preload(y / plant_gain(plants.back()));
        } else {
            settle_plant(plants.back(), 0.0);
        }
    }

    ScenarioResult result;
    result.metrics.resize(n);
    std::vector<ChannelState> states(n);
    TunerAllocator alloc;
    std::vector<bool> shift_applied(scenario.disturbances.size(), false);
    std::vector<std::optional<std::size_t>> pending(n);  // index into result.tunings
    std::vector<double> errors(n), refs(n), ys(n);
    std::vector<std::string> event_text(n);
    std::size_t tuning_ordinal = 0;

    if (options.keep_telemetry) result.telemetry.reserve(n * (steps + 1));

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = sample_time(k, scenario.dt);

        for (std::size_t i = 0; i < scenario.disturbances.size(); ++i) {
            const auto& d = scenario.disturbances[i];
            if (d.kind != DisturbanceKind::ParameterShift || shift_applied[i] || t < d.start) continue;
            if (d.target == ShiftTarget::Gain) scale_plant_gain(plants[d.channel], d.magnitude);
            else scale_plant_time_constant(plants[d.channel], d.magnitude);
            shift_applied[i] = true;
        }

        // sense
        for (std::size_t c = 0; c < n; ++c) {
            const auto& ch = scenario.channels[c];
            const double y_phys = plant_output(plants[c]);
            if (!std::isfinite(y_phys)) {
                throw FaultError("channel " + std::to_string(c + 1) + ": plant output is not finite");
            }
            ys[c] = sensor_to_voltage(ch.map, y_phys) + additive_offset(scenario, c, t, false);
            refs[c] = ch.reference.at(t);
            errors[c] = refs[c] - ys[c];
            event_text[c].clear();
        }

        // supervise
        for (const auto& ev : supervise_step(states, errors, t, alloc, sup)) {
            result.events.push_back(ev);
            auto& text = event_text[ev.channel];
            if (!text.empty()) text += ';';
            text += to_string(ev.kind);

            if (ev.kind == EventKind::TuningStarted) {
                TuningReport report;
                report.channel = ev.channel;
                report.started_at = t;
                report.previous_code = controllers[ev.channel].code();
                report.replica = channel_replica(scenario, ev.channel, plants[ev.channel], t);
                PsoConfig pc = scenario.pso;
                pc.seed = splitmix64(scenario.seed ^ splitmix64(tuning_ordinal++));
                report.trace = run_pso(report.replica, pc, scenario.weights, scenario.ladder);
                pending[ev.channel] = result.tunings.size();
                result.tunings.push_back(std::move(report));
            } else if (ev.kind == EventKind::TuningFinished) {
                if (!pending[ev.channel]) throw FaultError("tuning finished without a tuning run");
                TuningReport& report = result.tunings[*pending[ev.channel]];
                install_gains(controllers[ev.channel], report.trace.final_code);
                report.finished_at = t;
                pending[ev.channel].reset();
            }
        }

        // control, actuate, integrate
        for (std::size_t c = 0; c < n; ++c) {
            const double u = controllers[c].step(errors[c]);
            TelemetryRecord rec{t,      c,          refs[c], ys[c], u, errors[c], controllers[c].code(),
                                states[c].mode, event_text[c]};
            accumulators[c].add(t, ys[c], errors[c]);
            if (options.sink) options.sink(rec);
            if (options.keep_telemetry) result.telemetry.push_back(std::move(rec));
            ++result.record_count;
            if (k < steps) step_plant(plants[c], u, scenario.dt);
        }
    }

    for (std::size_t c = 0; c < n; ++c) result.metrics[c] = accumulators[c].result();
    result.final_states = std::move(states);
    return result;
}

}  // namespace mimopid
