#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mimopid/pid.hpp"
#include "mimopid/plants.hpp"
#include "mimopid/pso.hpp"
#include "mimopid/supervisor.hpp"

namespace mimopid {

enum class PlantKind { Motor, Temperature, Gyroscope };

std::string_view to_string(PlantKind kind);

/// Constant level that may step once: initial_v before step_time, final_v after.
struct ReferenceSpec {
    double initial_v = 0.0;
    double final_v = 0.0;
    double step_time = 0.0;

    double at(double t) const { return t < step_time ? initial_v : final_v; }
    static ReferenceSpec constant(double v) { return {v, v, 0.0}; }
};

enum class InitialCondition {
    Settled,  // plant at the initial reference, integrator holding it
    Rest,     // plant output zero, controller reset
};

struct ChannelConfig {
    PlantKind kind = PlantKind::Motor;
    Plant plant = FirstOrderPlant{};
    SensorMap map = SensorMap::tachometer();
    PidConfig pid{};  // dt is taken from the scenario
    GainCode initial_code{};
    ReferenceSpec reference{};
    InitialCondition start = InitialCondition::Settled;

    /// Default model, sensor, reference and tuned gain code for a plant kind.
    static ChannelConfig defaults(PlantKind kind);
};

enum class DisturbanceKind { Pulse, SustainedStep, ParameterShift };
enum class ShiftTarget { Gain, TimeConstant };

std::string_view to_string(DisturbanceKind kind);

struct DisturbanceSpec {
    ChannelId channel = 0;
    DisturbanceKind kind = DisturbanceKind::Pulse;
    double start = 0.0;
    std::optional<double> stop;   // Pulse only
    double magnitude = 1.0;       // volts, or a multiplier for ParameterShift
    ShiftTarget target = ShiftTarget::Gain;
};

struct Scenario {
    double duration = 300.0;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    double window_s = 5.0;  // fitness window, also one time-equivalent
    std::vector<ChannelConfig> channels;
    std::vector<DisturbanceSpec> disturbances;
    SupervisorConfig supervisor{};
    PsoConfig pso{};
    FitnessWeights weights{};
    ComponentLadder ladder{};

    /// Motor, temperature and gyroscope channels with every default applied.
    static Scenario defaults();

    /// One message per violated constraint, prefixed with the offending field.
    std::vector<std::string> validation_errors() const;
    /// Throws ValidationError listing every violation.
    void validate() const;

    std::size_t step_count() const;
    /// Supervisor settings with n_channels and tuning cost derived from the scenario.
    SupervisorConfig effective_supervisor() const;
};

struct TelemetryRecord {
    double t = 0.0;
    ChannelId channel = 0;
    double ref_v = 0.0;
    double y_v = 0.0;
    double u_v = 0.0;
    double error_v = 0.0;
    GainCode code{};
    Mode mode = Mode::Nominal;
    std::string event;  // ';'-joined event kinds emitted for this channel at t
};

struct Metrics {
    double overshoot = 0.0;
    double settling_time = 0.0;
    bool settled = true;
    double iae = 0.0;
    double ise = 0.0;
};

/// Streaming form of compute_metrics.
class MetricsAccumulator {
public:
    MetricsAccumulator(const ReferenceSpec& reference, double epsilon_v);

    void add(double t, double y_v, double error_v);
    Metrics result() const;

private:
    double epsilon_v_;
    double direction_;
    double span_;
    bool any_ = false;
    double prev_t_ = 0.0;
    double prev_abs_ = 0.0;
    double prev_sq_ = 0.0;
    double first_t_ = 0.0;
    double peak_excess_ = 0.0;
    bool last_out_ = false;
    bool has_settle_from_ = false;
    double settle_from_ = 0.0;
    Metrics m_;
};

/// Overshoot is the peak excursion past the reference in the direction of
/// the reference step, over the step span (or over the level for a constant
/// reference). Settling time is the first sample after the last sample
/// outside +-epsilon_v. IAE and ISE integrate by the trapezoid rule.
Metrics compute_metrics(std::span<const TelemetryRecord> telemetry, const ReferenceSpec& reference, double epsilon_v);

struct TuningReport {
    ChannelId channel = 0;
    double started_at = 0.0;
    std::optional<double> finished_at;
    GainCode previous_code{};
    ChannelModel replica{};
    SwarmTrace trace{};
};

struct ScenarioResult {
    std::vector<TelemetryRecord> telemetry;  // empty unless RunOptions::keep_telemetry
    std::vector<SupervisorEvent> events;
    std::vector<Metrics> metrics;
    std::vector<TuningReport> tunings;
    std::vector<ChannelState> final_states;
    std::size_t record_count = 0;
};

struct RunOptions {
    bool keep_telemetry = true;
    std::function<void(const TelemetryRecord&)> sink;  // called for every record, in order
};

/// Runs all channels in lockstep. Each sample: sense, supervise, control,
/// actuate, integrate the plants over dt.
ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Replica of a channel's current plant used for tuning at time t.
ChannelModel channel_replica(const Scenario& scenario, ChannelId channel, const Plant& current_plant, double t);

}  // namespace mimopid
