#include "mimopid/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mimopid/errors.hpp"

namespace mimopid {

namespace {

// Absorbs rounding in t = k * dt when comparing against deadlines.
constexpr double kTimeSlack = 1e-9;

void enter(ChannelState& s, Mode mode, double t) {
    s.mode = mode;
    s.mode_entered_at = t;
}

}  // namespace

std::string_view to_string(Mode mode) {
    switch (mode) {
    case Mode::Nominal: return "Nominal";
    case Mode::PidRecovery: return "PidRecovery";
    case Mode::AwaitingTuner: return "AwaitingTuner";
    case Mode::Tuning: return "Tuning";
    }
    return "?";
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::DisturbanceDetected: return "DisturbanceDetected";
    case EventKind::PidRecovered: return "PidRecovered";
    case EventKind::EscalatedToPso: return "EscalatedToPso";
    case EventKind::TuningStarted: return "TuningStarted";
    case EventKind::TuningFinished: return "TuningFinished";
    }
    return "?";
}

void SupervisorConfig::validate() const {
    if (!(epsilon_v > 0.0)) throw std::invalid_argument("supervisor: epsilon_v must be positive");
    if (!(hysteresis_v >= 0.0 && hysteresis_v < epsilon_v)) {
        throw std::invalid_argument("supervisor: hysteresis_v must be in [0, epsilon_v)");
    }
    if (!(t_o > 0.0)) throw std::invalid_argument("supervisor: t_o must be positive");
    if (!(tuning_duration >= 0.0)) throw std::invalid_argument("supervisor: tuning_duration must be >= 0");
    if (n_channels < 1) throw std::invalid_argument("supervisor: n_channels must be >= 1");
}

void TunerAllocator::enqueue(ChannelId channel) {
    if (active_ == channel || std::find(queue_.begin(), queue_.end(), channel) != queue_.end()) {
        throw FaultError("allocator: channel " + std::to_string(channel) + " already holds or awaits the tuner");
    }
    queue_.push_back(channel);
}

std::optional<ChannelId> TunerAllocator::grant() {
    if (active_ || queue_.empty()) return std::nullopt;
    active_ = queue_.front();
    queue_.pop_front();
    return active_;
}

void TunerAllocator::release(ChannelId channel) {
    if (active_ != channel) {
        throw FaultError("allocator: channel " + std::to_string(channel) + " released a tuner it does not hold");
    }
    active_.reset();
}

void TunerAllocator::check() const {
    for (std::size_t i = 0; i < queue_.size(); ++i) {
        if (active_ == queue_[i]) throw FaultError("allocator: active channel is also queued");
        for (std::size_t j = i + 1; j < queue_.size(); ++j) {
            if (queue_[i] == queue_[j]) throw FaultError("allocator: channel queued twice");
        }
    }
}

bool compare(double y_v, double ref_v, const SupervisorConfig& config, bool was_disturbed) {
    const double err = std::abs(y_v - ref_v);
    if (!was_disturbed) return err > config.epsilon_v;
    return !(err < config.epsilon_v - config.hysteresis_v);
}

std::vector<SupervisorEvent> supervise_step(std::span<ChannelState> states, std::span<const double> errors, double t,
                                            TunerAllocator& alloc, const SupervisorConfig& config) {
    if (states.size() != errors.size()) throw FaultError("supervisor: state and error counts differ");
    alloc.check();
    for (const auto& s : states) {
        if (t + kTimeSlack < s.mode_entered_at) throw FaultError("supervisor: time moved backwards");
    }

    std::vector<SupervisorEvent> events;
    const auto emit = [&](ChannelId c, EventKind k) { events.push_back(SupervisorEvent{t, c, k}); };

    for (std::size_t c = 0; c < states.size(); ++c) {
        states[c].disturbed = compare(errors[c], 0.0, config, states[c].disturbed);
    }

    std::vector<bool> moved(states.size(), false);
    for (std::size_t c = 0; c < states.size(); ++c) {
        ChannelState& s = states[c];
        if (s.mode == Mode::Tuning && t + kTimeSlack >= s.tuning_done_at) {
            alloc.release(c);
            enter(s, Mode::Nominal, t);
            emit(c, EventKind::TuningFinished);
            moved[c] = true;
        }
    }

    for (std::size_t c = 0; c < states.size(); ++c) {
        if (moved[c]) continue;
        ChannelState& s = states[c];
        switch (s.mode) {
        case Mode::Nominal:
            if (s.disturbed) {
                enter(s, Mode::PidRecovery, t);
                s.pending_deadline = t + config.t_o;
                emit(c, EventKind::DisturbanceDetected);
            }
            break;
        case Mode::PidRecovery:
            if (!s.disturbed) {
                enter(s, Mode::Nominal, t);
                emit(c, EventKind::PidRecovered);
            } else if (t + kTimeSlack >= s.pending_deadline) {
                enter(s, Mode::AwaitingTuner, t);
                alloc.enqueue(c);
                emit(c, EventKind::EscalatedToPso);
            }
            break;
        case Mode::AwaitingTuner:
        case Mode::Tuning:
            break;
        }
    }

    if (auto granted = alloc.grant()) {
        ChannelState& s = states[*granted];
        if (s.mode != Mode::AwaitingTuner) throw FaultError("supervisor: granted channel was not awaiting the tuner");
        enter(s, Mode::Tuning, t);
        s.tuning_done_at = t + config.tuning_duration;
        emit(*granted, EventKind::TuningStarted);
    }

    if (alloc.active()) {
        for (std::size_t c = 0; c < states.size(); ++c) {
            if (states[c].mode == Mode::Tuning && c != *alloc.active()) {
                throw FaultError("supervisor: more than one channel tuning");
            }
        }
    }
    return events;
}

void install_gains(PidController& controller, const GainCode& code) { controller.install(code); }

}  // namespace mimopid
