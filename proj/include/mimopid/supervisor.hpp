#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mimopid/pid.hpp"

namespace mimopid {

using ChannelId = std::size_t;  // 0-based index into the channel list

enum class Mode { Nominal, PidRecovery, AwaitingTuner, Tuning };

enum class EventKind { DisturbanceDetected, PidRecovered, EscalatedToPso, TuningStarted, TuningFinished };

std::string_view to_string(Mode mode);
std::string_view to_string(EventKind kind);

struct ChannelState {
    Mode mode = Mode::Nominal;
    double mode_entered_at = 0.0;
    double pending_deadline = 0.0;  // PidRecovery: entry time + t_o
    double tuning_done_at = 0.0;    // Tuning: grant time + tuning duration
    bool disturbed = false;         // comparator output, with hysteresis
};

struct SupervisorConfig {
    double epsilon_v = 0.2;
    double hysteresis_v = 0.05;
    double t_o = 15.0;               // three 5 s time-equivalents
    double tuning_duration = 250.0;  // simulated cost of one tuner run
    std::size_t n_channels = 3;

    void validate() const;
};

/// FIFO admission to the single shared tuner.
class TunerAllocator {
public:
    void enqueue(ChannelId channel);
    /// Pops the queue head into the active slot when the tuner is idle.
    std::optional<ChannelId> grant();
    void release(ChannelId channel);

    bool idle() const { return !active_.has_value(); }
    std::optional<ChannelId> active() const { return active_; }
    const std::deque<ChannelId>& queue() const { return queue_; }

    /// Throws FaultError when a channel is queued twice or both queued and active.
    void check() const;

private:
    std::deque<ChannelId> queue_;
    std::optional<ChannelId> active_;
};

struct SupervisorEvent {
    double time = 0.0;
    ChannelId channel = 0;
    EventKind kind = EventKind::DisturbanceDetected;
};

/// Window comparator with hysteresis on |y - ref|.
bool compare(double y_v, double ref_v, const SupervisorConfig& config, bool was_disturbed);

/// Advances every channel's recovery state machine by one sample.
///
/// Phases, in order: comparator update for all channels; tuner completions
/// (Tuning -> Nominal, tuner released); per-channel transitions in index
/// order (detection, Case 1 recovery, Case 2 escalation onto the queue);
/// finally one grant if the tuner is idle. Comparator decisions use this
/// sample's errors only, so no channel observes another's transition.
/// `errors` holds ref - y per channel.
std::vector<SupervisorEvent> supervise_step(std::span<ChannelState> states, std::span<const double> errors, double t,
                                            TunerAllocator& alloc, const SupervisorConfig& config);

/// Reprograms the channel's PID stage; the integral contribution carries over.
void install_gains(PidController& controller, const GainCode& code);

}  // namespace mimopid
