#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mimopid/pso.hpp"
#include "mimopid/sim.hpp"
#include "mimopid/supervisor.hpp"

namespace mimopid::csv {

inline constexpr const char* kTelemetryHeader = "t,channel,ref_v,y_v,u_v,error_v,kp_code,ki_code,kd_code,mode,event";
inline constexpr const char* kEventsHeader = "t,channel,kind";
inline constexpr const char* kMetricsHeader = "channel,overshoot,settling_time,iae,ise";
inline constexpr const char* kSwarmTraceHeader = "iteration,kp,ki,kd,fitness";
inline constexpr const char* kConvergenceHeader = "particles,iterations_to_threshold,seconds";

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

// Channel ids are written 1-based, matching the scenario's [channel.N] sections.
void write_telemetry_row(std::ostream& os, const TelemetryRecord& rec);
void write_events(std::ostream& os, std::span<const SupervisorEvent> events);
/// Unsettled channels report settling_time as inf.
void write_metrics(std::ostream& os, std::span<const Metrics> metrics);
void write_swarm_trace(std::ostream& os, std::span<const SwarmRecord> records);
void write_convergence(std::ostream& os, std::span<const ConvergenceRow> rows);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Splits a comma-separated file with a header line. Fields never contain commas.
Table read(std::istream& is);

}  // namespace mimopid::csv
