#include "mimopid/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mimopid::csv {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

void write_telemetry_row(std::ostream& os, const TelemetryRecord& rec) {
    os << format_double(rec.t) << ',' << rec.channel + 1 << ',' << format_double(rec.ref_v) << ','
       << format_double(rec.y_v) << ',' << format_double(rec.u_v) << ',' << format_double(rec.error_v) << ','
       << int{rec.code.kp_code} << ',' << int{rec.code.ki_code} << ',' << int{rec.code.kd_code} << ','
       << to_string(rec.mode) << ',' << rec.event << '\n';
}

void write_events(std::ostream& os, std::span<const SupervisorEvent> events) {
    os << kEventsHeader << '\n';
    for (const auto& e : events) os << format_double(e.time) << ',' << e.channel + 1 << ',' << to_string(e.kind) << '\n';
}

void write_metrics(std::ostream& os, std::span<const Metrics> metrics) {
    os << kMetricsHeader << '\n';
    for (std::size_t c = 0; c < metrics.size(); ++c) {
        const Metrics& m = metrics[c];
        os << c + 1 << ',' << format_double(m.overshoot) << ','
           << (m.settled ? format_double(m.settling_time) : std::string("inf")) << ',' << format_double(m.iae) << ','
           << format_double(m.ise) << '\n';
    }
}

void write_swarm_trace(std::ostream& os, std::span<const SwarmRecord> records) {
    os << kSwarmTraceHeader << '\n';
    for (const auto& r : records) {
        os << r.iteration << ',' << format_double(r.x[0]) << ',' << format_double(r.x[1]) << ','
           << format_double(r.x[2]) << ',' << format_double(r.fitness) << '\n';
    }
}

void write_convergence(std::ostream& os, std::span<const ConvergenceRow> rows) {
    os << kConvergenceHeader << '\n';
    for (const auto& r : rows) {
        os << r.particles << ',' << r.iterations_to_threshold << ',' << format_double(r.seconds) << '\n';
    }
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

Table read(std::istream& is) {
    Table t;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("csv: missing header");
    t.header = split(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto row = split(line);
        if (row.size() != t.header.size()) throw std::runtime_error("csv: row width differs from header");
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace mimopid::csv
