// Batch runner: parses a scenario, simulates it and writes CSV outputs.
//
//   mimopid --scenario s.ini --out results --emit telemetry,events,metrics
//
// Exit codes: 0 success, 1 invalid input, 2 runtime fault.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mimopid/csv.hpp"
#include "mimopid/errors.hpp"
#include "mimopid/scenario.hpp"

namespace fs = std::filesystem;
using namespace mimopid;

namespace {

const std::set<std::string> kEmitKinds{"telemetry", "events", "metrics", "swarm_trace", "convergence_study"};

/// Files are written under a temporary name and renamed together once
/// everything succeeded; on failure the temporaries are removed.
class AtomicOutputs {
public:
    explicit AtomicOutputs(fs::path dir) : dir_(std::move(dir)) {}
    AtomicOutputs(const AtomicOutputs&) = delete;
    AtomicOutputs& operator=(const AtomicOutputs&) = delete;

    ~AtomicOutputs() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& [tmp, _] : files_) fs::remove(tmp, ec);
    }

    std::ofstream open(const std::string& name) {
        const fs::path final_path = dir_ / name;
        const fs::path tmp = dir_ / ("." + name + ".tmp");
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        files_.emplace_back(tmp, final_path);
        return os;
    }

    void commit() {
        for (const auto& [tmp, final_path] : files_) fs::rename(tmp, final_path);
        committed_ = true;
    }

private:
    fs::path dir_;
    std::vector<std::pair<fs::path, fs::path>> files_;
    bool committed_ = false;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void close_checked(std::ofstream& os, const std::string& what) {
    os.close();
    if (!os) throw IoError("failed writing " + what);
}

int run(const std::string& scenario_path, const fs::path& out_dir, std::optional<std::uint64_t> seed,
        std::optional<double> dt, const std::set<std::string>& emit, const std::vector<std::size_t>& study_counts) {
    Scenario scenario = load_scenario(scenario_path);
    if (seed) scenario.seed = *seed;
    if (dt) scenario.dt = *dt;
    scenario.validate();

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    AtomicOutputs outputs(out_dir);
    RunOptions options;
    options.keep_telemetry = false;
    std::ofstream telemetry;
    if (emit.count("telemetry")) {
        telemetry = outputs.open("telemetry.csv");
        telemetry << csv::kTelemetryHeader << '\n';
        options.sink = [&telemetry](const TelemetryRecord& rec) { csv::write_telemetry_row(telemetry, rec); };
    }

    const ScenarioResult result = run_scenario(scenario, options);

    if (telemetry.is_open()) close_checked(telemetry, "telemetry.csv");
    if (emit.count("events")) {
        auto os = outputs.open("events.csv");
        csv::write_events(os, result.events);
        close_checked(os, "events.csv");
    }
    if (emit.count("metrics")) {
        auto os = outputs.open("metrics.csv");
        csv::write_metrics(os, result.metrics);
        close_checked(os, "metrics.csv");
    }
    if (emit.count("swarm_trace")) {
        std::vector<std::size_t> per_channel(scenario.channels.size(), 0);
        for (const auto& t : result.tunings) {
            const std::string name = "swarm_trace_ch" + std::to_string(t.channel + 1) + "_" +
                                     std::to_string(++per_channel[t.channel]) + ".csv";
            auto os = outputs.open(name);
            csv::write_swarm_trace(os, t.trace.records);
            close_checked(os, name);
        }
    }
    if (!study_counts.empty() || emit.count("convergence_study")) {
        const std::vector<std::size_t> counts = study_counts.empty() ? std::vector<std::size_t>{10, 20, 30, 40, 50}
                                                                     : study_counts;
        // Study the first channel's tuning problem from its quiescent state.
        const ChannelModel model = channel_replica(scenario, 0, scenario.channels[0].plant, 0.0);
        PsoConfig pc = scenario.pso;
        pc.seed = scenario.seed;
        const Objective objective = [&](const Vec3& x) { return evaluate_fitness(x, model, scenario.weights); };
        const auto rows = convergence_study(counts, pc, objective);
        auto os = outputs.open("convergence_study.csv");
        csv::write_convergence(os, rows);
        close_checked(os, "convergence_study.csv");
    }
    outputs.commit();

    for (std::size_t c = 0; c < scenario.channels.size(); ++c) {
        const Metrics& m = result.metrics[c];
        std::printf("channel %zu (%s): mode=%s overshoot=%.4f settling=%s iae=%.4f ise=%.4f\n", c + 1,
                    std::string(to_string(scenario.channels[c].kind)).c_str(),
                    std::string(to_string(result.final_states[c].mode)).c_str(), m.overshoot,
                    m.settled ? csv::format_double(m.settling_time).c_str() : "not-settled", m.iae, m.ise);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-channel self-tuning PID simulator"};
    std::string scenario_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::string emit_list = "telemetry,events,metrics";
    std::string study_list;

    app.add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed", seed, "Override the scenario seed");
    app.add_option("--dt", dt, "Override the simulation step (s)");
    app.add_option("--emit", emit_list, "Comma list of telemetry,events,metrics,swarm_trace,convergence_study");
    app.add_option("--study-particles", study_list, "Comma list of particle counts for a convergence study");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        std::set<std::string> emit;
        for (const auto& item : split_list(emit_list)) {
            if (!kEmitKinds.count(item)) throw ValidationError("unknown --emit entry `" + item + "`");
            emit.insert(item);
        }
        std::vector<std::size_t> counts;
        for (const auto& item : split_list(study_list)) {
            std::size_t pos = 0;
            unsigned long long v = 0;
            try {
                v = std::stoull(item, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != item.size() || v == 0) throw ValidationError("--study-particles expects positive integers");
            counts.push_back(static_cast<std::size_t>(v));
        }
        return run(scenario_path, out_dir, seed, dt, emit, counts);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "fault: " << e.what() << '\n';
        return 2;
    }
}
