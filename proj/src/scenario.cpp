#include "mimopid/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "mimopid/errors.hpp"

namespace mimopid {

namespace {

struct Entry {
    std::string key;
    std::string value;
    int line = 0;
    bool used = false;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<Entry> entries;
};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool valid_identifier(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '.';
    });
}

/// Typed, consumption-tracked access to one section's entries.
class Keys {
public:
    explicit Keys(Section& s) : s_(s) {}

    std::optional<double> number(const std::string& key) {
        Entry* e = take(key);
        if (!e) return std::nullopt;
        double v = 0.0;
        const char* first = e->value.data();
        const char* last = first + e->value.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v)) {
            throw ParseError(e->line, "`" + key + "` expects a number, got `" + e->value + "`");
        }
        return v;
    }

    std::optional<std::uint64_t> integer(const std::string& key,
                                         std::uint64_t max = std::numeric_limits<std::uint64_t>::max()) {
        Entry* e = take(key);
        if (!e) return std::nullopt;
        std::uint64_t v = 0;
        const char* first = e->value.data();
        const char* last = first + e->value.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc{} || res.ptr != last) {
            throw ParseError(e->line, "`" + key + "` expects a non-negative integer, got `" + e->value + "`");
        }
        if (v > max) {
            throw ValidationError("[" + s_.name + "] " + key + " must be at most " + std::to_string(max));
        }
        return v;
    }

    template <class T>
    std::optional<T> choice(const std::string& key, const std::map<std::string, T>& options) {
        Entry* e = take(key);
        if (!e) return std::nullopt;
        const auto it = options.find(lower(e->value));
        if (it == options.end()) {
            std::string allowed;
            for (const auto& [name, _] : options) allowed += (allowed.empty() ? "" : ", ") + name;
            throw ParseError(e->line, "`" + key + "` must be one of {" + allowed + "}, got `" + e->value + "`");
        }
        return it->second;
    }

    bool has(const std::string& key) const {
        return std::any_of(s_.entries.begin(), s_.entries.end(), [&](const Entry& e) { return e.key == key; });
    }

    /// Rejects a key that exists but does not apply in this context.
    void reject(const std::string& key, const std::string& why) {
        if (Entry* e = take(key)) {
            throw ValidationError("[" + s_.name + "] key `" + key + "` (line " + std::to_string(e->line) + ") " + why);
        }
    }

    void finish() const {
        for (const auto& e : s_.entries) {
            if (!e.used) {
                throw ValidationError("unknown key `" + e.key + "` in [" + s_.name + "] (line " +
                                      std::to_string(e.line) + ")");
            }
        }
    }

private:
    Entry* take(const std::string& key) {
        for (auto& e : s_.entries) {
            if (e.key == key) {
                e.used = true;
                return &e;
            }
        }
        return nullptr;
    }

    Section& s_;
};

std::vector<Section> read_sections(std::istream& in) {
    std::vector<Section> sections;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto cut = raw.find_first_of("#;");
        const std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
            const std::string name = lower(trim(line.substr(1, line.size() - 2)));
            if (!valid_identifier(name)) throw ParseError(line_no, "malformed section name `" + name + "`");
            for (const auto& s : sections) {
                if (s.name == name) throw ParseError(line_no, "duplicate section [" + name + "]");
            }
            sections.push_back(Section{name, line_no, {}});
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected `key = value`");
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_identifier(key)) throw ParseError(line_no, "malformed key `" + key + "`");
        if (value.empty()) throw ParseError(line_no, "missing value for `" + key + "`");
        if (sections.empty()) throw ParseError(line_no, "`" + key + "` appears before any section");
        for (const auto& e : sections.back().entries) {
            if (e.key == key) throw ParseError(line_no, "duplicate key `" + key + "`");
        }
        sections.back().entries.push_back(Entry{key, value, line_no, false});
    }
    if (in.bad()) throw IoError("error while reading scenario");
    return sections;
}

/// Splits "channel.3" into ("channel", 3).
std::optional<std::pair<std::string, std::size_t>> indexed(const std::string& name) {
    const auto dot = name.find('.');
    if (dot == std::string::npos) return std::nullopt;
    std::size_t idx = 0;
    const std::string digits = name.substr(dot + 1);
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
    if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size() || idx == 0) return std::nullopt;
    return std::make_pair(name.substr(0, dot), idx);
}

const std::map<std::string, PlantKind> kPlantKinds{
    {"motor", PlantKind::Motor}, {"temperature", PlantKind::Temperature}, {"gyro", PlantKind::Gyroscope}};

PlantKind positional_kind(std::size_t idx) {
    switch (idx) {
    case 2: return PlantKind::Temperature;
    case 3: return PlantKind::Gyroscope;
    default: return PlantKind::Motor;
    }
}

std::uint8_t code_field(Keys& k, const std::string& key, std::uint8_t fallback) {
    if (auto v = k.integer(key, kMaxCode)) return static_cast<std::uint8_t>(*v);
    return fallback;
}

ChannelConfig read_channel(Section& s, std::size_t idx) {
    Keys k(s);
    const PlantKind kind = k.choice("plant", kPlantKinds).value_or(positional_kind(idx));
    ChannelConfig ch = ChannelConfig::defaults(kind);

    if (auto v = k.number("gain_k")) {
        if (auto* p = std::get_if<FirstOrderPlant>(&ch.plant)) p->gain_k = *v;
        else std::get<SecondOrderPlant>(ch.plant).set_gain_k(*v);
    }
    if (auto* p = std::get_if<FirstOrderPlant>(&ch.plant)) {
        if (auto v = k.number("tau_s")) p->tau_s = *v;
        k.reject("omega_n", "applies only to the gyro plant");
        k.reject("zeta", "applies only to the gyro plant");
    } else {
        auto& p2 = std::get<SecondOrderPlant>(ch.plant);
        const double wn = k.number("omega_n").value_or(p2.omega_n());
        const double zeta = k.number("zeta").value_or(p2.zeta());
        p2 = SecondOrderPlant{wn, zeta, p2.gain_k()};
        k.reject("tau_s", "does not apply to the gyro plant");
    }

    if (kind == PlantKind::Motor) {
        if (auto v = k.number("full_scale_rpm")) {
            if (!(*v > 0.0)) throw ValidationError("[" + s.name + "] full_scale_rpm must be positive");
            ch.map = SensorMap::tachometer(*v);
        }
    } else {
        k.reject("full_scale_rpm", "applies only to the motor plant");
    }
    if (kind == PlantKind::Temperature) {
        if (auto v = k.number("physical_min")) {
            const double span = ch.map.physical_max - ch.map.physical_min;
            ch.map.physical_min = *v;
            ch.map.physical_max = *v + span;
            ch.map.zero_reference = *v;
        }
    } else {
        k.reject("physical_min", "applies only to the temperature plant");
    }

    const double ref = k.number("ref_v").value_or(ch.reference.final_v);
    ch.reference = ReferenceSpec{k.number("ref_initial_v").value_or(ref), ref, k.number("ref_step_at").value_or(0.0)};

    ch.initial_code.kp_code = code_field(k, "kp_code", ch.initial_code.kp_code);
    ch.initial_code.ki_code = code_field(k, "ki_code", ch.initial_code.ki_code);
    ch.initial_code.kd_code = code_field(k, "kd_code", ch.initial_code.kd_code);

    ch.start = k.choice<InitialCondition>("start", {{"settled", InitialCondition::Settled},
                                                    {"rest", InitialCondition::Rest}})
                   .value_or(ch.start);
    ch.pid.u_min = k.number("u_min").value_or(ch.pid.u_min);
    ch.pid.u_max = k.number("u_max").value_or(ch.pid.u_max);
    ch.pid.d_filter_n = k.number("d_filter_n").value_or(ch.pid.d_filter_n);
    ch.pid.anti_windup = k.choice<AntiWindup>("anti_windup", {{"clamp", AntiWindup::Clamp},
                                                               {"conditional", AntiWindup::ConditionalIntegration}})
                             .value_or(ch.pid.anti_windup);
    k.finish();
    return ch;
}

DisturbanceSpec read_disturbance(Section& s, std::size_t channel_count) {
    Keys k(s);
    DisturbanceSpec d;
    const auto channel = k.integer("channel");
    if (!channel) throw ValidationError("[" + s.name + "] channel is required");
    if (*channel < 1 || *channel > channel_count) {
        throw ValidationError("[" + s.name + "] channel " + std::to_string(*channel) + " does not exist");
    }
    d.channel = static_cast<ChannelId>(*channel - 1);
    const auto kind = k.choice<DisturbanceKind>("kind", {{"pulse", DisturbanceKind::Pulse},
                                                         {"step", DisturbanceKind::SustainedStep},
                                                         {"parameter_shift", DisturbanceKind::ParameterShift}});
    if (!kind) throw ValidationError("[" + s.name + "] kind is required");
    d.kind = *kind;
    d.start = k.number("start").value_or(0.0);
    d.stop = k.number("stop");
    d.magnitude = k.number("magnitude").value_or(d.kind == DisturbanceKind::ParameterShift ? 2.0 : 1.0);
    d.target = k.choice<ShiftTarget>("target", {{"gain", ShiftTarget::Gain}, {"tau", ShiftTarget::TimeConstant}})
                   .value_or(ShiftTarget::Gain);
    if (d.kind != DisturbanceKind::ParameterShift && k.has("target")) {
        throw ValidationError("[" + s.name + "] target applies only to parameter_shift");
    }
    k.finish();
    return d;
}

}  // namespace

Scenario parse_scenario(std::istream& in) {
    std::vector<Section> sections = read_sections(in);
    Scenario sc = Scenario::defaults();

    std::map<std::size_t, Section*> channel_sections;
    std::map<std::size_t, Section*> disturbance_sections;
    Section* sim = nullptr;
    Section* supervisor = nullptr;
    Section* pso = nullptr;
    Section* ladder = nullptr;
    for (auto& s : sections) {
        if (s.name == "sim") sim = &s;
        else if (s.name == "supervisor") supervisor = &s;
        else if (s.name == "pso") pso = &s;
        else if (s.name == "ladder") ladder = &s;
        else if (auto ix = indexed(s.name); ix && ix->first == "channel") channel_sections[ix->second] = &s;
        else if (ix && ix->first == "disturbance") disturbance_sections[ix->second] = &s;
        else throw ValidationError("unknown section [" + s.name + "] (line " + std::to_string(s.line) + ")");
    }

    if (sim) {
        Keys k(*sim);
        sc.duration = k.number("duration").value_or(sc.duration);
        sc.dt = k.number("dt").value_or(sc.dt);
        sc.seed = k.integer("seed").value_or(sc.seed);
        k.finish();
    }

    if (ladder) {
        Keys k(*ladder);
        ComponentLadder& l = sc.ladder;
        l.r1_fixed = k.number("r1").value_or(l.r1_fixed);
        l.r2_min = k.number("r2_min").value_or(l.r2_min);
        l.r2_max = k.number("r2_max").value_or(l.r2_max);
        l.ri_min = k.number("ri_min").value_or(l.ri_min);
        l.ri_max = k.number("ri_max").value_or(l.ri_max);
        l.ci_fixed = k.number("ci").value_or(l.ci_fixed);
        l.rd_min = k.number("rd_min").value_or(l.rd_min);
        l.rd_max = k.number("rd_max").value_or(l.rd_max);
        l.cd_fixed = k.number("cd").value_or(l.cd_fixed);
        k.finish();
    }
    sc.pso = PsoConfig::for_ladder(sc.ladder);

    bool t_o_given = false;
    if (pso) {
        Keys k(*pso);
        PsoConfig& p = sc.pso;
        p.n_particles = k.integer("particles").value_or(p.n_particles);
        p.n_iterations = k.integer("iterations").value_or(p.n_iterations);
        p.w = k.number("w").value_or(p.w);
        p.c1 = k.number("c1").value_or(p.c1);
        p.c2 = k.number("c2").value_or(p.c2);
        p.threads = static_cast<unsigned>(k.integer("threads", 256).value_or(p.threads));
        const char* names[3] = {"kp", "ki", "kd"};
        for (int d = 0; d < 3; ++d) {
            const std::string n = names[d];
            p.bounds_lo[d] = k.number(n + "_min").value_or(p.bounds_lo[d]);
            p.bounds_hi[d] = k.number(n + "_max").value_or(p.bounds_hi[d]);
        }
        if (k.has("v_max_kp") || k.has("v_max_ki") || k.has("v_max_kd")) {
            Vec3 vm = p.effective_v_max();
            for (int d = 0; d < 3; ++d) vm[d] = k.number(std::string("v_max_") + names[d]).value_or(vm[d]);
            p.v_max = vm;
        }
        sc.window_s = k.number("window").value_or(sc.window_s);
        sc.weights.alpha = k.number("alpha").value_or(sc.weights.alpha);
        sc.weights.beta = k.number("beta").value_or(sc.weights.beta);
        k.finish();
    }

    if (supervisor) {
        Keys k(*supervisor);
        sc.supervisor.epsilon_v = k.number("epsilon_v").value_or(sc.supervisor.epsilon_v);
        sc.supervisor.hysteresis_v = k.number("hysteresis_v").value_or(sc.supervisor.hysteresis_v);
        if (auto v = k.number("t_o")) {
            sc.supervisor.t_o = *v;
            t_o_given = true;
        }
        k.finish();
    }
    if (!t_o_given) sc.supervisor.t_o = 3.0 * sc.window_s;

    if (!channel_sections.empty()) {
        sc.channels.clear();
        std::size_t expected = 1;
        for (auto& [idx, section] : channel_sections) {
            if (idx != expected) {
                throw ValidationError("channel sections must be numbered 1..N; [channel." + std::to_string(expected) +
                                      "] is missing");
            }
            sc.channels.push_back(read_channel(*section, idx));
            ++expected;
        }
    }

    for (auto& [idx, section] : disturbance_sections) {
        (void)idx;
        sc.disturbances.push_back(read_disturbance(*section, sc.channels.size()));
    }

    sc.validate();
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file " + path.string());
    return parse_scenario(in);
}

}  // namespace mimopid
