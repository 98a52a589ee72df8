#include "mimopid/pso.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace mimopid {

void PsoConfig::validate() const {
    if (n_particles < 1) throw std::invalid_argument("pso: n_particles must be >= 1");
    if (n_iterations < 1) throw std::invalid_argument("pso: n_iterations must be >= 1");
    if (!(w >= 0.0) || !(c1 >= 0.0) || !(c2 >= 0.0)) throw std::invalid_argument("pso: w, c1, c2 must be >= 0");
    for (int d = 0; d < 3; ++d) {
        if (!(bounds_lo[d] < bounds_hi[d])) throw std::invalid_argument("pso: bounds_lo must be below bounds_hi");
    }
    if (v_max) {
        for (double vm : *v_max) {
            if (!(vm >= 0.0)) throw std::invalid_argument("pso: v_max must be >= 0");
        }
    }
    if (threads < 1) throw std::invalid_argument("pso: threads must be >= 1");
}

Vec3 PsoConfig::effective_v_max() const {
    if (v_max) return *v_max;
    Vec3 out{};
    for (int d = 0; d < 3; ++d) out[d] = 0.25 * (bounds_hi[d] - bounds_lo[d]);
    return out;
}

PsoConfig PsoConfig::for_ladder(const ComponentLadder& ladder) {
    const auto kp = ladder.kp_levels();
    const auto ki = ladder.ki_levels();
    const auto kd = ladder.kd_levels();
    PsoConfig c;
    c.bounds_lo = {kp.front(), ki.back(), kd.front()};
    c.bounds_hi = {kp.back(), ki.front(), kd.back()};
    return c;
}

void FitnessWeights::validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0)) {
        throw std::invalid_argument("fitness weights: alpha, beta >= 0 and alpha + beta > 0");
    }
}

namespace {

// Scores positions [begin, end) of xs into fs. Each slot is written by
// exactly one worker, so the result does not depend on the split.
void evaluate_all(const Objective& objective, const std::vector<Vec3>& xs, std::vector<double>& fs, unsigned threads) {
    fs.resize(xs.size());
    const std::size_t n = xs.size();
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fs[i] = objective(xs[i]);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += workers) fs[i] = objective(xs[i]);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

Swarm init_swarm(const PsoConfig& config, Rng& rng, const Objective& objective) {
    config.validate();
    const Vec3 vmax = config.effective_v_max();
    Swarm swarm;
    swarm.particles.resize(config.n_particles);
    for (auto& p : swarm.particles) {
        for (int d = 0; d < 3; ++d) {
            p.x[d] = config.bounds_lo[d] + uniform01(rng) * (config.bounds_hi[d] - config.bounds_lo[d]);
        }
        for (int d = 0; d < 3; ++d) p.v[d] = (2.0 * uniform01(rng) - 1.0) * vmax[d];
        p.x_local_best = p.x;
    }

    std::vector<Vec3> xs;
    xs.reserve(swarm.particles.size());
    for (const auto& p : swarm.particles) xs.push_back(p.x);
    std::vector<double> fs;
    evaluate_all(objective, xs, fs, config.threads);

    std::size_t best = 0;
    for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
        swarm.particles[i].f_local_best = fs[i];
        if (fs[i] < fs[best]) best = i;
    }
    swarm.x_global_best = swarm.particles[best].x;
    swarm.f_global_best = fs[best];
    return swarm;
}

Vec3 update_velocity(const Particle& p, const Vec3& x_global_best, const PsoConfig& config, const Vec3& r1,
                     const Vec3& r2) {
    const Vec3 vmax = config.effective_v_max();
    Vec3 v{};
    for (int d = 0; d < 3; ++d) {
        v[d] = config.w * p.v[d] + config.c1 * r1[d] * (p.x_local_best[d] - p.x[d]) +
               config.c2 * r2[d] * (x_global_best[d] - p.x[d]);
        v[d] = std::clamp(v[d], -vmax[d], vmax[d]);
    }
    return v;
}

Vec3 update_velocity(const Particle& p, const Vec3& x_global_best, const PsoConfig& config, Rng& rng) {
    Vec3 r1{};
    Vec3 r2{};
    for (auto& r : r1) r = uniform01(rng);
    for (auto& r : r2) r = uniform01(rng);
    return update_velocity(p, x_global_best, config, r1, r2);
}

void update_position(Particle& p, const Vec3& v_new, const PsoConfig& config) {
    p.v = v_new;
    for (int d = 0; d < 3; ++d) {
        const double next = p.x[d] + v_new[d];
        if (next > config.bounds_hi[d]) {
            p.x[d] = config.bounds_hi[d];
            p.v[d] = 0.0;
        } else if (next < config.bounds_lo[d]) {
            p.x[d] = config.bounds_lo[d];
            p.v[d] = 0.0;
        } else {
            p.x[d] = next;
        }
    }
}

OptimizeResult optimize(const Objective& objective, const PsoConfig& config, const SwarmObserver& observer) {
    config.validate();
    Rng rng(config.seed);
    Swarm swarm = init_swarm(config, rng, objective);

    OptimizeResult result;
    result.records.reserve(config.n_iterations);
    std::vector<Vec3> xs(swarm.particles.size());
    std::vector<double> fs;

    for (std::size_t it = 1; it <= config.n_iterations; ++it) {
        // All draws happen here, in particle order, before any evaluation.
        for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
            Particle& p = swarm.particles[i];
            const Vec3 v = update_velocity(p, swarm.x_global_best, config, rng);
            update_position(p, v, config);
            xs[i] = p.x;
        }
        evaluate_all(objective, xs, fs, config.threads);
        for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
            Particle& p = swarm.particles[i];
            if (fs[i] < p.f_local_best) {
                p.f_local_best = fs[i];
                p.x_local_best = p.x;
            }
            if (fs[i] < swarm.f_global_best) {
                swarm.f_global_best = fs[i];
                swarm.x_global_best = p.x;
            }
        }
        result.records.push_back(SwarmRecord{it, swarm.x_global_best, swarm.f_global_best});
        if (observer) observer(it, swarm);
    }
    result.best = swarm.x_global_best;
    result.fitness = swarm.f_global_best;
    return result;
}

void ChannelModel::validate() const {
    validate_plant(plant);
    map.validate();
    pid.validate();
    if (!(window_s > 0.0)) throw std::invalid_argument("channel model: window must be positive");
    if (!std::isfinite(ref_v) || !std::isfinite(output_offset_v)) {
        throw std::invalid_argument("channel model: reference and offset must be finite");
    }
}

FitnessBreakdown evaluate_closed_loop(const Vec3& gains, const ChannelModel& channel, const FitnessWeights& weights) {
    const PidGains g{gains[0], gains[1], gains[2]};
    const PidConfig& cfg = channel.pid;
    const auto steps = static_cast<std::size_t>(std::llround(channel.window_s / cfg.dt));
    const double divergence_limit = 10.0 * (channel.map.v_max - channel.map.v_min);

    Plant plant = channel.plant;
    settle_plant(plant, 0.0);
    PidState state;

    const auto measure = [&](double y) { return sensor_to_voltage(channel.map, y) + channel.output_offset_v; };
    const double y0 = measure(plant_output(plant));
    const double span = std::abs(channel.ref_v - y0);
    const double direction = channel.ref_v >= y0 ? 1.0 : -1.0;

    FitnessBreakdown out;
    double peak_excess = 0.0;
    double prev_abs = 0.0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double y_phys = plant_output(plant);
        if (!std::isfinite(y_phys) ||
            std::abs(sensor_to_voltage_unclamped(channel.map, y_phys)) > divergence_limit) {
            out.diverged = true;
            out.fitness = kDivergencePenalty;
            return out;
        }
        const double e = channel.ref_v - measure(y_phys);
        const double abs_e = std::abs(e);
        if (k > 0) out.iae += 0.5 * cfg.dt * (abs_e + prev_abs);
        prev_abs = abs_e;
        peak_excess = std::max(peak_excess, -direction * e);
        if (k == steps) break;
        const double u = pid_step(state, e, g, cfg);
        step_plant(plant, u, cfg.dt);
    }
    out.overshoot = span > 1e-12 ? peak_excess / span : peak_excess;
    out.fitness = weights.beta * out.iae + weights.alpha * out.overshoot;
    return out;
}

double evaluate_fitness(const Vec3& gains, const ChannelModel& channel, const FitnessWeights& weights) {
    return evaluate_closed_loop(gains, channel, weights).fitness;
}

SwarmTrace run_pso(const ChannelModel& channel, const PsoConfig& config, const FitnessWeights& weights,
                   const ComponentLadder& ladder, const SwarmObserver& observer) {
    channel.validate();
    weights.validate();
    ladder.validate();
    const Objective objective = [&](const Vec3& x) { return evaluate_fitness(x, channel, weights); };
    OptimizeResult opt = optimize(objective, config, observer);

    SwarmTrace trace;
    trace.records = std::move(opt.records);
    trace.continuous_best = opt.best;
    trace.continuous_fitness = opt.fitness;
    trace.final_code = encode_gains(PidGains{opt.best[0], opt.best[1], opt.best[2]}, ladder);
    trace.final_gains = decode_gains(trace.final_code, ladder);
    trace.final_fitness =
        evaluate_fitness({trace.final_gains.kp, trace.final_gains.ki, trace.final_gains.kd}, channel, weights);
    return trace;
}

std::size_t iterations_to_threshold(std::span<const SwarmRecord> records, double rel_tol) {
    if (records.empty()) return 0;
    const double final_f = records.back().fitness;
    const double threshold = final_f + rel_tol * std::abs(final_f);
    for (const auto& r : records) {
        if (r.fitness <= threshold) return r.iteration;
    }
    return records.back().iteration;
}

std::vector<ConvergenceRow> convergence_study(std::span<const std::size_t> particle_counts, const PsoConfig& config,
                                              const Objective& objective) {
    if (particle_counts.empty()) throw std::invalid_argument("convergence study: no particle counts");
    std::vector<ConvergenceRow> rows;
    rows.reserve(particle_counts.size());
    for (std::size_t count : particle_counts) {
        PsoConfig c = config;
        c.n_particles = count;
        const auto start = std::chrono::steady_clock::now();
        const OptimizeResult r = optimize(objective, c);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        rows.push_back(ConvergenceRow{count, iterations_to_threshold(r.records), elapsed.count(), r.fitness});
    }
    return rows;
}

}  // namespace mimopid
