#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mimopid/pid.hpp"
#include "mimopid/plants.hpp"

namespace mimopid {

/// A point in gain space, ordered (kp, ki, kd).
using Vec3 = std::array<double, 3>;

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) from the top 53 bits of one engine output.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct PsoConfig {
    std::size_t n_particles = 50;
    std::size_t n_iterations = 50;
    double w = 0.729;
    double c1 = 1.49445;
    double c2 = 1.49445;
    Vec3 bounds_lo{0.0, 0.0, 0.0};
    Vec3 bounds_hi{1.0, 1.0, 1.0};
    std::optional<Vec3> v_max;  // defaults to a quarter of the bounds span
    std::uint64_t seed = 1;
    unsigned threads = 1;       // fitness evaluation workers; result is thread-count independent

    void validate() const;
    Vec3 effective_v_max() const;

    /// Default configuration searching the ladder's achievable gain box.
    static PsoConfig for_ladder(const ComponentLadder& ladder);
};

struct Particle {
    Vec3 x{};
    Vec3 v{};
    Vec3 x_local_best{};
    double f_local_best = 0.0;
};

struct Swarm {
    std::vector<Particle> particles;
    Vec3 x_global_best{};
    double f_global_best = 0.0;
};

struct FitnessWeights {
    double alpha = 1.0;  // overshoot
    double beta = 1.0;   // integrated absolute error

    void validate() const;
};

using Objective = std::function<double(const Vec3&)>;

/// Random positions in the bounds, random velocities in [-v_max, v_max],
/// local bests at the start points, global best the lowest-index minimum.
Swarm init_swarm(const PsoConfig& config, Rng& rng, const Objective& objective);

/// v' = w v + c1 r1 .* (x_lbest - x) + c2 r2 .* (x_gbest - x), clamped to v_max.
Vec3 update_velocity(const Particle& p, const Vec3& x_global_best, const PsoConfig& config, Rng& rng);
/// Same update with the random vectors supplied by the caller.
Vec3 update_velocity(const Particle& p, const Vec3& x_global_best, const PsoConfig& config, const Vec3& r1,
                     const Vec3& r2);

/// x += v_new, clamped into the bounds. Stores v_new as the particle's
/// velocity with components zeroed where the clamp engaged.
void update_position(Particle& p, const Vec3& v_new, const PsoConfig& config);

struct SwarmRecord {
    std::size_t iteration = 0;  // 1-based
    Vec3 x{};
    double fitness = 0.0;
};

struct OptimizeResult {
    Vec3 best{};
    double fitness = 0.0;
    std::vector<SwarmRecord> records;  // one per iteration
};

/// Called after each iteration with the 1-based iteration number.
using SwarmObserver = std::function<void(std::size_t, const Swarm&)>;

/// Generic bounded PSO minimisation.
OptimizeResult optimize(const Objective& objective, const PsoConfig& config, const SwarmObserver& observer = {});

/// Replica of one channel used to score candidate gains.
struct ChannelModel {
    Plant plant = FirstOrderPlant{};
    SensorMap map = SensorMap::tachometer();
    PidConfig pid{};
    double ref_v = 2.5;
    double output_offset_v = 0.0;  // sustained additive disturbance on the measurement
    double window_s = 5.0;

    void validate() const;
};

struct FitnessBreakdown {
    double iae = 0.0;
    double overshoot = 0.0;
    double fitness = 0.0;
    bool diverged = false;
};

inline constexpr double kDivergencePenalty = 1e9;

/// Closed-loop step response of the replica from rest over the window.
/// F = beta * IAE + alpha * overshoot, overshoot normalised by the step span.
FitnessBreakdown evaluate_closed_loop(const Vec3& gains, const ChannelModel& channel, const FitnessWeights& weights);

double evaluate_fitness(const Vec3& gains, const ChannelModel& channel, const FitnessWeights& weights);

struct SwarmTrace {
    std::vector<SwarmRecord> records;
    Vec3 continuous_best{};
    double continuous_fitness = 0.0;
    GainCode final_code{};
    PidGains final_gains{};
    double final_fitness = 0.0;  // re-scored at the quantized gains
};

/// Searches the continuous gain box, then quantizes the best point onto
/// the ladder and re-scores it.
SwarmTrace run_pso(const ChannelModel& channel, const PsoConfig& config, const FitnessWeights& weights,
                   const ComponentLadder& ladder, const SwarmObserver& observer = {});

struct ConvergenceRow {
    std::size_t particles = 0;
    std::size_t iterations_to_threshold = 0;
    double seconds = 0.0;
    double final_fitness = 0.0;
};

/// First 1-based iteration whose global-best fitness is within rel_tol of the final value.
std::size_t iterations_to_threshold(std::span<const SwarmRecord> records, double rel_tol = 0.05);

std::vector<ConvergenceRow> convergence_study(std::span<const std::size_t> particle_counts, const PsoConfig& config,
                                              const Objective& objective);

}  // namespace mimopid
