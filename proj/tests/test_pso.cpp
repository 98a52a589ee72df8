#include <cmath>
#include <vector>

#include "doctest.h"
#include "mimopid/pso.hpp"
#include "oracles.hpp"

using namespace mimopid;

namespace {

PsoConfig unit_box(std::size_t particles, std::size_t iterations, std::uint64_t seed) {
    PsoConfig c;
    c.n_particles = particles;
    c.n_iterations = iterations;
    c.bounds_lo = {0.0, 0.0, 0.0};
    c.bounds_hi = {10.0, 20.0, 0.5};
    c.seed = seed;
    return c;
}

const Vec3 kTarget{3.7, 12.1, 0.21};

/// 1 + squared distance to kTarget, each axis normalised by its bounds span.
double bowl(const Vec3& x) {
    const Vec3 span{10.0, 20.0, 0.5};
    double s = 0.0;
    for (int d = 0; d < 3; ++d) {
        const double z = (x[d] - kTarget[d]) / span[d];
        s += z * z;
    }
    return 1.0 + s;
}

ChannelModel motor_model(double ref_v) {
    ChannelModel m;
    m.plant = FirstOrderPlant{600.0, 0.5, 0.0};
    m.map = SensorMap::tachometer();
    m.ref_v = ref_v;
    m.window_s = 5.0;
    return m;
}

}  // namespace

TEST_CASE("init_swarm places particles inside the bounds") {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        PsoConfig c = unit_box(50, 1, seed);
        Rng rng(seed);
        const Swarm s = init_swarm(c, rng, bowl);
        const Vec3 vmax = c.effective_v_max();
        for (const auto& p : s.particles) {
            for (int d = 0; d < 3; ++d) {
                CHECK(p.x[d] >= c.bounds_lo[d]);
                CHECK(p.x[d] <= c.bounds_hi[d]);
                CHECK(std::abs(p.v[d]) <= vmax[d]);
            }
            CHECK(p.x_local_best == p.x);
            CHECK(s.f_global_best <= p.f_local_best);
            ++checked;
        }
    }
    CHECK(checked == 10000);
}

TEST_CASE("init_swarm with a single particle makes it the global best") {
    PsoConfig c = unit_box(1, 1, 4);
    Rng rng(4);
    const Swarm s = init_swarm(c, rng, bowl);
    REQUIRE(s.particles.size() == 1);
    CHECK(s.x_global_best == s.particles[0].x);
    CHECK(s.f_global_best == bowl(s.particles[0].x));
}

TEST_CASE("init_swarm is deterministic for a seed") {
    PsoConfig c = unit_box(20, 1, 77);
    Rng a(77), b(77);
    const Swarm sa = init_swarm(c, a, bowl);
    const Swarm sb = init_swarm(c, b, bowl);
    for (std::size_t i = 0; i < sa.particles.size(); ++i) {
        CHECK(sa.particles[i].x == sb.particles[i].x);
        CHECK(sa.particles[i].v == sb.particles[i].v);
    }
}

TEST_CASE("velocity and position updates") {
    PsoConfig c = unit_box(1, 1, 1);
    c.w = 0.5;
    c.c1 = 1.0;
    c.c2 = 2.0;
    c.v_max = Vec3{100.0, 100.0, 100.0};
    Particle p;
    p.x = {1.0, 1.0, 0.1};
    p.v = {0.2, -0.4, 0.0};
    p.x_local_best = {2.0, 1.0, 0.1};
    const Vec3 gbest{1.0, 3.0, 0.2};
    const Vec3 v = update_velocity(p, gbest, c, Vec3{0.5, 0.5, 0.5}, Vec3{0.25, 0.25, 0.25});
    CHECK(v[0] == doctest::Approx(0.1 + 0.5));
    CHECK(v[1] == doctest::Approx(-0.2 + 1.0));
    CHECK(v[2] == doctest::Approx(0.05));

    SUBCASE("speed limit") {
        c.v_max = Vec3{0.1, 0.1, 0.01};
        const Vec3 lim = update_velocity(p, gbest, c, Vec3{0.5, 0.5, 0.5}, Vec3{0.25, 0.25, 0.25});
        CHECK(lim[0] == 0.1);
        CHECK(lim[1] == 0.1);
        CHECK(lim[2] == 0.01);
    }
    SUBCASE("position clamps to the box and stops the clamped axis") {
        Particle q = p;
        update_position(q, Vec3{-5.0, 0.5, 1.0}, c);
        CHECK(q.x == Vec3{0.0, 1.5, 0.5});
        CHECK(q.v == Vec3{0.0, 0.5, 0.0});
    }
}

TEST_CASE("fitness of a loop that already tracks is zero") {
    // Reference 0 V with the motor at rest: no error, no control, no overshoot.
    const ChannelModel m = motor_model(0.0);
    const FitnessBreakdown f = evaluate_closed_loop({2.0, 1.0, 0.01}, m, FitnessWeights{});
    CHECK(f.fitness == 0.0);
    CHECK(f.iae == 0.0);
    CHECK_FALSE(f.diverged);
}

TEST_CASE("fitness of a constant 1 V error over 2 s is 2 beta") {
    ChannelModel m = motor_model(1.0);
    m.plant = FirstOrderPlant{0.0, 0.5, 0.0};  // the actuator has no effect
    m.window_s = 2.0;
    FitnessWeights w;
    w.alpha = 0.0;
    w.beta = 3.0;
    CHECK(evaluate_fitness({1.0, 1.0, 0.0}, m, w) == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("motor fitness agrees with the straight-line reference loop") {
    const ChannelModel m = motor_model(2.5);
    for (const Vec3 g : {Vec3{1.0, 1.0, 0.01}, Vec3{5.38, 20.0, 0.034}, Vec3{0.1, 0.1, 0.5}, Vec3{10.0, 0.5, 0.001}}) {
        const double expect = oracle::motor_fitness(g[0], g[1], g[2], 2.5, 5.0, 1e-3, 1.0, 1.0);
        CHECK(evaluate_fitness(g, m, FitnessWeights{}) == doctest::Approx(expect).epsilon(1e-12));
    }
    // Pinned so a change in either implementation shows up.
    CHECK(oracle::motor_fitness(1.0, 1.0, 0.01, 2.5, 5.0, 1e-3, 1.0, 1.0) ==
          doctest::Approx(2.3854792282951158).epsilon(1e-9));
}

TEST_CASE("divergent replica gets the penalty") {
    ChannelModel m = motor_model(2.5);
    m.plant = FirstOrderPlant{-600.0, 0.5, 1.0};
    m.pid.u_min = -1e9;
    m.pid.u_max = 1e9;
    const FitnessBreakdown f = evaluate_closed_loop({10.0, 20.0, 0.0}, m, FitnessWeights{});
    CHECK(f.diverged);
    CHECK(f.fitness == kDivergencePenalty);
}

TEST_CASE("optimize finds the minimum of a bowl") {
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const OptimizeResult r = optimize(bowl, unit_box(50, 50, seed));
        const Vec3 span{10.0, 20.0, 0.5};
        bool ok = true;
        for (int d = 0; d < 3; ++d) ok = ok && std::abs(r.best[d] - kTarget[d]) <= 0.01 * span[d];
        hits += ok ? 1 : 0;
    }
    CHECK(hits >= 18);
}

TEST_CASE("one particle, one iteration") {
    const OptimizeResult r = optimize(bowl, unit_box(1, 1, 3));
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].iteration == 1);
    CHECK(r.records[0].fitness == r.fitness);
}

TEST_CASE("swarm invariants hold at every iteration") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const PsoConfig c = unit_box(30, 40, seed);
        double prev_best = INFINITY;
        std::size_t calls = 0;
        const auto observer = [&](std::size_t it, const Swarm& s) {
            CHECK(it == ++calls);
            CHECK(s.f_global_best <= prev_best);
            prev_best = s.f_global_best;
            for (const auto& p : s.particles) {
                for (int d = 0; d < 3; ++d) {
                    CHECK(p.x[d] >= c.bounds_lo[d]);
                    CHECK(p.x[d] <= c.bounds_hi[d]);
                }
                CHECK(p.f_local_best <= bowl(p.x));
                CHECK(p.f_local_best == bowl(p.x_local_best));
                CHECK(s.f_global_best <= p.f_local_best);
            }
        };
        const OptimizeResult r = optimize(bowl, c, observer);
        CHECK(calls == 40);
        for (std::size_t i = 1; i < r.records.size(); ++i) CHECK(r.records[i].fitness <= r.records[i - 1].fitness);
    }
}

TEST_CASE("optimize is deterministic and thread-count independent") {
    const PsoConfig c = unit_box(25, 20, 99);
    const OptimizeResult a = optimize(bowl, c);
    const OptimizeResult b = optimize(bowl, c);
    PsoConfig ct = c;
    ct.threads = 4;
    const OptimizeResult t = optimize(bowl, ct);
    REQUIRE(a.records.size() == t.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].x == b.records[i].x);
        CHECK(a.records[i].x == t.records[i].x);
        CHECK(a.records[i].fitness == t.records[i].fitness);
    }
}

TEST_CASE("a swarm with no inertia or attraction stays put") {
    PsoConfig c = unit_box(10, 10, 8);
    c.w = c.c1 = c.c2 = 0.0;
    Rng rng(8);
    const Swarm start = init_swarm(c, rng, bowl);
    const auto observer = [&](std::size_t, const Swarm& s) {
        for (std::size_t i = 0; i < s.particles.size(); ++i) {
            CHECK(s.particles[i].x == start.particles[i].x);
            CHECK(s.particles[i].v == Vec3{0.0, 0.0, 0.0});
        }
    };
    const OptimizeResult r = optimize(bowl, c, observer);
    CHECK(r.fitness == start.f_global_best);
}

TEST_CASE("run_pso quantizes and re-scores its best point") {
    const ChannelModel m = motor_model(2.5);
    const ComponentLadder ladder;
    PsoConfig c = PsoConfig::for_ladder(ladder);
    c.n_particles = 10;
    c.n_iterations = 5;
    c.seed = 2;
    const SwarmTrace t = run_pso(m, c, FitnessWeights{}, ladder);
    CHECK(t.records.size() == 5);
    CHECK(t.continuous_fitness == t.records.back().fitness);
    CHECK(t.final_code == encode_gains(PidGains{t.continuous_best[0], t.continuous_best[1], t.continuous_best[2]}, ladder));
    CHECK(t.final_fitness ==
          evaluate_fitness({t.final_gains.kp, t.final_gains.ki, t.final_gains.kd}, m, FitnessWeights{}));
}

TEST_CASE("iterations_to_threshold") {
    std::vector<SwarmRecord> r{{1, {}, 10.0}, {2, {}, 1.04}, {3, {}, 1.01}, {4, {}, 1.0}};
    CHECK(iterations_to_threshold(r) == 2);
    CHECK(iterations_to_threshold(r, 0.0) == 4);
    CHECK(iterations_to_threshold(std::vector<SwarmRecord>{}) == 0);
}

TEST_CASE("convergence study") {
    const std::vector<std::size_t> single{50};
    const auto one = convergence_study(single, unit_box(50, 50, 1), bowl);
    REQUIRE(one.size() == 1);
    CHECK(one[0].particles == 50);
    CHECK(one[0].iterations_to_threshold >= 1);
    CHECK(one[0].iterations_to_threshold <= 50);

    // Steep enough that reaching the 5 % band takes more than a lucky first draw.
    const Objective steep = [](const Vec3& x) { return 1.0 + 100.0 * (bowl(x) - 1.0); };
    int larger_no_slower = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::vector<std::size_t> counts{10, 50};
        const auto rows = convergence_study(counts, unit_box(10, 50, seed), steep);
        CHECK(rows[0].iterations_to_threshold > 1);
        larger_no_slower += rows[1].iterations_to_threshold <= rows[0].iterations_to_threshold ? 1 : 0;
    }
    CHECK(larger_no_slower >= 15);

    CHECK_THROWS_AS(convergence_study(std::vector<std::size_t>{}, unit_box(1, 1, 1), bowl), std::invalid_argument);
}
