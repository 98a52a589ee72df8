#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mimopid/errors.hpp"
#include "mimopid/pid.hpp"
#include "mimopid/plants.hpp"
#include "oracles.hpp"

using namespace mimopid;

namespace {

GainCode code(int kp, int ki, int kd) {
    return GainCode{static_cast<std::uint8_t>(kp), static_cast<std::uint8_t>(ki), static_cast<std::uint8_t>(kd)};
}

PidConfig wide_config(double dt) {
    PidConfig c;
    c.dt = dt;
    c.u_min = -1e6;
    c.u_max = 1e6;
    return c;
}

/// Max |y - y_exact| over [0, horizon] for PI control of the first-order plant.
double pi_transient_error(double dt, double horizon) {
    const double tau = 0.5, k = 1.0, kp = 1.0, ki = 0.5, r = 1.0;
    Plant plant = FirstOrderPlant{k, tau, 0.0};
    PidState state;
    const PidConfig cfg = wide_config(dt);
    const long steps = std::lround(horizon / dt);
    double worst = 0.0;
    for (long i = 0; i <= steps; ++i) {
        const double y = plant_output(plant);
        worst = std::max(worst, std::abs(y - oracle::pi_first_order_step(i * dt, tau, k, kp, ki, r)));
        const double u = pid_step(state, r - y, PidGains{kp, ki, 0.0}, cfg);
        step_plant(plant, u, dt);
    }
    return worst;
}

}  // namespace

TEST_CASE("decode_gains at ladder endpoints") {
    ComponentLadder l;
    l.r2_min = l.r1_fixed;
    const PidGains g = decode_gains(code(0, 15, 0), l);
    CHECK(g.kp == 1.0);
    CHECK(g.ki == doctest::Approx(1.0 / (l.ri_max * l.ci_fixed)));
    CHECK(g.kd == doctest::Approx(l.rd_min * l.cd_fixed));
    // Ki falls as its code rises.
    CHECK(g.ki < decode_gains(code(0, 0, 0), l).ki);

    ComponentLadder l2;
    l2.r2_max = 10.0 * l2.r1_fixed;
    CHECK(decode_gains(code(15, 0, 0), l2).kp == doctest::Approx(10.0));
}

TEST_CASE("decode_gains mid-code value") {
    // Default ladder: R2 = 1k + 8/15 * 99k = 53.8k over R1 = 10k.
    const ComponentLadder l;
    CHECK(decode_gains(code(8, 0, 0), l).kp == doctest::Approx(5.38).epsilon(1e-12));
    // Default ranges: kp 0.1..10, ki 0.1..20 1/s, kd 0.001..0.5 s.
    CHECK(l.kp_levels().front() == doctest::Approx(0.1));
    CHECK(l.kp_levels().back() == doctest::Approx(10.0));
    CHECK(l.ki_levels().front() == doctest::Approx(20.0));
    CHECK(l.ki_levels().back() == doctest::Approx(0.1));
    CHECK(l.kd_levels().front() == doctest::Approx(0.001));
    CHECK(l.kd_levels().back() == doctest::Approx(0.5));
}

TEST_CASE("encode_gains: lattice round trip, clamping, tie-break") {
    const ComponentLadder l;
    for (int reg = 0; reg < 4096; ++reg) {
        const GainCode c = GainCode::unpack(static_cast<std::uint16_t>(reg));
        CHECK(encode_gains(decode_gains(c, l), l) == c);
        CHECK(c.pack() == reg);
    }

    CHECK(encode_gains(PidGains{0.01, 0.5, 0.01}, l).kp_code == 0);
    CHECK(encode_gains(PidGains{50.0, 0.5, 0.01}, l).kp_code == 15);
    CHECK(encode_gains(PidGains{1.0, 100.0, 0.01}, l).ki_code == 0);
    CHECK(encode_gains(PidGains{1.0, 0.0, 0.01}, l).ki_code == 15);

    const auto kp = l.kp_levels();
    CHECK(encode_gains(PidGains{0.5 * (kp[3] + kp[4]), 1.0, 0.01}, l).kp_code == 3);
    const auto ki = l.ki_levels();
    CHECK(encode_gains(PidGains{1.0, 0.5 * (ki[5] + ki[6]), 0.01}, l).ki_code == 5);
    const auto kd = l.kd_levels();
    CHECK(encode_gains(PidGains{1.0, 1.0, 0.5 * (kd[9] + kd[10])}, l).kd_code == 9);
}

TEST_CASE("quantization error is at most half the local lattice spacing") {
    const ComponentLadder l;
    const auto kp = l.kp_levels();
    auto ki = l.ki_levels();
    std::sort(ki.begin(), ki.end());
    const auto kd = l.kd_levels();
    const auto half_gap = [](const std::array<double, kCodeLevels>& sorted, double x) {
        const auto hi = std::lower_bound(sorted.begin(), sorted.end(), x);
        if (hi == sorted.begin() || hi == sorted.end()) return 0.0;
        return 0.5 * (*hi - *(hi - 1));
    };
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ukp(kp.front(), kp.back()), uki(ki.front(), ki.back()),
        ukd(kd.front(), kd.back());
    for (int i = 0; i < 10000; ++i) {
        const PidGains target{ukp(rng), uki(rng), ukd(rng)};
        const PidGains got = decode_gains(encode_gains(target, l), l);
        CHECK(std::abs(got.kp - target.kp) <= half_gap(kp, target.kp) * (1 + 1e-12));
        CHECK(std::abs(got.ki - target.ki) <= half_gap(ki, target.ki) * (1 + 1e-12));
        CHECK(std::abs(got.kd - target.kd) <= half_gap(kd, target.kd) * (1 + 1e-12));
    }
}

TEST_CASE("gain register packing") {
    const GainCode c = code(0xA, 0x3, 0xF);
    CHECK(c.pack() == 0xA3F);
    CHECK(GainCode::unpack(0xA3F) == c);
    CHECK_THROWS_AS(GainCode::unpack(0x1000), std::invalid_argument);
    CHECK_THROWS_AS(code(16, 0, 0).validate(), std::invalid_argument);
}

TEST_CASE("pid_step basic responses") {
    PidState s;
    const PidConfig cfg = wide_config(0.01);

    SUBCASE("pure proportional") { CHECK(pid_step(s, 0.5, PidGains{2.0, 0.0, 0.0}, cfg) == 1.0); }

    SUBCASE("zero error from reset gives zero output") {
        for (int i = 0; i < 100; ++i) CHECK(pid_step(s, 0.0, PidGains{3.0, 5.0, 0.2}, cfg) == 0.0);
    }

    SUBCASE("trapezoidal integral of a constant error") {
        const PidConfig c = wide_config(0.1);
        double u = 0.0;
        for (int i = 0; i < 10; ++i) u = pid_step(s, 1.0, PidGains{0.0, 1.0, 0.0}, c);
        CHECK(s.integrator == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(u == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("derivative of a ramp settles to kd times the slope") {
        PidConfig c = wide_config(1e-3);
        double u = 0.0;
        for (int i = 0; i < 5000; ++i) u = pid_step(s, 2.0 * i * c.dt, PidGains{0.0, 0.0, 0.3}, c);
        CHECK(u == doctest::Approx(0.3 * 2.0).epsilon(1e-9));
    }

    SUBCASE("non-finite error is a fault") {
        CHECK_THROWS_AS(pid_step(s, std::nan(""), PidGains{1.0, 1.0, 0.0}, cfg), FaultError);
        CHECK_THROWS_AS(pid_step(s, INFINITY, PidGains{1.0, 1.0, 0.0}, cfg), FaultError);
    }
}

TEST_CASE("reset zeroes the state and is idempotent") {
    PidState s;
    const PidConfig cfg = wide_config(0.01);
    for (int i = 0; i < 50; ++i) pid_step(s, 0.3 * i, PidGains{1.0, 2.0, 0.1}, cfg);
    reset(s);
    CHECK(s.integrator == 0.0);
    CHECK(s.prev_error == 0.0);
    CHECK(s.d_filter_state == 0.0);
    const PidState once = s;
    reset(s);
    CHECK(s.integrator == once.integrator);
    CHECK(s.primed == once.primed);
    CHECK(pid_step(s, 0.0, PidGains{1.0, 2.0, 0.1}, cfg) == 0.0);
}

TEST_CASE("output stays within actuator limits") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> e(-10.0, 10.0);
    for (AntiWindup aw : {AntiWindup::Clamp, AntiWindup::ConditionalIntegration}) {
        PidConfig cfg;
        cfg.dt = 1e-3;
        cfg.anti_windup = aw;
        PidState s;
        for (int i = 0; i < 20000; ++i) {
            const double u = pid_step(s, e(rng), PidGains{10.0, 20.0, 0.5}, cfg);
            CHECK(u >= cfg.u_min);
            CHECK(u <= cfg.u_max);
        }
    }
}

TEST_CASE("clamp anti-windup freezes the integrator while saturated") {
    PidConfig cfg;
    cfg.dt = 1e-2;
    PidState s;
    for (int i = 0; i < 1000; ++i) pid_step(s, 10.0, PidGains{1.0, 1.0, 0.0}, cfg);
    // kp*e alone is 10 V > u_max, so nothing has been integrated.
    CHECK(s.integrator == 0.0);
    // No stored windup: the output leaves saturation as soon as the error flips.
    CHECK(pid_step(s, -1.0, PidGains{1.0, 1.0, 0.0}, cfg) == 0.0);
}

TEST_CASE("controller is linear below saturation") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> e(-1.0, 1.0);
    const PidConfig cfg = wide_config(1e-3);
    const PidGains g{1.7, 3.1, 0.05};
    PidState a, b;
    for (int i = 0; i < 5000; ++i) {
        const double x = e(rng);
        const double ua = pid_step(a, x, g, cfg);
        const double ub = pid_step(b, 2.0 * x, g, cfg);
        CHECK(ub == doctest::Approx(2.0 * ua).epsilon(1e-9));
    }
}

TEST_CASE("closed-loop discretization error halves with dt") {
    const double coarse = pi_transient_error(2e-3, 5.0);
    const double fine = pi_transient_error(1e-3, 5.0);
    CHECK(coarse / fine >= 1.9);
    CHECK(fine < 1e-2);
}

TEST_CASE("installing gains carries the integral contribution over") {
    const ComponentLadder l;
    PidConfig cfg;
    PidController pid(code(5, 4, 3), l, cfg);
    pid.preload(2.0);
    CHECK(pid.step(0.0) == doctest::Approx(2.0));
    pid.install(code(9, 1, 0));
    CHECK(pid.step(0.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(pid.code() == code(9, 1, 0));

    PidController a(code(5, 4, 3), l, cfg), b(code(5, 4, 3), l, cfg);
    b.install(code(5, 4, 3));
    for (double e : {0.1, 0.4, -0.2, 0.0, 1.5}) CHECK(a.step(e) == b.step(e));
}
