#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "mimopid/sim.hpp"

namespace mimopid {

/// Reads a scenario written as sectioned `key = value` lines:
///
///     [sim]            duration, dt, seed
///     [supervisor]     epsilon_v, hysteresis_v, t_o
///     [pso]            particles, iterations, w, c1, c2, window, alpha, beta,
///                      threads, kp_min ... kd_max, v_max_kp, v_max_ki, v_max_kd
///     [ladder]         r1, r2_min, r2_max, ri_min, ri_max, ci, rd_min, rd_max, cd
///     [channel.N]      plant, gain_k, tau_s, omega_n, zeta, ref_v, ref_initial_v,
///                      ref_step_at, kp_code, ki_code, kd_code, start, u_min, u_max,
///                      d_filter_n, anti_windup, full_scale_rpm, physical_min
///     [disturbance.N]  channel, kind, start, stop, magnitude, target
///
/// `#` and `;` start comments. Omitted keys take their defaults; an empty
/// input yields Scenario::defaults(). Without any [channel.N] section the
/// three default channels are used.
///
/// Throws ParseError (with line) for malformed lines or values, and
/// ValidationError for unknown keys or sections and violated constraints.
Scenario parse_scenario(std::istream& in);

/// Throws IoError when the file cannot be opened.
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace mimopid
