// SPDX-License-Identifier: Apache-2.0
//
// rtwin: desk-scale radio digital twin (channel fields, continual prediction, MAC precoding)
// Copyright (C) 2026 The rtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Minimum weighted-energy MAC precoding: per-user covariances meeting minimum rates inside
// the capacity polymatroid, the SIC order read off the rate-constraint duals, and MMSE-SIC
// receivers for the resulting corner point.

#include "rtwin/binary_io.hpp"
#include "rtwin/mac.hpp"
#include "rtwin/scene.hpp"

#include <filesystem>
#include <string>

namespace rtwin {

struct SolverConfig {
    double feas_tol = 1e-6;
    double gap_tol = 1e-11;          // barrier duality gap relative to the objective
    int full_subset_max_users = 6;   // above this the fixed-order method is used
    int ccp_max_iter = 400;
    double ccp_rel_tol = 1e-11;
    int reorder_max = 12;
    double stream_threshold = 1e-8;  // eigenvalues below this times the trace are dropped
    double tie_rel_tol = 1e-6;
    // Near-tied duals can leave the optimum inside a face, off every corner. The corner of
    // the recovered order is taken when it costs at most this much more, relative.
    double corner_rel_tol = 1e-4;
    // With exactly tied duals the best corner among orders of the tied users is returned;
    // above this many candidate orders only the recovered one is tried.
    int tie_max_orders = 120;
};

struct SolverDiagnostics {
    std::string method;   // "subsets", "fixed-order", "trivial"
    std::string status;   // "optimal", "max_iter", "tied" (best corner of a tied group) or
                          // "off_corner" (recovered order misses b_min)
    int newton_steps = 0;
    int outer_iterations = 0;
    int ccp_iterations = 0;
    double gap = 0.0;
    double rate_violation = 0.0;
    double subset_violation = 0.0;
    double psd_violation = 0.0; // before clipping
    double relaxed_objective = 0.0; // optimum without the single-corner restriction
};

struct PrecoderSolution {
    Covariances covariances;
    std::vector<std::vector<double>> rates; // corner rates of `order`, [user][tone]
    Vector totals;
    Vector duals;                           // one per user, 0 for users with b_min = 0
    std::vector<int> order;                 // decoded first ... decoded last
    bool order_ties = false;
    std::vector<StreamDecoder> streams;
    double objective = 0.0;                 // sum_u w_u tr R_u
    double total_power = 0.0;
    double energy_efficiency = 0.0;
    SolverDiagnostics diagnostics;
};

PrecoderSolution solve_min_energy(const MacProblem& problem, const SolverConfig& config = {});

/// Minimum energy when users must be decoded in `order` (rates are the chain-rule corner
/// rates). Local method; the value is an upper bound on the optimum of that order.
PrecoderSolution solve_fixed_order(const MacProblem& problem, const std::vector<int>& order,
                                   const SolverConfig& config = {});

struct OrderRecovery {
    std::vector<int> order;
    bool ties = false;
};

/// Ascending duals are decoded first; users flagged inactive go last. Ties break by index.
OrderRecovery recover_sic_order(const Vector& duals, const std::vector<bool>& active = {}, double tie_rel_tol = 1e-6);

// ---- SNR sweep ----------------------------------------------------------------------------

struct SweepRow {
    double snr_db = 0.0;
    double noise_var = 0.0;
    double total_power = 0.0;
    double total_rate = 0.0;
    double energy_efficiency = 0.0;
    std::string status;
};

/// Re-solves the template with noise_var = mean |H|^2 / 10^(snr/10) at each grid point.
std::vector<SweepRow> sweep_snr(const MacProblem& problem, const std::vector<double>& snr_grid_db,
                                const SolverConfig& config = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);
double mean_channel_gain(const MacProblem& problem);

// ---- problem construction -----------------------------------------------------------------

/// Uplink problem from a scene: BS at bs (its array gives L_y), one UE per position.
/// Tone n sits at carrier + (n - (tones-1)/2) * spacing.
MacProblem mac_problem_from_scene(const Scene& scene, const Vec3& bs, const std::vector<Vec3>& ues, const Vector& b_min,
                                  const Vector& weights, int tones, double tone_spacing_hz, double noise_var);

/// Seeded uplink template on a scenario preset: BS at the scene centre, UEs scattered over
/// an annulus between 0.1 and 0.45 of the scene radius, tones spaced 1 MHz apart.
MacProblem preset_problem(ScenarioLabel label, int users, int tones, double b_min, std::uint64_t seed);

/// Margin heuristic for imperfect CSI: inflates the noise by rho^2 times the mean predicted
/// error energy per receive antenna. `violation` is accepted for the chance-constrained form,
/// which is not implemented.
struct RobustSpec {
    std::vector<double> error_energy; // per user, |H - H_hat|_F^2
    double rho = 1.0;
    double violation = 0.05;
};
MacProblem apply_robust_margin(MacProblem problem, const RobustSpec& spec);

// ---- IO -----------------------------------------------------------------------------------

/// JSON at `path` plus a "<stem>.channels.bin" tensor sidecar.
void save_problem(const MacProblem& problem, const std::filesystem::path& path);
MacProblem load_problem(const std::filesystem::path& path);
/// JSON summary at `path` plus a "<stem>.covariances.bin" dump.
void save_solution(const PrecoderSolution& solution, const std::filesystem::path& path);
Json solution_summary(const PrecoderSolution& solution);

} // namespace rtwin
