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

#include "rtwin/precoder.hpp"

#include "rtwin/logdet_program.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>

namespace rtwin {

namespace {

constexpr double kSpeedOfLight = 299792458.0;

// Problem rescaled to unit noise and unit mean channel gain, with weights divided by their
// maximum. R_hat = gain * R, objective_hat = objective * gain / w_max.
struct Scaled {
    MacProblem problem;
    double gain = 1.0;
    double w_max = 1.0;
    std::vector<bool> active;
};

Scaled scale_problem(const MacProblem& p) {
    p.validate();
    Scaled s;
    s.problem = p;
    double power = 0.0;
    Eigen::Index entries = 0;
    for (const auto& cu : p.channels)
        for (const auto& h : cu) {
            power += h.squaredNorm();
            entries += h.size();
        }
    s.active.resize(static_cast<std::size_t>(p.users));
    for (int u = 0; u < p.users; ++u) s.active[static_cast<std::size_t>(u)] = p.b_min(u) > 0.0;
    s.gain = power / static_cast<double>(entries) / p.noise_var;
    for (int u = 0; u < p.users; ++u) {
        if (!s.active[static_cast<std::size_t>(u)]) continue;
        double hu = 0.0;
        for (const auto& h : p.channels[static_cast<std::size_t>(u)]) hu += h.squaredNorm();
        if (!(hu > 0.0))
            throw InfeasibleProblem("user " + std::to_string(u) + " needs a positive rate but has no channel on any tone");
    }
    const double amp = 1.0 / std::sqrt(p.noise_var * (s.gain > 0.0 ? s.gain : 1.0));
    for (auto& cu : s.problem.channels)
        for (auto& h : cu) h *= amp;
    s.problem.noise_var = 1.0;
    s.w_max = p.weights.maxCoeff();
    // A zero weight would make the user's power free; a tiny floor keeps the problem bounded.
    for (int u = 0; u < p.users; ++u) s.problem.weights(u) = std::max(p.weights(u), 1e-8 * s.w_max) / s.w_max;
    return s;
}

std::vector<int> active_in_order(const Scaled& s, const std::vector<int>& order) {
    std::vector<int> out;
    for (const int u : order)
        if (s.active[static_cast<std::size_t>(u)]) out.push_back(u);
    return out;
}

std::vector<int> complete_order(const Scaled& s, std::vector<int> active_order) {
    for (int u = 0; u < s.problem.users; ++u)
        if (!s.active[static_cast<std::size_t>(u)]) active_order.push_back(u);
    return active_order;
}

double start_margin(double b_min) { return 0.1 * b_min + 0.1; }

// Scaled identity covariances, grown from the last-decoded user backwards until every active
// user's corner rate clears b_min by a margin.
Covariances doubling_start(const Scaled& s, const std::vector<int>& active_order) {
    const MacProblem& p = s.problem;
    Covariances r = zero_covariances(p);
    const std::vector<int> full = complete_order(s, active_order);
    for (auto it = active_order.rbegin(); it != active_order.rend(); ++it) {
        const int u = *it;
        const int lx = p.tx_antennas(u);
        const double target = p.b_min(u) + start_margin(p.b_min(u));
        double pw = 1.0;
        for (int k = 0;; ++k) {
            if (k > 600) throw InfeasibleProblem("could not reach the minimum rate of user " + std::to_string(u));
            for (auto& c : r[static_cast<std::size_t>(u)]) c = (pw / lx) * CMatrix::Identity(lx, lx);
            if (corner_totals(p, r, full)(u) >= target) break;
            pw *= 2.0;
        }
    }
    return r;
}

void fill_blocks(const LogDetProgram& prog, const Covariances& r, Vector& x) {
    for (int b = 0; b < static_cast<int>(prog.blocks().size()); ++b) {
        const auto& blk = prog.blocks()[static_cast<std::size_t>(b)];
        prog.set_block(x, b, r[static_cast<std::size_t>(blk.user)][static_cast<std::size_t>(blk.tone)]);
    }
}

Covariances read_blocks(const LogDetProgram& prog, const Scaled& s, const Vector& x) {
    Covariances r = zero_covariances(s.problem);
    for (int b = 0; b < static_cast<int>(prog.blocks().size()); ++b) {
        const auto& blk = prog.blocks()[static_cast<std::size_t>(b)];
        r[static_cast<std::size_t>(blk.user)][static_cast<std::size_t>(blk.tone)] = prog.block_matrix(x, b);
    }
    return r;
}

std::uint32_t mask_of(const std::vector<int>& users) {
    std::uint32_t m = 0;
    for (const int u : users) m |= std::uint32_t{1} << u;
    return m;
}

void set_cost(LogDetProgram& prog, const Scaled& s) {
    for (const auto& b : prog.blocks())
        for (int k = 0; k < b.dim; ++k) prog.cost(b.offset + k) = s.problem.weights(b.user);
}

// Converts scaled covariances back, evaluates the solution in original units.
PrecoderSolution finish(const MacProblem& p, const Scaled& s, Covariances r_hat, Vector duals_hat, std::vector<int> order,
                        bool ties, const SolverConfig& config, SolverDiagnostics diag) {
    PrecoderSolution sol;
    sol.covariances = std::move(r_hat);
    for (auto& cu : sol.covariances)
        for (auto& c : cu) {
            c /= s.gain;
            const double worst = clip_psd(c);
            const double scale = std::max(1e-300, std::abs(c.trace().real()));
            diag.psd_violation = std::max(diag.psd_violation, -worst / scale);
        }
    sol.duals = duals_hat * (s.w_max / s.gain);
    sol.order = std::move(order);
    sol.order_ties = ties;
    sol.rates = corner_rates(p, sol.covariances, sol.order);
    sol.totals = corner_totals(p, sol.covariances, sol.order);
    sol.streams = mmse_sic_vectors(p, sol.covariances, sol.order, config.stream_threshold);
    sol.total_power = total_power(sol.covariances);
    for (int u = 0; u < p.users; ++u) {
        double tr = 0.0;
        for (const auto& c : sol.covariances[static_cast<std::size_t>(u)]) tr += c.trace().real();
        sol.objective += p.weights(u) * tr;
    }
    sol.energy_efficiency = energy_efficiency(sol.totals.sum(), sol.total_power);
    diag.rate_violation = std::max(0.0, (p.b_min - sol.totals).maxCoeff());
    if (p.users <= 12) diag.subset_violation = check_feasible(p, sol.covariances, sol.order, config.feas_tol).subset_violation;
    sol.diagnostics = std::move(diag);
    return sol;
}

struct FixedOrderRaw {
    Covariances r_hat;
    Vector duals_hat;
    double objective_hat = 0.0;
    SolverDiagnostics diag;
};

// Convex-concave iterations: the subtracted log-det of each chain stage is replaced by its
// tangent, giving a convex inner approximation that is re-linearised at every solution.
FixedOrderRaw fixed_order_raw(const Scaled& s, const std::vector<int>& active_order, const SolverConfig& config) {
    const MacProblem& p = s.problem;
    LogDetProgram prog(p.channels, s.active, 0);
    set_cost(prog, s);
    Vector x = Vector::Zero(prog.num_vars());
    fill_blocks(prog, doubling_start(s, active_order), x);

    FixedOrderRaw out;
    out.diag.method = "fixed-order";
    out.diag.status = "max_iter";
    double prev = std::numeric_limits<double>::infinity();
    double rel_change = 1.0;
    BarrierResult res;
    Vector grad;
    for (int it = 0; it < config.ccp_max_iter; ++it) {
        prog.constraints.clear();
        for (std::size_t k = 0; k < active_order.size(); ++k) {
            const int u = active_order[k];
            const std::vector<int> later(active_order.begin() + static_cast<std::ptrdiff_t>(k) + 1, active_order.end());
            const std::uint32_t s_mask = mask_of(later);
            ProgramConstraint c;
            c.constant = -p.b_min(u);
            Vector lin = Vector::Zero(prog.num_vars());
            for (int n = 0; n < p.tones; ++n) {
                c.terms.push_back({n, s_mask | (std::uint32_t{1} << u), 1.0});
                if (s_mask == 0) continue;
                const double f0 = prog.logdet_term(x, n, s_mask, &grad);
                lin -= grad;
                c.constant -= f0 - grad.dot(x);
            }
            for (Eigen::Index i = 0; i < lin.size(); ++i)
                if (lin(i) != 0.0) c.linear.emplace_back(i, lin(i));
            prog.constraints.push_back(std::move(c));
        }
        Vector start = x * (1.0 + 1e-3);
        if (!prog.strictly_feasible(start)) start = x;
        // Early iterations only need to move in the right direction; accuracy is tightened
        // as the objective settles.
        BarrierOptions bo;
        bo.gap_tol = std::clamp(0.01 * rel_change, config.gap_tol, 1e-4);
        if (it > 0) bo.t0 = prog.barrier_degree() / (std::max(bo.gap_tol * 100.0, 1e-6) * std::max(1.0, std::abs(prev)));
        res = solve_barrier(prog, start, bo);
        out.diag.newton_steps += res.newton_steps;
        out.diag.outer_iterations += res.outer_iterations;
        ++out.diag.ccp_iterations;
        x = res.x;
        const double change = (prev - res.objective) / std::max(1.0, std::abs(res.objective));
        if (change <= config.ccp_rel_tol && bo.gap_tol <= config.gap_tol) {
            out.diag.status = res.converged ? "optimal" : "max_iter";
            break;
        }
        rel_change = std::isfinite(change) ? std::max(change, 0.0) : 1.0;
        prev = res.objective;
    }
    out.diag.gap = res.gap;
    out.objective_hat = res.objective;
    out.r_hat = read_blocks(prog, s, x);
    out.duals_hat = Vector::Zero(p.users);
    for (std::size_t k = 0; k < active_order.size(); ++k)
        out.duals_hat(active_order[k]) = res.duals(static_cast<Eigen::Index>(k));
    return out;
}

PrecoderSolution trivial_solution(const MacProblem& p, const SolverConfig& config) {
    Scaled s;
    s.problem = p;
    s.active.assign(static_cast<std::size_t>(p.users), false);
    std::vector<int> order(static_cast<std::size_t>(p.users));
    std::iota(order.begin(), order.end(), 0);
    SolverDiagnostics d;
    d.method = "trivial";
    d.status = "optimal";
    return finish(p, s, zero_covariances(p), Vector::Zero(p.users), order, false, config, d);
}

} // namespace

OrderRecovery recover_sic_order(const Vector& duals, const std::vector<bool>& active, double tie_rel_tol) {
    const auto n = static_cast<int>(duals.size());
    auto is_active = [&](int u) { return active.empty() || active[static_cast<std::size_t>(u)]; };
    OrderRecovery r;
    for (int u = 0; u < n; ++u)
        if (is_active(u)) r.order.push_back(u);
    std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) { return duals(a) < duals(b); });
    const double scale = r.order.empty() ? 0.0 : std::max(std::abs(duals(r.order.back())), 1e-300);
    for (std::size_t k = 1; k < r.order.size(); ++k)
        if (duals(r.order[k]) - duals(r.order[k - 1]) <= tie_rel_tol * scale) r.ties = true;
    for (int u = 0; u < n; ++u)
        if (!is_active(u)) r.order.push_back(u);
    return r;
}

PrecoderSolution solve_fixed_order(const MacProblem& problem, const std::vector<int>& order, const SolverConfig& config) {
    const Scaled s = scale_problem(problem);
    if (static_cast<int>(order.size()) != problem.users) throw std::invalid_argument("solve_fixed_order: order must list every user");
    const std::vector<int> act = active_in_order(s, order);
    if (act.empty()) return trivial_solution(problem, config);
    FixedOrderRaw raw = fixed_order_raw(s, act, config);
    return finish(problem, s, std::move(raw.r_hat), raw.duals_hat, complete_order(s, act), false, config, raw.diag);
}

namespace {

// Orders that permute users inside each group of tied duals. `order` lists the active
// users first (ascending duals); empty when the count exceeds tie_max_orders.
std::vector<std::vector<int>> tied_orders(const Vector& duals, const std::vector<int>& order, std::size_t n_active,
                                          const SolverConfig& config) {
    const double scale = std::max(std::abs(duals(order[n_active - 1])), 1e-300);
    std::vector<std::size_t> starts{0};
    for (std::size_t k = 1; k < n_active; ++k)
        if (duals(order[k]) - duals(order[k - 1]) > config.tie_rel_tol * scale) starts.push_back(k);
    starts.push_back(n_active);
    long long count = 1;
    for (std::size_t g = 0; g + 1 < starts.size(); ++g)
        for (std::size_t i = 2; i <= starts[g + 1] - starts[g]; ++i) {
            count *= static_cast<long long>(i);
            if (count > config.tie_max_orders) return {};
        }
    std::vector<std::vector<int>> out{order};
    for (std::size_t g = 0; g + 1 < starts.size(); ++g) {
        std::vector<std::vector<int>> next;
        for (auto o : out) {
            const auto first = o.begin() + static_cast<std::ptrdiff_t>(starts[g]);
            const auto last = o.begin() + static_cast<std::ptrdiff_t>(starts[g + 1]);
            std::sort(first, last);
            do next.push_back(o);
            while (std::next_permutation(first, last));
        }
        out = std::move(next);
    }
    return out;
}

} // namespace

PrecoderSolution solve_min_energy(const MacProblem& problem, const SolverConfig& config) {
    const Scaled s = scale_problem(problem);
    const MacProblem& p = s.problem;
    std::vector<int> act;
    for (int u = 0; u < p.users; ++u)
        if (s.active[static_cast<std::size_t>(u)]) act.push_back(u);
    if (act.empty()) return trivial_solution(problem, config);

    if (static_cast<int>(act.size()) > config.full_subset_max_users) {
        // Fixed-order method, re-sorted by its own duals until the order repeats.
        std::vector<int> order = act;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p.weights(a) < p.weights(b); });
        std::optional<FixedOrderRaw> best;
        std::vector<int> best_order;
        std::vector<std::vector<int>> tried;
        for (int k = 0; k < config.reorder_max; ++k) {
            FixedOrderRaw raw = fixed_order_raw(s, order, config);
            tried.push_back(order);
            if (!best || raw.objective_hat < best->objective_hat) {
                best = std::move(raw);
                best_order = order;
            }
            std::vector<int> next = active_in_order(s, recover_sic_order(best->duals_hat, s.active, config.tie_rel_tol).order);
            if (std::find(tried.begin(), tried.end(), next) != tried.end()) break;
            order = next;
        }
        const bool ties = recover_sic_order(best->duals_hat, s.active, config.tie_rel_tol).ties;
        return finish(problem, s, std::move(best->r_hat), best->duals_hat, complete_order(s, best_order), ties, config,
                      best->diag);
    }

    // Full polymatroid formulation: covariances plus per-tone rates b_{u,n}.
    const int nt = p.tones;
    LogDetProgram prog(p.channels, s.active, static_cast<int>(act.size()) * nt);
    set_cost(prog, s);
    auto bvar = [&](std::size_t k, int n) { return prog.extra_offset() + static_cast<Eigen::Index>(k) * nt + n; };
    for (std::size_t k = 0; k < act.size(); ++k) {
        ProgramConstraint c;
        for (int n = 0; n < nt; ++n) c.linear.emplace_back(bvar(k, n), 1.0);
        c.constant = -p.b_min(act[k]);
        prog.constraints.push_back(std::move(c));
    }
    const std::uint32_t n_sub = std::uint32_t{1} << act.size();
    for (std::uint32_t t = 1; t < n_sub; ++t) {
        std::vector<int> members;
        std::vector<std::size_t> ks;
        for (std::size_t k = 0; k < act.size(); ++k)
            if (t >> k & 1U) {
                members.push_back(act[k]);
                ks.push_back(k);
            }
        for (int n = 0; n < nt; ++n) {
            ProgramConstraint c;
            c.terms.push_back({n, mask_of(members), 1.0});
            for (const std::size_t k : ks) c.linear.emplace_back(bvar(k, n), -1.0);
            prog.constraints.push_back(std::move(c));
        }
    }

    const Covariances r0 = doubling_start(s, act);
    Vector x = Vector::Zero(prog.num_vars());
    fill_blocks(prog, r0, x);
    const auto rates0 = corner_rates(p, r0, complete_order(s, act));
    for (std::size_t k = 0; k < act.size(); ++k)
        for (int n = 0; n < nt; ++n)
            x(bvar(k, n)) = rates0[static_cast<std::size_t>(act[k])][static_cast<std::size_t>(n)] -
                            start_margin(p.b_min(act[k])) / (2.0 * nt);

    BarrierOptions bo;
    bo.gap_tol = config.gap_tol;
    const BarrierResult res = solve_barrier(prog, x, bo);
    Vector duals_hat = Vector::Zero(p.users);
    for (std::size_t k = 0; k < act.size(); ++k) duals_hat(act[k]) = res.duals(static_cast<Eigen::Index>(k));
    const OrderRecovery rec = recover_sic_order(duals_hat, s.active, config.tie_rel_tol);

    SolverDiagnostics diag;
    diag.method = "subsets";
    diag.status = res.converged ? "optimal" : "max_iter";
    diag.newton_steps = res.newton_steps;
    diag.outer_iterations = res.outer_iterations;
    diag.gap = res.gap;
    PrecoderSolution sol = finish(problem, s, read_blocks(prog, s, res.x), duals_hat, rec.order, rec.ties, config, diag);

    // Tied or nearly tied duals: the optimum may sit inside a face rather than on this
    // order's corner. Move to the corner when the extra energy is within corner_rel_tol.
    if (sol.diagnostics.rate_violation > config.feas_tol) {
        PrecoderSolution corner = solve_fixed_order(problem, rec.order, config);
        const double relaxed = sol.objective;
        auto adopt = [&](PrecoderSolution c, const char* method, const char* status) {
            c.duals = sol.duals;
            c.order_ties = rec.ties;
            c.diagnostics.method = method;
            c.diagnostics.status = status;
            c.diagnostics.newton_steps += sol.diagnostics.newton_steps;
            c.diagnostics.relaxed_objective = relaxed;
            return c;
        };
        if (corner.objective <= relaxed * (1.0 + config.corner_rel_tol) + 1e-12)
            return adopt(std::move(corner), "subsets+corner", "optimal");
        if (rec.ties) {
            // Only time-sharing reaches the face optimum; take the cheapest corner instead.
            std::optional<PrecoderSolution> best;
            if (corner.diagnostics.rate_violation <= config.feas_tol) best = std::move(corner);
            for (const auto& order : tied_orders(duals_hat, rec.order, act.size(), config)) {
                if (order == rec.order) continue;
                PrecoderSolution c = solve_fixed_order(problem, order, config);
                if (c.diagnostics.rate_violation <= config.feas_tol && (!best || c.objective < best->objective))
                    best = std::move(c);
            }
            if (best) return adopt(std::move(*best), "subsets+tied_corner", "tied");
        }
        sol.diagnostics.status = "off_corner";
        sol.diagnostics.relaxed_objective = relaxed;
    }
    return sol;
}

// ---- sweep --------------------------------------------------------------------------------

double mean_channel_gain(const MacProblem& problem) {
    double power = 0.0;
    Eigen::Index entries = 0;
    for (const auto& cu : problem.channels)
        for (const auto& h : cu) {
            power += h.squaredNorm();
            entries += h.size();
        }
    return entries > 0 ? power / static_cast<double>(entries) : 0.0;
}

std::vector<SweepRow> sweep_snr(const MacProblem& problem, const std::vector<double>& grid, const SolverConfig& config) {
    if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("SNR grid must be sorted ascending");
    const double g = mean_channel_gain(problem);
    std::vector<SweepRow> rows;
    for (const double snr : grid) {
        SweepRow row;
        row.snr_db = snr;
        row.noise_var = g / std::pow(10.0, snr / 10.0);
        MacProblem p = problem;
        p.noise_var = row.noise_var;
        try {
            const PrecoderSolution sol = solve_min_energy(p, config);
            row.total_power = sol.total_power;
            row.total_rate = sol.totals.sum();
            row.energy_efficiency = sol.energy_efficiency;
            row.status = sol.diagnostics.status;
        } catch (const InfeasibleProblem&) {
            row.status = "infeasible";
        } catch (const NumericalError&) {
            row.status = "numerical_error";
        }
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os.precision(12);
    os << "snr_db,total_power_w,energy_eff,status\n";
    for (const auto& r : rows) os << r.snr_db << ',' << r.total_power << ',' << r.energy_efficiency << ',' << r.status << '\n';
    return os.str();
}

// ---- construction -------------------------------------------------------------------------

MacProblem mac_problem_from_scene(const Scene& scene, const Vec3& bs, const std::vector<Vec3>& ues, const Vector& b_min,
                                  const Vector& weights, int tones, double tone_spacing_hz, double noise_var) {
    if (tones < 1) throw ConfigError("at least one tone is required");
    MacProblem p;
    p.users = static_cast<int>(ues.size());
    p.tones = tones;
    p.noise_var = noise_var;
    p.b_min = b_min;
    p.weights = weights;
    const double fc = kSpeedOfLight / scene.config.wavelength_m;
    for (const auto& ue : ues) {
        std::vector<CMatrix> per_tone;
        for (int n = 0; n < tones; ++n) {
            const double f = fc + (n - 0.5 * (tones - 1)) * tone_spacing_hz;
            per_tone.push_back(ground_truth_channel_at(scene, LinkGeometry{bs, ue}, kSpeedOfLight / f).h);
        }
        p.channels.push_back(std::move(per_tone));
    }
    p.validate();
    return p;
}

MacProblem preset_problem(ScenarioLabel label, int users, int tones, double b_min, std::uint64_t seed) {
    if (users < 1) throw ConfigError("preset problem: at least one user is required");
    const Scene scene = generate_scene(scene_preset(label, seed));
    const double r = scene.radius();
    const Vec3 bs(0.0, 0.0, std::min(10.0, 0.3 * r));
    Rng rng(seed + 17);
    std::uniform_real_distribution<double> radius(0.1 * r, 0.45 * r);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    std::vector<Vec3> ues;
    for (int u = 0; u < users; ++u) {
        const double d = radius(rng);
        const double a = angle(rng);
        ues.emplace_back(d * std::cos(a), d * std::sin(a), 1.5);
    }
    const MacProblem tmpl = mac_problem_from_scene(scene, bs, ues, Vector::Constant(users, b_min), Vector::Ones(users), tones,
                                                   1e6, 1.0);
    MacProblem p = tmpl;
    p.noise_var = mean_channel_gain(tmpl);
    return p;
}

MacProblem apply_robust_margin(MacProblem problem, const RobustSpec& spec) {
    if (!spec.error_energy.empty() && static_cast<int>(spec.error_energy.size()) != problem.users)
        throw ShapeMismatch("robust margin: one error energy per user is required");
    if (!(spec.rho >= 0.0)) throw ConfigError("robust margin: rho must be >= 0");
    double e = 0.0;
    for (const double v : spec.error_energy) {
        if (!(v >= 0.0)) throw ConfigError("robust margin: error energy must be >= 0");
        e += v;
    }
    if (!spec.error_energy.empty()) e /= static_cast<double>(spec.error_energy.size());
    problem.noise_var += spec.rho * spec.rho * e / problem.rx_antennas();
    return problem;
}

// ---- IO -----------------------------------------------------------------------------------

namespace {

std::filesystem::path sidecar(const std::filesystem::path& json_path, const std::string& suffix) {
    auto p = json_path;
    p.replace_filename(json_path.stem().string() + suffix);
    return p;
}

} // namespace

void save_problem(const MacProblem& p, const std::filesystem::path& path) {
    p.validate();
    Json j;
    j["users"] = p.users;
    j["tones"] = p.tones;
    j["rx_antennas"] = p.rx_antennas();
    std::vector<int> lx;
    for (int u = 0; u < p.users; ++u) lx.push_back(p.tx_antennas(u));
    j["tx_antennas"] = lx;
    j["noise_var"] = p.noise_var;
    j["b_min"] = std::vector<double>(p.b_min.data(), p.b_min.data() + p.b_min.size());
    j["weights"] = std::vector<double>(p.weights.data(), p.weights.data() + p.weights.size());
    const auto bin = sidecar(path, ".channels.bin");
    j["channels"] = bin.filename().string();
    std::vector<ChannelMatrix> ch;
    for (int u = 0; u < p.users; ++u)
        for (int n = 0; n < p.tones; ++n) ch.push_back({p.h(u, n), 0, u, n});
    write_channels(bin, ch);
    write_text(path, j.dump(2) + "\n");
}

MacProblem load_problem(const std::filesystem::path& path) {
    const Json j = read_json(path);
    try {
        MacProblem p;
        p.users = j.at("users").get<int>();
        p.tones = j.at("tones").get<int>();
        p.noise_var = j.at("noise_var").get<double>();
        const auto b = j.at("b_min").get<std::vector<double>>();
        const auto w = j.at("weights").get<std::vector<double>>();
        p.b_min = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
        p.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
        if (p.users < 1 || p.tones < 1) throw ConfigError("problem needs users >= 1 and tones >= 1");
        p.channels.assign(static_cast<std::size_t>(p.users), std::vector<CMatrix>(static_cast<std::size_t>(p.tones)));
        const auto bin = path.parent_path() / j.at("channels").get<std::string>();
        std::vector<std::vector<bool>> seen(static_cast<std::size_t>(p.users), std::vector<bool>(static_cast<std::size_t>(p.tones)));
        for (auto& c : read_channels(bin)) {
            if (c.user < 0 || c.user >= p.users || c.tone < 0 || c.tone >= p.tones)
                throw ConfigError("channel tensor has an out-of-range user/tone tag");
            p.channels[static_cast<std::size_t>(c.user)][static_cast<std::size_t>(c.tone)] = std::move(c.h);
            seen[static_cast<std::size_t>(c.user)][static_cast<std::size_t>(c.tone)] = true;
        }
        for (const auto& su : seen)
            for (const bool v : su)
                if (!v) throw ConfigError("channel tensor is missing a (user, tone) entry");
        p.validate();
        return p;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("problem file: ") + e.what());
    }
}

Json solution_summary(const PrecoderSolution& s) {
    Json j;
    j["objective"] = s.objective;
    j["total_power"] = s.total_power;
    j["energy_efficiency"] = s.energy_efficiency;
    j["duals"] = std::vector<double>(s.duals.data(), s.duals.data() + s.duals.size());
    j["order"] = s.order;
    j["order_ties"] = s.order_ties;
    j["rates"] = s.rates;
    j["totals"] = std::vector<double>(s.totals.data(), s.totals.data() + s.totals.size());
    j["streams"] = s.streams.size();
    const auto& d = s.diagnostics;
    j["diagnostics"] = {{"method", d.method},
                        {"status", d.status},
                        {"newton_steps", d.newton_steps},
                        {"outer_iterations", d.outer_iterations},
                        {"ccp_iterations", d.ccp_iterations},
                        {"gap", d.gap},
                        {"rate_violation", d.rate_violation},
                        {"subset_violation", d.subset_violation},
                        {"psd_violation", d.psd_violation},
                        {"relaxed_objective", d.relaxed_objective}};
    return j;
}

void save_solution(const PrecoderSolution& s, const std::filesystem::path& path) {
    Json j = solution_summary(s);
    const auto bin = sidecar(path, ".covariances.bin");
    j["covariances"] = bin.filename().string();
    std::vector<ChannelMatrix> cov;
    for (std::size_t u = 0; u < s.covariances.size(); ++u)
        for (std::size_t n = 0; n < s.covariances[u].size(); ++n)
            cov.push_back({s.covariances[u][n], 0, static_cast<int>(u), static_cast<int>(n)});
    write_channels(bin, cov);
    write_text(path, j.dump(2) + "\n");
}

} // namespace rtwin
