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


#include "doctest.h"

#include "rtwin/precoder.hpp"

#include <cmath>

using namespace rtwin;

namespace {

MacProblem siso(const std::vector<double>& gains, const std::vector<double>& b_min, const std::vector<double>& w,
                double noise = 1.0) {
    MacProblem p;
    p.users = static_cast<int>(gains.size());
    p.tones = 1;
    p.noise_var = noise;
    p.b_min = Eigen::Map<const Vector>(b_min.data(), static_cast<Eigen::Index>(b_min.size()));
    p.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    for (double g : gains) p.channels.push_back({CMatrix::Constant(1, 1, std::sqrt(g))});
    return p;
}

MacProblem random_problem(Rng& rng, int users, int tones, int ly, int lx) {
    MacProblem p;
    p.users = users;
    p.tones = tones;
    p.noise_var = 1.0;
    std::uniform_real_distribution<double> b(0.5, 2.0), w(0.5, 3.0);
    p.b_min = Vector(users);
    p.weights = Vector(users);
    for (int u = 0; u < users; ++u) {
        p.b_min(u) = b(rng);
        p.weights(u) = w(rng);
        std::vector<CMatrix> per;
        for (int n = 0; n < tones; ++n) {
            CMatrix h(ly, lx);
            for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = complex_normal(rng, 1.0);
            per.push_back(h);
        }
        p.channels.push_back(per);
    }
    return p;
}

// Minimum power for rate `b` over parallel channels with gains g by bisection on the water level.
double waterfill_power(const std::vector<double>& g, double b) {
    auto rate = [&](double mu) {
        double r = 0.0;
        for (double gi : g) r += std::log2(1.0 + gi * std::max(0.0, mu - 1.0 / gi));
        return r;
    };
    double lo = 0.0, hi = 1.0;
    while (rate(hi) < b) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (rate(mid) < b ? lo : hi) = mid;
    }
    double p = 0.0;
    for (double gi : g) p += std::max(0.0, hi - 1.0 / gi);
    return p;
}

} // namespace

TEST_CASE("single-user SISO needs 2^b - 1") {
    const auto sol = solve_min_energy(siso({1.0}, {2.0}, {1.0}));
    CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-7));
    REQUIRE(sol.order.size() == 1);
    CHECK(sol.order[0] == 0);
}

TEST_CASE("two equal SISO users share power (2, 1)") {
    const auto sol = solve_min_energy(siso({1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}));
    CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-5));
    const int first = sol.order[0], last = sol.order[1];
    CHECK(sol.covariances[static_cast<std::size_t>(first)][0](0, 0).real() == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(sol.covariances[static_cast<std::size_t>(last)][0](0, 0).real() == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(sol.totals(0) >= 1.0 - 1e-6);
    CHECK(sol.totals(1) >= 1.0 - 1e-6);
}

TEST_CASE("single-user MIMO matches water-filling") {
    MacProblem p;
    p.users = 1;
    p.tones = 1;
    p.noise_var = 1.0;
    p.b_min = Vector::Constant(1, 2.0);
    p.weights = Vector::Ones(1);
    CMatrix h = CMatrix::Zero(2, 2);
    h(0, 0) = 1.0;
    h(1, 1) = 0.5;
    p.channels = {{h}};
    CHECK(solve_min_energy(p).objective == doctest::Approx(waterfill_power({1.0, 0.25}, 2.0)).epsilon(1e-5));

    p.b_min(0) = 5.0;
    CHECK(solve_min_energy(p).objective == doctest::Approx(waterfill_power({1.0, 0.25}, 5.0)).epsilon(1e-5));
}

TEST_CASE("order recovery from duals") {
    const auto a = recover_sic_order((Vector(2) << 0.5, 0.9).finished());
    CHECK(a.order == std::vector<int>{0, 1});
    CHECK_FALSE(a.ties);
    const auto b = recover_sic_order((Vector(3) << 0.9, 0.2, 0.5).finished());
    CHECK(b.order == std::vector<int>{1, 2, 0});
    const auto c = recover_sic_order(Vector::Constant(3, 0.4));
    CHECK(c.order == std::vector<int>{0, 1, 2});
    CHECK(c.ties);
    CHECK(recover_sic_order(Vector::Constant(1, 2.0)).order == std::vector<int>{0});
    const auto d = recover_sic_order((Vector(3) << 0.0, 0.3, 0.1).finished(), {false, true, true});
    CHECK(d.order == std::vector<int>{2, 1, 0});
}

TEST_CASE("solved instances satisfy the solution invariants") {
    Rng rng(21);
    for (int trial = 0; trial < 6; ++trial) {
        const MacProblem p = random_problem(rng, 3, 2, 2, 2);
        const auto sol = solve_min_energy(p);
        REQUIRE(sol.diagnostics.status == "optimal");
        CHECK(sol.diagnostics.psd_violation <= 1e-9);
        for (int u = 0; u < p.users; ++u) {
            CHECK(sol.totals(u) >= p.b_min(u) - 1e-6);
            for (const auto& r : sol.covariances[static_cast<std::size_t>(u)]) {
                CHECK((r - r.adjoint()).norm() < 1e-12);
                CHECK(Eigen::SelfAdjointEigenSolver<CMatrix>(r).eigenvalues().minCoeff() >= -1e-9);
            }
        }
        // Read-off order meets the targets; the full set is tight.
        CHECK(check_feasible(p, sol.covariances, sol.order, 1e-6).feasible(1e-6));
        double full = 0.0;
        for (int n = 0; n < p.tones; ++n) full += subset_rate_bound(p, n, sol.covariances, 0x7);
        CHECK(full == doctest::Approx(p.b_min.sum()).epsilon(1e-6));
        for (const auto& s : sol.streams) CHECK(s.direction.norm() == doctest::Approx(1.0));
        // Objective is the weighted trace.
        double obj = 0.0;
        for (int u = 0; u < p.users; ++u)
            for (const auto& r : sol.covariances[static_cast<std::size_t>(u)]) obj += p.weights(u) * r.trace().real();
        CHECK(sol.objective == doctest::Approx(obj).epsilon(1e-9));
    }
}

TEST_CASE("fixed orders never beat the recovered order") {
    Rng rng(22);
    for (int trial = 0; trial < 3; ++trial) {
        const MacProblem p = random_problem(rng, 3, 1, 2, 1);
        const double best = solve_min_energy(p).objective;
        std::vector<int> order{0, 1, 2};
        do {
            CHECK(solve_fixed_order(p, order).objective >= best * (1.0 - 1e-5));
        } while (std::next_permutation(order.begin(), order.end()));
    }
}

TEST_CASE("equal weights on one tone settle on the cheapest corner") {
    Rng rng(5);
    int tied = 0;
    for (int trial = 0; trial < 12; ++trial) {
        MacProblem p = random_problem(rng, 2, 1, 2, 2);
        p.b_min.setOnes();
        p.weights.setOnes();
        const auto sol = solve_min_energy(p);
        CHECK((sol.diagnostics.status == "optimal" || sol.diagnostics.status == "tied"));
        CHECK(sol.totals.minCoeff() >= 1.0 - 1e-6);
        const double best = std::min(solve_fixed_order(p, {0, 1}).objective, solve_fixed_order(p, {1, 0}).objective);
        CHECK(sol.objective <= best * (1.0 + 1e-6));
        if (sol.diagnostics.status == "tied") {
            ++tied;
            CHECK(sol.order_ties);
            CHECK(sol.diagnostics.relaxed_objective <= sol.objective);
        }
    }
    CHECK(tied > 0);
}

TEST_CASE("zero-rate users get no power and go last") {
    const auto sol = solve_min_energy(siso({1.0, 2.0, 0.5}, {1.0, 0.0, 1.5}, {1.0, 1.0, 1.0}));
    CHECK(sol.covariances[1][0].norm() < 1e-9);
    CHECK(sol.order.back() == 1);
}

TEST_CASE("a user with no channel cannot reach a positive rate") {
    MacProblem p = siso({1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0});
    p.channels[1][0].setZero();
    CHECK_THROWS_AS(solve_min_energy(p), InfeasibleProblem);
}

TEST_CASE("SISO sweep follows the closed form") {
    const MacProblem p = siso({0.5}, {2.0}, {1.0});
    const auto rows = sweep_snr(p, {-10.0, 0.0, 10.0, 20.0});
    for (const auto& r : rows) {
        CHECK(r.status == "optimal");
        CHECK(r.total_power == doctest::Approx(3.0 * r.noise_var / 0.5).epsilon(1e-6));
    }
    CHECK_THROWS_AS(sweep_snr(p, {10.0, 0.0}), ConfigError);
}

TEST_CASE("sweeps are monotone on random instances") {
    Rng rng(23);
    const MacProblem p = random_problem(rng, 3, 2, 2, 2);
    std::vector<double> grid;
    for (int i = 0; i < 7; ++i) grid.push_back(-10.0 + 5.0 * i);
    const auto rows = sweep_snr(p, grid);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].total_power <= rows[i - 1].total_power * (1 + 1e-9));
        CHECK(rows[i].energy_efficiency >= rows[i - 1].energy_efficiency * (1 - 1e-9));
    }
    const std::string csv = sweep_csv(rows);
    CHECK(csv.rfind("snr_db,total_power_w,energy_eff,status\n", 0) == 0);
}

TEST_CASE("robust margin inflates the noise") {
    const MacProblem p = siso({1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0});
    const MacProblem q = apply_robust_margin(p, {{0.2, 0.4}, 2.0, 0.05});
    CHECK(q.noise_var == doctest::Approx(1.0 + 4.0 * 0.3));
    CHECK(solve_min_energy(q).objective > solve_min_energy(p).objective);
}

TEST_CASE("problems and solutions round-trip to disk") {
    Rng rng(24);
    const MacProblem p = random_problem(rng, 2, 2, 2, 1);
    const auto dir = std::filesystem::temp_directory_path() / "rtwin_test_precoder";
    std::filesystem::create_directories(dir);
    save_problem(p, dir / "problem.json");
    const MacProblem back = load_problem(dir / "problem.json");
    CHECK(back.users == 2);
    CHECK(back.noise_var == p.noise_var);
    CHECK(back.h(1, 1) == p.h(1, 1));
    const auto sol = solve_min_energy(back);
    save_solution(sol, dir / "solution.json");
    CHECK(std::filesystem::exists(dir / "solution.covariances.bin"));
    CHECK(solution_summary(sol).at("objective").get<double>() == doctest::Approx(sol.objective));
    std::filesystem::remove_all(dir);
}

TEST_CASE("preset templates are reproducible") {
    const MacProblem a = preset_problem(ScenarioLabel::Indoor, 3, 2, 1.0, 5);
    const MacProblem b = preset_problem(ScenarioLabel::Indoor, 3, 2, 1.0, 5);
    CHECK(a.h(2, 1) == b.h(2, 1));
    CHECK(a.noise_var == doctest::Approx(mean_channel_gain(a)));
}
