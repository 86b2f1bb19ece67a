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

#include "rtwin/mac.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace rtwin;

namespace {

CMatrix random_matrix(Rng& rng, int r, int c) {
    CMatrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = complex_normal(rng, 1.0);
    return m;
}

CMatrix random_psd(Rng& rng, int n, int rank) {
    const CMatrix a = random_matrix(rng, n, rank);
    return a * a.adjoint();
}

MacProblem random_problem(Rng& rng, int users, int tones, int ly, int lx) {
    MacProblem p;
    p.users = users;
    p.tones = tones;
    p.noise_var = 0.7;
    p.b_min = Vector::Ones(users);
    p.weights = Vector::Ones(users);
    for (int u = 0; u < users; ++u) {
        std::vector<CMatrix> per;
        for (int n = 0; n < tones; ++n) per.push_back(random_matrix(rng, ly, lx));
        p.channels.push_back(per);
    }
    return p;
}

Covariances random_covariances(Rng& rng, const MacProblem& p, int rank) {
    Covariances r(static_cast<std::size_t>(p.users));
    for (int u = 0; u < p.users; ++u)
        for (int n = 0; n < p.tones; ++n) r[static_cast<std::size_t>(u)].push_back(random_psd(rng, p.tx_antennas(u), rank));
    return r;
}

// Independent log2 det(I + sum H R H^H / noise) through the eigenvalues.
double logdet_oracle(const MacProblem& p, int tone, const Covariances& r, UserSet set) {
    CMatrix m = CMatrix::Identity(p.rx_antennas(), p.rx_antennas());
    for (int u = 0; u < p.users; ++u)
        if (set & (1u << u)) m += p.h(u, tone) * r[static_cast<std::size_t>(u)][static_cast<std::size_t>(tone)] *
                                 p.h(u, tone).adjoint() / p.noise_var;
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<CMatrix>(m).eigenvalues();
    return ev.array().log2().sum();
}

} // namespace

TEST_CASE("scalar subset bound is the Shannon rate") {
    MacProblem p;
    p.users = 1;
    p.tones = 1;
    p.noise_var = 1.0;
    p.b_min = Vector::Constant(1, 2.0);
    p.weights = Vector::Ones(1);
    p.channels = {{CMatrix::Constant(1, 1, 1.0)}};
    Covariances r{{CMatrix::Constant(1, 1, 3.0)}};
    CHECK(subset_rate_bound(p, 0, r, 1u) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(subset_rate_bound(p, 0, zero_covariances(p), 1u) == 0.0);
    r[0][0](0, 0) = -1.0;
    CHECK_THROWS_AS(subset_rate_bound(p, 0, r, 1u), NumericalError);
}

TEST_CASE("subset bounds match an eigenvalue oracle and are submodular") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const MacProblem p = random_problem(rng, 3, 2, 2, 2);
        const Covariances r = random_covariances(rng, p, 1 + trial % 2);
        for (int n = 0; n < p.tones; ++n) {
            for (UserSet t = 1; t < 8; ++t) CHECK(subset_rate_bound(p, n, r, t) == doctest::Approx(logdet_oracle(p, n, r, t)));
            for (UserSet a = 0; a < 8; ++a)
                for (UserSet b = 0; b < 8; ++b) {
                    auto f = [&](UserSet s) { return s ? subset_rate_bound(p, n, r, s) : 0.0; };
                    CHECK(f(a) + f(b) >= f(a | b) + f(a & b) - 1e-10);
                }
        }
    }
}

TEST_CASE("corner rates telescope to the full-set bound") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const MacProblem p = random_problem(rng, 4, 2, 3, 2);
        const Covariances r = random_covariances(rng, p, 2);
        std::vector<int> order{0, 1, 2, 3};
        std::shuffle(order.begin(), order.end(), rng);
        const auto rates = corner_rates(p, r, order);
        for (int n = 0; n < p.tones; ++n) {
            double sum = 0.0;
            for (int u = 0; u < p.users; ++u) sum += rates[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)];
            CHECK(sum == doctest::Approx(subset_rate_bound(p, n, r, 0xF)).epsilon(1e-10));
        }
        // The last decoded user sees no interference.
        const int last = order.back();
        CHECK(rates[static_cast<std::size_t>(last)][0] == doctest::Approx(subset_rate_bound(p, 0, r, 1u << last)));
    }
}

TEST_CASE("two-user SISO corner at powers (2, 1)") {
    MacProblem p;
    p.users = 2;
    p.tones = 1;
    p.noise_var = 1.0;
    p.b_min = Vector::Ones(2);
    p.weights = Vector::Ones(2);
    p.channels = {{CMatrix::Constant(1, 1, 1.0)}, {CMatrix::Constant(1, 1, 1.0)}};
    const Covariances r{{CMatrix::Constant(1, 1, 2.0)}, {CMatrix::Constant(1, 1, 1.0)}};
    const Vector b = corner_totals(p, r, {0, 1});
    CHECK(b(0) == doctest::Approx(1.0));
    CHECK(b(1) == doctest::Approx(1.0));
    CHECK(check_feasible(p, r, std::vector<int>{0, 1}, 1e-9).feasible(1e-9));
}

TEST_CASE("feasibility report on zero covariances") {
    Rng rng(13);
    MacProblem p = random_problem(rng, 3, 1, 2, 1);
    p.b_min = Vector::Zero(3);
    const Covariances z = zero_covariances(p);
    const std::vector<int> order{0, 1, 2};
    CHECK(check_feasible(p, z, order, 1e-9).feasible(1e-9));
    p.b_min = Vector::Ones(3);
    const auto rep = check_feasible(p, z, order, 1e-9);
    CHECK(rep.rate_violation == doctest::Approx(1.0));
    CHECK(rep.subsets_checked == 7);
}

TEST_CASE("subset enumeration counts") {
    Rng rng(14);
    for (int u : {2, 3, 4}) {
        const MacProblem p = random_problem(rng, u, 1, 2, 1);
        std::vector<int> order(static_cast<std::size_t>(u));
        std::iota(order.begin(), order.end(), 0);
        CHECK(check_feasible(p, random_covariances(rng, p, 1), order, 1e-6).subsets_checked == (1 << u) - 1);
    }
}

TEST_CASE("last decoded single stream gets the matched filter") {
    Rng rng(15);
    MacProblem p = random_problem(rng, 2, 1, 3, 2);
    p.noise_var = 1.0;
    Covariances r = random_covariances(rng, p, 1);
    r[1][0] = CMatrix::Zero(2, 2);
    r[1][0](0, 0) = 2.5; // f = e1
    const auto streams = mmse_sic_vectors(p, r, {0, 1});
    bool found = false;
    for (const auto& s : streams) {
        if (s.user != 1) continue;
        found = true;
        const CVector he = p.h(1, 0).col(0);
        CHECK(std::abs(s.receiver.dot(he)) == doctest::Approx(he.norm()).epsilon(1e-10));
        CHECK(s.direction.norm() == doctest::Approx(1.0));
        CHECK(s.receiver.norm() == doctest::Approx(1.0));
    }
    CHECK(found);
}

TEST_CASE("single-stream MMSE-SIC rates equal the corner rates") {
    Rng rng(16);
    for (int trial = 0; trial < 25; ++trial) {
        const MacProblem p = random_problem(rng, 3, 2, 3, 2);
        const Covariances r = random_covariances(rng, p, 1);
        const std::vector<int> order{2, 0, 1};
        const auto rates = corner_rates(p, r, order);
        const auto streams = mmse_sic_vectors(p, r, order);
        for (int u = 0; u < p.users; ++u)
            for (int n = 0; n < p.tones; ++n) {
                double sum = 0.0;
                for (const auto& s : streams)
                    if (s.user == u && s.tone == n) sum += std::log2(1.0 + s.sinr);
                CHECK(std::abs(sum - rates[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)]) < 1e-8);
            }
    }
}

TEST_CASE("receiver direction is invariant to joint channel scaling") {
    Rng rng(17);
    MacProblem p = random_problem(rng, 2, 1, 2, 2);
    const Covariances r = random_covariances(rng, p, 1);
    const auto a = mmse_sic_vectors(p, r, {0, 1});
    p.channels[0][0] *= cplx(3.0, -1.0);
    const auto b = mmse_sic_vectors(p, r, {0, 1});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].user == 0) CHECK(std::abs(a[i].receiver.dot(b[i].receiver)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("energy efficiency definition") {
    CHECK(energy_efficiency(2.0, 3.0) == doctest::Approx(2.0 / 3.0));
    CHECK(energy_efficiency(4.0, 3.0) == doctest::Approx(2.0 * energy_efficiency(2.0, 3.0)));
    CHECK(energy_efficiency(0.0, 0.0) == 0.0);
}

TEST_CASE("PSD clipping removes negative eigenvalues") {
    CMatrix m(2, 2);
    m << 1.0, 0.0, 0.0, -0.5;
    const double neg = clip_psd(m);
    CHECK(neg == doctest::Approx(-0.5));
    CHECK(Eigen::SelfAdjointEigenSolver<CMatrix>(m).eigenvalues().minCoeff() >= -1e-15);
}

TEST_CASE("problem validation") {
    Rng rng(18);
    MacProblem p = random_problem(rng, 2, 1, 2, 1);
    p.noise_var = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = random_problem(rng, 2, 1, 2, 1);
    p.channels[1][0] = CMatrix::Zero(3, 1);
    CHECK_THROWS(p.validate());
    p = random_problem(rng, 2, 1, 2, 1);
    p.weights = Vector::Zero(2);
    CHECK_THROWS_AS(p.validate(), ConfigError);
}
