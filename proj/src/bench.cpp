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

#include "rtwin/bench.hpp"

#include "rtwin/grf.hpp"
#include "rtwin/mac.hpp"

#include <chrono>
#include <sstream>

namespace rtwin {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Keeps the optimiser from discarding benchmark results.
volatile double g_sink = 0.0;

} // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

std::vector<RenderBenchRow> bench_render(const std::vector<int>& primitives, int n_tx, int n_rx, int queries, int repeats,
                                         std::uint64_t seed) {
    std::vector<RenderBenchRow> rows;
    for (const int ng : primitives) {
        GrfConfig c;
        c.num_primitives = ng;
        c.encoding_levels = 4;
        c.latent_dim = 8;
        c.hidden_units = 16;
        c.hidden_layers = 1;
        c.n_tx = n_tx;
        c.n_rx = n_rx;
        c.init_radius = 1.0;
        c.seed = seed;
        const GrfModel model(c);
        const Vec3 p_tx(0.0, 0.0, 3.0);
        const auto& at = model.attributes(p_tx);
        Rng rng(seed + static_cast<std::uint64_t>(ng));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<Vec3> qs;
        for (int q = 0; q < queries; ++q) qs.emplace_back(u(rng), u(rng), u(rng));

        RenderBenchRow row;
        row.primitives = ng;
        row.n_tx = n_tx;
        row.n_rx = n_rx;
        RenderFlops fl;
        model.render(p_tx, qs.front(), &fl);
        row.flops = fl.total();
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = Clock::now();
            double acc = 0.0;
            for (const auto& q : qs) acc += render_cached<double>(at.means, at.inv_cov, at.alpha, at.contributions, q)(0);
            best = std::min(best, seconds_since(t0));
            g_sink = g_sink + acc;
        }
        row.seconds = best / static_cast<double>(queries);
        rows.push_back(row);
    }
    return rows;
}

BenchReport bench_complexity(const BenchConfig& config) {
    BenchReport rep;
    for (const auto& [nt, nr] : config.antennas) {
        auto rows = bench_render(config.primitives, nt, nr, config.render_queries, config.repeats, config.seed);
        rep.render.insert(rep.render.end(), rows.begin(), rows.end());
    }
    if (!config.antennas.empty() && config.primitives.size() >= 2) {
        const auto [nt, nr] = config.antennas.back();
        std::vector<double> x, yt, yf;
        for (const auto& r : rep.render)
            if (r.n_tx == nt && r.n_rx == nr) {
                x.push_back(r.primitives);
                yt.push_back(r.seconds);
                yf.push_back(static_cast<double>(r.flops));
            }
        rep.render_time_slope = loglog_slope(x, yt);
        rep.render_flop_slope = loglog_slope(x, yf);
    }

    Rng rng(config.seed);
    for (const int users : config.users) {
        MacProblem p;
        p.users = users;
        p.tones = 1;
        p.noise_var = 1.0;
        p.b_min = Vector::Constant(users, 1.0);
        p.weights = Vector::Ones(users);
        for (int u = 0; u < users; ++u) {
            CMatrix h(2, 2);
            for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = complex_normal(rng, 1.0);
            p.channels.push_back({h});
        }
        Covariances r = zero_covariances(p);
        for (auto& cu : r)
            for (auto& c : cu) c.setIdentity();
        std::vector<std::vector<double>> rates(static_cast<std::size_t>(users), std::vector<double>(1, 0.5));
        SubsetBenchRow row;
        row.users = users;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < config.repeats; ++k) {
            const auto t0 = Clock::now();
            row.subsets = check_feasible(p, r, rates, 1e-6).subsets_checked;
            best = std::min(best, seconds_since(t0));
        }
        row.seconds = best;
        rep.subsets.push_back(row);
    }

    for (const int ly : config.rx_antennas)
        for (const int users : config.users) {
            MacProblem p;
            p.users = users;
            p.tones = 1;
            p.noise_var = 1.0;
            p.b_min = Vector::Ones(users);
            p.weights = Vector::Ones(users);
            std::vector<int> order;
            for (int u = 0; u < users; ++u) {
                CVector h(ly);
                for (int i = 0; i < ly; ++i) h(i) = complex_normal(rng, 1.0);
                p.channels.push_back({CMatrix(h)});
                order.push_back(u);
            }
            Covariances r = zero_covariances(p);
            for (auto& cu : r)
                for (auto& c : cu) c.setIdentity();
            double best = std::numeric_limits<double>::infinity();
            for (int k = 0; k < config.repeats; ++k) {
                const auto t0 = Clock::now();
                const auto s = mmse_sic_vectors(p, r, order);
                best = std::min(best, seconds_since(t0));
                g_sink = g_sink + s.front().sinr;
            }
            rep.mmse.push_back({users, ly, best});
        }
    return rep;
}

std::string bench_csv(const BenchReport& r) {
    std::ostringstream os;
    os.precision(8);
    os << "kind,primitives,n_tx,n_rx,users,count,seconds\n";
    for (const auto& x : r.render)
        os << "render," << x.primitives << ',' << x.n_tx << ',' << x.n_rx << ",," << x.flops << ',' << x.seconds << '\n';
    for (const auto& x : r.subsets) os << "subsets,,,,"<< x.users << ',' << x.subsets << ',' << x.seconds << '\n';
    for (const auto& x : r.mmse) os << "mmse_sic,,," << x.rx_antennas << ',' << x.users << ",," << x.seconds << '\n';
    return os.str();
}

Json bench_summary(const BenchReport& r) {
    return {{"render_time_slope", r.render_time_slope}, {"render_flop_slope", r.render_flop_slope}};
}

} // namespace rtwin
