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

#include "rtwin/mac.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace rtwin {

namespace {

double log2_det_hpd(const CMatrix& m) {
    Eigen::LLT<CMatrix> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalError("log-det of a matrix that is not positive definite");
    const auto d = llt.matrixLLT().diagonal().real();
    return 2.0 * d.array().log().sum() / std::log(2.0);
}

void check_psd(const CMatrix& r) {
    if (r.size() == 0) return;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(r, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, std::abs(r.trace().real()));
    if (es.eigenvalues().minCoeff() < -1e-9 * scale) throw NumericalError("covariance is not positive semidefinite");
}

// noise^-1 * sum_{u in set} H R H^H over one tone (whitened interference-plus-signal).
CMatrix whitened_sum(const MacProblem& p, int tone, const Covariances& r, UserSet set) {
    const int ly = p.rx_antennas();
    CMatrix s = CMatrix::Zero(ly, ly);
    for (int u = 0; u < p.users; ++u) {
        if (!(set >> u & 1U)) continue;
        const CMatrix& h = p.h(u, tone);
        s.noalias() += h * r[static_cast<std::size_t>(u)][static_cast<std::size_t>(tone)] * h.adjoint();
    }
    return s / p.noise_var;
}

} // namespace

void MacProblem::validate() const {
    if (users < 1 || tones < 1) throw ConfigError("MAC problem needs at least one user and one tone");
    if (users > 30) throw ConfigError("MAC problem supports at most 30 users");
    if (static_cast<int>(channels.size()) != users) throw ShapeMismatch("channel list does not match the user count");
    if (b_min.size() != users || weights.size() != users) throw ShapeMismatch("b_min / weights length must equal users");
    if (!(noise_var > 0.0) || !std::isfinite(noise_var)) throw ConfigError("noise variance must be > 0");
    const auto ly = channels[0].empty() ? 0 : channels[0][0].rows();
    if (ly < 1) throw ShapeMismatch("empty channel matrix");
    for (int u = 0; u < users; ++u) {
        const auto& cu = channels[static_cast<std::size_t>(u)];
        if (static_cast<int>(cu.size()) != tones) throw ShapeMismatch("channel list does not match the tone count");
        for (const auto& h : cu) {
            if (h.rows() != ly || h.cols() != cu[0].cols() || h.cols() < 1) throw ShapeMismatch("inconsistent channel shapes");
            if (!h.allFinite()) throw ConfigError("channel has non-finite entries");
        }
        if (!(b_min(u) >= 0.0) || !std::isfinite(b_min(u))) throw ConfigError("b_min must be finite and >= 0");
        if (!(weights(u) >= 0.0) || !std::isfinite(weights(u))) throw ConfigError("weights must be finite and >= 0");
    }
    if (!(weights.maxCoeff() > 0.0)) throw ConfigError("at least one energy weight must be > 0");
}

Covariances zero_covariances(const MacProblem& p) {
    Covariances r(static_cast<std::size_t>(p.users));
    for (int u = 0; u < p.users; ++u)
        r[static_cast<std::size_t>(u)].assign(static_cast<std::size_t>(p.tones), CMatrix::Zero(p.tx_antennas(u), p.tx_antennas(u)));
    return r;
}

double subset_rate_bound(const MacProblem& p, int tone, const Covariances& r, UserSet subset) {
    if (subset == 0) throw std::invalid_argument("subset_rate_bound: empty subset");
    for (int u = 0; u < p.users; ++u)
        if (subset >> u & 1U) check_psd(r[static_cast<std::size_t>(u)][static_cast<std::size_t>(tone)]);
    CMatrix m = whitened_sum(p, tone, r, subset);
    m.diagonal().array() += 1.0;
    return log2_det_hpd(m);
}

std::vector<std::vector<double>> corner_rates(const MacProblem& p, const Covariances& r, const std::vector<int>& order) {
    if (static_cast<int>(order.size()) != p.users) throw std::invalid_argument("corner_rates: order must list every user");
    std::vector<bool> seen(static_cast<std::size_t>(p.users), false);
    for (const int u : order) {
        if (u < 0 || u >= p.users || seen[static_cast<std::size_t>(u)]) throw std::invalid_argument("corner_rates: invalid permutation");
        seen[static_cast<std::size_t>(u)] = true;
    }
    std::vector<std::vector<double>> rates(static_cast<std::size_t>(p.users), std::vector<double>(static_cast<std::size_t>(p.tones)));
    const int ly = p.rx_antennas();
    for (int n = 0; n < p.tones; ++n) {
        // Walk from the last-decoded user backwards so each stage adds one user on top.
        CMatrix m = CMatrix::Identity(ly, ly);
        double prev = 0.0;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int u = *it;
            check_psd(r[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)]);
            m += whitened_sum(p, n, r, UserSet{1} << u);
            const double cur = log2_det_hpd(m);
            rates[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)] = cur - prev;
            prev = cur;
        }
    }
    return rates;
}

Vector corner_totals(const MacProblem& p, const Covariances& r, const std::vector<int>& order) {
    const auto rates = corner_rates(p, r, order);
    Vector out(p.users);
    for (int u = 0; u < p.users; ++u) {
        double s = 0.0;
        for (const double v : rates[static_cast<std::size_t>(u)]) s += v;
        out(u) = s;
    }
    return out;
}

FeasibilityReport check_feasible(const MacProblem& p, const Covariances& r, const std::vector<std::vector<double>>& rates,
                                 double tol) {
    (void)tol;
    if (p.users > 12) throw std::invalid_argument("check_feasible enumerates subsets and supports U <= 12");
    FeasibilityReport rep;
    for (int u = 0; u < p.users; ++u)
        for (int n = 0; n < p.tones; ++n) {
            const CMatrix& c = r[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)];
            if (c.size() == 0) continue;
            Eigen::SelfAdjointEigenSolver<CMatrix> es(c, Eigen::EigenvaluesOnly);
            rep.psd_violation = std::max(rep.psd_violation, -es.eigenvalues().minCoeff());
        }
    Vector totals = Vector::Zero(p.users);
    for (int u = 0; u < p.users; ++u)
        for (int n = 0; n < p.tones; ++n) totals(u) += rates[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)];
    for (int u = 0; u < p.users; ++u) rep.rate_violation = std::max(rep.rate_violation, p.b_min(u) - totals(u));

    // Work on the clipped covariances so the log-dets are defined.
    Covariances clipped = r;
    for (auto& cu : clipped)
        for (auto& c : cu) clip_psd(c);
    const UserSet all = (UserSet{1} << p.users) - 1;
    for (UserSet t = 1; t <= all; ++t) {
        double claimed = 0.0, bound = 0.0;
        for (int u = 0; u < p.users; ++u)
            if (t >> u & 1U) claimed += totals(u);
        for (int n = 0; n < p.tones; ++n) bound += subset_rate_bound(p, n, clipped, t);
        rep.subset_violation = std::max(rep.subset_violation, claimed - bound);
        ++rep.subsets_checked;
    }
    return rep;
}

FeasibilityReport check_feasible(const MacProblem& p, const Covariances& r, const std::vector<int>& order, double tol) {
    Covariances clipped = r;
    for (auto& cu : clipped)
        for (auto& c : cu) clip_psd(c);
    auto rep = check_feasible(p, r, corner_rates(p, clipped, order), tol);
    return rep;
}

std::vector<StreamDecoder> mmse_sic_vectors(const MacProblem& p, const Covariances& r, const std::vector<int>& order,
                                            double rel_threshold) {
    std::vector<StreamDecoder> out;
    const int ly = p.rx_antennas();
    for (int n = 0; n < p.tones; ++n) {
        // Interference-plus-noise from users decoded after the current stage.
        CMatrix later = p.noise_var * CMatrix::Identity(ly, ly);
        std::vector<StreamDecoder> tone_streams;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int u = *it;
            const CMatrix& h = p.h(u, n);
            const CMatrix& c = r[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)];
            Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
            const double tr = std::max(0.0, c.trace().real());
            std::vector<std::pair<double, CVector>> streams;
            for (Eigen::Index k = es.eigenvalues().size() - 1; k >= 0; --k) {
                const double lam = es.eigenvalues()(k);
                if (tr > 0.0 && lam > rel_threshold * tr) streams.emplace_back(lam, es.eigenvectors().col(k));
            }
            std::vector<StreamDecoder> user_streams;
            for (std::size_t s = 0; s < streams.size(); ++s) {
                CMatrix interference = later;
                for (std::size_t q = s + 1; q < streams.size(); ++q) {
                    const CVector g = h * streams[q].second;
                    interference.noalias() += streams[q].first * g * g.adjoint();
                }
                const CVector g = h * streams[s].second;
                const Eigen::LDLT<CMatrix> ldlt(interference);
                CVector theta = ldlt.solve(g);
                const double nrm = theta.norm();
                StreamDecoder d;
                d.user = u;
                d.tone = n;
                d.stream = static_cast<int>(s);
                d.power = streams[s].first;
                d.direction = streams[s].second;
                if (nrm > 0.0) theta /= nrm;
                d.receiver = theta;
                const double signal = d.power * std::norm(theta.dot(g));
                const double noise = theta.dot(interference * theta).real();
                d.sinr = noise > 0.0 ? signal / noise : 0.0;
                user_streams.push_back(std::move(d));
            }
            later.noalias() += h * c * h.adjoint();
            tone_streams.insert(tone_streams.begin(), user_streams.begin(), user_streams.end());
        }
        out.insert(out.end(), tone_streams.begin(), tone_streams.end());
    }
    return out;
}

double energy_efficiency(double total_rate, double total_power) {
    if (total_power == 0.0) {
        if (total_rate == 0.0) return 0.0;
        throw std::invalid_argument("energy_efficiency: positive rate at zero power");
    }
    return total_rate / total_power;
}

double total_power(const Covariances& r) {
    double s = 0.0;
    for (const auto& cu : r)
        for (const auto& c : cu) s += c.trace().real();
    return s;
}

double clip_psd(CMatrix& r) {
    if (r.size() == 0) return 0.0;
    r = 0.5 * (r + r.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
    const double worst = es.eigenvalues().minCoeff();
    if (worst < 0.0) r = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().adjoint();
    return worst;
}

} // namespace rtwin
