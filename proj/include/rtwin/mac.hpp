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

// Gaussian multiple-access channel: subset rate bounds (the capacity polymatroid), chain-rule
// corner rates for a decoding order, and MMSE-SIC receive vectors.

#include "rtwin/common.hpp"

#include <vector>

namespace rtwin {

struct MacProblem {
    int users = 0;
    int tones = 0;
    std::vector<std::vector<CMatrix>> channels; // [user][tone], L_y x L_x(user)
    double noise_var = 1.0;                     // R_nn = noise_var * I
    Vector b_min;                               // bits/s/Hz summed over tones
    Vector weights;                             // energy weights

    int rx_antennas() const { return static_cast<int>(channels.at(0).at(0).rows()); }
    int tx_antennas(int u) const { return static_cast<int>(channels.at(static_cast<std::size_t>(u)).at(0).cols()); }
    const CMatrix& h(int u, int n) const { return channels[static_cast<std::size_t>(u)][static_cast<std::size_t>(n)]; }

    /// Throws ConfigError / ShapeMismatch when invariants fail.
    void validate() const;
};

/// Covariances indexed [user][tone].
using Covariances = std::vector<std::vector<CMatrix>>;

Covariances zero_covariances(const MacProblem& p);

/// Users as a bitmask (bit u set = user u in the subset).
using UserSet = std::uint32_t;

/// log2 det(I + noise^-1 sum_{u in T} H R H^H) via Cholesky. Throws NumericalError when a
/// covariance is not PSD within -1e-9 (relative to its trace).
double subset_rate_bound(const MacProblem& p, int tone, const Covariances& r, UserSet subset);

/// Rates [user][tone] when users are decoded in `order` (first entry decoded first, so it
/// sees every later user as interference).
std::vector<std::vector<double>> corner_rates(const MacProblem& p, const Covariances& r, const std::vector<int>& order);
Vector corner_totals(const MacProblem& p, const Covariances& r, const std::vector<int>& order);

struct FeasibilityReport {
    double rate_violation = 0.0;     // max_u (b_min_u - rate_u), clipped at 0
    double subset_violation = 0.0;   // max over (T) of sum_{u in T} b_u - sum_n bound_n(T), clipped at 0
    double psd_violation = 0.0;      // max(-lambda_min) over covariances, clipped at 0
    std::int64_t subsets_checked = 0;
    bool feasible(double tol) const { return rate_violation <= tol && subset_violation <= tol && psd_violation <= tol; }
};

/// rates[u][n] are the claimed per-tone rates. Enumerates all 2^U - 1 subsets (U <= 12).
FeasibilityReport check_feasible(const MacProblem& p, const Covariances& r, const std::vector<std::vector<double>>& rates,
                                 double tol);

/// Rates taken as the corner rates of `order`.
FeasibilityReport check_feasible(const MacProblem& p, const Covariances& r, const std::vector<int>& order, double tol);

struct StreamDecoder {
    int user = 0;
    int tone = 0;
    int stream = 0;
    double power = 0.0;  // p_{u,n,s}
    CVector direction;   // f_{u,n,s}, unit norm
    CVector receiver;    // theta_{u,n,s}, unit norm
    double sinr = 0.0;
};

/// Eigen-factorises each covariance (eigenvalues below rel_threshold * trace dropped) and
/// builds MMSE-SIC receivers. A stream's interference is the noise plus every user decoded
/// later plus the same user's not-yet-decoded streams.
std::vector<StreamDecoder> mmse_sic_vectors(const MacProblem& p, const Covariances& r, const std::vector<int>& order,
                                            double rel_threshold = 1e-8);

/// Sum rate over total raw power; 0 when both are 0.
double energy_efficiency(double total_rate, double total_power);

double total_power(const Covariances& r);

/// Nearest PSD matrix by clipping negative eigenvalues; returns the most negative one seen.
double clip_psd(CMatrix& r);

} // namespace rtwin
