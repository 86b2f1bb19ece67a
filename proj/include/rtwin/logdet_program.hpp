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

// Log-barrier interior-point solver for programs of the form
//   minimise  c^T x
//   s.t.      sum_k coeff_k * log2 det(I + sum_{u in T_k} H_{u,n_k} R_u H_{u,n_k}^H) + a^T x + c0 >= 0
//             R_b positive definite for every covariance block b,
// where x stacks the real parameters of Hermitian blocks R_b followed by free scalars.
// Channels are assumed already whitened (unit noise).

#include "rtwin/common.hpp"

#include <vector>

namespace rtwin {

struct LogDetTerm {
    int tone = 0;
    std::uint32_t users = 0; // bitmask
    double coeff = 1.0;
};

struct ProgramConstraint {
    std::vector<LogDetTerm> terms;
    std::vector<std::pair<Eigen::Index, double>> linear;
    double constant = 0.0;
};

struct CovarianceBlock {
    int user = 0;
    int tone = 0;
    int dim = 0;
    Eigen::Index offset = 0; // first parameter: dim diagonal entries, then (re, im) per k < l
};

class LogDetProgram {
public:
    /// channels[u][n] (whitened). Every (u, n) with active[u] gets a covariance block.
    LogDetProgram(std::vector<std::vector<CMatrix>> channels, const std::vector<bool>& active, int extra_vars);

    Eigen::Index num_vars() const { return num_vars_; }
    Eigen::Index extra_offset() const { return extra_offset_; }
    const std::vector<CovarianceBlock>& blocks() const { return blocks_; }
    /// Block index of (u, n) or -1 when the user is inactive.
    int block_of(int user, int tone) const;
    int users() const { return static_cast<int>(channels_.size()); }
    int tones() const { return channels_.empty() ? 0 : static_cast<int>(channels_[0].size()); }

    Vector cost;
    std::vector<ProgramConstraint> constraints;

    CMatrix block_matrix(const Vector& x, int block) const;
    void set_block(Vector& x, int block, const CMatrix& r) const;

    /// log2 det(I + sum H R H^H) over the users in `set` that are active, and its gradient
    /// w.r.t. x (grad resized and overwritten). Returns -inf if M is not positive definite.
    double logdet_term(const Vector& x, int tone, std::uint32_t set, Vector* grad) const;

    double constraint_value(const Vector& x, std::size_t c) const;

    /// Barrier-degree contribution: number of scalar constraints plus total block dims.
    double barrier_degree() const;

    bool strictly_feasible(const Vector& x) const;

    // Barrier objective t c^T x - sum log g_c - sum log det R_b with gradient and Hessian.
    double barrier(const Vector& x, double t, Vector* grad, Matrix* hess) const;

private:
    std::vector<std::vector<CMatrix>> channels_;
    std::vector<CovarianceBlock> blocks_;
    std::vector<std::vector<int>> block_index_;
    Eigen::Index num_vars_ = 0;
    Eigen::Index extra_offset_ = 0;
};

struct BarrierOptions {
    double t0 = -1.0;      // < 0: chosen from the starting point
    double mu = 12.0;
    double gap_tol = 1e-10; // relative to max(1, |objective|)
    int max_newton = 400;   // per centering
    int max_outer = 80;
};

struct BarrierResult {
    Vector x;
    Vector duals; // 1 / (t g_c) per constraint at the last centre
    double objective = 0.0;
    double gap = 0.0;
    double final_t = 0.0;
    int newton_steps = 0;
    int outer_iterations = 0;
    bool converged = false;
};

/// x0 must be strictly feasible; throws std::invalid_argument otherwise.
BarrierResult solve_barrier(const LogDetProgram& program, Vector x0, const BarrierOptions& options = {});

} // namespace rtwin
