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

#include "rtwin/logdet_program.hpp"

#include <Eigen/Cholesky>

#include <map>

namespace rtwin {

namespace {

const double kInvLn2 = 1.0 / std::log(2.0);

// Column a holds the entries of basis matrix E_a, row index r * L + s.
const CMatrix& basis(int dim) {
    static thread_local std::map<int, CMatrix> cache;
    auto it = cache.find(dim);
    if (it != cache.end()) return it->second;
    CMatrix p = CMatrix::Zero(dim * dim, dim * dim);
    int a = 0;
    for (int k = 0; k < dim; ++k) p(k * dim + k, a++) = 1.0;
    for (int k = 0; k < dim; ++k)
        for (int l = k + 1; l < dim; ++l) {
            p(k * dim + l, a) = 1.0;
            p(l * dim + k, a) = 1.0;
            ++a;
            p(k * dim + l, a) = cplx(0.0, 1.0);
            p(l * dim + k, a) = cplx(0.0, -1.0);
            ++a;
        }
    return cache.emplace(dim, std::move(p)).first->second;
}

// d/dx_a tr(G E_a) for all a: Re(P^T vec(G^T)).
Vector trace_gradient(const CMatrix& g) {
    const int dim = static_cast<int>(g.rows());
    CVector v(dim * dim);
    for (int r = 0; r < dim; ++r)
        for (int s = 0; s < dim; ++s) v(r * dim + s) = g(s, r);
    return (basis(dim).transpose() * v).real();
}

// Matrix of Re tr(A E_b B E_a) over (a in block u, b in block v). A is L_u x L_v, B is L_v x L_u.
Matrix trace_hessian(const CMatrix& a, const CMatrix& b) {
    const auto lu = a.rows(), lv = a.cols();
    CMatrix q(lu * lu, lv * lv);
    for (Eigen::Index r = 0; r < lu; ++r)
        for (Eigen::Index s = 0; s < lu; ++s)
            for (Eigen::Index p = 0; p < lv; ++p)
                for (Eigen::Index qq = 0; qq < lv; ++qq) q(r * lu + s, p * lv + qq) = a(s, p) * b(qq, r);
    return (basis(static_cast<int>(lu)).transpose() * q * basis(static_cast<int>(lv))).real();
}

} // namespace

LogDetProgram::LogDetProgram(std::vector<std::vector<CMatrix>> channels, const std::vector<bool>& active, int extra_vars)
    : channels_(std::move(channels)) {
    if (channels_.empty() || channels_[0].empty()) throw std::invalid_argument("LogDetProgram: no channels");
    if (active.size() != channels_.size()) throw std::invalid_argument("LogDetProgram: active mask size mismatch");
    if (channels_.size() > 30) throw std::invalid_argument("LogDetProgram: at most 30 users");
    Eigen::Index off = 0;
    block_index_.assign(channels_.size(), std::vector<int>(channels_[0].size(), -1));
    for (std::size_t u = 0; u < channels_.size(); ++u) {
        if (!active[u]) continue;
        for (std::size_t n = 0; n < channels_[u].size(); ++n) {
            const int dim = static_cast<int>(channels_[u][n].cols());
            block_index_[u][n] = static_cast<int>(blocks_.size());
            blocks_.push_back({static_cast<int>(u), static_cast<int>(n), dim, off});
            off += dim * dim;
        }
    }
    extra_offset_ = off;
    num_vars_ = off + extra_vars;
    cost = Vector::Zero(num_vars_);
}

int LogDetProgram::block_of(int user, int tone) const {
    return block_index_.at(static_cast<std::size_t>(user)).at(static_cast<std::size_t>(tone));
}

CMatrix LogDetProgram::block_matrix(const Vector& x, int block) const {
    const auto& b = blocks_[static_cast<std::size_t>(block)];
    const int d = b.dim;
    CMatrix r(d, d);
    Eigen::Index a = b.offset;
    for (int k = 0; k < d; ++k) r(k, k) = x(a++);
    for (int k = 0; k < d; ++k)
        for (int l = k + 1; l < d; ++l) {
            r(k, l) = cplx(x(a), x(a + 1));
            r(l, k) = cplx(x(a), -x(a + 1));
            a += 2;
        }
    return r;
}

void LogDetProgram::set_block(Vector& x, int block, const CMatrix& r) const {
    const auto& b = blocks_[static_cast<std::size_t>(block)];
    const int d = b.dim;
    Eigen::Index a = b.offset;
    for (int k = 0; k < d; ++k) x(a++) = r(k, k).real();
    for (int k = 0; k < d; ++k)
        for (int l = k + 1; l < d; ++l) {
            const cplx v = 0.5 * (r(k, l) + std::conj(r(l, k)));
            x(a) = v.real();
            x(a + 1) = v.imag();
            a += 2;
        }
}

double LogDetProgram::logdet_term(const Vector& x, int tone, std::uint32_t set, Vector* grad) const {
    const auto ly = channels_[0][0].rows();
    CMatrix m = CMatrix::Identity(ly, ly);
    std::vector<int> members;
    for (int u = 0; u < users(); ++u) {
        if (!(set >> u & 1U)) continue;
        const int b = block_of(u, tone);
        if (b < 0) continue;
        members.push_back(u);
        const CMatrix& h = channels_[static_cast<std::size_t>(u)][static_cast<std::size_t>(tone)];
        m.noalias() += h * block_matrix(x, b) * h.adjoint();
    }
    Eigen::LLT<CMatrix> llt(m);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const double val = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum() * kInvLn2;
    if (grad) {
        grad->setZero(num_vars_);
        for (const int u : members) {
            const CMatrix& h = channels_[static_cast<std::size_t>(u)][static_cast<std::size_t>(tone)];
            const CMatrix g = h.adjoint() * llt.solve(h);
            const auto& b = blocks_[static_cast<std::size_t>(block_of(u, tone))];
            grad->segment(b.offset, b.dim * b.dim) = kInvLn2 * trace_gradient(g);
        }
    }
    return val;
}

double LogDetProgram::constraint_value(const Vector& x, std::size_t c) const {
    const auto& con = constraints[c];
    double g = con.constant;
    for (const auto& [i, a] : con.linear) g += a * x(i);
    for (const auto& t : con.terms) g += t.coeff * logdet_term(x, t.tone, t.users, nullptr);
    return g;
}

double LogDetProgram::barrier_degree() const {
    double m = static_cast<double>(constraints.size());
    for (const auto& b : blocks_) m += b.dim;
    return m;
}

bool LogDetProgram::strictly_feasible(const Vector& x) const {
    if (!x.allFinite()) return false;
    for (int b = 0; b < static_cast<int>(blocks_.size()); ++b) {
        Eigen::LLT<CMatrix> llt(block_matrix(x, b));
        if (llt.info() != Eigen::Success) return false;
    }
    for (std::size_t c = 0; c < constraints.size(); ++c)
        if (!(constraint_value(x, c) > 0.0)) return false;
    return true;
}

double LogDetProgram::barrier(const Vector& x, double t, Vector* grad, Matrix* hess) const {
    const auto nv = num_vars_;
    double phi = t * cost.dot(x);
    if (grad) *grad = t * cost;
    if (hess) hess->setZero(nv, nv);
    const auto ly = channels_[0][0].rows();

    for (int bi = 0; bi < static_cast<int>(blocks_.size()); ++bi) {
        const auto& b = blocks_[static_cast<std::size_t>(bi)];
        Eigen::LLT<CMatrix> llt(block_matrix(x, bi));
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        phi -= 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
        if (grad || hess) {
            const CMatrix inv = llt.solve(CMatrix::Identity(b.dim, b.dim));
            const Eigen::Index k = b.dim * b.dim;
            if (grad) grad->segment(b.offset, k) -= trace_gradient(inv);
            if (hess) hess->block(b.offset, b.offset, k, k) += trace_hessian(inv, inv);
        }
    }

    Vector dg(nv);
    Matrix d2g;
    for (const auto& con : constraints) {
        double g = con.constant;
        for (const auto& [i, a] : con.linear) g += a * x(i);
        if (grad || hess) {
            dg.setZero();
            for (const auto& [i, a] : con.linear) dg(i) += a;
        }
        if (hess) d2g.setZero(nv, nv);
        for (const auto& term : con.terms) {
            CMatrix m = CMatrix::Identity(ly, ly);
            std::vector<int> members;
            for (int u = 0; u < users(); ++u) {
                if (!(term.users >> u & 1U)) continue;
                const int bi = block_of(u, term.tone);
                if (bi < 0) continue;
                members.push_back(u);
                const CMatrix& h = channels_[static_cast<std::size_t>(u)][static_cast<std::size_t>(term.tone)];
                m.noalias() += h * block_matrix(x, bi) * h.adjoint();
            }
            Eigen::LLT<CMatrix> llt(m);
            if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
            g += term.coeff * 2.0 * llt.matrixLLT().diagonal().real().array().log().sum() * kInvLn2;
            if (!(grad || hess)) continue;
            std::vector<CMatrix> w(members.size()); // M^-1 H_u
            for (std::size_t i = 0; i < members.size(); ++i)
                w[i] = llt.solve(channels_[static_cast<std::size_t>(members[i])][static_cast<std::size_t>(term.tone)]);
            for (std::size_t i = 0; i < members.size(); ++i) {
                const CMatrix& hi = channels_[static_cast<std::size_t>(members[i])][static_cast<std::size_t>(term.tone)];
                const auto& bi = blocks_[static_cast<std::size_t>(block_of(members[i], term.tone))];
                const Eigen::Index ki = bi.dim * bi.dim;
                dg.segment(bi.offset, ki) += term.coeff * kInvLn2 * trace_gradient(hi.adjoint() * w[i]);
                if (!hess) continue;
                for (std::size_t j = 0; j < members.size(); ++j) {
                    const CMatrix& hj = channels_[static_cast<std::size_t>(members[j])][static_cast<std::size_t>(term.tone)];
                    const auto& bj = blocks_[static_cast<std::size_t>(block_of(members[j], term.tone))];
                    const CMatrix kij = hi.adjoint() * w[j];
                    const CMatrix kji = hj.adjoint() * w[i];
                    d2g.block(bi.offset, bj.offset, ki, bj.dim * bj.dim) -= term.coeff * kInvLn2 * trace_hessian(kij, kji);
                }
            }
        }
        if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
        phi -= std::log(g);
        if (grad) *grad -= dg / g;
        if (hess) {
            hess->noalias() += (dg * dg.transpose()) / (g * g);
            *hess -= d2g / g;
        }
    }
    return phi;
}

BarrierResult solve_barrier(const LogDetProgram& program, Vector x0, const BarrierOptions& options) {
    if (x0.size() != program.num_vars()) throw std::invalid_argument("solve_barrier: start has the wrong size");
    if (!program.strictly_feasible(x0)) throw std::invalid_argument("solve_barrier: start is not strictly feasible");
    const double m = program.barrier_degree();
    BarrierResult res;
    Vector x = std::move(x0);
    double t = options.t0 > 0.0 ? options.t0 : m / std::max(1.0, std::abs(program.cost.dot(x)));
    Vector g;
    Matrix h;
    for (int outer = 0; outer < options.max_outer; ++outer) {
        ++res.outer_iterations;
        for (int it = 0; it < options.max_newton; ++it) {
            const double phi = program.barrier(x, t, &g, &h);
            Eigen::LDLT<Matrix> ldlt(h);
            Vector dx = -ldlt.solve(g);
            double dec = -g.dot(dx);
            if (ldlt.info() != Eigen::Success || !dx.allFinite() || dec < 0.0) {
                // Fall back to a regularised system, then plain gradient descent.
                Matrix hr = h;
                hr.diagonal().array() += 1e-10 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
                dx = -hr.ldlt().solve(g);
                dec = -g.dot(dx);
                if (!dx.allFinite() || dec <= 0.0) {
                    dx = -g;
                    dec = g.squaredNorm();
                }
            }
            ++res.newton_steps;
            if (dec / 2.0 <= 1e-11) break;
            double s = 1.0;
            Vector xn = x + s * dx;
            double phin = program.barrier(xn, t, nullptr, nullptr);
            while ((!std::isfinite(phin) || phin > phi - 0.25 * s * dec) && s > 1e-16) {
                s *= 0.5;
                xn = x + s * dx;
                phin = program.barrier(xn, t, nullptr, nullptr);
            }
            if (!(s > 1e-16) || !std::isfinite(phin)) break;
            x = std::move(xn);
            if (phi - phin < 1e-15 * std::max(1.0, std::abs(phi))) break;
        }
        const double obj = program.cost.dot(x);
        res.gap = m / t;
        if (res.gap <= options.gap_tol * std::max(1.0, std::abs(obj))) {
            res.converged = true;
            break;
        }
        t *= options.mu;
    }
    res.final_t = t;
    res.objective = program.cost.dot(x);
    res.duals.resize(static_cast<Eigen::Index>(program.constraints.size()));
    for (std::size_t c = 0; c < program.constraints.size(); ++c)
        res.duals(static_cast<Eigen::Index>(c)) = 1.0 / (t * program.constraint_value(x, c));
    res.x = std::move(x);
    return res;
}

} // namespace rtwin
