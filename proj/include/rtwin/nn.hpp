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

// Small dense networks with hand-written backprop. Samples are stored column-wise so a
// whole batch goes through one GEMM per layer.

#include "rtwin/common.hpp"

#include <vector>

namespace rtwin {

struct MlpCache {
    std::vector<Matrix> activations; // activations[0] is the input batch
};

/// Fully connected network: tanh on hidden layers, identity on the output layer.
/// All weights and biases live in one flat vector so optimisers and gradient checks can
/// treat the network as a single parameter block.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> sizes, Rng& rng);

    Eigen::Index num_params() const { return params_.size(); }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }

    Vector& params() { return params_; }
    const Vector& params() const { return params_; }

    Eigen::Map<Matrix> weight(std::size_t layer);
    Eigen::Map<Vector> bias(std::size_t layer);
    Eigen::Map<const Matrix> weight(std::size_t layer) const;
    Eigen::Map<const Vector> bias(std::size_t layer) const;
    std::size_t num_layers() const { return sizes_.size() - 1; }

    Matrix forward(const Matrix& x, MlpCache* cache = nullptr) const;

    /// Accumulates dL/dparams into grad (same layout as params()) and returns dL/dx.
    Matrix backward(const MlpCache& cache, const Matrix& d_out, Eigen::Ref<Vector> grad) const;

    /// Multiply-accumulate count of one forward pass for a single sample.
    std::int64_t forward_macs() const;

private:
    std::vector<int> sizes_;
    std::vector<Eigen::Index> offsets_; // start of each layer's weights; bias follows
    Vector params_;
};

/// Adam with bias correction. Non-finite gradients must be filtered by the caller.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(Eigen::Ref<Vector> params, const Vector& grad);
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    std::int64_t steps() const { return t_; }
    void reset() {
        t_ = 0;
        m_.resize(0);
        v_.resize(0);
    }

    // Exposed for checkpointing.
    const Vector& first_moment() const { return m_; }
    const Vector& second_moment() const { return v_; }
    void restore(std::int64_t t, Vector m, Vector v) {
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    Vector m_, v_;
};

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

} // namespace rtwin
