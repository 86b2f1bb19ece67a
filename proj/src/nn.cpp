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

#include "rtwin/nn.hpp"

#include <cmath>

namespace rtwin {

Mlp::Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
    Eigen::Index total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(total);
        total += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
    params_ = Vector::Zero(total);
    for (std::size_t l = 0; l < num_layers(); ++l) {
        // Glorot-uniform weights, zero biases.
        const double a = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
        std::uniform_real_distribution<double> u(-a, a);
        auto w = weight(l);
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = u(rng);
    }
}

Eigen::Map<Matrix> Mlp::weight(std::size_t l) {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Vector> Mlp::bias(std::size_t l) {
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}
Eigen::Map<const Matrix> Mlp::weight(std::size_t l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Vector> Mlp::bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
    if (x.rows() != input_dim()) throw ShapeMismatch("Mlp::forward: input dimension mismatch");
    Matrix a = x;
    if (cache) {
        cache->activations.clear();
        cache->activations.push_back(x);
    }
    for (std::size_t l = 0; l < num_layers(); ++l) {
        Matrix z = weight(l) * a;
        z.colwise() += bias(l);
        if (l + 1 < num_layers()) z = z.array().tanh().matrix();
        a = std::move(z);
        if (cache) cache->activations.push_back(a);
    }
    return a;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& d_out, Eigen::Ref<Vector> grad) const {
    Matrix delta = d_out;
    for (std::size_t l = num_layers(); l-- > 0;) {
        const Matrix& in = cache.activations[l];
        Eigen::Map<Matrix> gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        Eigen::Map<Vector> gb(grad.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1],
                              sizes_[l + 1]);
        gw.noalias() += delta * in.transpose();
        gb += delta.rowwise().sum();
        Matrix d_in = weight(l).transpose() * delta;
        if (l > 0) d_in.array() *= (1.0 - in.array().square()); // tanh'
        delta = std::move(d_in);
    }
    return delta;
}

std::int64_t Mlp::forward_macs() const {
    std::int64_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += static_cast<std::int64_t>(sizes_[l]) * sizes_[l + 1];
    return n;
}

void Adam::step(Eigen::Ref<Vector> params, const Vector& grad) {
    if (m_.size() != params.size()) {
        m_ = Vector::Zero(params.size());
        v_ = Vector::Zero(params.size());
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

} // namespace rtwin
