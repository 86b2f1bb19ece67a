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

// Gaussian Radio Field: a sparse set of anisotropic 3D Gaussians whose complex N_t x N_r
// contributions, gated by a Mahalanobis weight at the receiver, sum to the channel matrix.
// Per-primitive latents and strengths come from an attribute network fed with encoded
// (centre, transmitter) positions; a decoder network maps latents to contributions.

#include "rtwin/binary_io.hpp"
#include "rtwin/common.hpp"
#include "rtwin/nn.hpp"
#include "rtwin/scene.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace rtwin {

// ---- geometry kernels (templated so the benchmark can run them in float) ------------------

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;

/// gamma_L(x) = [x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x), cos(2^{L-1} pi x)],
/// laid out as consecutive 3-blocks. Length 3 * (1 + 2L).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> positional_encode(const Vec3T<Scalar>& x, int levels) {
    if (levels < 0) throw std::invalid_argument("positional_encode: levels must be >= 0");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(3 * (1 + 2 * levels));
    out.template head<3>() = x;
    Scalar freq = static_cast<Scalar>(kPi);
    for (int l = 0; l < levels; ++l, freq *= Scalar(2)) {
        for (int c = 0; c < 3; ++c) {
            out(3 + 6 * l + c) = std::sin(freq * x(c));
            out(6 + 6 * l + c) = std::cos(freq * x(c));
        }
    }
    return out;
}

inline int encoding_dim(int levels) { return 3 * (1 + 2 * levels); }

/// Rotation from a (w, x, y, z) quaternion; normalised internally.
template <typename Scalar>
Mat3T<Scalar> quat_to_rot(const Eigen::Matrix<Scalar, 4, 1>& q_raw) {
    const Scalar n = q_raw.norm();
    if (!(n > Scalar(0))) throw DegenerateGeometry("quat_to_rot: zero quaternion");
    const Eigen::Matrix<Scalar, 4, 1> q = q_raw / n;
    const Scalar w = q(0), x = q(1), y = q(2), z = q(3);
    Mat3T<Scalar> r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

/// R diag(exp(-2 s)) R^T: the inverse covariance, never formed by inverting Sigma.
template <typename Scalar>
Mat3T<Scalar> inverse_covariance(const Eigen::Matrix<Scalar, 4, 1>& q, const Vec3T<Scalar>& log_scale) {
    const Mat3T<Scalar> r = quat_to_rot<Scalar>(q);
    return r * (Scalar(-2) * log_scale).array().exp().matrix().asDiagonal() * r.transpose();
}

/// w = alpha * exp(-0.5 * d^T Sigma^-1 d), d = p_rx - mean.
template <typename Scalar>
Scalar primitive_weight(const Vec3T<Scalar>& mean, const Eigen::Matrix<Scalar, 4, 1>& q, const Vec3T<Scalar>& log_scale,
                        Scalar alpha, const Vec3T<Scalar>& p_rx) {
    const Vec3T<Scalar> d = p_rx - mean;
    return alpha * std::exp(Scalar(-0.5) * d.dot(inverse_covariance<Scalar>(q, log_scale) * d));
}

/// Weighted sum over primitives with cached attributes. means: 3 x N, inv_cov: 9 x N
/// (column-major 3x3 per primitive), alpha: N, contributions: 2K x N. Returns the 2K real
/// vector (real parts then imaginary parts).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> render_cached(const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& means,
                                                       const Eigen::Matrix<Scalar, 9, Eigen::Dynamic>& inv_cov,
                                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& alpha,
                                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& contributions,
                                                       const Vec3T<Scalar>& p_rx) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> h = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(contributions.rows());
    for (Eigen::Index i = 0; i < means.cols(); ++i) {
        const Vec3T<Scalar> d = p_rx - means.col(i);
        const Eigen::Map<const Mat3T<Scalar>> lam(inv_cov.col(i).data());
        const Scalar w = alpha(i) * std::exp(Scalar(-0.5) * d.dot(lam * d));
        h.noalias() += w * contributions.col(i);
    }
    return h;
}

// Per-primitive FLOPs of the gate: difference (3), 3x3 mat-vec (15), dot (5), scale+exp (3).
inline constexpr std::int64_t kGateFlops = 26;

// ---- model ----------------------------------------------------------------------------------

struct GaussianPrimitive {
    Vec3 mean = Vec3::Zero();
    Eigen::Vector4d quat = Eigen::Vector4d(1, 0, 0, 0); // (w, x, y, z)
    Vec3 log_scale = Vec3::Zero();
    double alpha = 1.0; // cached attribute-network output for the last transmitter
    Vector latent;      // cached attribute-network output for the last transmitter
};

struct GrfConfig {
    int num_primitives = 128;
    int encoding_levels = 16;
    int latent_dim = 32;
    int hidden_units = 64;
    int hidden_layers = 2;
    int n_tx = 2;
    int n_rx = 2;
    // Primitive centres are drawn uniformly inside this ball; defaults to the scene bounds.
    Vec3 init_center = Vec3::Zero();
    double init_radius = 5.0;
    // Initial Gaussian std-dev as a fraction of init_radius; 0 picks radius * N_G^(-1/3).
    double init_scale = 0.0;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Per-transmitter attribute cache: everything render needs that does not depend on p_rx.
struct FieldAttributes {
    Vec3 p_tx = Vec3::Zero();
    Matrix latents;        // d x N_G
    Vector alpha_raw;      // N_G, pre-softplus
    Vector alpha;          // N_G
    Matrix contributions;  // 2 N_t N_r x N_G, real parts then imaginary parts, row-major (tx, rx)
    Eigen::Matrix<double, 3, Eigen::Dynamic> means;   // 3 x N_G
    Eigen::Matrix<double, 9, Eigen::Dynamic> inv_cov; // column-major 3x3 per primitive
};

struct RenderFlops {
    std::int64_t weight = 0;     // Mahalanobis gate evaluation
    std::int64_t accumulate = 0; // weighted complex sum over N_G * N_t * N_r entries
    std::int64_t total() const { return weight + accumulate; }
};

/// One labelled link for training or evaluation.
struct GrfSample {
    Vec3 p_tx;
    Vec3 p_rx;
    CMatrix h;
};

/// Gradients grouped by parameter block; layouts mirror the model's parameter vectors.
struct GrfGradients {
    Vector primitives; // 10 per primitive: mean(3), quat(4), log_scale(3)
    Vector attribute;
    Vector decoder;
    double norm() const {
        return std::sqrt(primitives.squaredNorm() + attribute.squaredNorm() + decoder.squaredNorm());
    }
};

struct GrfStepResult {
    double loss = 0.0;
    double grad_norm = 0.0;
    bool accepted = true; // false when the gradient was non-finite and the step was skipped
};

class GrfModel {
public:
    static constexpr int kPrimitiveParams = 10;

    GrfModel() = default;
    explicit GrfModel(const GrfConfig& config);

    const GrfConfig& config() const { return config_; }
    int num_primitives() const { return config_.num_primitives; }
    int n_tx() const { return config_.n_tx; }
    int n_rx() const { return config_.n_rx; }

    // Trainable parameter blocks. Editing them through these references invalidates the
    // attribute cache automatically on the next render.
    Vector& primitive_params() { invalidate(); return prim_; }
    const Vector& primitive_params() const { return prim_; }
    Mlp& attribute_net() { invalidate(); return attr_; }
    const Mlp& attribute_net() const { return attr_; }
    Mlp& decoder_net() { invalidate(); return dec_; }
    const Mlp& decoder_net() const { return dec_; }

    double channel_scale() const { return channel_scale_; }
    void set_channel_scale(double s) { channel_scale_ = s; invalidate(); }

    Vec3 mean(int i) const { return prim_.segment<3>(kPrimitiveParams * i); }
    Eigen::Vector4d quat(int i) const { return prim_.segment<4>(kPrimitiveParams * i + 3); }
    Vec3 log_scale(int i) const { return prim_.segment<3>(kPrimitiveParams * i + 7); }

    /// Primitive tuples with alpha and latent filled from the attribute network at p_tx.
    std::vector<GaussianPrimitive> primitives(const Vec3& p_tx) const;

    /// Cached (z, alpha, C) for p_tx; recomputed only when p_tx or parameters change.
    const FieldAttributes& attributes(const Vec3& p_tx) const;
    void invalidate() { cache_valid_ = false; }

    ChannelMatrix render(const Vec3& p_tx, const Vec3& p_rx, RenderFlops* flops = nullptr) const;

    /// Mean squared Frobenius error over the batch with exact gradients for every block.
    double loss_and_gradients(const std::vector<GrfSample>& batch, GrfGradients* grads) const;

    /// One optimiser step on all blocks. lr overrides the configured learning rate.
    GrfStepResult train_step(const std::vector<GrfSample>& batch, double lr);

    void save(const std::filesystem::path& path) const;
    static GrfModel load(const std::filesystem::path& path);

private:
    double batch_group(const std::vector<const GrfSample*>& group, double inv_batch, GrfGradients* grads) const;
    void compute_attributes(const Vec3& p_tx, FieldAttributes& out, MlpCache* attr_cache, MlpCache* dec_cache,
                            Matrix* attr_input) const;

    GrfConfig config_;
    Vector prim_;
    Mlp attr_;
    Mlp dec_;
    double channel_scale_ = 1.0;
    Adam prim_opt_, attr_opt_, dec_opt_;

    mutable FieldAttributes cache_;
    mutable bool cache_valid_ = false;
};

ChannelMatrix render_channel(const GrfModel& model, const Vec3& p_tx, const Vec3& p_rx);

/// Squared Frobenius error between render(p_tx, p_rx) and the measurement.
double grf_loss(const GrfModel& model, const Vec3& p_tx, const Vec3& p_rx, const CMatrix& h_meas);

GrfStepResult grf_train_step(GrfModel& model, const Vec3& p_tx, const Vec3& p_rx, const CMatrix& h_meas, double lr);

struct FitOptions {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double final_learning_rate = -1.0; // < 0 keeps the rate constant, else geometric decay
    std::uint64_t seed = 1;
    double time_budget_s = 0.0; // 0 = unlimited; stops after the epoch that crosses it
};

struct TelemetryRow {
    std::int64_t step;
    double loss;
    double grad_norm;
};

struct FitReport {
    std::vector<double> epoch_loss;
    std::vector<TelemetryRow> telemetry;
    int rejected_steps = 0;
    double seconds = 0.0;
};

/// Shuffled mini-batch training; deterministic for a fixed seed.
FitReport fit_scene(GrfModel& model, const std::vector<GrfSample>& train, const FitOptions& options);

std::string telemetry_csv(const std::vector<TelemetryRow>& rows);

/// Sets the init ball and channel scale from a training set (centre and radius of the
/// receiver cloud, RMS channel entry magnitude).
void fit_init_to_data(GrfConfig& config, double& channel_scale, const std::vector<GrfSample>& train,
                      double margin = 1.1);

/// Predict each query's channel as that of the training link with the closest receiver
/// (same transmitter preferred). Baseline for reconstruction quality.
CMatrix nearest_neighbor_channel(const std::vector<GrfSample>& train, const Vec3& p_tx, const Vec3& p_rx);

/// Held-out reconstruction on a synthetic scene: noisy training links and exact test links
/// drawn uniformly from a small receiver patch around `center`, one fixed transmitter.
struct ReconstructionConfig {
    ScenarioLabel preset = ScenarioLabel::Indoor;
    std::uint64_t scene_seed = 7;
    int num_scatterers = 3;
    Vec3 p_tx = Vec3(0.0, 0.0, 2.5);
    Vec3 center = Vec3(2.0, 1.0, 1.2);
    double side_m = 0.25;
    bool planar = true; // receivers share the centre height
    int train_links = 200;
    int test_links = 50;
    double train_snr_db = 30.0;
    std::uint64_t sample_seed = 11;
    double init_margin = 1.1;
    GrfConfig grf = [] {
        GrfConfig c;
        c.num_primitives = 128;
        c.encoding_levels = 5;
        c.seed = 3;
        return c;
    }();
    FitOptions fit = [] {
        FitOptions f;
        f.epochs = 400;
        f.batch_size = 16;
        f.learning_rate = 3e-3;
        f.final_learning_rate = 3e-4;
        f.seed = 4;
        f.time_budget_s = 58.0;
        return f;
    }();
};

struct ReconstructionReport {
    GrfModel model;
    FitReport fit;
    double held_out_snr_db = 0.0;
    double baseline_snr_db = 0.0; // nearest-neighbour on the same split
};

ReconstructionReport run_reconstruction(const ReconstructionConfig& config);
Json to_json(const ReconstructionConfig& c);
ReconstructionConfig reconstruction_config_from_json(const Json& j);

Json to_json(const GrfConfig& c);
GrfConfig grf_config_from_json(const Json& j);

} // namespace rtwin
