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

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace rtwin {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Seeded generator used everywhere; all randomness flows through explicit instances.
using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInfDb = std::numeric_limits<double>::infinity();

// Error taxonomy. Each maps onto a CLI exit code in tools/rtwin_cli.cpp.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DegenerateGeometry : std::domain_error {
    using std::domain_error::domain_error;
};
struct ShapeMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleProblem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Channel matrix with slot/user/tone tags. Rows index TX antennas, columns RX antennas
/// in the estimation context; rows are BS antennas (L_y) in the precoder context.
struct ChannelMatrix {
    CMatrix h;
    std::int64_t t = 0;
    int user = -1;
    int tone = -1;

    Eigen::Index rows() const { return h.rows(); }
    Eigen::Index cols() const { return h.cols(); }
    bool finite() const { return h.allFinite(); }
};

inline double frob2(const CMatrix& m) { return m.squaredNorm(); }

/// 10*log10(|gt|^2 / |pred - gt|^2); +inf when the prediction is exact.
double channel_snr_db(const CMatrix& truth, const CMatrix& pred);

/// Normalized MSE |truth - pred|^2 / |truth|^2.
double nmse(const CMatrix& truth, const CMatrix& pred);
inline double to_db(double x) { return 10.0 * std::log10(x); }

inline cplx complex_normal(Rng& rng, double variance) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

} // namespace rtwin
