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

// Feed-forward channel forecaster: flattened window of T estimates -> next channel.
// Each window is divided by its RMS entry magnitude before the network and the output is
// scaled back, so one model serves scenes with very different path loss.

#include "rtwin/nn.hpp"
#include "rtwin/replay.hpp"

#include <filesystem>

namespace rtwin {

struct PredictorConfig {
    int window = 8;
    int horizon = 1;
    int n_tx = 2;
    int n_rx = 2;
    int hidden_units = 128;
    int hidden_layers = 2;
    double mix_lambda = 0.5;
    double learning_rate = 1e-3;
    bool persistence = false;       // identity baseline: forecast = newest frame
    bool zero_init_output = false;  // zero last layer, so every forecast starts at 0
    std::uint64_t seed = 1;

    void validate() const;
};

struct MixedLoss {
    double total = 0.0;
    double current = 0.0; // mean NMSE over current-tagged items (0 if none)
    double replay = 0.0;  // mean NMSE over replay-tagged items (0 if none)
    bool current_empty = false;
    bool replay_empty = false;
    std::vector<double> per_item; // NMSE per batch item, same order as the batch
};

struct UpdateResult {
    MixedLoss loss;
    double grad_norm = 0.0;
    bool accepted = true; // false if the gradient was non-finite and the step was skipped
};

class PredictorModel {
public:
    PredictorModel() = default;
    explicit PredictorModel(const PredictorConfig& config);

    const PredictorConfig& config() const { return config_; }
    bool persistence() const { return config_.persistence; }
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }
    Adam& optimizer() { return opt_; }

    CMatrix forecast(const PredictionWindow& window) const;

    /// Mixed NMSE of the batch and, if grad is non-null, its exact gradient w.r.t. the
    /// network parameters (grad is overwritten).
    MixedLoss loss_and_gradient(const MixedBatch& batch, Vector* grad) const;

    UpdateResult update(const MixedBatch& batch, double lr);

    void save(const std::filesystem::path& path) const;
    static PredictorModel load(const std::filesystem::path& path);

private:
    void check_window(const PredictionWindow& w) const;

    PredictorConfig config_;
    Mlp net_;
    Adam opt_;
};

CMatrix forecast(const PredictorModel& model, const PredictionWindow& window);
MixedLoss mixed_loss(const PredictorModel& model, const MixedBatch& batch);
UpdateResult predictor_update(PredictorModel& model, const MixedBatch& batch, double lr);

/// Full-batch-shuffled supervised training on (window, target) pairs with lambda ignored
/// (all items treated as current). Used to pretrain the shared starting model.
std::vector<double> pretrain_predictor(PredictorModel& model, const std::vector<ReplayEntry>& data, int epochs,
                                       std::size_t batch_size, double lr, std::uint64_t seed);

Json to_json(const PredictorConfig& c);
PredictorConfig predictor_config_from_json(const Json& j);

} // namespace rtwin
