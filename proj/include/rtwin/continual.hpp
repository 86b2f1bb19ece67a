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

// Online forecasting loop over a scripted slot stream: window -> forecast -> score when the
// target arrives -> reservoir insert -> one mixed replay update per slot.

#include "rtwin/predictor.hpp"
#include "rtwin/replay.hpp"
#include "rtwin/scene.hpp"

#include <deque>
#include <functional>
#include <map>

namespace rtwin {

class GrfModel;

enum class ContinualMode { Frozen, Uniform, Lars };
std::string to_string(ContinualMode mode);
ContinualMode parse_continual_mode(const std::string& text);

struct ContinualConfig {
    PredictorConfig predictor;
    std::size_t buffer_capacity = 256;
    double eps = 1e-3;
    std::size_t batch_current = 16;
    std::size_t batch_replay = 16;
    std::size_t current_capacity = 64; // sliding set of recent samples in the current cell
    int warmup_slots = -1;             // < 0 means buffer_capacity slots
    ContinualMode mode = ContinualMode::Uniform;
    std::uint64_t seed = 1;

    void validate() const;
};

struct MetricsRow {
    std::int64_t t = 0;
    int ue = 0;
    int segment = 0;
    ScenarioLabel label = ScenarioLabel::Indoor;
    double snr_db = 0.0;
    double nmse = 0.0; // forecast vs ground truth
    std::string mode;
    std::size_t buffer_fill = 0;
};

/// Estimates fed into the windows. The default measures h_gt at the slot SNR.
using Estimator = std::function<CMatrix(const SlotSample& slot, int ue, Rng& rng)>;
Estimator measured_estimator();
Estimator grf_estimator(const GrfModel& model);

/// Stateful loop body so the pipeline can interleave it with other per-slot work.
class ContinualLearner {
public:
    ContinualLearner(const ContinualConfig& config, PredictorModel model);
    ContinualLearner(const ContinualConfig& config, PredictorModel model, ReplayBuffer buffer);

    /// Feeds UE `ue`'s estimate for slot t; returns the forecast for t + horizon once the
    /// window is full. Scores any forecast that targeted t against `truth`.
    std::optional<CMatrix> observe(const SlotSample& slot, int ue, const CMatrix& estimate);

    /// One replay update if past warmup and not frozen. Call once per slot.
    void end_slot();

    /// Cell change: recent data and windows are dropped, the replay buffer is kept as is.
    void handover();

    const ReplayBuffer& buffer() const { return buffer_; }
    const PredictorModel& model() const { return model_; }
    const std::vector<MetricsRow>& rows() const { return rows_; }
    int updates() const { return updates_; }
    int rejected_updates() const { return rejected_; }

private:
    struct Pending {
        PredictionWindow window;
        CMatrix forecast;
    };

    ContinualConfig config_;
    PredictorModel model_;
    ReplayBuffer buffer_;
    Rng rng_;
    std::vector<ReplayEntry> current_;
    std::size_t current_next_ = 0; // ring position once current_ is full
    std::map<int, std::deque<CMatrix>> history_;
    std::map<std::pair<int, std::int64_t>, Pending> pending_;
    std::int64_t slots_ = 0;
    int updates_ = 0;
    int rejected_ = 0;
    std::vector<MetricsRow> rows_;
};

struct ContinualReport {
    std::vector<MetricsRow> rows;
    int updates = 0;
    int rejected_updates = 0;
    ReplayBuffer buffer{1, ReplayMode::Uniform};
    PredictorModel model;
};

/// Runs the loop over a played script (UE 0 of each slot unless the stream has more).
ContinualReport run_continual(const std::vector<ScriptEvent>& stream, const ContinualConfig& config,
                              PredictorModel model, const Estimator& estimator = measured_estimator(),
                              std::optional<ReplayBuffer> buffer = std::nullopt);

/// (window, target) pairs from a stream using ground-truth-free estimates, for pretraining.
std::vector<ReplayEntry> collect_windows(const std::vector<ScriptEvent>& stream, int window, int horizon,
                                         const Estimator& estimator, std::uint64_t seed);

/// Scripted domain shift: a predictor pretrained on a displaced copy of the first segment
/// runs over the whole script once per mode, all from the same starting weights.
struct ShiftExperimentConfig {
    std::vector<ScenarioLabel> labels{ScenarioLabel::UmiCompact, ScenarioLabel::UmiDense, ScenarioLabel::UmiStandard};
    int slots_per_segment = 400;
    double snr_start_db = 10.0;
    double snr_end_db = 25.0;
    int pretrain_epochs = 20;
    std::size_t pretrain_batch = 16;
    double pretrain_lr = 1e-3;
    Vec3 pretrain_offset = Vec3(3.0, 2.0, 0.0);
    // Mode is overridden per run. Updates start at once since the model is pretrained.
    ContinualConfig continual = [] {
        ContinualConfig c;
        c.warmup_slots = 0;
        return c;
    }();
    std::vector<ContinualMode> modes{ContinualMode::Frozen, ContinualMode::Uniform, ContinualMode::Lars};
    std::uint64_t seed = 1;
};

struct ShiftModeResult {
    ContinualMode mode = ContinualMode::Uniform;
    std::vector<MetricsRow> rows;
    double final_median_db = 0.0; // median NMSE (dB) over the last segment
    double hard_median_db = 0.0;  // median NMSE (dB) over the hardest-decile slots
};

struct ShiftExperimentResult {
    ScenarioScript script;
    std::vector<MetricsRow> persistence; // newest-frame baseline, defines the hard slots
    std::vector<bool> hard;              // per row: persistence NMSE in the top decile
    std::vector<ShiftModeResult> runs;
    const ShiftModeResult& run(ContinualMode mode) const;
};

ShiftExperimentResult run_shift_experiment(const ShiftExperimentConfig& config);
Json to_json(const ShiftExperimentConfig& c);
ShiftExperimentConfig shift_experiment_config_from_json(const Json& j);

std::string metrics_csv(const std::vector<MetricsRow>& rows);

Json to_json(const ContinualConfig& c);
ContinualConfig continual_config_from_json(const Json& j);

} // namespace rtwin
