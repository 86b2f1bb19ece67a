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

// Closed loop per slot: measure -> GRF refresh/render -> continual forecast -> precoder on
// the forecast channel. Records are deterministic for a fixed config; wall-clock timings go
// to a separate file.

#include "rtwin/continual.hpp"
#include "rtwin/grf.hpp"
#include "rtwin/precoder.hpp"
#include "rtwin/scene.hpp"

#include <filesystem>

namespace rtwin {

struct PipelineConfig {
    ScenarioScript script;
    std::vector<Vec3> ue_offsets{Vec3::Zero()};
    GrfConfig grf;
    bool grf_enabled = true;
    int grf_refresh = 4;        // GRF update when t mod refresh == 0 (after warmup)
    int grf_warmup_slots = 16;  // GRF updated every slot for the first slots of each cell
    std::size_t grf_history = 64;
    std::size_t grf_batch = 16;
    double grf_learning_rate = 3e-3;
    bool predict_from_grf = false; // windows hold GRF renders instead of measurements
    ContinualConfig continual;
    double b_min = 1.0;         // per user, bits/s/Hz
    double weight = 1.0;        // per user
    bool oracle_csi = false;
    SolverConfig solver;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SlotRecord {
    std::int64_t t = 0;
    ScenarioLabel label = ScenarioLabel::Indoor;
    double snr_db = 0.0;
    double estimation_snr_db = std::numeric_limits<double>::quiet_NaN(); // GRF render vs truth
    double prediction_nmse_db = std::numeric_limits<double>::quiet_NaN();
    double objective_w = std::numeric_limits<double>::quiet_NaN();
    double energy_efficiency = std::numeric_limits<double>::quiet_NaN();
    std::size_t buffer_fill = 0;
    std::string status = "ok";
};

struct SlotTiming {
    std::int64_t t = 0;
    double grf_us = 0.0;
    double predict_us = 0.0;
    double precode_us = 0.0;
    double total_us = 0.0;
};

struct PipelineResult {
    std::vector<SlotRecord> records;
    std::vector<SlotTiming> timings;
    std::vector<MetricsRow> metrics;
    GrfModel grf;
    ReplayBuffer buffer{1, ReplayMode::Uniform};
};

PipelineResult run_pipeline(const PipelineConfig& config, PredictorModel predictor);

/// Runs and writes config.json, records.csv, timings.csv, metrics.csv, grf.ckpt, buffer.ckpt.
PipelineResult run_pipeline_to(const PipelineConfig& config, const std::filesystem::path& out_dir);

std::string records_csv(const std::vector<SlotRecord>& records);
std::string timings_csv(const std::vector<SlotTiming>& timings);

Json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const Json& j);

} // namespace rtwin
