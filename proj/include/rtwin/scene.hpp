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

// Synthetic ground-truth radio scenes: LOS plus single-bounce point scatterers seen through
// uniform linear arrays, pilot measurements with controlled SNR, and scripted scenario playback.

#include "rtwin/binary_io.hpp"
#include "rtwin/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rtwin {

enum class ScenarioLabel { Indoor, UmiCompact, UmiDense, UmiStandard, Uma };

std::string to_string(ScenarioLabel label);
ScenarioLabel parse_scenario_label(const std::string& text);

/// Uniform linear array along the x axis. spacing_m == 0 means half a wavelength.
struct ArrayConfig {
    int elements = 1;
    double spacing_m = 0.0;
};

struct SceneConfig {
    double wavelength_m = 0.125;
    double diameter_m = 10.0;
    int num_scatterers = 0;
    // When non-empty these override the seeded draw and must have num_scatterers entries.
    std::vector<Vec3> scatterer_positions;
    std::vector<cplx> scatterer_gains;
    double scatterer_gain_variance = 1.0;
    ArrayConfig tx_array;
    ArrayConfig rx_array;
    double noise_floor_w = 1e-12;
    std::uint64_t rng_seed = 1;

    /// Throws ConfigError when an invariant is broken.
    void validate() const;
};

/// Preset geometry per scenario family; numbers are labelled approximations, not calibrated
/// 3GPP parameters.
SceneConfig scene_preset(ScenarioLabel label, std::uint64_t seed);

struct Scene {
    SceneConfig config;
    std::vector<Vec3> scatterers;
    std::vector<cplx> gains;

    double radius() const { return 0.5 * config.diameter_m; }
    int n_tx() const { return config.tx_array.elements; }
    int n_rx() const { return config.rx_array.elements; }
};

struct LinkGeometry {
    Vec3 p_tx = Vec3::Zero();
    Vec3 p_rx = Vec3::UnitX();
};

Scene generate_scene(const SceneConfig& config);

/// Sum over LOS and single-bounce paths of gain * lambda/(4 pi d) * exp(-j 2 pi d / lambda)
/// * a_tx(departure) a_rx(arrival)^T. Result is N_t x N_r.
ChannelMatrix ground_truth_channel(const Scene& scene, const LinkGeometry& link);

/// Same path model evaluated at another carrier wavelength (used for OFDM tones).
ChannelMatrix ground_truth_channel_at(const Scene& scene, const LinkGeometry& link, double wavelength_m);

/// H_gt plus circular Gaussian noise scaled so that |H_gt|^2 / E|noise|^2 = 10^(snr_db/10).
/// snr_db = +inf returns the exact channel.
ChannelMatrix measure_channel(const Scene& scene, const LinkGeometry& link, double snr_db, Rng& rng);
CMatrix add_measurement_noise(const CMatrix& h, double snr_db, Rng& rng);

// ---- scenario scripts ---------------------------------------------------------------------

struct ScriptSegment {
    int slots = 1;
    ScenarioLabel label = ScenarioLabel::Indoor;
    SceneConfig scene;
    double snr_start_db = 20.0;
    double snr_end_db = 20.0;
    Vec3 bs_position = Vec3::Zero();
    Vec3 ue_start = Vec3::UnitX();
    Vec3 ue_velocity = Vec3::Zero(); // metres per slot

    double snr_at(int k) const;
    Vec3 ue_at(int k) const { return ue_start + static_cast<double>(k) * ue_velocity; }
};

struct ScenarioScript {
    std::vector<ScriptSegment> segments;

    void validate() const;
    std::int64_t total_slots() const;
};

struct SlotSample {
    std::int64_t t = 0;
    int segment = 0;
    ScenarioLabel label = ScenarioLabel::Indoor;
    double snr_db = 0.0;
    std::vector<LinkGeometry> links; // one per UE
    std::vector<CMatrix> h_gt;       // one per UE
};

struct ScriptEvent {
    enum class Kind { Slot, Handover };
    Kind kind = Kind::Slot;
    SlotSample slot;       // valid when kind == Slot
    int from_segment = -1; // valid when kind == Handover
    int to_segment = -1;
};

/// Sequential single-consumer playback. ue_offsets adds extra UEs that follow the scripted
/// trajectory displaced by a fixed offset.
class ScriptPlayer {
public:
    explicit ScriptPlayer(ScenarioScript script, std::vector<Vec3> ue_offsets = {Vec3::Zero()});

    std::optional<ScriptEvent> next();
    const Scene& current_scene() const { return scene_; }
    const ScenarioScript& script() const { return script_; }

private:
    ScenarioScript script_;
    std::vector<Vec3> offsets_;
    Scene scene_;
    int segment_ = 0;
    int slot_in_segment_ = 0;
    std::int64_t t_ = 0;
    bool pending_handover_ = false;
};

/// One segment per label, each with its own preset scene, a straight UE trajectory whose
/// speed and heading change per segment, and an SNR ramp from snr_start_db to snr_end_db
/// across the whole script.
ScenarioScript shift_script(const std::vector<ScenarioLabel>& labels, int slots_per_segment, double snr_start_db,
                            double snr_end_db, std::uint64_t seed);

std::vector<ScriptEvent> play_script(const ScenarioScript& script, std::vector<Vec3> ue_offsets = {Vec3::Zero()});

// ---- JSON ---------------------------------------------------------------------------------

SceneConfig scene_config_from_json(const Json& j);
Json to_json(const SceneConfig& config);
Json to_json(const Scene& scene);
ScenarioScript script_from_json(const Json& j);
Json to_json(const ScenarioScript& script);
Vec3 vec3_from_json(const Json& j);
Json to_json(const Vec3& v);

} // namespace rtwin
