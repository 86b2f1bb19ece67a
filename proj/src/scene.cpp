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

#include "rtwin/scene.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

namespace rtwin {

namespace {

constexpr std::array<std::pair<ScenarioLabel, const char*>, 5> kLabels{{
    {ScenarioLabel::Indoor, "indoor"},
    {ScenarioLabel::UmiCompact, "UMi-compact"},
    {ScenarioLabel::UmiDense, "UMi-dense"},
    {ScenarioLabel::UmiStandard, "UMi-standard"},
    {ScenarioLabel::Uma, "UMa"},
}};

// Element offsets of a ULA centred on its phase centre.
std::vector<Vec3> array_offsets(const ArrayConfig& a, double wavelength) {
    const double d = a.spacing_m > 0.0 ? a.spacing_m : 0.5 * wavelength;
    std::vector<Vec3> out(static_cast<std::size_t>(a.elements));
    for (int k = 0; k < a.elements; ++k)
        out[static_cast<std::size_t>(k)] = Vec3((k - 0.5 * (a.elements - 1)) * d, 0.0, 0.0);
    return out;
}

// Plane-wave response exp(j k u . o) for unit direction u pointing away from the array.
CVector steering(const std::vector<Vec3>& offsets, const Vec3& u, double wavenumber) {
    CVector a(static_cast<Eigen::Index>(offsets.size()));
    for (std::size_t k = 0; k < offsets.size(); ++k)
        a(static_cast<Eigen::Index>(k)) = std::polar(1.0, wavenumber * u.dot(offsets[k]));
    return a;
}

void check_in_bounds(const Scene& scene, const Vec3& p, const char* what) {
    if (p.norm() > scene.radius() * (1.0 + 1e-9))
        throw ConfigError(std::string(what) + " lies outside the scene bounds");
}

} // namespace

std::string to_string(ScenarioLabel label) {
    for (const auto& [l, name] : kLabels)
        if (l == label) return name;
    return "unknown";
}

ScenarioLabel parse_scenario_label(const std::string& text) {
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return s;
    };
    for (const auto& [l, name] : kLabels)
        if (lower(text) == lower(name)) return l;
    throw ConfigError("unknown scenario label: " + text);
}

void SceneConfig::validate() const {
    if (!(wavelength_m > 0.0) || !std::isfinite(wavelength_m)) throw ConfigError("wavelength must be > 0");
    if (!(diameter_m > 0.0) || !std::isfinite(diameter_m)) throw ConfigError("scene diameter must be > 0");
    if (num_scatterers < 0) throw ConfigError("num_scatterers must be >= 0");
    if (tx_array.elements < 1 || rx_array.elements < 1) throw ConfigError("arrays need at least one element");
    if (tx_array.spacing_m < 0.0 || rx_array.spacing_m < 0.0) throw ConfigError("negative element spacing");
    if (!(noise_floor_w > 0.0)) throw ConfigError("noise floor must be > 0");
    if (!(scatterer_gain_variance >= 0.0)) throw ConfigError("scatterer gain variance must be >= 0");
    if (!scatterer_positions.empty() && static_cast<int>(scatterer_positions.size()) != num_scatterers)
        throw ConfigError("scatterer_positions size does not match num_scatterers");
    if (!scatterer_gains.empty() && static_cast<int>(scatterer_gains.size()) != num_scatterers)
        throw ConfigError("scatterer_gains size does not match num_scatterers");
    for (const auto& g : scatterer_gains)
        if (!std::isfinite(g.real()) || !std::isfinite(g.imag())) throw ConfigError("non-finite scatterer gain");
    for (const auto& p : scatterer_positions)
        if (!p.allFinite() || p.norm() > 0.5 * diameter_m * (1.0 + 1e-9))
            throw ConfigError("scatterer outside scene bounds");
}

SceneConfig scene_preset(ScenarioLabel label, std::uint64_t seed) {
    SceneConfig c;
    c.rng_seed = seed;
    c.tx_array = {2, 0.0};
    c.rx_array = {2, 0.0};
    switch (label) {
    case ScenarioLabel::Indoor:
        c.wavelength_m = 0.125; // 2.4 GHz
        c.diameter_m = 10.0;
        c.num_scatterers = 12;
        c.noise_floor_w = 1e-12;
        break;
    case ScenarioLabel::UmiCompact:
        c.wavelength_m = 0.0857; // 3.5 GHz
        c.diameter_m = 60.0;
        c.num_scatterers = 6;
        c.noise_floor_w = 4e-13;
        break;
    case ScenarioLabel::UmiDense:
        c.wavelength_m = 0.0857;
        c.diameter_m = 100.0;
        c.num_scatterers = 16;
        c.noise_floor_w = 4e-13;
        break;
    case ScenarioLabel::UmiStandard:
        c.wavelength_m = 0.0857;
        c.diameter_m = 150.0;
        c.num_scatterers = 8;
        c.noise_floor_w = 4e-13;
        break;
    case ScenarioLabel::Uma:
        c.wavelength_m = 0.15; // 2 GHz
        c.diameter_m = 500.0;
        c.num_scatterers = 4;
        c.noise_floor_w = 1e-13;
        break;
    }
    return c;
}

Scene generate_scene(const SceneConfig& config) {
    config.validate();
    Scene s;
    s.config = config;
    Rng rng(config.rng_seed);
    const double r = 0.5 * config.diameter_m;
    std::uniform_real_distribution<double> u(-r, r);
    if (!config.scatterer_positions.empty()) {
        s.scatterers = config.scatterer_positions;
    } else {
        for (int i = 0; i < config.num_scatterers; ++i) {
            Vec3 p;
            do {
                p = Vec3(u(rng), u(rng), u(rng));
            } while (p.norm() > r);
            s.scatterers.push_back(p);
        }
    }
    if (!config.scatterer_gains.empty()) {
        s.gains = config.scatterer_gains;
    } else {
        for (int i = 0; i < config.num_scatterers; ++i)
            s.gains.push_back(complex_normal(rng, config.scatterer_gain_variance));
    }
    return s;
}

ChannelMatrix ground_truth_channel(const Scene& scene, const LinkGeometry& link) {
    return ground_truth_channel_at(scene, link, scene.config.wavelength_m);
}

ChannelMatrix ground_truth_channel_at(const Scene& scene, const LinkGeometry& link, double wavelength) {
    check_in_bounds(scene, link.p_tx, "transmitter");
    check_in_bounds(scene, link.p_rx, "receiver");
    const double k = 2.0 * kPi / wavelength;
    // Element spacing is fixed at the design carrier so tones see the same physical array.
    const auto tx_off = array_offsets(scene.config.tx_array, scene.config.wavelength_m);
    const auto rx_off = array_offsets(scene.config.rx_array, scene.config.wavelength_m);

    ChannelMatrix out;
    out.h = CMatrix::Zero(scene.n_tx(), scene.n_rx());

    auto add_path = [&](cplx gain, double length, const Vec3& u_dep, const Vec3& u_arr) {
        const cplx coeff = gain * (wavelength / (4.0 * kPi * length)) * std::polar(1.0, -k * length);
        out.h.noalias() += coeff * steering(tx_off, u_dep, k) * steering(rx_off, u_arr, k).transpose();
    };

    const Vec3 los = link.p_rx - link.p_tx;
    const double d = los.norm();
    if (!(d > 0.0)) throw DegenerateGeometry("transmitter and receiver coincide");
    add_path(1.0, d, los / d, -los / d);

    for (std::size_t i = 0; i < scene.scatterers.size(); ++i) {
        const Vec3 a = scene.scatterers[i] - link.p_tx;
        const Vec3 b = scene.scatterers[i] - link.p_rx;
        const double da = a.norm();
        const double db = b.norm();
        if (!(da > 0.0) || !(db > 0.0)) throw DegenerateGeometry("scatterer coincides with a link endpoint");
        add_path(scene.gains[i], da + db, a / da, b / db);
    }
    return out;
}

CMatrix add_measurement_noise(const CMatrix& h, double snr_db, Rng& rng) {
    if (std::isinf(snr_db) && snr_db > 0) return h;
    const double var = h.squaredNorm() / (static_cast<double>(h.size()) * std::pow(10.0, snr_db / 10.0));
    CMatrix out = h;
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += complex_normal(rng, var);
    return out;
}

ChannelMatrix measure_channel(const Scene& scene, const LinkGeometry& link, double snr_db, Rng& rng) {
    ChannelMatrix c = ground_truth_channel(scene, link);
    c.h = add_measurement_noise(c.h, snr_db, rng);
    return c;
}

// ---- scripts ------------------------------------------------------------------------------

double ScriptSegment::snr_at(int k) const {
    if (slots <= 1) return snr_start_db;
    return snr_start_db + (snr_end_db - snr_start_db) * static_cast<double>(k) / static_cast<double>(slots - 1);
}

void ScenarioScript::validate() const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        const std::string where = "segment " + std::to_string(i) + ": ";
        if (s.slots < 1) throw ConfigError(where + "duration must be >= 1 slot");
        if (!std::isfinite(s.snr_start_db) || !std::isfinite(s.snr_end_db)) throw ConfigError(where + "non-finite SNR");
        s.scene.validate();
        const double r = 0.5 * s.scene.diameter_m;
        if (s.bs_position.norm() > r || s.ue_start.norm() > r || s.ue_at(s.slots - 1).norm() > r)
            throw ConfigError(where + "trajectory leaves the scene bounds");
    }
}

std::int64_t ScenarioScript::total_slots() const {
    std::int64_t n = 0;
    for (const auto& s : segments) n += s.slots;
    return n;
}

ScriptPlayer::ScriptPlayer(ScenarioScript script, std::vector<Vec3> ue_offsets)
    : script_(std::move(script)), offsets_(std::move(ue_offsets)) {
    script_.validate();
    if (offsets_.empty()) offsets_.push_back(Vec3::Zero());
    if (!script_.segments.empty()) scene_ = generate_scene(script_.segments.front().scene);
}

std::optional<ScriptEvent> ScriptPlayer::next() {
    if (segment_ >= static_cast<int>(script_.segments.size())) return std::nullopt;
    if (pending_handover_) {
        pending_handover_ = false;
        ScriptEvent ev;
        ev.kind = ScriptEvent::Kind::Handover;
        ev.from_segment = segment_ - 1;
        ev.to_segment = segment_;
        return ev;
    }
    const auto& seg = script_.segments[static_cast<std::size_t>(segment_)];
    ScriptEvent ev;
    ev.slot.t = t_;
    ev.slot.segment = segment_;
    ev.slot.label = seg.label;
    ev.slot.snr_db = seg.snr_at(slot_in_segment_);
    for (const auto& off : offsets_) {
        LinkGeometry link{seg.bs_position, seg.ue_at(slot_in_segment_) + off};
        ev.slot.h_gt.push_back(ground_truth_channel(scene_, link).h);
        ev.slot.links.push_back(link);
    }
    ++t_;
    if (++slot_in_segment_ >= seg.slots) {
        slot_in_segment_ = 0;
        ++segment_;
        if (segment_ < static_cast<int>(script_.segments.size())) {
            scene_ = generate_scene(script_.segments[static_cast<std::size_t>(segment_)].scene);
            pending_handover_ = true;
        }
    }
    return ev;
}

ScenarioScript shift_script(const std::vector<ScenarioLabel>& labels, int slots_per_segment, double snr_start_db,
                            double snr_end_db, std::uint64_t seed) {
    if (labels.empty()) throw ConfigError("shift_script: no segments");
    if (slots_per_segment < 1) throw ConfigError("shift_script: segments need >= 1 slot");
    ScenarioScript script;
    const auto n = static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ScriptSegment seg;
        seg.slots = slots_per_segment;
        seg.label = labels[i];
        seg.scene = scene_preset(labels[i], seed + 101 * i);
        const double r = 0.5 * seg.scene.diameter_m;
        seg.bs_position = Vec3(0.0, 0.0, std::min(10.0, 0.3 * r));
        const double heading = 0.7 + 1.9 * static_cast<double>(i);
        const double speed = seg.scene.wavelength_m * (0.08 + 0.05 * static_cast<double>(i % 3));
        seg.ue_start = Vec3(0.35 * r, 0.1 * r, 1.5);
        seg.ue_velocity = speed * Vec3(std::cos(heading), std::sin(heading), 0.0);
        seg.snr_start_db = snr_start_db + (snr_end_db - snr_start_db) * static_cast<double>(i) / n;
        seg.snr_end_db = snr_start_db + (snr_end_db - snr_start_db) * static_cast<double>(i + 1) / n;
        script.segments.push_back(std::move(seg));
    }
    script.validate();
    return script;
}

std::vector<ScriptEvent> play_script(const ScenarioScript& script, std::vector<Vec3> ue_offsets) {
    ScriptPlayer player(script, std::move(ue_offsets));
    std::vector<ScriptEvent> out;
    while (auto ev = player.next()) out.push_back(std::move(*ev));
    return out;
}

// ---- JSON ---------------------------------------------------------------------------------

Vec3 vec3_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

namespace {
ArrayConfig array_from_json(const Json& j) {
    ArrayConfig a;
    a.elements = j.value("elements", 1);
    a.spacing_m = j.value("spacing_m", 0.0);
    return a;
}
} // namespace

SceneConfig scene_config_from_json(const Json& j) {
    try {
        SceneConfig c;
        if (j.contains("preset"))
            c = scene_preset(parse_scenario_label(j.at("preset").get<std::string>()), j.value("seed", std::uint64_t{1}));
        c.wavelength_m = j.value("wavelength_m", c.wavelength_m);
        c.diameter_m = j.value("diameter_m", c.diameter_m);
        c.num_scatterers = j.value("num_scatterers", c.num_scatterers);
        c.scatterer_gain_variance = j.value("scatterer_gain_variance", c.scatterer_gain_variance);
        c.noise_floor_w = j.value("noise_floor_w", c.noise_floor_w);
        c.rng_seed = j.value("seed", c.rng_seed);
        if (j.contains("tx_array")) c.tx_array = array_from_json(j.at("tx_array"));
        if (j.contains("rx_array")) c.rx_array = array_from_json(j.at("rx_array"));
        if (j.contains("scatterer_positions"))
            for (const auto& p : j.at("scatterer_positions")) c.scatterer_positions.push_back(vec3_from_json(p));
        if (j.contains("scatterer_gains"))
            for (const auto& g : j.at("scatterer_gains")) c.scatterer_gains.emplace_back(g.at(0).get<double>(), g.at(1).get<double>());
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("scene config: ") + e.what());
    }
}

Json to_json(const SceneConfig& c) {
    Json j;
    j["wavelength_m"] = c.wavelength_m;
    j["diameter_m"] = c.diameter_m;
    j["num_scatterers"] = c.num_scatterers;
    j["scatterer_gain_variance"] = c.scatterer_gain_variance;
    j["noise_floor_w"] = c.noise_floor_w;
    j["seed"] = c.rng_seed;
    j["tx_array"] = {{"elements", c.tx_array.elements}, {"spacing_m", c.tx_array.spacing_m}};
    j["rx_array"] = {{"elements", c.rx_array.elements}, {"spacing_m", c.rx_array.spacing_m}};
    if (!c.scatterer_positions.empty()) {
        j["scatterer_positions"] = Json::array();
        for (const auto& p : c.scatterer_positions) j["scatterer_positions"].push_back(to_json(p));
    }
    if (!c.scatterer_gains.empty()) {
        j["scatterer_gains"] = Json::array();
        for (const auto& g : c.scatterer_gains) j["scatterer_gains"].push_back({g.real(), g.imag()});
    }
    return j;
}

Json to_json(const Scene& scene) {
    SceneConfig resolved = scene.config;
    resolved.scatterer_positions = scene.scatterers;
    resolved.scatterer_gains = scene.gains;
    return to_json(resolved);
}

ScenarioScript script_from_json(const Json& j) {
    try {
        if (j.contains("shift")) {
            const auto& sh = j.at("shift");
            std::vector<ScenarioLabel> labels;
            for (const auto& l : sh.at("labels")) labels.push_back(parse_scenario_label(l.get<std::string>()));
            return shift_script(labels, sh.at("slots_per_segment").get<int>(), sh.value("snr_start_db", 10.0),
                                sh.value("snr_end_db", 25.0), sh.value("seed", std::uint64_t{1}));
        }
        ScenarioScript s;
        for (const auto& js : j.at("segments")) {
            ScriptSegment seg;
            seg.slots = js.at("slots").get<int>();
            seg.label = parse_scenario_label(js.at("label").get<std::string>());
            if (js.contains("scene")) {
                seg.scene = scene_config_from_json(js.at("scene"));
            } else {
                seg.scene = scene_preset(seg.label, js.value("seed", std::uint64_t{1}));
            }
            const auto& snr = js.at("snr_db");
            if (snr.is_number()) {
                seg.snr_start_db = seg.snr_end_db = snr.get<double>();
            } else {
                seg.snr_start_db = snr.at("start").get<double>();
                seg.snr_end_db = snr.at("end").get<double>();
            }
            seg.bs_position = vec3_from_json(js.at("bs_position"));
            seg.ue_start = vec3_from_json(js.at("ue_start"));
            seg.ue_velocity = vec3_from_json(js.value("ue_velocity", Json::array({0.0, 0.0, 0.0})));
            s.segments.push_back(std::move(seg));
        }
        s.validate();
        return s;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("scenario script: ") + e.what());
    }
}

Json to_json(const ScenarioScript& script) {
    Json j;
    j["segments"] = Json::array();
    for (const auto& s : script.segments) {
        j["segments"].push_back({{"slots", s.slots},
                                 {"label", to_string(s.label)},
                                 {"scene", to_json(s.scene)},
                                 {"snr_db", {{"start", s.snr_start_db}, {"end", s.snr_end_db}}},
                                 {"bs_position", to_json(s.bs_position)},
                                 {"ue_start", to_json(s.ue_start)},
                                 {"ue_velocity", to_json(s.ue_velocity)}});
    }
    return j;
}

} // namespace rtwin
