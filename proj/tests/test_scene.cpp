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


#include "doctest.h"

#include "rtwin/scene.hpp"

#include <algorithm>
#include <cmath>

using namespace rtwin;

namespace {

SceneConfig siso(double wavelength, double diameter) {
    SceneConfig c;
    c.wavelength_m = wavelength;
    c.diameter_m = diameter;
    c.tx_array = {1, 0.0};
    c.rx_array = {1, 0.0};
    return c;
}

} // namespace

TEST_CASE("scene without scatterers keeps only the direct path") {
    SceneConfig c = siso(0.125, 10.0);
    const Scene s = generate_scene(c);
    CHECK(s.scatterers.empty());
    CHECK(s.gains.empty());
}

TEST_CASE("scene generation is seeded") {
    const SceneConfig c = scene_preset(ScenarioLabel::Indoor, 42);
    const Scene a = generate_scene(c), b = generate_scene(c);
    REQUIRE(a.scatterers.size() == b.scatterers.size());
    for (std::size_t i = 0; i < a.scatterers.size(); ++i) {
        CHECK(a.scatterers[i] == b.scatterers[i]);
        CHECK(a.gains[i] == b.gains[i]);
    }
}

TEST_CASE("scatterers stay inside the scene ball") {
    SceneConfig c = siso(0.1, 50.0);
    c.num_scatterers = 50;
    const Scene s = generate_scene(c);
    REQUIRE(s.scatterers.size() == 50);
    for (const auto& p : s.scatterers) CHECK(p.norm() <= 25.0);
}

TEST_CASE("invalid scene configs are rejected") {
    SceneConfig c = siso(0.1, 10.0);
    c.wavelength_m = 0.0;
    CHECK_THROWS_AS(generate_scene(c), ConfigError);
    c = siso(0.1, 10.0);
    c.tx_array.elements = 0;
    CHECK_THROWS_AS(generate_scene(c), ConfigError);
}

TEST_CASE("direct path matches the free-space term") {
    const Scene s = generate_scene(siso(0.05, 10.0));
    const ChannelMatrix h = ground_truth_channel(s, {Vec3(0, 0, 0), Vec3(1, 0, 0)});
    REQUIRE(h.rows() == 1);
    REQUIRE(h.cols() == 1);
    // |H| = lambda / (4 pi d); the phase -2 pi d / lambda is a whole number of turns.
    CHECK(std::abs(h.h(0, 0)) == doctest::Approx(0.05 / (4.0 * kPi)).epsilon(1e-12));
    CHECK(std::abs(std::arg(h.h(0, 0))) < 1e-9);
}

TEST_CASE("direct path amplitude falls as one over distance") {
    const Scene s = generate_scene(siso(0.07, 20.0));
    const double a = std::abs(ground_truth_channel(s, {Vec3(0, 0, 0), Vec3(1.3, 0.4, 0)}).h(0, 0));
    const double b = std::abs(ground_truth_channel(s, {Vec3(0, 0, 0), Vec3(2.6, 0.8, 0)}).h(0, 0));
    CHECK(b == doctest::Approx(a / 2.0).epsilon(1e-12));
}

TEST_CASE("mirrored scatterer geometry gives the same magnitude") {
    SceneConfig c = siso(0.1, 20.0);
    c.num_scatterers = 1;
    c.scatterer_positions = {Vec3(0.3, 2.0, 0.0)};
    c.scatterer_gains = {cplx(0.7, -0.2)};
    const LinkGeometry link{Vec3(-1, 0, 0), Vec3(1, 0, 0)};
    const double a = std::abs(ground_truth_channel(generate_scene(c), link).h(0, 0));
    c.scatterer_positions = {Vec3(0.3, -2.0, 0.0)};
    const double b = std::abs(ground_truth_channel(generate_scene(c), link).h(0, 0));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("channel is linear in the scatterer gains") {
    SceneConfig c = scene_preset(ScenarioLabel::Indoor, 3);
    const Scene base = generate_scene(c);
    const LinkGeometry link{Vec3(0, 0, 2), Vec3(2, 1, 1)};
    const CMatrix h0 = ground_truth_channel(base, link).h;

    // Zero gains isolate the direct path; scaling the gains scales the scattered part.
    Scene zero = base, scaled = base;
    for (auto& g : zero.gains) g = 0.0;
    const cplx k(1.5, -0.5);
    for (auto& g : scaled.gains) g *= k;
    const CMatrix los = ground_truth_channel(zero, link).h;
    const CMatrix hs = ground_truth_channel(scaled, link).h;
    CHECK((hs - los - k * (h0 - los)).norm() < 1e-12 * h0.norm());
}

TEST_CASE("direct-only channel is reciprocal under endpoint swap") {
    SceneConfig c;
    c.wavelength_m = 0.1;
    c.diameter_m = 20.0;
    c.tx_array = {3, 0.0};
    c.rx_array = {3, 0.0};
    const Scene s = generate_scene(c);
    const Vec3 a(0.5, -1.0, 2.0), b(3.0, 2.0, 1.0);
    const CMatrix hab = ground_truth_channel(s, {a, b}).h;
    const CMatrix hba = ground_truth_channel(s, {b, a}).h;
    CHECK((hab - hba.transpose()).norm() < 1e-12 * hab.norm());
}

TEST_CASE("coincident endpoints are degenerate") {
    const Scene s = generate_scene(siso(0.1, 10.0));
    CHECK_THROWS_AS(ground_truth_channel(s, {Vec3(1, 1, 1), Vec3(1, 1, 1)}), DegenerateGeometry);
}

TEST_CASE("channels are finite with the declared shape") {
    for (auto label : {ScenarioLabel::Indoor, ScenarioLabel::UmiCompact, ScenarioLabel::UmiDense, ScenarioLabel::UmiStandard,
                       ScenarioLabel::Uma}) {
        const Scene s = generate_scene(scene_preset(label, 5));
        const double r = s.radius();
        const ChannelMatrix h = ground_truth_channel(s, {Vec3(0, 0, 0.2 * r), Vec3(0.3 * r, 0.1 * r, 1.5)});
        CHECK(h.finite());
        CHECK(h.rows() == s.n_tx());
        CHECK(h.cols() == s.n_rx());
    }
}

TEST_CASE("infinite SNR returns the exact channel") {
    const Scene s = generate_scene(scene_preset(ScenarioLabel::Indoor, 2));
    Rng rng(1);
    const LinkGeometry link{Vec3(0, 0, 2), Vec3(2, 1, 1)};
    CHECK(measure_channel(s, link, kInfDb, rng).h == ground_truth_channel(s, link).h);
}

TEST_CASE("noise energy at 0 dB equals the channel energy on average") {
    const Scene s = generate_scene(scene_preset(ScenarioLabel::Indoor, 2));
    const LinkGeometry link{Vec3(0, 0, 2), Vec3(2, 1, 1)};
    const CMatrix h = ground_truth_channel(s, link).h;
    Rng rng(9);
    double acc = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) acc += (add_measurement_noise(h, 0.0, rng) - h).squaredNorm();
    CHECK(acc / draws == doctest::Approx(h.squaredNorm()).epsilon(0.02));
}

TEST_CASE("measurement noise is reproducible for a fixed seed") {
    const Scene s = generate_scene(scene_preset(ScenarioLabel::Indoor, 2));
    const LinkGeometry link{Vec3(0, 0, 2), Vec3(2, 1, 1)};
    Rng a(5), b(5);
    CHECK(measure_channel(s, link, 10.0, a).h == measure_channel(s, link, 10.0, b).h);
}

TEST_CASE("script playback counts slots and handovers") {
    auto seg = [](int slots) {
        ScriptSegment s;
        s.slots = slots;
        s.scene = scene_preset(ScenarioLabel::Indoor, 1);
        s.bs_position = Vec3(0, 0, 2);
        s.ue_start = Vec3(2, 1, 1.5);
        s.ue_velocity = Vec3(0.01, 0, 0);
        return s;
    };
    auto count = [](const std::vector<ScriptEvent>& ev, ScriptEvent::Kind k) {
        return std::count_if(ev.begin(), ev.end(), [k](const ScriptEvent& e) { return e.kind == k; });
    };

    ScenarioScript one;
    one.segments = {seg(5)};
    const auto a = play_script(one);
    CHECK(count(a, ScriptEvent::Kind::Slot) == 5);
    CHECK(count(a, ScriptEvent::Kind::Handover) == 0);

    ScenarioScript two;
    two.segments = {seg(3), seg(4)};
    const auto b = play_script(two);
    CHECK(count(b, ScriptEvent::Kind::Slot) == 7);
    REQUIRE(count(b, ScriptEvent::Kind::Handover) == 1);
    CHECK(b[3].kind == ScriptEvent::Kind::Handover);

    CHECK(play_script(ScenarioScript{}).empty());
}

TEST_CASE("shift script ramps SNR across segments") {
    const auto script = shift_script({ScenarioLabel::UmiCompact, ScenarioLabel::UmiDense, ScenarioLabel::UmiStandard}, 10,
                                     10.0, 25.0, 1);
    REQUIRE(script.segments.size() == 3);
    CHECK(script.total_slots() == 30);
    CHECK(script.segments[0].snr_start_db == doctest::Approx(10.0));
    CHECK(script.segments[2].snr_end_db == doctest::Approx(25.0));
    CHECK(script.segments[1].snr_start_db == doctest::Approx(script.segments[0].snr_end_db));
    double last = -1e9;
    for (const auto& ev : play_script(script)) {
        if (ev.kind != ScriptEvent::Kind::Slot) continue;
        CHECK(ev.slot.snr_db >= last - 1e-12);
        last = ev.slot.snr_db;
        CHECK(ev.slot.h_gt.front().allFinite());
    }
}

TEST_CASE("scripts round-trip through JSON") {
    const auto script = shift_script({ScenarioLabel::Indoor, ScenarioLabel::Uma}, 4, 5.0, 15.0, 3);
    const ScenarioScript back = script_from_json(to_json(script));
    REQUIRE(back.segments.size() == 2);
    CHECK(back.segments[1].label == ScenarioLabel::Uma);
    CHECK(back.segments[1].ue_velocity.isApprox(script.segments[1].ue_velocity));
    CHECK(parse_scenario_label("umi-dense") == ScenarioLabel::UmiDense);
    CHECK_THROWS_AS(parse_scenario_label("nowhere"), ConfigError);
}
