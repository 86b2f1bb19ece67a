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

#include "rtwin/continual.hpp"
#include "rtwin/predictor.hpp"

#include <cmath>

using namespace rtwin;

namespace {

PredictorConfig small_config() {
    PredictorConfig c;
    c.window = 2;
    c.n_tx = 2;
    c.n_rx = 2;
    c.hidden_units = 6;
    c.hidden_layers = 2;
    c.seed = 3;
    return c;
}

CMatrix random_channel(Rng& rng, int nt = 2, int nr = 2) {
    CMatrix h(nt, nr);
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = complex_normal(rng, 1.0);
    return h;
}

BatchItem item(Rng& rng, BatchSource src, int window = 2) {
    BatchItem it;
    for (int k = 0; k < window; ++k) it.window.frames.push_back(random_channel(rng));
    it.target = random_channel(rng);
    it.source = src;
    if (src == BatchSource::Replay) it.buffer_index = 0;
    return it;
}

MixedBatch batch(Rng& rng, int n_cur, int n_rep) {
    MixedBatch b;
    for (int i = 0; i < n_cur; ++i) b.items.push_back(item(rng, BatchSource::Current));
    for (int i = 0; i < n_rep; ++i) b.items.push_back(item(rng, BatchSource::Replay));
    b.requested_current = static_cast<std::size_t>(n_cur);
    b.requested_replay = static_cast<std::size_t>(n_rep);
    return b;
}

} // namespace

TEST_CASE("nmse conventions") {
    Rng rng(1);
    const CMatrix h = random_channel(rng);
    CHECK(nmse(h, h) == 0.0);
    CHECK(nmse(h, CMatrix::Zero(2, 2)) == doctest::Approx(1.0));
    CHECK(nmse(h, 2.0 * h) == doctest::Approx(1.0));
    CHECK_THROWS(nmse(CMatrix::Zero(2, 2), h));
}

TEST_CASE("forecast basics") {
    Rng rng(2);
    PredictionWindow w;
    w.frames = {random_channel(rng), random_channel(rng)};

    PredictorConfig zc = small_config();
    zc.zero_init_output = true;
    CHECK(PredictorModel(zc).forecast(w).norm() == 0.0);

    const PredictorModel m(small_config());
    CHECK(m.forecast(w) == m.forecast(w));

    PredictorConfig pc = small_config();
    pc.persistence = true;
    CHECK(PredictorModel(pc).forecast(w) == w.frames.back());

    PredictionWindow bad;
    bad.frames = {random_channel(rng, 3, 2), random_channel(rng, 3, 2)};
    CHECK_THROWS_AS(m.forecast(bad), ShapeMismatch);
    PredictionWindow short_w;
    short_w.frames = {random_channel(rng)};
    CHECK_THROWS(m.forecast(short_w));
}

TEST_CASE("mixed loss endpoints and convexity") {
    Rng rng(3);
    const MixedBatch b = batch(rng, 3, 3);
    PredictorConfig c = small_config();

    c.mix_lambda = 1.0;
    const MixedLoss l1 = mixed_loss(PredictorModel(c), b);
    CHECK(l1.total == doctest::Approx(l1.current));
    c.mix_lambda = 0.0;
    const MixedLoss l0 = mixed_loss(PredictorModel(c), b);
    CHECK(l0.total == doctest::Approx(l0.replay));

    for (double lam : {0.1, 0.5, 0.9}) {
        c.mix_lambda = lam;
        const MixedLoss l = mixed_loss(PredictorModel(c), b);
        CHECK(l.total == doctest::Approx(lam * l.current + (1 - lam) * l.replay));
        CHECK(l.total >= std::min(l.current, l.replay) - 1e-12);
        CHECK(l.total <= std::max(l.current, l.replay) + 1e-12);
        REQUIRE(l.per_item.size() == 6);
    }

    // The same item on both sides gives that item's NMSE for any mixing weight.
    MixedBatch same;
    same.items = {item(rng, BatchSource::Current)};
    same.items.push_back(same.items.front());
    same.items.back().source = BatchSource::Replay;
    for (double lam : {0.0, 0.3, 1.0}) {
        c.mix_lambda = lam;
        const MixedLoss l = mixed_loss(PredictorModel(c), same);
        CHECK(l.total == doctest::Approx(l.per_item[0]));
    }
}

TEST_CASE("an empty side drops out of the mixture") {
    Rng rng(4);
    PredictorConfig c = small_config();
    c.mix_lambda = 0.3;
    const MixedLoss l = mixed_loss(PredictorModel(c), batch(rng, 3, 0));
    CHECK(l.replay_empty);
    CHECK(l.replay == 0.0);
    CHECK(l.total == doctest::Approx(l.current));
    const MixedLoss r = mixed_loss(PredictorModel(c), batch(rng, 0, 2));
    CHECK(r.current_empty);
    CHECK(r.total == doctest::Approx(r.replay));
}

TEST_CASE("predictor gradient matches central differences") {
    Rng rng(5);
    const MixedBatch b = batch(rng, 2, 2);
    PredictorConfig c = small_config();
    c.mix_lambda = 0.4;
    PredictorModel m(c);
    Vector g;
    m.loss_and_gradient(b, &g);
    Vector& p = m.net().params();
    Vector num(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double o = p(i);
        const double h = 1e-6 * std::max(1.0, std::abs(o));
        p(i) = o + h;
        const double lp = m.loss_and_gradient(b, nullptr).total;
        p(i) = o - h;
        const double lm = m.loss_and_gradient(b, nullptr).total;
        p(i) = o;
        num(i) = (lp - lm) / (2 * h);
    }
    CHECK((num - g).norm() / num.norm() < 1e-4);
}

TEST_CASE("updates are deterministic and a zero rate changes nothing") {
    Rng rng(6);
    const MixedBatch b = batch(rng, 2, 2);
    PredictorModel a(small_config()), z(small_config());
    const Vector p0 = z.net().params();
    CHECK(predictor_update(z, b, 0.0).accepted);
    CHECK(z.net().params() == p0);

    PredictorModel c(small_config());
    for (int s = 0; s < 2; ++s) {
        predictor_update(a, b, 1e-2);
        predictor_update(c, b, 1e-2);
    }
    CHECK(a.net().params() == c.net().params());
    CHECK(a.net().params() != p0);

    MixedBatch bad = b;
    bad.items[0].target(0, 0) = cplx(std::numeric_limits<double>::infinity(), 0.0);
    PredictorModel d(small_config());
    CHECK_FALSE(predictor_update(d, bad, 1e-2).accepted);
    CHECK(d.net().params() == p0);
}

TEST_CASE("predictor checkpoints round-trip") {
    PredictorModel m(small_config());
    Rng rng(7);
    predictor_update(m, batch(rng, 2, 1), 1e-2);
    const auto path = std::filesystem::temp_directory_path() / "rtwin_test_predictor.ckpt";
    m.save(path);
    const PredictorModel back = PredictorModel::load(path);
    std::filesystem::remove(path);
    CHECK(back.net().params() == m.net().params());
    CHECK(back.config().window == 2);
}

namespace {

ScenarioScript stationary_script(int slots) {
    ScriptSegment s;
    s.slots = slots;
    s.label = ScenarioLabel::Indoor;
    s.scene = scene_preset(ScenarioLabel::Indoor, 4);
    s.bs_position = Vec3(0, 0, 2);
    s.ue_start = Vec3(2, 1, 1.5);
    s.snr_start_db = s.snr_end_db = 20.0;
    ScenarioScript sc;
    sc.segments = {s};
    return sc;
}

ContinualConfig loop_config(ContinualMode mode) {
    ContinualConfig c;
    c.predictor = small_config();
    c.predictor.window = 4;
    c.buffer_capacity = 16;
    c.batch_current = 4;
    c.batch_replay = 4;
    c.current_capacity = 8;
    c.warmup_slots = 0;
    c.mode = mode;
    return c;
}

} // namespace

TEST_CASE("frozen loop scores exactly the initial model") {
    const auto stream = play_script(stationary_script(30));
    const ContinualConfig c = loop_config(ContinualMode::Frozen);
    const PredictorModel m(c.predictor);
    const Estimator exact = [](const SlotSample& slot, int ue, Rng&) { return slot.h_gt[static_cast<std::size_t>(ue)]; };
    const auto report = run_continual(stream, c, m, exact);
    CHECK(report.updates == 0);
    CHECK(report.model.net().params() == m.net().params());
    REQUIRE(!report.rows.empty());

    // Rebuild the windows offline and score the initial model directly.
    const auto windows = collect_windows(stream, c.predictor.window, c.predictor.horizon, exact, c.seed);
    REQUIRE(windows.size() == report.rows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& slot = stream[static_cast<std::size_t>(windows[i].t)].slot;
        const double e = nmse(slot.h_gt.front(), m.forecast(windows[i].window));
        CHECK(report.rows[i].nmse == doctest::Approx(e).epsilon(1e-12));
    }
}

TEST_CASE("replay buffer survives handovers unchanged") {
    ScenarioScript sc = stationary_script(12);
    ScriptSegment second = sc.segments.front();
    second.label = ScenarioLabel::UmiCompact;
    second.scene = scene_preset(ScenarioLabel::UmiCompact, 5);
    second.bs_position = Vec3(0, 0, 9);
    second.ue_start = Vec3(20, 5, 1.5);
    sc.segments.push_back(second);

    ContinualConfig c = loop_config(ContinualMode::Uniform);
    ContinualLearner learner(c, PredictorModel(c.predictor));
    std::optional<ReplayBuffer> before;
    std::size_t last_fill = 0;
    for (const auto& ev : play_script(sc)) {
        if (ev.kind == ScriptEvent::Kind::Handover) {
            before = learner.buffer();
            learner.handover();
            CHECK(learner.buffer() == *before);
            continue;
        }
        learner.observe(ev.slot, 0, ev.slot.h_gt.front());
        learner.end_slot();
        CHECK(learner.buffer().size() >= last_fill);
        last_fill = learner.buffer().size();
    }
    REQUIRE(before.has_value());
    CHECK(learner.updates() > 0);
}

TEST_CASE("continual modes parse and print") {
    for (auto m : {ContinualMode::Frozen, ContinualMode::Uniform, ContinualMode::Lars})
        CHECK(parse_continual_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_continual_mode("greedy"), ConfigError);
}
