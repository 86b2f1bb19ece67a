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

#include "rtwin/continual.hpp"

#include "rtwin/grf.hpp"

#include <algorithm>
#include <sstream>

namespace rtwin {

std::string to_string(ContinualMode mode) {
    switch (mode) {
    case ContinualMode::Frozen: return "frozen";
    case ContinualMode::Uniform: return "uniform";
    case ContinualMode::Lars: return "lars";
    }
    return "?";
}

ContinualMode parse_continual_mode(const std::string& text) {
    if (text == "frozen") return ContinualMode::Frozen;
    if (text == "uniform") return ContinualMode::Uniform;
    if (text == "lars") return ContinualMode::Lars;
    throw ConfigError("unknown continual mode: " + text);
}

void ContinualConfig::validate() const {
    predictor.validate();
    if (buffer_capacity == 0) throw ConfigError("buffer capacity must be >= 1");
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
    if (current_capacity == 0) throw ConfigError("current-data capacity must be >= 1");
}

Estimator measured_estimator() {
    return [](const SlotSample& slot, int ue, Rng& rng) {
        return add_measurement_noise(slot.h_gt.at(static_cast<std::size_t>(ue)), slot.snr_db, rng);
    };
}

Estimator grf_estimator(const GrfModel& model) {
    return [&model](const SlotSample& slot, int ue, Rng&) {
        const auto& link = slot.links.at(static_cast<std::size_t>(ue));
        return model.render(link.p_tx, link.p_rx).h;
    };
}

ContinualLearner::ContinualLearner(const ContinualConfig& config, PredictorModel model)
    : ContinualLearner(config, std::move(model),
                       ReplayBuffer(config.buffer_capacity,
                                    config.mode == ContinualMode::Lars ? ReplayMode::Lars : ReplayMode::Uniform,
                                    config.eps, config.seed ^ 0x9e3779b97f4a7c15ULL)) {}

ContinualLearner::ContinualLearner(const ContinualConfig& config, PredictorModel model, ReplayBuffer buffer)
    : config_(config), model_(std::move(model)), buffer_(std::move(buffer)), rng_(config.seed) {
    config_.validate();
    if (config_.warmup_slots < 0) config_.warmup_slots = static_cast<int>(config_.buffer_capacity);
}

std::optional<CMatrix> ContinualLearner::observe(const SlotSample& slot, int ue, const CMatrix& estimate) {
    const auto key = std::make_pair(ue, slot.t);
    if (auto it = pending_.find(key); it != pending_.end()) {
        const CMatrix& truth = slot.h_gt.at(static_cast<std::size_t>(ue));
        MetricsRow row;
        row.t = slot.t;
        row.ue = ue;
        row.segment = slot.segment;
        row.label = slot.label;
        row.snr_db = slot.snr_db;
        row.nmse = nmse(truth, it->second.forecast);
        row.mode = to_string(config_.mode);

        ReplayEntry e;
        e.window = std::move(it->second.window);
        e.target = estimate;
        e.loss = nmse(estimate, it->second.forecast);
        e.label = slot.label;
        e.snr_db = slot.snr_db;
        e.t = slot.t;
        pending_.erase(it);
        if (current_.size() < config_.current_capacity) {
            current_.push_back(e);
        } else {
            current_[current_next_] = e;
            current_next_ = (current_next_ + 1) % config_.current_capacity;
        }
        buffer_.insert(std::move(e));
        row.buffer_fill = buffer_.size();
        rows_.push_back(std::move(row));
    }

    auto& hist = history_[ue];
    hist.push_back(estimate);
    const auto window = static_cast<std::size_t>(config_.predictor.window);
    while (hist.size() > window) hist.pop_front();
    if (hist.size() < window) return std::nullopt;

    Pending p;
    p.window.frames.assign(hist.begin(), hist.end());
    p.window.t = slot.t;
    p.window.horizon = config_.predictor.horizon;
    p.forecast = model_.forecast(p.window);
    CMatrix out = p.forecast;
    pending_[{ue, slot.t + config_.predictor.horizon}] = std::move(p);
    return out;
}

void ContinualLearner::end_slot() {
    ++slots_;
    if (config_.mode == ContinualMode::Frozen || model_.persistence()) return;
    if (slots_ < config_.warmup_slots || current_.empty()) return;
    const MixedBatch batch = sample_batch(buffer_, current_, config_.batch_current, config_.batch_replay, rng_);
    const UpdateResult r = model_.update(batch, config_.predictor.learning_rate);
    if (!r.accepted) {
        ++rejected_;
        return;
    }
    ++updates_;
    // Replayed entries get their freshly measured loss as the new eviction score.
    for (std::size_t i = 0; i < batch.items.size(); ++i)
        if (batch.items[i].buffer_index) buffer_.set_loss(*batch.items[i].buffer_index, r.loss.per_item[i]);
}

void ContinualLearner::handover() {
    current_.clear();
    current_next_ = 0;
    history_.clear();
    pending_.clear();
}

ContinualReport run_continual(const std::vector<ScriptEvent>& stream, const ContinualConfig& config,
                              PredictorModel model, const Estimator& estimator, std::optional<ReplayBuffer> buffer) {
    ContinualLearner learner = buffer ? ContinualLearner(config, std::move(model), std::move(*buffer))
                                      : ContinualLearner(config, std::move(model));
    Rng est_rng(config.seed + 17);
    for (const auto& ev : stream) {
        if (ev.kind == ScriptEvent::Kind::Handover) {
            learner.handover();
            continue;
        }
        for (int u = 0; u < static_cast<int>(ev.slot.h_gt.size()); ++u)
            learner.observe(ev.slot, u, estimator(ev.slot, u, est_rng));
        learner.end_slot();
    }
    ContinualReport rep;
    rep.rows = learner.rows();
    rep.updates = learner.updates();
    rep.rejected_updates = learner.rejected_updates();
    rep.buffer = learner.buffer();
    rep.model = learner.model();
    return rep;
}

std::vector<ReplayEntry> collect_windows(const std::vector<ScriptEvent>& stream, int window, int horizon,
                                         const Estimator& estimator, std::uint64_t seed) {
    if (window < 1 || horizon < 1) throw ConfigError("collect_windows: window and horizon must be >= 1");
    Rng rng(seed);
    std::vector<ReplayEntry> out;
    std::map<int, std::vector<CMatrix>> hist;
    std::map<int, std::vector<SlotSample>> meta;
    auto flush = [&] {
        for (auto& [ue, h] : hist) {
            const auto& m = meta[ue];
            for (std::size_t k = static_cast<std::size_t>(window); k + static_cast<std::size_t>(horizon) - 1 < h.size(); ++k) {
                ReplayEntry e;
                e.window.frames.assign(h.begin() + static_cast<std::ptrdiff_t>(k) - window, h.begin() + static_cast<std::ptrdiff_t>(k));
                e.window.t = m[k - 1].t;
                e.window.horizon = horizon;
                e.target = h[k + static_cast<std::size_t>(horizon) - 1];
                e.label = m[k].label;
                e.snr_db = m[k].snr_db;
                e.t = m[k].t;
                out.push_back(std::move(e));
            }
        }
        hist.clear();
        meta.clear();
    };
    for (const auto& ev : stream) {
        if (ev.kind == ScriptEvent::Kind::Handover) {
            flush();
            continue;
        }
        for (int u = 0; u < static_cast<int>(ev.slot.h_gt.size()); ++u) {
            hist[u].push_back(estimator(ev.slot, u, rng));
            meta[u].push_back(ev.slot);
        }
    }
    flush();
    return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "t,scenario_label,snr_db,nmse,nmse_db,mode,buffer_fill\n";
    for (const auto& r : rows)
        os << r.t << ',' << to_string(r.label) << ',' << r.snr_db << ',' << r.nmse << ',' << to_db(r.nmse) << ','
           << r.mode << ',' << r.buffer_fill << '\n';
    return os.str();
}

Json to_json(const ContinualConfig& c) {
    return {{"predictor", to_json(c.predictor)}, {"buffer_capacity", c.buffer_capacity}, {"eps", c.eps},
            {"batch_current", c.batch_current},  {"batch_replay", c.batch_replay},       {"current_capacity", c.current_capacity},
            {"warmup_slots", c.warmup_slots},    {"mode", to_string(c.mode)},            {"seed", c.seed}};
}

ContinualConfig continual_config_from_json(const Json& j) {
    try {
        ContinualConfig c;
        if (j.contains("predictor")) c.predictor = predictor_config_from_json(j.at("predictor"));
        c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
        c.eps = j.value("eps", c.eps);
        c.batch_current = j.value("batch_current", c.batch_current);
        c.batch_replay = j.value("batch_replay", c.batch_replay);
        c.current_capacity = j.value("current_capacity", c.current_capacity);
        c.warmup_slots = j.value("warmup_slots", c.warmup_slots);
        if (j.contains("mode")) c.mode = parse_continual_mode(j.at("mode").get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("continual config: ") + e.what());
    }
}

namespace {

double median_db(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

const ShiftModeResult& ShiftExperimentResult::run(ContinualMode mode) const {
    for (const auto& r : runs)
        if (r.mode == mode) return r;
    throw ConfigError("shift experiment: mode " + to_string(mode) + " was not run");
}

ShiftExperimentResult run_shift_experiment(const ShiftExperimentConfig& config) {
    if (config.labels.empty()) throw ConfigError("shift experiment: no labels");
    ShiftExperimentResult out;
    out.script = shift_script(config.labels, config.slots_per_segment, config.snr_start_db, config.snr_end_db, config.seed);
    const auto stream = play_script(out.script);

    ScenarioScript first;
    first.segments = {out.script.segments.front()};
    first.segments.front().ue_start += config.pretrain_offset;

    ContinualConfig cc = config.continual;
    cc.seed = config.seed;
    cc.predictor.seed = config.seed;
    cc.predictor.n_tx = first.segments.front().scene.tx_array.elements;
    cc.predictor.n_rx = first.segments.front().scene.rx_array.elements;
    const auto pre = collect_windows(play_script(first), cc.predictor.window, cc.predictor.horizon,
                                     measured_estimator(), config.seed + 5);
    PredictorModel base(cc.predictor);
    pretrain_predictor(base, pre, config.pretrain_epochs, config.pretrain_batch, config.pretrain_lr, config.seed);

    PredictorConfig pp = cc.predictor;
    pp.persistence = true;
    ContinualConfig pc = cc;
    pc.mode = ContinualMode::Frozen;
    out.persistence = run_continual(stream, pc, PredictorModel(pp)).rows;

    std::vector<double> sorted;
    for (const auto& r : out.persistence) sorted.push_back(r.nmse);
    std::sort(sorted.begin(), sorted.end());
    const double threshold = sorted.empty() ? 0.0 : sorted[sorted.size() * 9 / 10];
    for (const auto& r : out.persistence) out.hard.push_back(r.nmse >= threshold);

    const int last = static_cast<int>(out.script.segments.size()) - 1;
    for (ContinualMode mode : config.modes) {
        cc.mode = mode;
        ShiftModeResult res;
        res.mode = mode;
        res.rows = run_continual(stream, cc, base).rows;
        if (res.rows.size() != out.persistence.size())
            throw NumericalError("shift experiment: runs scored different slot counts");
        std::vector<double> fin, hard;
        for (std::size_t i = 0; i < res.rows.size(); ++i) {
            const double db = to_db(res.rows[i].nmse);
            if (res.rows[i].segment == last) fin.push_back(db);
            if (out.hard[i]) hard.push_back(db);
        }
        res.final_median_db = median_db(std::move(fin));
        res.hard_median_db = median_db(std::move(hard));
        out.runs.push_back(std::move(res));
    }
    return out;
}

Json to_json(const ShiftExperimentConfig& c) {
    Json labels = Json::array();
    for (auto l : c.labels) labels.push_back(to_string(l));
    Json modes = Json::array();
    for (auto m : c.modes) modes.push_back(to_string(m));
    return {{"labels", labels},
            {"slots_per_segment", c.slots_per_segment},
            {"snr_start_db", c.snr_start_db},
            {"snr_end_db", c.snr_end_db},
            {"pretrain_epochs", c.pretrain_epochs},
            {"pretrain_batch", c.pretrain_batch},
            {"pretrain_lr", c.pretrain_lr},
            {"pretrain_offset", to_json(c.pretrain_offset)},
            {"continual", to_json(c.continual)},
            {"modes", modes},
            {"seed", c.seed}};
}

ShiftExperimentConfig shift_experiment_config_from_json(const Json& j) {
    try {
        ShiftExperimentConfig c;
        if (j.contains("labels")) {
            c.labels.clear();
            for (const auto& l : j.at("labels")) c.labels.push_back(parse_scenario_label(l.get<std::string>()));
        }
        c.slots_per_segment = j.value("slots_per_segment", c.slots_per_segment);
        c.snr_start_db = j.value("snr_start_db", c.snr_start_db);
        c.snr_end_db = j.value("snr_end_db", c.snr_end_db);
        c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
        c.pretrain_batch = j.value("pretrain_batch", c.pretrain_batch);
        c.pretrain_lr = j.value("pretrain_lr", c.pretrain_lr);
        if (j.contains("pretrain_offset")) c.pretrain_offset = vec3_from_json(j.at("pretrain_offset"));
        if (j.contains("continual")) {
            c.continual = continual_config_from_json(j.at("continual"));
            if (!j.at("continual").contains("warmup_slots")) c.continual.warmup_slots = 0;
        }
        if (j.contains("modes")) {
            c.modes.clear();
            for (const auto& m : j.at("modes")) c.modes.push_back(parse_continual_mode(m.get<std::string>()));
        }
        c.seed = j.value("seed", c.seed);
        if (c.slots_per_segment < 1) throw ConfigError("shift experiment: slots_per_segment must be >= 1");
        c.continual.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("shift experiment config: ") + e.what());
    }
}

} // namespace rtwin
