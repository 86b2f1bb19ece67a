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

#include "rtwin/pipeline.hpp"

#include <chrono>
#include <sstream>

namespace rtwin {

namespace {

using Clock = std::chrono::steady_clock;

double micros(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::micro>(b - a).count();
}

std::string num(double v) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

} // namespace

void PipelineConfig::validate() const {
    script.validate();
    if (ue_offsets.empty()) throw ConfigError("pipeline needs at least one UE");
    if (ue_offsets.size() > 6) throw ConfigError("pipeline supports at most 6 UEs");
    grf.validate();
    continual.validate();
    if (grf_refresh < 1) throw ConfigError("GRF refresh period must be >= 1");
    if (grf_warmup_slots < 0) throw ConfigError("GRF warmup must be >= 0");
    if (grf_batch == 0 || grf_history == 0) throw ConfigError("GRF batch and history must be >= 1");
    if (!(b_min >= 0.0) || !(weight > 0.0)) throw ConfigError("b_min must be >= 0 and weight > 0");
}

PipelineResult run_pipeline(const PipelineConfig& config, PredictorModel predictor) {
    config.validate();
    const auto& seg0 = config.script.segments.front();
    GrfConfig gc = config.grf;
    gc.n_tx = seg0.scene.tx_array.elements;
    gc.n_rx = seg0.scene.rx_array.elements;
    gc.init_center = seg0.ue_start;
    gc.seed = config.seed;
    PipelineResult result{{}, {}, {}, GrfModel(gc), ReplayBuffer(1, ReplayMode::Uniform)};
    GrfModel& grf = result.grf;
    ContinualConfig cc = config.continual;
    cc.seed = config.seed;
    ContinualLearner learner(cc, std::move(predictor));

    Rng rng(config.seed);
    std::vector<GrfSample> history;
    std::map<std::pair<int, std::int64_t>, CMatrix> forecasts; // (ue, target slot)
    bool scale_set = false;
    int cell_slot = 0;
    const int users = static_cast<int>(config.ue_offsets.size());

    ScriptPlayer player(config.script, config.ue_offsets);
    while (auto ev = player.next()) {
        if (ev->kind == ScriptEvent::Kind::Handover) {
            learner.handover();
            history.clear();
            forecasts.clear();
            cell_slot = 0;
            continue;
        }
        const SlotSample& slot = ev->slot;
        const auto& seg = config.script.segments[static_cast<std::size_t>(slot.segment)];
        const auto t0 = Clock::now();
        SlotRecord rec;
        SlotTiming tim;
        rec.t = tim.t = slot.t;
        rec.label = slot.label;
        rec.snr_db = slot.snr_db;

        // Measurements and GRF refresh.
        std::vector<CMatrix> measured;
        for (int u = 0; u < users; ++u) {
            measured.push_back(add_measurement_noise(slot.h_gt[static_cast<std::size_t>(u)], slot.snr_db, rng));
            history.push_back({slot.links[static_cast<std::size_t>(u)].p_tx, slot.links[static_cast<std::size_t>(u)].p_rx,
                               measured.back()});
        }
        while (history.size() > config.grf_history) history.erase(history.begin());
        std::vector<CMatrix> estimates = measured;
        if (config.grf_enabled) {
            if (!scale_set) {
                double pw = 0.0;
                Eigen::Index n = 0;
                for (const auto& s : history) {
                    pw += s.h.squaredNorm();
                    n += s.h.size();
                }
                grf.set_channel_scale(std::sqrt(pw / static_cast<double>(n)));
                scale_set = true;
            }
            if (cell_slot < config.grf_warmup_slots || slot.t % config.grf_refresh == 0) {
                const std::size_t b = std::min(config.grf_batch, history.size());
                std::vector<GrfSample> batch(history.end() - static_cast<std::ptrdiff_t>(b), history.end());
                const auto r = grf.train_step(batch, config.grf_learning_rate);
                if (!r.accepted) rec.status = "grf_rejected";
            }
            double snr_sum = 0.0;
            for (int u = 0; u < users; ++u) {
                const auto& link = slot.links[static_cast<std::size_t>(u)];
                const CMatrix render = grf.render(link.p_tx, link.p_rx).h;
                snr_sum += channel_snr_db(slot.h_gt[static_cast<std::size_t>(u)], render);
                if (config.predict_from_grf) estimates[static_cast<std::size_t>(u)] = render;
            }
            rec.estimation_snr_db = snr_sum / users;
        }
        const auto t1 = Clock::now();

        // Forecasts for t + horizon, scoring of forecasts that targeted t.
        const std::size_t rows_before = learner.rows().size();
        for (int u = 0; u < users; ++u) {
            if (auto f = learner.observe(slot, u, estimates[static_cast<std::size_t>(u)]))
                forecasts[{u, slot.t + cc.predictor.horizon}] = std::move(*f);
        }
        learner.end_slot();
        const auto& rows = learner.rows();
        if (rows.size() > rows_before) {
            double s = 0.0;
            for (std::size_t i = rows_before; i < rows.size(); ++i) s += rows[i].nmse;
            rec.prediction_nmse_db = to_db(s / static_cast<double>(rows.size() - rows_before));
        }
        rec.buffer_fill = learner.buffer().size();
        const auto t2 = Clock::now();

        // Precoder on the channel forecast for this slot (latest estimate until one exists).
        MacProblem p;
        p.users = users;
        p.tones = 1;
        p.noise_var = seg.scene.noise_floor_w;
        p.b_min = Vector::Constant(users, config.b_min);
        p.weights = Vector::Constant(users, config.weight);
        for (int u = 0; u < users; ++u) {
            CMatrix h;
            if (config.oracle_csi) {
                h = slot.h_gt[static_cast<std::size_t>(u)];
            } else if (auto it = forecasts.find({u, slot.t}); it != forecasts.end()) {
                h = it->second;
                forecasts.erase(it);
            } else {
                h = estimates[static_cast<std::size_t>(u)];
            }
            p.channels.push_back({h});
        }
        try {
            const PrecoderSolution sol = solve_min_energy(p, config.solver);
            rec.objective_w = sol.objective;
            rec.energy_efficiency = sol.energy_efficiency;
            if (sol.diagnostics.status == "tied")
                rec.status = "tied";
            else if (sol.diagnostics.status != "optimal")
                rec.status = "precoder_" + sol.diagnostics.status;
        } catch (const InfeasibleProblem&) {
            rec.status = "infeasible";
        } catch (const NumericalError&) {
            rec.status = "numerical_error";
        } catch (const ConfigError&) {
            rec.status = "bad_channel";
        }
        const auto t3 = Clock::now();
        tim.grf_us = micros(t0, t1);
        tim.predict_us = micros(t1, t2);
        tim.precode_us = micros(t2, t3);
        tim.total_us = micros(t0, t3);
        result.records.push_back(rec);
        result.timings.push_back(tim);
        ++cell_slot;
    }
    result.metrics = learner.rows();
    result.buffer = learner.buffer();
    return result;
}

PipelineResult run_pipeline_to(const PipelineConfig& config, const std::filesystem::path& out_dir) {
    PredictorConfig pc = config.continual.predictor;
    pc.n_tx = config.script.segments.front().scene.tx_array.elements;
    pc.n_rx = config.script.segments.front().scene.rx_array.elements;
    pc.seed = config.seed;
    PipelineConfig cfg = config;
    cfg.continual.predictor = pc;
    PipelineResult r = run_pipeline(cfg, PredictorModel(pc));
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
    write_text(out_dir / "records.csv", records_csv(r.records));
    write_text(out_dir / "timings.csv", timings_csv(r.timings));
    write_text(out_dir / "metrics.csv", metrics_csv(r.metrics));
    r.grf.save(out_dir / "grf.ckpt");
    r.buffer.save(out_dir / "buffer.ckpt");
    return r;
}

std::string records_csv(const std::vector<SlotRecord>& records) {
    std::ostringstream os;
    os << "t,scenario_label,snr_db,estimation_snr_db,prediction_nmse_db,objective_w,energy_efficiency,buffer_fill,status\n";
    for (const auto& r : records)
        os << r.t << ',' << to_string(r.label) << ',' << num(r.snr_db) << ',' << num(r.estimation_snr_db) << ','
           << num(r.prediction_nmse_db) << ',' << num(r.objective_w) << ',' << num(r.energy_efficiency) << ','
           << r.buffer_fill << ',' << r.status << '\n';
    return os.str();
}

std::string timings_csv(const std::vector<SlotTiming>& timings) {
    std::ostringstream os;
    os << "t,grf_us,predict_us,precode_us,total_us\n";
    for (const auto& r : timings)
        os << r.t << ',' << num(r.grf_us) << ',' << num(r.predict_us) << ',' << num(r.precode_us) << ','
           << num(r.total_us) << '\n';
    return os.str();
}

Json to_json(const PipelineConfig& c) {
    Json offs = Json::array();
    for (const auto& o : c.ue_offsets) offs.push_back(to_json(o));
    return {{"script", to_json(c.script)},
            {"ue_offsets", offs},
            {"grf", to_json(c.grf)},
            {"grf_enabled", c.grf_enabled},
            {"grf_refresh", c.grf_refresh},
            {"grf_warmup_slots", c.grf_warmup_slots},
            {"grf_history", c.grf_history},
            {"grf_batch", c.grf_batch},
            {"grf_learning_rate", c.grf_learning_rate},
            {"predict_from_grf", c.predict_from_grf},
            {"continual", to_json(c.continual)},
            {"b_min", c.b_min},
            {"weight", c.weight},
            {"oracle_csi", c.oracle_csi},
            {"seed", c.seed}};
}

PipelineConfig pipeline_config_from_json(const Json& j) {
    try {
        PipelineConfig c;
        c.script = script_from_json(j.at("script"));
        if (j.contains("ue_offsets")) {
            c.ue_offsets.clear();
            for (const auto& o : j.at("ue_offsets")) c.ue_offsets.push_back(vec3_from_json(o));
        }
        if (j.contains("grf")) c.grf = grf_config_from_json(j.at("grf"));
        c.grf_enabled = j.value("grf_enabled", c.grf_enabled);
        c.grf_refresh = j.value("grf_refresh", c.grf_refresh);
        c.grf_warmup_slots = j.value("grf_warmup_slots", c.grf_warmup_slots);
        c.grf_history = j.value("grf_history", c.grf_history);
        c.grf_batch = j.value("grf_batch", c.grf_batch);
        c.grf_learning_rate = j.value("grf_learning_rate", c.grf_learning_rate);
        c.predict_from_grf = j.value("predict_from_grf", c.predict_from_grf);
        if (j.contains("continual")) c.continual = continual_config_from_json(j.at("continual"));
        c.b_min = j.value("b_min", c.b_min);
        c.weight = j.value("weight", c.weight);
        c.oracle_csi = j.value("oracle_csi", c.oracle_csi);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
}

} // namespace rtwin
