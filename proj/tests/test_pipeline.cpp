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

#include "rtwin/bench.hpp"
#include "rtwin/binary_io.hpp"
#include "rtwin/export.hpp"
#include "rtwin/pipeline.hpp"

#include <fstream>
#include <sstream>

using namespace rtwin;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_pipeline() {
    PipelineConfig c;
    c.script = shift_script({ScenarioLabel::UmiCompact, ScenarioLabel::UmiDense, ScenarioLabel::UmiStandard}, 12, 10.0,
                            25.0, 2);
    c.ue_offsets = {Vec3::Zero(), Vec3(2.0, -1.0, 0.0)};
    c.grf.num_primitives = 16;
    c.grf.encoding_levels = 3;
    c.grf.latent_dim = 8;
    c.grf.hidden_units = 16;
    c.continual.predictor.window = 4;
    c.continual.predictor.hidden_units = 16;
    c.continual.buffer_capacity = 16;
    c.continual.current_capacity = 8;
    c.continual.batch_current = 4;
    c.continual.batch_replay = 4;
    c.continual.warmup_slots = 4;
    c.seed = 3;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("rtwin_test_" + name);
    fs::remove_all(d);
    return d;
}

} // namespace

TEST_CASE("one record per slot and stage timings cover the slot") {
    const PipelineConfig c = small_pipeline();
    const auto r = run_pipeline(c, PredictorModel(c.continual.predictor));
    CHECK(static_cast<std::int64_t>(r.records.size()) == c.script.total_slots());
    REQUIRE(r.timings.size() == r.records.size());
    for (const auto& t : r.timings) {
        const double parts = t.grf_us + t.predict_us + t.precode_us;
        CHECK(parts <= t.total_us * 1.05 + 1e-9);
        CHECK(parts >= t.total_us * 0.95 - 1e-9);
    }
    for (const auto& rec : r.records) {
        CHECK(std::isfinite(rec.snr_db));
        CHECK(std::isfinite(rec.estimation_snr_db));
    }
}

TEST_CASE("buffer fill never resets at handovers") {
    const auto r = run_pipeline(small_pipeline(), PredictorModel(small_pipeline().continual.predictor));
    std::size_t last = 0;
    for (const auto& rec : r.records) {
        CHECK(rec.buffer_fill >= last);
        last = rec.buffer_fill;
    }
    CHECK(last > 0);
}

TEST_CASE("pipeline output is deterministic and replayable from its config") {
    const fs::path a = scratch("pipe_a"), b = scratch("pipe_b"), c = scratch("pipe_c");
    run_pipeline_to(small_pipeline(), a);
    run_pipeline_to(small_pipeline(), b);
    for (const char* f : {"records.csv", "metrics.csv", "config.json"}) CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / "buffer.ckpt") == slurp(b / "buffer.ckpt"));

    const PipelineConfig again = pipeline_config_from_json(Json::parse(slurp(a / "config.json")));
    run_pipeline_to(again, c);
    CHECK(slurp(a / "records.csv") == slurp(c / "records.csv"));
    CHECK(slurp(a / "metrics.csv") == slurp(c / "metrics.csv"));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("refresh every slot and oracle CSI run cleanly") {
    PipelineConfig c = small_pipeline();
    c.grf_refresh = 1;
    c.grf_warmup_slots = 0;
    c.oracle_csi = true;
    const auto r = run_pipeline(c, PredictorModel(c.continual.predictor));
    for (const auto& rec : r.records) CHECK((rec.status == "ok" || rec.status == "tied"));
    c.grf_refresh = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("export groups metrics by scenario and mode") {
    const fs::path run = scratch("export");
    fs::create_directories(run);
    {
        std::ofstream m(run / "metrics.csv");
        m << "t,scenario_label,snr_db,nmse,nmse_db,mode,buffer_fill\n"
          << "0,UMi-dense,10.2,0.1,-10,lars,1\n"
          << "1,UMi-dense,9.8,0.01,-20,lars,2\n"
          << "0,UMi-dense,10.1,0.1,-10,uniform,1\n";
    }
    const auto files = export_curves(run);
    REQUIRE(files.size() == 3);
    const std::string curves = slurp(run / "nmse_curves.csv");
    CHECK(curves == "scenario_label,mode,snr_db,nmse_db,count\n"
                    "UMi-dense,lars,10,-15,2\n"
                    "UMi-dense,uniform,10,-10,1\n");
    export_curves(run);
    CHECK(slurp(run / "nmse_curves.csv") == curves);
    CHECK(slurp(run / "power_sweep.csv") == "snr_db,total_power_w,energy_eff,status\n");
    fs::remove_all(run);

    const fs::path empty = scratch("export_empty");
    fs::create_directories(empty);
    export_curves(empty);
    CHECK(slurp(empty / "nmse_curves.csv") == "scenario_label,mode,snr_db,nmse_db,count\n");
    CHECK(slurp(empty / "estimation_snr.csv") == "scenario_label,estimation_snr_db,count\n");
    fs::remove_all(empty);

    CHECK_THROWS_AS(export_curves(scratch("missing")), ConfigError);
}

TEST_CASE("benchmark counts") {
    BenchConfig c;
    c.primitives = {64, 128};
    c.antennas = {{2, 2}};
    c.render_queries = 20;
    c.repeats = 1;
    c.users = {2, 3, 4};
    c.rx_antennas = {2};
    const BenchReport r = bench_complexity(c);
    REQUIRE(r.render.size() == 2);
    CHECK(r.render[1].flops == 2 * r.render[0].flops);
    REQUIRE(r.subsets.size() == 3);
    CHECK(r.subsets[0].subsets == 3);
    CHECK(r.subsets[1].subsets == 7);
    CHECK(r.subsets[2].subsets == 15);
    CHECK(loglog_slope({1, 2, 4, 8}, {3, 6, 12, 24}) == doctest::Approx(1.0));
}
