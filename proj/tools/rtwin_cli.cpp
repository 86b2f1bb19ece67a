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


// Command-line driver. Every subcommand reads an optional JSON config, applies flag
// overrides and writes its artefacts under --out.
//
// Exit codes: 0 success, 2 configuration or shape error, 3 infeasible problem,
// 4 numerical failure, 1 anything else.

#include "rtwin/bench.hpp"
#include "rtwin/continual.hpp"
#include "rtwin/export.hpp"
#include "rtwin/grf.hpp"
#include "rtwin/pipeline.hpp"
#include "rtwin/precoder.hpp"
#include "rtwin/scene.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace rtwin;

namespace {

Json read_config(const std::string& path) {
    if (path.empty()) return Json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

Vec3 vec3_of(const std::vector<double>& v) {
    if (v.size() != 3) throw ConfigError("positions need exactly 3 coordinates");
    return {v[0], v[1], v[2]};
}

Json matrix_json(const CMatrix& h) {
    Json re = Json::array(), im = Json::array();
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        Json rr = Json::array(), ii = Json::array();
        for (Eigen::Index j = 0; j < h.cols(); ++j) {
            rr.push_back(h(i, j).real());
            ii.push_back(h(i, j).imag());
        }
        re.push_back(rr);
        im.push_back(ii);
    }
    return {{"re", re}, {"im", im}};
}

// Options shared by several subcommands.
struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Override the config seed");
    app->add_option("--out", c.out, "Output directory")->capture_default_str();
}

// Problem source for precode and sweep: a saved problem or a preset template.
struct ProblemSource {
    std::string preset = "indoor";
    int users = 3;
    int tones = 2;
    double b_min = 1.0;
};

MacProblem load_or_build(const Common& c, const ProblemSource& src) {
    if (!c.config.empty()) return load_problem(c.config);
    return preset_problem(parse_scenario_label(src.preset), src.users, src.tones, src.b_min, c.seed.value_or(1));
}

int run_scene(const Common& c, const std::string& preset, const std::vector<double>& tx, const std::vector<double>& rx,
              double snr_db) {
    SceneConfig sc = c.config.empty() ? scene_preset(parse_scenario_label(preset), 1)
                                      : scene_config_from_json(read_config(c.config));
    if (c.seed) sc.rng_seed = *c.seed;
    const Scene scene = generate_scene(sc);
    const fs::path out(c.out);
    write_file(out / "scene.json", to_json(scene).dump(2) + "\n");
    if (!tx.empty() || !rx.empty()) {
        const LinkGeometry link{vec3_of(tx), vec3_of(rx)};
        Rng rng(sc.rng_seed + 1);
        const CMatrix gt = ground_truth_channel(scene, link).h;
        const CMatrix meas = add_measurement_noise(gt, snr_db, rng);
        write_file(out / "channel.json",
                   Json{{"ground_truth", matrix_json(gt)}, {"measured", matrix_json(meas)}, {"snr_db", snr_db}}.dump(2) +
                       "\n");
    }
    std::cout << "scene: " << scene.scatterers.size() << " scatterers, " << scene.n_tx() << "x" << scene.n_rx()
              << " antennas -> " << (out / "scene.json").string() << "\n";
    return 0;
}

int run_train_grf(const Common& c) {
    ReconstructionConfig rc = reconstruction_config_from_json(read_config(c.config));
    if (c.seed) {
        rc.grf.seed = *c.seed;
        rc.fit.seed = *c.seed + 1;
    }
    const ReconstructionReport rep = run_reconstruction(rc);
    const fs::path out(c.out);
    fs::create_directories(out);
    rep.model.save(out / "grf.ckpt");
    write_file(out / "telemetry.csv", telemetry_csv(rep.fit.telemetry));
    const Json summary{{"config", to_json(rc)},
                       {"epochs_run", rep.fit.epoch_loss.size()},
                       {"final_loss", rep.fit.epoch_loss.empty() ? 0.0 : rep.fit.epoch_loss.back()},
                       {"rejected_steps", rep.fit.rejected_steps},
                       {"seconds", rep.fit.seconds},
                       {"held_out_snr_db", rep.held_out_snr_db},
                       {"baseline_snr_db", rep.baseline_snr_db}};
    write_file(out / "report.json", summary.dump(2) + "\n");
    std::cout << "held-out SNR " << rep.held_out_snr_db << " dB (nearest neighbour " << rep.baseline_snr_db
              << " dB) after " << rep.fit.epoch_loss.size() << " epochs\n";
    return 0;
}

int run_render(const std::string& checkpoint, const std::vector<double>& tx, const std::vector<double>& rx) {
    const GrfModel model = GrfModel::load(checkpoint);
    RenderFlops flops;
    const ChannelMatrix h = model.render(vec3_of(tx), vec3_of(rx), &flops);
    std::cout << Json{{"h", matrix_json(h.h)}, {"flops", flops.total()}}.dump(2) << "\n";
    return 0;
}

int run_continual_cmd(const Common& c, const std::string& mode) {
    ShiftExperimentConfig cfg = shift_experiment_config_from_json(read_config(c.config));
    if (c.seed) cfg.seed = *c.seed;
    if (!mode.empty()) cfg.modes = {parse_continual_mode(mode)};
    const ShiftExperimentResult res = run_shift_experiment(cfg);
    const fs::path out(c.out);
    fs::create_directories(out);
    Json summary{{"config", to_json(cfg)}, {"runs", Json::array()}};
    for (const auto& r : res.runs) {
        write_file(out / ("metrics_" + to_string(r.mode) + ".csv"), metrics_csv(r.rows));
        summary["runs"].push_back(
            {{"mode", to_string(r.mode)}, {"final_median_nmse_db", r.final_median_db}, {"hard_median_nmse_db", r.hard_median_db}});
        std::cout << to_string(r.mode) << ": final-segment median " << r.final_median_db << " dB, hardest decile "
                  << r.hard_median_db << " dB\n";
    }
    write_file(out / "summary.json", summary.dump(2) + "\n");
    return 0;
}

int run_precode(const Common& c, const ProblemSource& src) {
    const MacProblem p = load_or_build(c, src);
    const PrecoderSolution sol = solve_min_energy(p);
    const fs::path out(c.out);
    fs::create_directories(out);
    save_problem(p, out / "problem.json");
    save_solution(sol, out / "solution.json");
    std::cout << "objective " << sol.objective << " W, order";
    for (int u : sol.order) std::cout << ' ' << u;
    std::cout << " (" << sol.diagnostics.method << ", " << sol.diagnostics.status << ")\n";
    return 0;
}

int run_sweep(const Common& c, const ProblemSource& src, double from_db, double to_db_, int points) {
    if (points < 2) throw ConfigError("sweep needs at least 2 points");
    const MacProblem p = load_or_build(c, src);
    std::vector<double> grid;
    for (int i = 0; i < points; ++i) grid.push_back(from_db + (to_db_ - from_db) * i / (points - 1));
    const auto rows = sweep_snr(p, grid);
    const fs::path out(c.out);
    write_file(out / "sweep.csv", sweep_csv(rows));
    std::cout << "sweep: " << rows.size() << " points -> " << (out / "sweep.csv").string() << "\n";
    return 0;
}

int run_pipeline_cmd(const Common& c, const std::string& mode, bool oracle_csi) {
    Json j = read_config(c.config);
    if (!j.contains("script"))
        j["script"] = {{"shift", {{"labels", {"UMi-compact", "UMi-dense", "UMi-standard"}}, {"slots_per_segment", 40}}}};
    PipelineConfig cfg = pipeline_config_from_json(j);
    if (c.seed) cfg.seed = *c.seed;
    if (!mode.empty()) cfg.continual.mode = parse_continual_mode(mode);
    if (oracle_csi) cfg.oracle_csi = true;
    const PipelineResult r = run_pipeline_to(cfg, c.out);
    int failed = 0;
    for (const auto& rec : r.records) failed += rec.status != "ok" && rec.status != "tied";
    std::cout << "pipeline: " << r.records.size() << " slots, " << failed << " without a precoder solution -> " << c.out
              << "\n";
    return 0;
}

int run_bench(const Common& c, bool quick) {
    BenchConfig cfg;
    if (c.seed) cfg.seed = *c.seed;
    if (quick) {
        cfg.primitives = {256, 512, 1024};
        cfg.antennas = {{2, 2}};
        cfg.render_queries = 200;
        cfg.repeats = 2;
        cfg.users = {2, 3, 4};
        cfg.rx_antennas = {2, 4};
    }
    const BenchReport rep = bench_complexity(cfg);
    const fs::path out(c.out);
    write_file(out / "bench.csv", bench_csv(rep));
    write_file(out / "bench.json", bench_summary(rep).dump(2) + "\n");
    std::cout << "render time slope " << rep.render_time_slope << ", FLOP slope " << rep.render_flop_slope << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rtwin: radio digital twin toolkit"};
    app.require_subcommand(1);

    Common common;
    ProblemSource src;
    std::string preset = "indoor", mode, checkpoint, run_dir;
    std::vector<double> tx, rx;
    double snr_db = 30.0, from_db = -10.0, to_db_ = 20.0;
    int points = 13;
    bool oracle_csi = false, quick = false;

    auto* scene = app.add_subcommand("scene", "Generate a scene and optionally one link's channel");
    add_common(scene, common);
    scene->add_option("--preset", preset, "Scenario preset when no --config is given")->capture_default_str();
    scene->add_option("--tx", tx, "Transmitter position x y z")->expected(3);
    scene->add_option("--rx", rx, "Receiver position x y z")->expected(3);
    scene->add_option("--snr", snr_db, "Measurement SNR in dB")->capture_default_str();

    auto* train = app.add_subcommand("train-grf", "Fit a field to synthetic links and report held-out SNR");
    add_common(train, common);

    auto* render = app.add_subcommand("render", "Render one channel from a field checkpoint");
    render->add_option("--checkpoint", checkpoint, "grf.ckpt path")->required()->check(CLI::ExistingFile);
    render->add_option("--tx", tx, "Transmitter position x y z")->expected(3)->required();
    render->add_option("--rx", rx, "Receiver position x y z")->expected(3)->required();

    auto* continual = app.add_subcommand("continual", "Scripted domain-shift run of the online predictor");
    add_common(continual, common);
    continual->add_option("--mode", mode, "Run a single mode")->check(CLI::IsMember({"uniform", "lars", "frozen"}));

    auto add_problem = [&](CLI::App* sub) {
        add_common(sub, common);
        sub->add_option("--preset", src.preset, "Preset template when no --config problem is given")->capture_default_str();
        sub->add_option("--users", src.users, "Users in the preset template")->capture_default_str();
        sub->add_option("--tones", src.tones, "Tones in the preset template")->capture_default_str();
        sub->add_option("--b-min", src.b_min, "Minimum rate per user")->capture_default_str();
    };
    auto* precode = app.add_subcommand("precode", "Minimum-energy MAC precoding");
    add_problem(precode);
    auto* sweep = app.add_subcommand("sweep", "Minimum energy over an SNR grid");
    add_problem(sweep);
    sweep->add_option("--from", from_db, "First SNR in dB")->capture_default_str();
    sweep->add_option("--to", to_db_, "Last SNR in dB")->capture_default_str();
    sweep->add_option("--points", points, "Grid points")->capture_default_str();

    auto* pipeline = app.add_subcommand("pipeline", "Closed loop: scene, field, predictor, precoder");
    add_common(pipeline, common);
    pipeline->add_option("--mode", mode, "Replay mode")->check(CLI::IsMember({"uniform", "lars", "frozen"}));
    pipeline->add_flag("--oracle-csi", oracle_csi, "Precode on ground-truth channels");

    auto* bench = app.add_subcommand("bench", "Render and solver scaling measurements");
    add_common(bench, common);
    bench->add_flag("--quick", quick, "Small sizes only");

    auto* exp = app.add_subcommand("export", "Figure CSVs from a run directory");
    exp->add_option("--run", run_dir, "Run directory")->required();
    exp->add_option("--out", common.out, "Output directory (defaults to the run directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*scene) return run_scene(common, preset, tx, rx, snr_db);
        if (*train) return run_train_grf(common);
        if (*render) return run_render(checkpoint, tx, rx);
        if (*continual) return run_continual_cmd(common, mode);
        if (*precode) return run_precode(common, src);
        if (*sweep) return run_sweep(common, src, from_db, to_db_, points);
        if (*pipeline) return run_pipeline_cmd(common, mode, oracle_csi);
        if (*bench) return run_bench(common, quick);
        if (*exp) {
            const auto files = export_curves(run_dir, exp->count("--out") ? fs::path(common.out) : fs::path());
            for (const auto& f : files) std::cout << f.string() << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeMismatch& e) {
        std::cerr << "shape mismatch: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateGeometry& e) {
        std::cerr << "degenerate geometry: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleProblem& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
