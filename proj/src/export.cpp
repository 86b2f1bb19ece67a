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

#include "rtwin/export.hpp"

#include "rtwin/binary_io.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace rtwin {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

namespace {

// Rows keyed by header name; missing file gives no rows.
std::vector<std::map<std::string, std::string>> read_csv(const std::filesystem::path& path) {
    std::vector<std::map<std::string, std::string>> rows;
    if (!std::filesystem::exists(path)) return rows;
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) return rows;
    const auto header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw ConfigError("malformed CSV row in " + path.string());
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < f.size(); ++i) row[header[i]] = f[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

bool parse_number(const std::string& s, double& v) {
    if (s.empty() || s == "NA") return false;
    try {
        v = std::stod(s);
    } catch (const std::exception&) {
        return false;
    }
    return std::isfinite(v);
}

} // namespace

std::vector<std::filesystem::path> export_curves(const std::filesystem::path& run_dir, std::filesystem::path out_dir) {
    if (!std::filesystem::is_directory(run_dir)) throw ConfigError("run directory not found: " + run_dir.string());
    if (out_dir.empty()) out_dir = run_dir;
    std::vector<std::filesystem::path> written;

    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
    };
    std::map<std::tuple<std::string, std::string, long>, Acc> curves;
    for (const auto& r : read_csv(run_dir / "metrics.csv")) {
        double snr = 0.0, nmse_db = 0.0;
        if (!parse_number(r.at("snr_db"), snr) || !parse_number(r.at("nmse_db"), nmse_db)) continue;
        auto& a = curves[{r.at("scenario_label"), r.at("mode"), std::lround(snr)}];
        a.sum += nmse_db;
        ++a.n;
    }
    std::ostringstream c;
    c.precision(10);
    c << "scenario_label,mode,snr_db,nmse_db,count\n";
    for (const auto& [k, a] : curves)
        c << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ',' << a.sum / static_cast<double>(a.n)
          << ',' << a.n << '\n';
    written.push_back(out_dir / "nmse_curves.csv");
    write_text(written.back(), c.str());

    std::map<std::string, Acc> est;
    for (const auto& r : read_csv(run_dir / "records.csv")) {
        double v = 0.0;
        if (!parse_number(r.at("estimation_snr_db"), v)) continue;
        auto& a = est[r.at("scenario_label")];
        a.sum += v;
        ++a.n;
    }
    std::ostringstream e;
    e.precision(10);
    e << "scenario_label,estimation_snr_db,count\n";
    for (const auto& [k, a] : est) e << k << ',' << a.sum / static_cast<double>(a.n) << ',' << a.n << '\n';
    written.push_back(out_dir / "estimation_snr.csv");
    write_text(written.back(), e.str());

    std::string sweep = "snr_db,total_power_w,energy_eff,status\n";
    if (std::filesystem::exists(run_dir / "sweep.csv")) sweep = read_text(run_dir / "sweep.csv");
    written.push_back(out_dir / "power_sweep.csv");
    write_text(written.back(), sweep);
    return written;
}

} // namespace rtwin
