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

// Scaling measurements: render cost vs primitives and antennas, subset enumeration vs users,
// MMSE-SIC cost vs users and receive antennas.

#include "rtwin/binary_io.hpp"
#include "rtwin/common.hpp"

#include <string>
#include <vector>

namespace rtwin {

struct BenchConfig {
    std::vector<int> primitives{256, 512, 1024, 2048, 4096};
    std::vector<std::pair<int, int>> antennas{{1, 1}, {2, 2}, {4, 4}};
    int render_queries = 2000;
    int repeats = 5; // best-of for each timing
    std::vector<int> users{2, 3, 4, 5, 6};
    std::vector<int> rx_antennas{2, 4, 8};
    std::uint64_t seed = 1;
};

struct RenderBenchRow {
    int primitives = 0;
    int n_tx = 0;
    int n_rx = 0;
    std::int64_t flops = 0;      // per render
    double seconds = 0.0;        // per render
};

struct SubsetBenchRow {
    int users = 0;
    std::int64_t subsets = 0;
    double seconds = 0.0;
};

struct MmseBenchRow {
    int users = 0;
    int rx_antennas = 0;
    double seconds = 0.0;
};

struct BenchReport {
    std::vector<RenderBenchRow> render;
    std::vector<SubsetBenchRow> subsets;
    std::vector<MmseBenchRow> mmse;
    double render_time_slope = 0.0;  // log-log slope of time vs primitives at the largest antenna pair
    double render_flop_slope = 0.0;
};

/// Timed render of a random field through the cached weighted-sum kernel.
std::vector<RenderBenchRow> bench_render(const std::vector<int>& primitives, int n_tx, int n_rx, int queries, int repeats,
                                         std::uint64_t seed);

BenchReport bench_complexity(const BenchConfig& config);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

std::string bench_csv(const BenchReport& report);
Json bench_summary(const BenchReport& report);

} // namespace rtwin
