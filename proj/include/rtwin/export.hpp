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

// Figure data from a run directory.
//   nmse_curves.csv:     scenario_label,mode,snr_db,nmse_db,count   (metrics.csv, SNR rounded to 1 dB)
//   estimation_snr.csv:  scenario_label,estimation_snr_db,count      (records.csv)
//   power_sweep.csv:     snr_db,total_power_w,energy_eff,status      (copied from sweep.csv when present)

#include <filesystem>
#include <string>
#include <vector>

namespace rtwin {

/// Splits one CSV line on commas (no quoting; the writers never emit quotes).
std::vector<std::string> split_csv_line(const std::string& line);

/// Writes the files above into `out_dir` (defaults to run_dir). Throws ConfigError when the
/// run directory does not exist.
std::vector<std::filesystem::path> export_curves(const std::filesystem::path& run_dir,
                                                 std::filesystem::path out_dir = {});

} // namespace rtwin
