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

// Self-describing binary files: 4-byte magic, u32 format version, u32 header length,
// UTF-8 JSON header, then a little-endian float64 payload.

#include "rtwin/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace rtwin {

using Json = nlohmann::json;

struct FramedFile {
    Json header;
    std::vector<double> payload;
};

void write_framed(const std::filesystem::path& path, std::string_view magic, const Json& header,
                  std::span<const double> payload);
FramedFile read_framed(const std::filesystem::path& path, std::string_view magic);

// Channel tensors ("RTCH"): header lists each matrix's rows/cols/t/user/tone, payload holds
// interleaved (re, im) pairs in row-major order, matrices back to back.
void write_channels(const std::filesystem::path& path, const std::vector<ChannelMatrix>& channels);
std::vector<ChannelMatrix> read_channels(const std::filesystem::path& path);

// Whole-file text helpers used by the CSV/JSON writers.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

} // namespace rtwin
