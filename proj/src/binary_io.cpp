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

#include "rtwin/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rtwin {

static_assert(std::endian::native == std::endian::little, "payload encoding assumes a little-endian host");

namespace {
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ConfigError("truncated binary header");
    return v;
}
} // namespace

void write_framed(const std::filesystem::path& path, std::string_view magic, const Json& header,
                  std::span<const double> payload) {
    if (magic.size() != 4) throw std::invalid_argument("magic must be 4 bytes");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open for writing: " + path.string());
    Json h = header;
    h["payload_doubles"] = payload.size();
    const std::string text = h.dump();
    os.write(magic.data(), 4);
    put_u32(os, kFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

FramedFile read_framed(const std::filesystem::path& path, std::string_view magic) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open: " + path.string());
    char m[4] = {};
    is.read(m, 4);
    if (!is || std::string_view(m, 4) != magic)
        throw ConfigError("bad magic in " + path.string() + ", expected " + std::string(magic));
    if (get_u32(is) != kFormatVersion) throw ConfigError("unsupported format version in " + path.string());
    const std::uint32_t len = get_u32(is);
    std::string text(len, '\0');
    is.read(text.data(), len);
    if (!is) throw ConfigError("truncated header in " + path.string());
    FramedFile out;
    out.header = Json::parse(text);
    const auto n = out.header.at("payload_doubles").get<std::size_t>();
    out.payload.resize(n);
    is.read(reinterpret_cast<char*>(out.payload.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw ConfigError("truncated payload in " + path.string());
    return out;
}

void write_channels(const std::filesystem::path& path, const std::vector<ChannelMatrix>& channels) {
    Json header;
    header["dtype"] = "complex128";
    header["order"] = "row-major";
    header["matrices"] = Json::array();
    std::vector<double> payload;
    for (const auto& c : channels) {
        header["matrices"].push_back(
            {{"rows", c.rows()}, {"cols", c.cols()}, {"t", c.t}, {"user", c.user}, {"tone", c.tone}});
        for (Eigen::Index r = 0; r < c.rows(); ++r)
            for (Eigen::Index k = 0; k < c.cols(); ++k) {
                payload.push_back(c.h(r, k).real());
                payload.push_back(c.h(r, k).imag());
            }
    }
    write_framed(path, "RTCH", header, payload);
}

std::vector<ChannelMatrix> read_channels(const std::filesystem::path& path) {
    const FramedFile f = read_framed(path, "RTCH");
    std::vector<ChannelMatrix> out;
    std::size_t pos = 0;
    for (const auto& m : f.header.at("matrices")) {
        ChannelMatrix c;
        const auto rows = m.at("rows").get<Eigen::Index>();
        const auto cols = m.at("cols").get<Eigen::Index>();
        c.t = m.at("t").get<std::int64_t>();
        c.user = m.at("user").get<int>();
        c.tone = m.at("tone").get<int>();
        c.h.resize(rows, cols);
        if (pos + static_cast<std::size_t>(2 * rows * cols) > f.payload.size())
            throw ConfigError("channel payload shorter than header in " + path.string());
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index k = 0; k < cols; ++k) {
                c.h(r, k) = cplx(f.payload[pos], f.payload[pos + 1]);
                pos += 2;
            }
        out.push_back(std::move(c));
    }
    return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open for writing: " + path.string());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

double channel_snr_db(const CMatrix& truth, const CMatrix& pred) {
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
        throw ShapeMismatch("channel_snr_db: shape mismatch");
    const double sig = truth.squaredNorm();
    if (!(sig > 0.0)) throw std::invalid_argument("channel_snr_db: zero ground-truth channel");
    const double err = (pred - truth).squaredNorm();
    if (err == 0.0) return kInfDb;
    return to_db(sig / err);
}

double nmse(const CMatrix& truth, const CMatrix& pred) {
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw ShapeMismatch("nmse: shape mismatch");
    const double sig = truth.squaredNorm();
    if (!(sig > 0.0)) throw std::invalid_argument("nmse: zero reference channel");
    return (truth - pred).squaredNorm() / sig;
}

} // namespace rtwin
