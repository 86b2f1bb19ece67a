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

#include "rtwin/replay.hpp"

#include <numeric>
#include <sstream>

namespace rtwin {

void PredictionWindow::validate() const {
    if (frames.empty()) throw std::invalid_argument("prediction window needs at least one frame");
    if (horizon < 1) throw std::invalid_argument("prediction horizon must be >= 1");
    for (const auto& f : frames) {
        if (f.rows() != rows() || f.cols() != cols()) throw ShapeMismatch("prediction window frames differ in shape");
        if (!f.allFinite()) throw NumericalError("prediction window has non-finite entries");
    }
}

Vector PredictionWindow::flatten() const {
    const Eigen::Index k = rows() * cols();
    Vector out(2 * k * length());
    Eigen::Index off = 0;
    for (const auto& f : frames) {
        for (Eigen::Index r = 0; r < f.rows(); ++r)
            for (Eigen::Index c = 0; c < f.cols(); ++c) {
                out(off + r * f.cols() + c) = f(r, c).real();
                out(off + k + r * f.cols() + c) = f(r, c).imag();
            }
        off += 2 * k;
    }
    return out;
}

std::string to_string(ReplayMode mode) { return mode == ReplayMode::Uniform ? "uniform" : "lars"; }

ReplayBuffer::ReplayBuffer(std::size_t capacity, ReplayMode mode, double eps, std::uint64_t seed)
    : capacity_(capacity), mode_(mode), eps_(eps), rng_(seed) {
    if (capacity_ == 0) throw ConfigError("replay buffer capacity must be >= 1");
    if (!(eps_ > 0.0)) throw ConfigError("replay eps must be > 0");
    entries_.reserve(capacity_);
}

std::vector<double> ReplayBuffer::eviction_probabilities() const {
    std::vector<double> p(entries_.size(), 0.0);
    if (p.empty()) return p;
    if (mode_ == ReplayMode::Uniform) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
        return p;
    }
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = 1.0 / (entries_[i].loss + eps_);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

std::size_t ReplayBuffer::draw_victim() {
    if (entries_.empty()) throw std::logic_error("draw_victim on an empty buffer");
    if (mode_ == ReplayMode::Uniform) {
        std::uniform_int_distribution<std::size_t> u(0, entries_.size() - 1);
        return u(rng_);
    }
    std::vector<double> w(entries_.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / (entries_[i].loss + eps_);
    std::discrete_distribution<std::size_t> d(w.begin(), w.end());
    return d(rng_);
}

InsertReport ReplayBuffer::insert(ReplayEntry entry) {
    if (!(entry.loss >= 0.0)) throw std::invalid_argument("replay entry loss must be >= 0");
    ++t_seen_;
    InsertReport rep;
    if (entries_.size() < capacity_) {
        entries_.push_back(std::move(entry));
        rep.inserted = true;
        return rep;
    }
    std::uniform_int_distribution<std::int64_t> u(0, t_seen_ - 1);
    if (u(rng_) >= static_cast<std::int64_t>(capacity_)) return rep;
    const std::size_t victim = draw_victim();
    entries_[victim] = std::move(entry);
    rep.inserted = true;
    rep.evicted = victim;
    return rep;
}

void ReplayBuffer::set_loss(std::size_t index, double loss) {
    if (!(loss >= 0.0)) throw std::invalid_argument("replay entry loss must be >= 0");
    entries_.at(index).loss = loss;
}

bool ReplayBuffer::operator==(const ReplayBuffer& o) const {
    if (capacity_ != o.capacity_ || mode_ != o.mode_ || eps_ != o.eps_ || t_seen_ != o.t_seen_ || rng_ != o.rng_ ||
        entries_.size() != o.entries_.size())
        return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& a = entries_[i];
        const auto& b = o.entries_[i];
        if (a.loss != b.loss || a.label != b.label || a.snr_db != b.snr_db || a.t != b.t || a.target != b.target ||
            a.window.t != b.window.t || a.window.horizon != b.window.horizon || a.window.frames != b.window.frames)
            return false;
    }
    return true;
}

void ReplayBuffer::save(const std::filesystem::path& path) const {
    std::ostringstream rng_state;
    rng_state << rng_;
    Json h;
    h["capacity"] = capacity_;
    h["mode"] = to_string(mode_);
    h["eps"] = eps_;
    h["t_seen"] = t_seen_;
    h["rng_state"] = rng_state.str();
    h["count"] = entries_.size();
    h["entries"] = Json::array();
    std::vector<double> payload;
    auto put = [&](const CMatrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                payload.push_back(m(r, c).real());
                payload.push_back(m(r, c).imag());
            }
    };
    for (const auto& e : entries_) {
        h["entries"].push_back({{"frames", e.window.length()},
                                {"rows", e.window.rows()},
                                {"cols", e.window.cols()},
                                {"window_t", e.window.t},
                                {"horizon", e.window.horizon},
                                {"target_rows", e.target.rows()},
                                {"target_cols", e.target.cols()},
                                {"loss", e.loss},
                                {"label", to_string(e.label)},
                                {"snr_db", e.snr_db},
                                {"t", e.t}});
        for (const auto& f : e.window.frames) put(f);
        put(e.target);
    }
    write_framed(path, "RBUF", h, payload);
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path) {
    const FramedFile f = read_framed(path, "RBUF");
    try {
        const auto& h = f.header;
        const std::string mode = h.at("mode").get<std::string>();
        ReplayBuffer buf(h.at("capacity").get<std::size_t>(), mode == "lars" ? ReplayMode::Lars : ReplayMode::Uniform,
                         h.at("eps").get<double>());
        buf.t_seen_ = h.at("t_seen").get<std::int64_t>();
        std::istringstream rs(h.at("rng_state").get<std::string>());
        rs >> buf.rng_;
        std::size_t pos = 0;
        auto take = [&](Eigen::Index rows, Eigen::Index cols) {
            if (pos + static_cast<std::size_t>(2 * rows * cols) > f.payload.size())
                throw ConfigError("truncated replay buffer checkpoint");
            CMatrix m(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) {
                    m(r, c) = cplx(f.payload[pos], f.payload[pos + 1]);
                    pos += 2;
                }
            return m;
        };
        for (const auto& je : h.at("entries")) {
            ReplayEntry e;
            const int n = je.at("frames").get<int>();
            const auto rows = je.at("rows").get<Eigen::Index>();
            const auto cols = je.at("cols").get<Eigen::Index>();
            for (int k = 0; k < n; ++k) e.window.frames.push_back(take(rows, cols));
            e.window.t = je.at("window_t").get<std::int64_t>();
            e.window.horizon = je.at("horizon").get<int>();
            e.target = take(je.at("target_rows").get<Eigen::Index>(), je.at("target_cols").get<Eigen::Index>());
            e.loss = je.at("loss").get<double>();
            e.label = parse_scenario_label(je.at("label").get<std::string>());
            e.snr_db = je.at("snr_db").get<double>();
            e.t = je.at("t").get<std::int64_t>();
            buf.entries_.push_back(std::move(e));
        }
        if (buf.entries_.size() != h.at("count").get<std::size_t>() || buf.entries_.size() > buf.capacity_)
            throw ConfigError("replay buffer checkpoint count mismatch");
        return buf;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("replay buffer checkpoint: ") + e.what());
    }
}

InsertReport reservoir_insert(ReplayBuffer& buffer, ReplayEntry entry) { return buffer.insert(std::move(entry)); }

std::size_t MixedBatch::count(BatchSource s) const {
    return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [s](const auto& i) { return i.source == s; }));
}

namespace {

// First k entries of a uniform random permutation of 0..n-1 (partial Fisher-Yates).
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> u(i, n - 1);
        std::swap(idx[i], idx[u(rng)]);
    }
    idx.resize(k);
    return idx;
}

} // namespace

MixedBatch sample_batch(const ReplayBuffer& buffer, const std::vector<ReplayEntry>& current_data, std::size_t b_curr,
                        std::size_t b_rep, Rng& rng) {
    if (b_curr > 0 && current_data.empty()) throw std::invalid_argument("sample_batch: no current data");
    MixedBatch batch;
    batch.requested_current = b_curr;
    batch.requested_replay = b_rep;
    const std::size_t nc = std::min(b_curr, current_data.size());
    const std::size_t nr = std::min(b_rep, buffer.size());
    batch.current_clamped = nc < b_curr;
    batch.replay_clamped = nr < b_rep;
    for (const std::size_t i : draw_without_replacement(current_data.size(), nc, rng))
        batch.items.push_back({current_data[i].window, current_data[i].target, BatchSource::Current, std::nullopt});
    for (const std::size_t i : draw_without_replacement(buffer.size(), nr, rng))
        batch.items.push_back({buffer.entries()[i].window, buffer.entries()[i].target, BatchSource::Replay, i});
    return batch;
}

} // namespace rtwin
