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

// Bounded replay memory filled by reservoir sampling. UNIFORM evicts a uniformly chosen
// entry; LARS evicts with probability proportional to 1 / (loss + eps), so entries the
// predictor still gets wrong tend to stay.

#include "rtwin/binary_io.hpp"
#include "rtwin/common.hpp"
#include "rtwin/scene.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace rtwin {

/// The last T channel estimates, oldest first, used to forecast the channel at t + horizon.
struct PredictionWindow {
    std::vector<CMatrix> frames;
    std::int64_t t = 0;
    int horizon = 1;

    int length() const { return static_cast<int>(frames.size()); }
    Eigen::Index rows() const { return frames.empty() ? 0 : frames.front().rows(); }
    Eigen::Index cols() const { return frames.empty() ? 0 : frames.front().cols(); }

    /// Throws ShapeMismatch / std::invalid_argument when the invariants fail.
    void validate() const;

    /// 2 T N_t N_r reals: per frame, real parts row-major then imaginary parts.
    Vector flatten() const;
};

struct ReplayEntry {
    PredictionWindow window;
    CMatrix target;
    double loss = 0.0;
    ScenarioLabel label = ScenarioLabel::Indoor;
    double snr_db = 0.0;
    std::int64_t t = 0;
};

enum class ReplayMode { Uniform, Lars };
std::string to_string(ReplayMode mode);

struct InsertReport {
    bool inserted = false;
    std::optional<std::size_t> evicted; // slot that was overwritten
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, ReplayMode mode, double eps = 1e-3, std::uint64_t seed = 1);

    /// Reservoir step: always stores while not full, otherwise stores with probability
    /// capacity / t_seen and overwrites one victim chosen per the eviction mode.
    InsertReport insert(ReplayEntry entry);

    /// Victim distribution used when the buffer is full (uniform or loss-aware).
    std::vector<double> eviction_probabilities() const;

    /// One victim draw from eviction_probabilities(); exposed for statistical checks.
    std::size_t draw_victim();

    void set_loss(std::size_t index, double loss);

    const std::vector<ReplayEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::int64_t t_seen() const { return t_seen_; }
    ReplayMode mode() const { return mode_; }
    double eps() const { return eps_; }
    Rng& rng() { return rng_; }

    void save(const std::filesystem::path& path) const;
    static ReplayBuffer load(const std::filesystem::path& path);

    bool operator==(const ReplayBuffer& other) const;

private:
    std::size_t capacity_;
    ReplayMode mode_;
    double eps_;
    std::int64_t t_seen_ = 0;
    std::vector<ReplayEntry> entries_;
    Rng rng_;
};

/// Functional form of ReplayBuffer::insert.
InsertReport reservoir_insert(ReplayBuffer& buffer, ReplayEntry entry);

enum class BatchSource { Current, Replay };

struct BatchItem {
    PredictionWindow window;
    CMatrix target;
    BatchSource source = BatchSource::Current;
    std::optional<std::size_t> buffer_index; // set for replay items
};

struct MixedBatch {
    std::vector<BatchItem> items;
    std::size_t requested_current = 0;
    std::size_t requested_replay = 0;
    bool current_clamped = false;
    bool replay_clamped = false; // fewer replay items than requested (includes empty buffer)

    std::size_t count(BatchSource s) const;
};

/// Uniform draws without replacement from each source. current_data items must carry
/// windows and targets; their loss/metadata are ignored.
MixedBatch sample_batch(const ReplayBuffer& buffer, const std::vector<ReplayEntry>& current_data,
                        std::size_t b_curr, std::size_t b_rep, Rng& rng);

} // namespace rtwin
