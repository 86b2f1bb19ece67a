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

#include "rtwin/predictor.hpp"

#include <numeric>

namespace rtwin {

namespace {

double window_scale(const Vector& x) {
    const double rms = std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
    return rms > 0.0 ? rms : 1.0;
}

CMatrix unflatten(const Eigen::Ref<const Vector>& v, int rows, int cols) {
    const Eigen::Index k = static_cast<Eigen::Index>(rows) * cols;
    CMatrix h(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) h(r, c) = cplx(v(r * cols + c), v(k + r * cols + c));
    return h;
}

Vector flatten(const CMatrix& h) {
    const Eigen::Index k = h.size();
    Vector out(2 * k);
    for (Eigen::Index r = 0; r < h.rows(); ++r)
        for (Eigen::Index c = 0; c < h.cols(); ++c) {
            out(r * h.cols() + c) = h(r, c).real();
            out(k + r * h.cols() + c) = h(r, c).imag();
        }
    return out;
}

} // namespace

void PredictorConfig::validate() const {
    if (window < 1) throw ConfigError("predictor window must be >= 1");
    if (horizon < 1) throw ConfigError("predictor horizon must be >= 1");
    if (n_tx < 1 || n_rx < 1) throw ConfigError("predictor antenna counts must be >= 1");
    if (hidden_units < 1 || hidden_layers < 0) throw ConfigError("bad predictor network shape");
    if (!(mix_lambda >= 0.0 && mix_lambda <= 1.0)) throw ConfigError("mixing weight must lie in [0, 1]");
    if (!(learning_rate >= 0.0)) throw ConfigError("predictor learning rate must be >= 0");
}

PredictorModel::PredictorModel(const PredictorConfig& config) : config_(config), opt_(config.learning_rate) {
    config_.validate();
    Rng rng(config_.seed);
    const int k2 = 2 * config_.n_tx * config_.n_rx;
    std::vector<int> sizes{config_.window * k2};
    for (int l = 0; l < config_.hidden_layers; ++l) sizes.push_back(config_.hidden_units);
    sizes.push_back(k2);
    net_ = Mlp(sizes, rng);
    if (config_.zero_init_output) {
        const std::size_t last = net_.num_layers() - 1;
        net_.weight(last).setZero();
        net_.bias(last).setZero();
    }
}

void PredictorModel::check_window(const PredictionWindow& w) const {
    w.validate();
    if (w.length() != config_.window || w.rows() != config_.n_tx || w.cols() != config_.n_rx)
        throw ShapeMismatch("prediction window shape does not match the predictor");
}

CMatrix PredictorModel::forecast(const PredictionWindow& window) const {
    check_window(window);
    if (config_.persistence) return window.frames.back();
    const Vector x = window.flatten();
    const double s = window_scale(x);
    const Vector y = net_.forward(x / s).col(0) * s;
    return unflatten(y, config_.n_tx, config_.n_rx);
}

MixedLoss PredictorModel::loss_and_gradient(const MixedBatch& batch, Vector* grad) const {
    if (batch.items.empty()) throw std::invalid_argument("mixed_loss: empty batch");
    const auto n = static_cast<Eigen::Index>(batch.items.size());
    const int k2 = 2 * config_.n_tx * config_.n_rx;
    const Eigen::Index in_dim = static_cast<Eigen::Index>(config_.window) * k2;

    Matrix x(in_dim, n), target(k2, n);
    Vector scale(n);
    std::size_t n_curr = 0, n_rep = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& item = batch.items[static_cast<std::size_t>(i)];
        check_window(item.window);
        if (item.target.rows() != config_.n_tx || item.target.cols() != config_.n_rx)
            throw ShapeMismatch("batch target shape does not match the predictor");
        const Vector xi = item.window.flatten();
        scale(i) = window_scale(xi);
        x.col(i) = xi / scale(i);
        target.col(i) = flatten(item.target);
        (item.source == BatchSource::Current ? n_curr : n_rep)++;
    }

    MixedLoss out;
    out.current_empty = n_curr == 0;
    out.replay_empty = n_rep == 0;
    // An empty side drops out and the other side takes the full weight.
    double w_curr = config_.mix_lambda, w_rep = 1.0 - config_.mix_lambda;
    if (out.current_empty) {
        w_curr = 0.0;
        w_rep = 1.0;
    } else if (out.replay_empty) {
        w_curr = 1.0;
        w_rep = 0.0;
    }

    MlpCache cache;
    Matrix pred;
    if (config_.persistence) {
        pred.resize(k2, n);
        for (Eigen::Index i = 0; i < n; ++i) pred.col(i) = x.col(i).tail(k2);
    } else {
        pred = net_.forward(x, grad ? &cache : nullptr);
    }
    Matrix d_out(k2, n);
    out.per_item.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ref = target.col(i).squaredNorm();
        if (!(ref > 0.0)) throw std::invalid_argument("NMSE: zero reference channel");
        const Vector err = pred.col(i) * scale(i) - target.col(i);
        const double e = err.squaredNorm() / ref;
        out.per_item[static_cast<std::size_t>(i)] = e;
        const bool curr = batch.items[static_cast<std::size_t>(i)].source == BatchSource::Current;
        const double w = curr ? w_curr / static_cast<double>(n_curr) : w_rep / static_cast<double>(n_rep);
        (curr ? out.current : out.replay) += e / static_cast<double>(curr ? n_curr : n_rep);
        d_out.col(i) = (2.0 * w * scale(i) / ref) * err;
    }
    out.total = w_curr * out.current + w_rep * out.replay;

    if (grad) {
        *grad = Vector::Zero(net_.num_params());
        if (!config_.persistence) net_.backward(cache, d_out, *grad);
    }
    return out;
}

UpdateResult PredictorModel::update(const MixedBatch& batch, double lr) {
    if (!(lr >= 0.0)) throw std::invalid_argument("predictor learning rate must be >= 0");
    UpdateResult r;
    Vector g;
    r.loss = loss_and_gradient(batch, &g);
    r.grad_norm = g.norm();
    if (!std::isfinite(r.grad_norm)) {
        r.accepted = false;
        return r;
    }
    if (lr == 0.0 || config_.persistence) return r;
    opt_.set_lr(lr);
    opt_.step(net_.params(), g);
    return r;
}

void PredictorModel::save(const std::filesystem::path& path) const {
    Json h;
    h["config"] = to_json(config_);
    h["num_params"] = net_.num_params();
    h["optimizer_steps"] = opt_.steps();
    std::vector<double> payload(net_.params().data(), net_.params().data() + net_.num_params());
    if (opt_.steps() > 0) {
        payload.insert(payload.end(), opt_.first_moment().data(), opt_.first_moment().data() + opt_.first_moment().size());
        payload.insert(payload.end(), opt_.second_moment().data(), opt_.second_moment().data() + opt_.second_moment().size());
    }
    write_framed(path, "RPRD", h, payload);
}

PredictorModel PredictorModel::load(const std::filesystem::path& path) {
    const FramedFile f = read_framed(path, "RPRD");
    PredictorModel m(predictor_config_from_json(f.header.at("config")));
    const auto n = m.net_.num_params();
    const auto steps = f.header.value("optimizer_steps", std::int64_t{0});
    const auto need = static_cast<std::size_t>(steps > 0 ? 3 * n : n);
    if (f.payload.size() != need) throw ConfigError("predictor checkpoint size mismatch");
    m.net_.params() = Eigen::Map<const Vector>(f.payload.data(), n);
    if (steps > 0)
        m.opt_.restore(steps, Eigen::Map<const Vector>(f.payload.data() + n, n),
                       Eigen::Map<const Vector>(f.payload.data() + 2 * n, n));
    return m;
}

CMatrix forecast(const PredictorModel& model, const PredictionWindow& window) { return model.forecast(window); }

MixedLoss mixed_loss(const PredictorModel& model, const MixedBatch& batch) {
    return model.loss_and_gradient(batch, nullptr);
}

UpdateResult predictor_update(PredictorModel& model, const MixedBatch& batch, double lr) {
    return model.update(batch, lr);
}

std::vector<double> pretrain_predictor(PredictorModel& model, const std::vector<ReplayEntry>& data, int epochs,
                                       std::size_t batch_size, double lr, std::uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("pretrain_predictor: no data");
    if (batch_size == 0) throw ConfigError("pretrain batch size must be >= 1");
    Rng rng(seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> epoch_loss;
    for (int e = 0; e < epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            MixedBatch b;
            for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k)
                b.items.push_back({data[order[k]].window, data[order[k]].target, BatchSource::Current, std::nullopt});
            const auto r = model.update(b, lr);
            sum += r.loss.total * static_cast<double>(b.items.size());
        }
        epoch_loss.push_back(sum / static_cast<double>(data.size()));
    }
    return epoch_loss;
}

Json to_json(const PredictorConfig& c) {
    return {{"window", c.window},
            {"horizon", c.horizon},
            {"n_tx", c.n_tx},
            {"n_rx", c.n_rx},
            {"hidden_units", c.hidden_units},
            {"hidden_layers", c.hidden_layers},
            {"mix_lambda", c.mix_lambda},
            {"learning_rate", c.learning_rate},
            {"persistence", c.persistence},
            {"zero_init_output", c.zero_init_output},
            {"seed", c.seed}};
}

PredictorConfig predictor_config_from_json(const Json& j) {
    try {
        PredictorConfig c;
        c.window = j.value("window", c.window);
        c.horizon = j.value("horizon", c.horizon);
        c.n_tx = j.value("n_tx", c.n_tx);
        c.n_rx = j.value("n_rx", c.n_rx);
        c.hidden_units = j.value("hidden_units", c.hidden_units);
        c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
        c.mix_lambda = j.value("mix_lambda", c.mix_lambda);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.persistence = j.value("persistence", c.persistence);
        c.zero_init_output = j.value("zero_init_output", c.zero_init_output);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("predictor config: ") + e.what());
    }
}

} // namespace rtwin
