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

#include "rtwin/grf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace rtwin {

namespace {

// dR/dq for a unit quaternion (w, x, y, z), one 3x3 per component.
std::array<Eigen::Matrix3d, 4> rotation_jacobian(const Eigen::Vector4d& q) {
    const double w = q(0), x = q(1), y = q(2), z = q(3);
    std::array<Eigen::Matrix3d, 4> j;
    j[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    j[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    j[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    j[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    return j;
}

// Adds d/dx of <g, gamma_L(x)> to out.
void encoding_backward(const Vec3& x, int levels, const Eigen::Ref<const Vector>& g, Vec3& out) {
    out += g.head<3>();
    double freq = kPi;
    for (int l = 0; l < levels; ++l, freq *= 2.0) {
        for (int c = 0; c < 3; ++c) {
            out(c) += g(3 + 6 * l + c) * freq * std::cos(freq * x(c));
            out(c) -= g(6 + 6 * l + c) * freq * std::sin(freq * x(c));
        }
    }
}

Vector flatten_channel(const CMatrix& h) {
    const Eigen::Index k = h.size();
    Vector out(2 * k);
    for (Eigen::Index r = 0; r < h.rows(); ++r)
        for (Eigen::Index c = 0; c < h.cols(); ++c) {
            out(r * h.cols() + c) = h(r, c).real();
            out(k + r * h.cols() + c) = h(r, c).imag();
        }
    return out;
}

CMatrix unflatten_channel(const Eigen::Ref<const Vector>& v, int rows, int cols) {
    const Eigen::Index k = static_cast<Eigen::Index>(rows) * cols;
    CMatrix h(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) h(r, c) = cplx(v(r * cols + c), v(k + r * cols + c));
    return h;
}

} // namespace

void GrfConfig::validate() const {
    if (num_primitives < 1) throw ConfigError("GRF needs at least one primitive");
    if (encoding_levels < 0) throw ConfigError("encoding levels must be >= 0");
    if (latent_dim < 1 || hidden_units < 1 || hidden_layers < 0) throw ConfigError("bad network shape");
    if (n_tx < 1 || n_rx < 1) throw ConfigError("antenna counts must be >= 1");
    if (!(init_radius > 0.0)) throw ConfigError("init radius must be > 0");
    if (!(init_scale >= 0.0)) throw ConfigError("init scale must be >= 0");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
}

GrfModel::GrfModel(const GrfConfig& config) : config_(config) {
    config_.validate();
    Rng rng(config_.seed);
    const int n = config_.num_primitives;
    prim_ = Vector::Zero(kPrimitiveParams * n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double frac = config_.init_scale > 0.0 ? config_.init_scale : std::cbrt(1.0 / n);
    const double s0 = std::log(frac * config_.init_radius);
    for (int i = 0; i < n; ++i) {
        Vec3 p;
        do {
            p = Vec3(u(rng), u(rng), u(rng));
        } while (p.norm() > 1.0);
        prim_.segment<3>(kPrimitiveParams * i) = config_.init_center + config_.init_radius * p;
        prim_.segment<4>(kPrimitiveParams * i + 3) = Eigen::Vector4d(1, 0, 0, 0);
        prim_.segment<3>(kPrimitiveParams * i + 7).setConstant(s0);
    }

    const int enc = encoding_dim(config_.encoding_levels);
    std::vector<int> attr_sizes{2 * enc};
    std::vector<int> dec_sizes{config_.latent_dim};
    for (int l = 0; l < config_.hidden_layers; ++l) {
        attr_sizes.push_back(config_.hidden_units);
        dec_sizes.push_back(config_.hidden_units);
    }
    attr_sizes.push_back(config_.latent_dim + 1);
    dec_sizes.push_back(2 * config_.n_tx * config_.n_rx);
    attr_ = Mlp(attr_sizes, rng);
    dec_ = Mlp(dec_sizes, rng);

    // Start every primitive near alpha = softplus(softplus^-1(1)) = 1.
    const std::size_t last = attr_.num_layers() - 1;
    attr_.weight(last).row(config_.latent_dim) *= 0.1;
    attr_.bias(last)(config_.latent_dim) = softplus_inverse(1.0);

    prim_opt_ = Adam(config_.learning_rate);
    attr_opt_ = Adam(config_.learning_rate);
    dec_opt_ = Adam(config_.learning_rate);
}

void GrfModel::compute_attributes(const Vec3& p_tx, FieldAttributes& out, MlpCache* attr_cache, MlpCache* dec_cache,
                                  Matrix* attr_input) const {
    const int n = num_primitives();
    const int levels = config_.encoding_levels;
    const int enc = encoding_dim(levels);
    Matrix input(2 * enc, n);
    const Vector tx_code = positional_encode<double>(p_tx, levels);
    for (int i = 0; i < n; ++i) {
        input.col(i).head(enc) = positional_encode<double>(mean(i), levels);
        input.col(i).tail(enc) = tx_code;
    }
    const Matrix a = attr_.forward(input, attr_cache);
    out.p_tx = p_tx;
    out.latents = a.topRows(config_.latent_dim);
    out.alpha_raw = a.row(config_.latent_dim).transpose();
    out.alpha = out.alpha_raw.unaryExpr([](double v) { return softplus(v); });
    out.contributions = channel_scale_ * dec_.forward(out.latents, dec_cache);
    out.means.resize(3, n);
    out.inv_cov.resize(9, n);
    for (int i = 0; i < n; ++i) {
        out.means.col(i) = mean(i);
        const Eigen::Matrix3d lam = inverse_covariance<double>(quat(i), log_scale(i));
        out.inv_cov.col(i) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(lam.data());
    }
    if (attr_input) *attr_input = std::move(input);
}

const FieldAttributes& GrfModel::attributes(const Vec3& p_tx) const {
    if (!cache_valid_ || cache_.p_tx != p_tx) {
        compute_attributes(p_tx, cache_, nullptr, nullptr, nullptr);
        cache_valid_ = true;
    }
    return cache_;
}

std::vector<GaussianPrimitive> GrfModel::primitives(const Vec3& p_tx) const {
    const auto& at = attributes(p_tx);
    std::vector<GaussianPrimitive> out(static_cast<std::size_t>(num_primitives()));
    for (int i = 0; i < num_primitives(); ++i) {
        auto& g = out[static_cast<std::size_t>(i)];
        g.mean = mean(i);
        g.quat = quat(i);
        g.log_scale = log_scale(i);
        g.alpha = at.alpha(i);
        g.latent = at.latents.col(i);
    }
    return out;
}

ChannelMatrix GrfModel::render(const Vec3& p_tx, const Vec3& p_rx, RenderFlops* flops) const {
    const auto& at = attributes(p_tx);
    const int n = num_primitives();
    const Vector h = render_cached<double>(at.means, at.inv_cov, at.alpha, at.contributions, p_rx);
    if (flops) {
        flops->weight += kGateFlops * n;
        flops->accumulate += 4LL * n * config_.n_tx * config_.n_rx;
    }
    ChannelMatrix out;
    out.h = unflatten_channel(h, config_.n_tx, config_.n_rx);
    return out;
}

double GrfModel::batch_group(const std::vector<const GrfSample*>& group, double inv_batch, GrfGradients* grads) const {
    const int n = num_primitives();
    const int k2 = 2 * config_.n_tx * config_.n_rx;
    const auto b = static_cast<Eigen::Index>(group.size());
    const Vec3 p_tx = group.front()->p_tx;

    FieldAttributes at;
    MlpCache attr_cache, dec_cache;
    Matrix attr_input;
    compute_attributes(p_tx, at, grads ? &attr_cache : nullptr, grads ? &dec_cache : nullptr, &attr_input);

    std::vector<Eigen::Matrix3d> rot(static_cast<std::size_t>(n));
    Matrix inv_var(3, n); // exp(-2 s)
    for (int i = 0; i < n; ++i) {
        rot[static_cast<std::size_t>(i)] = quat_to_rot<double>(quat(i));
        inv_var.col(i) = (-2.0 * log_scale(i)).array().exp();
    }

    Matrix gate(n, b);
    Matrix target(k2, b);
    for (Eigen::Index j = 0; j < b; ++j) {
        const Vec3& p = group[static_cast<std::size_t>(j)]->p_rx;
        target.col(j) = flatten_channel(group[static_cast<std::size_t>(j)]->h);
        if (target.rows() != k2) throw ShapeMismatch("GRF batch: channel shape does not match the model");
        for (int i = 0; i < n; ++i) {
            const Vec3 v = rot[static_cast<std::size_t>(i)].transpose() * (p - mean(i));
            gate(i, j) = std::exp(-0.5 * (inv_var.col(i).array() * v.array().square()).sum());
        }
    }
    const Matrix weights = at.alpha.asDiagonal() * gate;
    const Matrix residual = at.contributions * weights - target;
    const double loss = residual.squaredNorm() * inv_batch;
    if (!grads) return loss;

    const Matrix d_h = (2.0 * inv_batch) * residual;
    const Matrix d_contrib = d_h * weights.transpose();
    const Matrix d_weights = at.contributions.transpose() * d_h;

    Vector d_alpha = (d_weights.array() * gate.array()).rowwise().sum();
    for (int i = 0; i < n; ++i) {
        const auto& r = rot[static_cast<std::size_t>(i)];
        const Vec3 mu = mean(i);
        Vec3 g_mu = Vec3::Zero(), g_s = Vec3::Zero();
        Eigen::Matrix3d g_r = Eigen::Matrix3d::Zero();
        for (Eigen::Index j = 0; j < b; ++j) {
            const double dm = -0.5 * at.alpha(i) * gate(i, j) * d_weights(i, j);
            if (dm == 0.0) continue;
            const Vec3 delta = group[static_cast<std::size_t>(j)]->p_rx - mu;
            const Vec3 v = r.transpose() * delta;
            const Vec3 dv = inv_var.col(i).cwiseProduct(v);
            g_mu += dm * (-2.0 * r * dv);
            g_s += dm * (-2.0 * inv_var.col(i).cwiseProduct(v.cwiseAbs2()));
            g_r += dm * 2.0 * delta * dv.transpose();
        }
        const Eigen::Vector4d q_raw = quat(i);
        const double qn = q_raw.norm();
        const Eigen::Vector4d q = q_raw / qn;
        const auto jac = rotation_jacobian(q);
        Eigen::Vector4d g_qhat;
        for (int c = 0; c < 4; ++c) g_qhat(c) = (jac[static_cast<std::size_t>(c)].array() * g_r.array()).sum();
        const Eigen::Vector4d g_q = (g_qhat - q * q.dot(g_qhat)) / qn;

        grads->primitives.segment<3>(kPrimitiveParams * i) += g_mu;
        grads->primitives.segment<4>(kPrimitiveParams * i + 3) += g_q;
        grads->primitives.segment<3>(kPrimitiveParams * i + 7) += g_s;
    }

    const Matrix d_latent = dec_.backward(dec_cache, channel_scale_ * d_contrib, grads->decoder);
    Matrix d_attr_out(config_.latent_dim + 1, n);
    d_attr_out.topRows(config_.latent_dim) = d_latent;
    for (int i = 0; i < n; ++i) d_attr_out(config_.latent_dim, i) = d_alpha(i) * sigmoid(at.alpha_raw(i));
    const Matrix d_input = attr_.backward(attr_cache, d_attr_out, grads->attribute);

    const int enc = encoding_dim(config_.encoding_levels);
    for (int i = 0; i < n; ++i) {
        Vec3 g = Vec3::Zero();
        encoding_backward(mean(i), config_.encoding_levels, d_input.col(i).head(enc), g);
        grads->primitives.segment<3>(kPrimitiveParams * i) += g;
    }
    return loss;
}

double GrfModel::loss_and_gradients(const std::vector<GrfSample>& batch, GrfGradients* grads) const {
    if (batch.empty()) throw std::invalid_argument("GRF: empty batch");
    if (grads) {
        grads->primitives = Vector::Zero(prim_.size());
        grads->attribute = Vector::Zero(attr_.num_params());
        grads->decoder = Vector::Zero(dec_.num_params());
    }
    // Group by transmitter so each group shares one attribute/decoder pass.
    std::vector<std::vector<const GrfSample*>> groups;
    for (const auto& s : batch) {
        if (s.h.rows() != config_.n_tx || s.h.cols() != config_.n_rx)
            throw ShapeMismatch("GRF: measured channel shape does not match the model");
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.front()->p_tx == s.p_tx; });
        if (it == groups.end()) groups.push_back({&s});
        else it->push_back(&s);
    }
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& g : groups) loss += batch_group(g, inv_batch, grads);
    return loss;
}

GrfStepResult GrfModel::train_step(const std::vector<GrfSample>& batch, double lr) {
    if (!(lr >= 0.0)) throw std::invalid_argument("GRF learning rate must be >= 0");
    GrfGradients g;
    GrfStepResult res;
    res.loss = loss_and_gradients(batch, &g);
    res.grad_norm = g.norm();
    if (!std::isfinite(res.grad_norm) || !std::isfinite(res.loss)) {
        res.accepted = false;
        return res;
    }
    if (lr == 0.0) return res;
    prim_opt_.set_lr(lr);
    attr_opt_.set_lr(lr);
    dec_opt_.set_lr(lr);
    prim_opt_.step(prim_, g.primitives);
    attr_opt_.step(attr_.params(), g.attribute);
    dec_opt_.step(dec_.params(), g.decoder);
    for (int i = 0; i < num_primitives(); ++i) {
        auto q = prim_.segment<4>(kPrimitiveParams * i + 3);
        const double n = q.norm();
        if (n > 0.0) q /= n;
        else q = Eigen::Vector4d(1, 0, 0, 0);
    }
    invalidate();
    return res;
}

// ---- checkpoint ---------------------------------------------------------------------------

void GrfModel::save(const std::filesystem::path& path) const {
    Json h;
    h["kind"] = "grf";
    h["config"] = to_json(config_);
    h["channel_scale"] = channel_scale_;
    h["num_primitives"] = config_.num_primitives;
    h["latent_dim"] = config_.latent_dim;
    h["encoding_levels"] = config_.encoding_levels;
    h["attribute_sizes"] = attr_.sizes();
    h["decoder_sizes"] = dec_.sizes();
    h["blocks"] = Json::array();
    std::vector<double> payload;
    auto put = [&](const char* name, const Vector& v) {
        h["blocks"].push_back({{"name", name}, {"size", v.size()}});
        payload.insert(payload.end(), v.data(), v.data() + v.size());
    };
    put("primitives", prim_);
    put("attribute", attr_.params());
    put("decoder", dec_.params());
    const Adam* opts[] = {&prim_opt_, &attr_opt_, &dec_opt_};
    const char* names[] = {"primitives", "attribute", "decoder"};
    h["optimizer_steps"] = prim_opt_.steps();
    for (int k = 0; k < 3; ++k) {
        if (opts[k]->steps() == 0) continue;
        put((std::string(names[k]) + ".m").c_str(), opts[k]->first_moment());
        put((std::string(names[k]) + ".v").c_str(), opts[k]->second_moment());
    }
    write_framed(path, "RGRF", h, payload);
}

GrfModel GrfModel::load(const std::filesystem::path& path) {
    const FramedFile f = read_framed(path, "RGRF");
    GrfModel m(grf_config_from_json(f.header.at("config")));
    m.channel_scale_ = f.header.at("channel_scale").get<double>();
    std::size_t pos = 0;
    std::map<std::string, Vector> blocks;
    for (const auto& b : f.header.at("blocks")) {
        const auto n = b.at("size").get<Eigen::Index>();
        if (pos + static_cast<std::size_t>(n) > f.payload.size()) throw ConfigError("truncated GRF checkpoint");
        blocks[b.at("name").get<std::string>()] = Eigen::Map<const Vector>(f.payload.data() + pos, n);
        pos += static_cast<std::size_t>(n);
    }
    auto take = [&](const std::string& name, Vector& dst) {
        const auto it = blocks.find(name);
        if (it == blocks.end() || it->second.size() != dst.size()) throw ConfigError("GRF checkpoint block mismatch: " + name);
        dst = it->second;
    };
    take("primitives", m.prim_);
    take("attribute", m.attr_.params());
    take("decoder", m.dec_.params());
    const auto steps = f.header.value("optimizer_steps", std::int64_t{0});
    Adam* opts[] = {&m.prim_opt_, &m.attr_opt_, &m.dec_opt_};
    const char* names[] = {"primitives", "attribute", "decoder"};
    for (int k = 0; k < 3; ++k) {
        const auto mi = blocks.find(std::string(names[k]) + ".m");
        const auto vi = blocks.find(std::string(names[k]) + ".v");
        if (mi != blocks.end() && vi != blocks.end()) opts[k]->restore(steps, mi->second, vi->second);
    }
    m.invalidate();
    return m;
}

// ---- free functions -----------------------------------------------------------------------

ChannelMatrix render_channel(const GrfModel& model, const Vec3& p_tx, const Vec3& p_rx) {
    return model.render(p_tx, p_rx);
}

double grf_loss(const GrfModel& model, const Vec3& p_tx, const Vec3& p_rx, const CMatrix& h_meas) {
    if (h_meas.rows() != model.n_tx() || h_meas.cols() != model.n_rx()) throw ShapeMismatch("grf_loss: shape mismatch");
    return (model.render(p_tx, p_rx).h - h_meas).squaredNorm();
}

GrfStepResult grf_train_step(GrfModel& model, const Vec3& p_tx, const Vec3& p_rx, const CMatrix& h_meas, double lr) {
    return model.train_step({GrfSample{p_tx, p_rx, h_meas}}, lr);
}

FitReport fit_scene(GrfModel& model, const std::vector<GrfSample>& train, const FitOptions& options) {
    if (train.empty()) throw std::invalid_argument("fit_scene: empty training set");
    if (options.batch_size < 1) throw ConfigError("fit_scene: batch size must be >= 1");
    FitReport report;
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(options.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::int64_t step = 0;
    for (int e = 0; e < options.epochs; ++e) {
        double lr = options.learning_rate;
        if (options.final_learning_rate > 0.0 && options.epochs > 1)
            lr *= std::pow(options.final_learning_rate / options.learning_rate,
                           static_cast<double>(e) / static_cast<double>(options.epochs - 1));
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
            std::vector<GrfSample> batch;
            batch.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);
            const auto r = model.train_step(batch, lr);
            if (!r.accepted) ++report.rejected_steps;
            report.telemetry.push_back({step++, r.loss, r.grad_norm});
            sum += r.loss * static_cast<double>(end - start);
            seen += end - start;
        }
        report.epoch_loss.push_back(sum / static_cast<double>(seen));
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (options.time_budget_s > 0.0 && elapsed > options.time_budget_s) break;
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::string telemetry_csv(const std::vector<TelemetryRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << "step,loss,grad_norm\n";
    for (const auto& r : rows) os << r.step << ',' << r.loss << ',' << r.grad_norm << '\n';
    return os.str();
}

void fit_init_to_data(GrfConfig& config, double& channel_scale, const std::vector<GrfSample>& train, double margin) {
    if (train.empty()) throw std::invalid_argument("fit_init_to_data: empty training set");
    Vec3 c = Vec3::Zero();
    double power = 0.0;
    Eigen::Index entries = 0;
    for (const auto& s : train) {
        c += s.p_rx;
        power += s.h.squaredNorm();
        entries += s.h.size();
    }
    c /= static_cast<double>(train.size());
    double r = 0.0;
    for (const auto& s : train) r = std::max(r, (s.p_rx - c).norm());
    config.init_center = c;
    config.init_radius = std::max(r * margin, 1e-6);
    channel_scale = std::sqrt(power / static_cast<double>(entries));
}

CMatrix nearest_neighbor_channel(const std::vector<GrfSample>& train, const Vec3& p_tx, const Vec3& p_rx) {
    if (train.empty()) throw std::invalid_argument("nearest_neighbor_channel: empty training set");
    const bool any_same_tx = std::any_of(train.begin(), train.end(), [&](const auto& s) { return s.p_tx == p_tx; });
    const GrfSample* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& s : train) {
        if (any_same_tx && s.p_tx != p_tx) continue;
        const double d = (s.p_rx - p_rx).squaredNorm() + (any_same_tx ? 0.0 : (s.p_tx - p_tx).squaredNorm());
        if (d < best_d) {
            best_d = d;
            best = &s;
        }
    }
    return best->h;
}

Json to_json(const GrfConfig& c) {
    return {{"num_primitives", c.num_primitives}, {"encoding_levels", c.encoding_levels}, {"latent_dim", c.latent_dim},
            {"hidden_units", c.hidden_units},     {"hidden_layers", c.hidden_layers},     {"n_tx", c.n_tx},
            {"n_rx", c.n_rx},                     {"init_center", {c.init_center.x(), c.init_center.y(), c.init_center.z()}},
            {"init_radius", c.init_radius}, {"init_scale", c.init_scale},       {"learning_rate", c.learning_rate},     {"seed", c.seed}};
}

GrfConfig grf_config_from_json(const Json& j) {
    try {
        GrfConfig c;
        c.num_primitives = j.value("num_primitives", c.num_primitives);
        c.encoding_levels = j.value("encoding_levels", c.encoding_levels);
        c.latent_dim = j.value("latent_dim", c.latent_dim);
        c.hidden_units = j.value("hidden_units", c.hidden_units);
        c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
        c.n_tx = j.value("n_tx", c.n_tx);
        c.n_rx = j.value("n_rx", c.n_rx);
        if (j.contains("init_center")) {
            const auto& v = j.at("init_center");
            c.init_center = Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
        }
        c.init_radius = j.value("init_radius", c.init_radius);
        c.init_scale = j.value("init_scale", c.init_scale);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("grf config: ") + e.what());
    }
}

ReconstructionReport run_reconstruction(const ReconstructionConfig& config) {
    if (config.train_links < 1 || config.test_links < 1) throw ConfigError("reconstruction: link counts must be >= 1");
    SceneConfig sc = scene_preset(config.preset, config.scene_seed);
    sc.num_scatterers = config.num_scatterers;
    const Scene scene = generate_scene(sc);

    Rng rng(config.sample_seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    auto draw = [&](int n, double snr_db) {
        std::vector<GrfSample> v;
        for (int k = 0; k < n; ++k) {
            const double dz = config.planar ? 0.0 : u(rng);
            const double dx = u(rng);
            const double dy = u(rng);
            const Vec3 p = config.center + config.side_m * Vec3(dx, dy, dz);
            v.push_back({config.p_tx, p, measure_channel(scene, {config.p_tx, p}, snr_db, rng).h});
        }
        return v;
    };
    const auto train = draw(config.train_links, config.train_snr_db);
    const auto test = draw(config.test_links, kInfDb);

    GrfConfig gc = config.grf;
    gc.n_tx = scene.n_tx();
    gc.n_rx = scene.n_rx();
    double scale = 1.0;
    fit_init_to_data(gc, scale, train, config.init_margin);
    ReconstructionReport out;
    out.model = GrfModel(gc);
    out.model.set_channel_scale(scale);
    out.fit = fit_scene(out.model, train, config.fit);

    double err = 0.0, err_nn = 0.0, ref = 0.0;
    for (const auto& s : test) {
        err += (out.model.render(s.p_tx, s.p_rx).h - s.h).squaredNorm();
        err_nn += (nearest_neighbor_channel(train, s.p_tx, s.p_rx) - s.h).squaredNorm();
        ref += s.h.squaredNorm();
    }
    out.held_out_snr_db = to_db(ref / err);
    out.baseline_snr_db = to_db(ref / err_nn);
    return out;
}

Json to_json(const ReconstructionConfig& c) {
    return {{"preset", to_string(c.preset)},
            {"scene_seed", c.scene_seed},
            {"num_scatterers", c.num_scatterers},
            {"p_tx", to_json(c.p_tx)},
            {"center", to_json(c.center)},
            {"side_m", c.side_m},
            {"planar", c.planar},
            {"train_links", c.train_links},
            {"test_links", c.test_links},
            {"train_snr_db", c.train_snr_db},
            {"sample_seed", c.sample_seed},
            {"init_margin", c.init_margin},
            {"grf", to_json(c.grf)},
            {"fit",
             {{"epochs", c.fit.epochs},
              {"batch_size", c.fit.batch_size},
              {"learning_rate", c.fit.learning_rate},
              {"final_learning_rate", c.fit.final_learning_rate},
              {"seed", c.fit.seed},
              {"time_budget_s", c.fit.time_budget_s}}}};
}

ReconstructionConfig reconstruction_config_from_json(const Json& j) {
    try {
        ReconstructionConfig c;
        if (j.contains("preset")) c.preset = parse_scenario_label(j.at("preset").get<std::string>());
        c.scene_seed = j.value("scene_seed", c.scene_seed);
        c.num_scatterers = j.value("num_scatterers", c.num_scatterers);
        if (j.contains("p_tx")) c.p_tx = vec3_from_json(j.at("p_tx"));
        if (j.contains("center")) c.center = vec3_from_json(j.at("center"));
        c.side_m = j.value("side_m", c.side_m);
        c.planar = j.value("planar", c.planar);
        c.train_links = j.value("train_links", c.train_links);
        c.test_links = j.value("test_links", c.test_links);
        c.train_snr_db = j.value("train_snr_db", c.train_snr_db);
        c.sample_seed = j.value("sample_seed", c.sample_seed);
        c.init_margin = j.value("init_margin", c.init_margin);
        if (j.contains("grf")) c.grf = grf_config_from_json(j.at("grf"));
        if (j.contains("fit")) {
            const auto& f = j.at("fit");
            c.fit.epochs = f.value("epochs", c.fit.epochs);
            c.fit.batch_size = f.value("batch_size", c.fit.batch_size);
            c.fit.learning_rate = f.value("learning_rate", c.fit.learning_rate);
            c.fit.final_learning_rate = f.value("final_learning_rate", c.fit.final_learning_rate);
            c.fit.seed = f.value("seed", c.fit.seed);
            c.fit.time_budget_s = f.value("time_budget_s", c.fit.time_budget_s);
        }
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("reconstruction config: ") + e.what());
    }
}

} // namespace rtwin
