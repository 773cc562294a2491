#include "dybat/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dybat/error.hpp"

namespace dybat {

namespace {

std::size_t param_total(const NetConfig& c) {
    return 9 * c.in_channels * c.hidden + c.hidden + c.hidden * c.classes + c.classes;
}

}  // namespace

TinySegNet::TinySegNet(NetConfig cfg) : cfg_(cfg), params_(param_total(cfg), 0.0) {
    if (cfg_.in_channels == 0 || cfg_.hidden == 0 || cfg_.classes == 0) {
        throw ConfigError("TinySegNet: channel counts must be positive");
    }
    w1_ = 0;
    b1_ = 9 * cfg_.in_channels * cfg_.hidden;
    w2_ = b1_ + cfg_.hidden;
    b2_ = w2_ + cfg_.hidden * cfg_.classes;
}

TinySegNet::TinySegNet(NetConfig cfg, Rng& rng) : TinySegNet(cfg) {
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(9 * cfg_.in_channels));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));
    for (std::size_t i = w1_; i < b1_; ++i) params_[i] = rng.uniform(-bound1, bound1);
    for (std::size_t i = b1_; i < w2_; ++i) params_[i] = rng.uniform(-bound1, bound1);
    for (std::size_t i = w2_; i < b2_; ++i) params_[i] = rng.uniform(-bound2, bound2);
    for (std::size_t i = b2_; i < params_.size(); ++i) params_[i] = rng.uniform(-bound2, bound2);
}

void TinySegNet::check_input(const Tensor& input) const {
    if (input.rank() != 4 || input.dim(3) != cfg_.in_channels) {
        throw ShapeError("TinySegNet: expected input [d,H,W," +
                         std::to_string(cfg_.in_channels) + "], got " +
                         Tensor::dims_to_string(input.dims()));
    }
}

Tensor TinySegNet::hidden_pre_activation(const Tensor& input) const {
    const std::size_t d = input.dim(0), H = input.dim(1), W = input.dim(2);
    const std::size_t C = cfg_.in_channels, F = cfg_.hidden;
    Tensor pre({d, H, W, F});

    const double* w1 = params_.data() + w1_;
    const double* b1 = params_.data() + b1_;
    for (std::size_t s = 0; s < d; ++s) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                double* out = pre.data() + pre.offset4(s, y, x, 0);
                for (std::size_t f = 0; f < F; ++f) out[f] = b1[f];
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::size_t yy = y + ky;
                    if (yy < 1 || yy > H) continue;  // zero padding
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::size_t xx = x + kx;
                        if (xx < 1 || xx > W) continue;
                        const double* in = input.data() + input.offset4(s, yy - 1, xx - 1, 0);
                        const double* w = w1 + ((ky * 3 + kx) * C) * F;
                        for (std::size_t c = 0; c < C; ++c) {
                            const double v = in[c];
                            const double* wc = w + c * F;
                            for (std::size_t f = 0; f < F; ++f) out[f] += v * wc[f];
                        }
                    }
                }
            }
        }
    }
    return pre;
}

Tensor TinySegNet::forward(const Tensor& input) const {
    check_input(input);
    const std::size_t d = input.dim(0), H = input.dim(1), W = input.dim(2);
    const std::size_t F = cfg_.hidden, K = cfg_.classes;

    Tensor pre = hidden_pre_activation(input);
    Tensor probs({d, H, W, K});

    const double* w2 = params_.data() + w2_;
    const double* b2 = params_.data() + b2_;
    std::vector<double> logits(K);
    const std::size_t voxels = d * H * W;
    for (std::size_t v = 0; v < voxels; ++v) {
        const double* h = pre.data() + v * F;
        for (std::size_t k = 0; k < K; ++k) logits[k] = b2[k];
        for (std::size_t f = 0; f < F; ++f) {
            const double a = h[f] > 0.0 ? h[f] : 0.0;  // ReLU
            if (a == 0.0) continue;
            const double* wf = w2 + f * K;
            for (std::size_t k = 0; k < K; ++k) logits[k] += a * wf[k];
        }
        // stable softmax
        double mx = logits[0];
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, logits[k]);
        double sum = 0.0;
        double* p = probs.data() + v * K;
        for (std::size_t k = 0; k < K; ++k) {
            p[k] = std::exp(logits[k] - mx);
            sum += p[k];
        }
        for (std::size_t k = 0; k < K; ++k) p[k] /= sum;
    }
    return probs;
}

std::vector<double> TinySegNet::backward(const Tensor& input, const Tensor& dloss_dprob) const {
    check_input(input);
    const std::size_t d = input.dim(0), H = input.dim(1), W = input.dim(2);
    const std::size_t C = cfg_.in_channels, F = cfg_.hidden, K = cfg_.classes;
    if (dloss_dprob.rank() != 4 || dloss_dprob.dim(0) != d || dloss_dprob.dim(1) != H ||
        dloss_dprob.dim(2) != W || dloss_dprob.dim(3) != K) {
        throw ShapeError("TinySegNet::backward: upstream gradient dims " +
                         Tensor::dims_to_string(dloss_dprob.dims()) + " do not match output");
    }

    const Tensor pre = hidden_pre_activation(input);
    const Tensor probs = forward(input);

    std::vector<double> grads(params_.size(), 0.0);
    double* dw1 = grads.data() + w1_;
    double* db1 = grads.data() + b1_;
    double* dw2 = grads.data() + w2_;
    double* db2 = grads.data() + b2_;
    const double* w2 = params_.data() + w2_;

    const std::size_t voxels = d * H * W;
    std::vector<double> dlogits(K);
    Tensor dpre({d, H, W, F});

    for (std::size_t v = 0; v < voxels; ++v) {
        const double* p = probs.data() + v * K;
        const double* up = dloss_dprob.data() + v * K;
        // softmax backward: dz_k = p_k * (up_k - sum_j up_j p_j)
        double dot = 0.0;
        for (std::size_t k = 0; k < K; ++k) dot += up[k] * p[k];
        for (std::size_t k = 0; k < K; ++k) dlogits[k] = p[k] * (up[k] - dot);

        const double* h = pre.data() + v * F;
        double* dh = dpre.data() + v * F;
        for (std::size_t k = 0; k < K; ++k) db2[k] += dlogits[k];
        for (std::size_t f = 0; f < F; ++f) {
            const double a = h[f] > 0.0 ? h[f] : 0.0;
            double acc = 0.0;
            const double* wf = w2 + f * K;
            double* dwf = dw2 + f * K;
            for (std::size_t k = 0; k < K; ++k) {
                dwf[k] += a * dlogits[k];
                acc += wf[k] * dlogits[k];
            }
            dh[f] = h[f] > 0.0 ? acc : 0.0;  // ReLU gate
        }
    }

    // conv1 parameter gradients
    for (std::size_t s = 0; s < d; ++s) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                const double* dh = dpre.data() + dpre.offset4(s, y, x, 0);
                for (std::size_t f = 0; f < F; ++f) db1[f] += dh[f];
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::size_t yy = y + ky;
                    if (yy < 1 || yy > H) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::size_t xx = x + kx;
                        if (xx < 1 || xx > W) continue;
                        const double* in = input.data() + input.offset4(s, yy - 1, xx - 1, 0);
                        double* dw = dw1 + ((ky * 3 + kx) * C) * F;
                        for (std::size_t c = 0; c < C; ++c) {
                            const double v = in[c];
                            if (v == 0.0) continue;
                            double* dwc = dw + c * F;
                            for (std::size_t f = 0; f < F; ++f) dwc[f] += v * dh[f];
                        }
                    }
                }
            }
        }
    }
    return grads;
}

void TinySegNet::save_checkpoint(const std::filesystem::path& path) const {
    nlohmann::json header = {{"format", 1},
                             {"in_channels", cfg_.in_channels},
                             {"hidden", cfg_.hidden},
                             {"classes", cfg_.classes},
                             {"param_count", params_.size()}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    const std::uint64_t len = header_str.size();
    char len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((len >> (8 * i)) & 0xFF);
    out.write(len_bytes, 8);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (double p : params_) {
        std::uint64_t bits;
        std::memcpy(&bits, &p, 8);
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
        out.write(b, 8);
    }
    if (!out) throw IoError("short write: " + path.string());
}

TinySegNet TinySegNet::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());

    char len_bytes[8];
    in.read(len_bytes, 8);
    if (!in) throw DataError("checkpoint truncated: " + path.string());
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) {
        len |= static_cast<std::uint64_t>(static_cast<unsigned char>(len_bytes[i])) << (8 * i);
    }
    if (len > (1u << 20)) throw DataError("checkpoint header implausibly large");

    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint truncated: " + path.string());

    NetConfig cfg;
    std::size_t count = 0;
    try {
        const auto header = nlohmann::json::parse(header_str);
        cfg.in_channels = header.at("in_channels").get<std::size_t>();
        cfg.hidden = header.at("hidden").get<std::size_t>();
        cfg.classes = header.at("classes").get<std::size_t>();
        count = header.at("param_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint header parse error: " + std::string(e.what()));
    }

    TinySegNet net(cfg);
    if (count != net.parameter_count()) {
        throw DataError("checkpoint param_count does not match config");
    }
    for (std::size_t i = 0; i < count; ++i) {
        char b[8];
        in.read(b, 8);
        if (!in) throw DataError("checkpoint truncated: " + path.string());
        std::uint64_t bits = 0;
        for (int j = 0; j < 8; ++j) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[j])) << (8 * j);
        }
        double p;
        std::memcpy(&p, &bits, 8);
        net.params_[i] = p;
    }
    return net;
}

AdamState::AdamState(std::size_t n, AdamConfig cfg)
    : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeError("AdamState::step: parameter/gradient length mismatch");
    }
    ++steps_;
    const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const double g = grads[i];
        if (!std::isfinite(g)) {
            throw NumericError("Adam: non-finite gradient at parameter " + std::to_string(i));
        }
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m_[i] / b1t;
        const double v_hat = v_[i] / b2t;
        params[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
}

}  // namespace dybat
