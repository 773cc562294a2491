#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dybat/rng.hpp"
#include "dybat/tensor.hpp"

namespace dybat {

struct NetConfig {
    std::size_t in_channels = 3;
    std::size_t hidden = 16;
    std::size_t classes = 4;
};

/// Two-layer per-slice segmentation head: 3x3 conv (zero-padded, stride 1)
/// -> ReLU -> 1x1 conv -> per-voxel softmax. Small enough to finite-difference
/// every parameter, rich enough to learn intensity-coded synthetic tumors.
///
/// Flat parameter layout: W1 [3,3,C,F], b1 [F], W2 [F,K], b2 [K], row-major.
class TinySegNet {
public:
    /// Zero-initialized parameters (forward yields uniform probabilities).
    explicit TinySegNet(NetConfig cfg);

    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
    TinySegNet(NetConfig cfg, Rng& rng);

    const NetConfig& config() const { return cfg_; }
    std::size_t parameter_count() const { return params_.size(); }

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    /// [d,H,W,C_in] -> [d,H,W,K] per-voxel class probabilities.
    Tensor forward(const Tensor& input) const;

    /// Parameter gradients (same layout as parameters()) for an upstream
    /// gradient w.r.t. the output probabilities. Recomputes the forward
    /// intermediates; the net itself stays const.
    std::vector<double> backward(const Tensor& input, const Tensor& dloss_dprob) const;

    void save_checkpoint(const std::filesystem::path& path) const;
    static TinySegNet load_checkpoint(const std::filesystem::path& path);

private:
    void check_input(const Tensor& input) const;
    Tensor hidden_pre_activation(const Tensor& input) const;

    NetConfig cfg_;
    std::vector<double> params_;

    // offsets into params_
    std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
};

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class AdamState {
public:
    AdamState(std::size_t n, AdamConfig cfg = {});

    void step(std::span<double> params, std::span<const double> grads);

    std::uint64_t step_count() const { return steps_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::uint64_t steps_ = 0;
};

}  // namespace dybat
