#pragma once

#include <string>
#include <vector>

#include "dybat/tensor.hpp"

namespace dybat {

enum class LossVariant { focal, hybrid_focal, mean_fp_focal };

LossVariant loss_variant_from_string(const std::string& name);
std::string to_string(LossVariant v);

struct LossConfig {
    double gamma = 2.0;      // focusing exponent
    double alpha_fg = 0.8;   // weight on the positive (y=1) term
    double alpha_bg = 0.2;   // weight on the negative (y=0) term
    double c_weight = 10.0;  // scale on the FP term in the hybrid variant
    LossVariant variant = LossVariant::hybrid_focal;
    double epsilon = 1e-7;   // probability clamp floor for the logs

    void validate() const;
};

struct LossValue {
    double total = 0.0;
    std::vector<double> per_class;     // channel contributions, voxel-mean each
    std::vector<int> fp_term_applied;  // channels where an absent-class FP term was used
};

/// Per voxel and channel, with p clamped to [eps, 1-eps]:
///   alpha_fg * y * (1-p)^gamma * (-log p) + alpha_bg * (1-y) * p^gamma * (-log(1-p))
/// summed per channel and averaged over voxels.
LossValue focal_loss(const Tensor& target, const Tensor& pred, const LossConfig& cfg);

/// Only the negative term, unweighted: (1-y) * p^gamma * (-log(1-p)).
/// Identical to focal_loss with alpha_fg=0, alpha_bg=1.
LossValue false_positive_focal_loss(const Tensor& target, const Tensor& pred,
                                    const LossConfig& cfg);

/// (1/n) * sum over voxels of (1-y) * p, per channel.
LossValue mean_false_positive_loss(const Tensor& target, const Tensor& pred);

/// Channel-conditional composite for a batch target: tumor channels with zero
/// positive voxels contribute their FP term (C * FPFL for hybrid_focal, MFPL
/// for mean_fp_focal) and are recorded in fp_term_applied; all other channels
/// (background always) contribute standard focal loss.
LossValue batch_conditional_loss(const Tensor& target, const Tensor& pred,
                                 const LossConfig& cfg);

Tensor focal_loss_gradient(const Tensor& target, const Tensor& pred, const LossConfig& cfg);
Tensor false_positive_focal_loss_gradient(const Tensor& target, const Tensor& pred,
                                          const LossConfig& cfg);
Tensor mean_false_positive_loss_gradient(const Tensor& target, const Tensor& pred);
Tensor batch_conditional_loss_gradient(const Tensor& target, const Tensor& pred,
                                       const LossConfig& cfg);

/// Dispatch on cfg.variant: plain focal, or the batch-conditional composite.
LossValue evaluate_loss(const Tensor& target, const Tensor& pred, const LossConfig& cfg);
Tensor loss_gradient(const Tensor& target, const Tensor& pred, const LossConfig& cfg);

}  // namespace dybat
