#pragma once

#include <array>
#include <vector>

#include "dybat/tensor.hpp"

namespace dybat {

/// Segmentation label values and their one-hot channel order:
/// channel 0 = background (0), 1 = NET/NCR (1), 2 = ED (2), 3 = ET (4).
inline constexpr std::array<int, 4> kLabelValues{0, 1, 2, 4};
inline constexpr std::size_t kNumClasses = 4;

/// Channel index for a label value, or -1 when the value is not a label.
int label_to_channel(int label);
int channel_to_label(std::size_t channel);

struct ZscoreResult {
    Tensor volume;
    /// Set when the volume held no foreground voxels and was returned unchanged.
    bool degenerate = false;
};

/// Standardizes foreground voxels (value > foreground_threshold) to mean 0 and
/// population std 1; everything else is left untouched. Zero-std foreground is
/// shifted to 0 without scaling.
ZscoreResult zscore_normalize(const Tensor& volume, double foreground_threshold = 0.0);

/// [D,H,W] labels in {0,1,2,4} -> [D,H,W,4] one-hot.
Tensor one_hot(const Tensor& labels);

/// Inverse of one_hot for probability maps: argmax over the last axis mapped
/// back to label values. Ties resolve to the lowest channel.
Tensor argmax_labels(const Tensor& probs);

/// Stacks per-modality [D,H,W] volumes into [D,H,W,C] with channel k equal to
/// input k.
Tensor stack_modalities(const std::vector<Tensor>& volumes);

}  // namespace dybat
