#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dybat/tensor.hpp"

namespace dybat {

/// BraTS online-evaluator penalty for a region predicted against empty truth
/// (or missed entirely).
inline constexpr double kHd95Penalty = 373.12866;

/// Voxel membership over a [D,H,W] grid with 1 mm isotropic spacing.
struct BinaryMask {
    std::array<std::size_t, 3> dims{};
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    explicit BinaryMask(std::array<std::size_t, 3> d)
        : dims(d), bits(d[0] * d[1] * d[2], 0) {}

    std::size_t count() const;
    bool empty() const { return count() == 0; }
};

struct RegionMasks {
    BinaryMask et;  // label {4}
    BinaryMask tc;  // labels {1,4}
    BinaryMask wt;  // labels {1,2,4}
};

/// Region masks from a [D,H,W] label volume.
RegionMasks region_masks(const Tensor& labels);

/// 2*TP / ((TP+FP) + (TP+FN)); 1.0 when both masks are empty.
double dice(const BinaryMask& pred, const BinaryMask& truth);

/// max over x in X of min over y in Y of Euclidean distance (mm).
/// Both masks must be nonempty; callers apply penalty rules first.
double directed_hd(const BinaryMask& x, const BinaryMask& y);

/// max(directed_hd(X,Y), directed_hd(Y,X)).
double bidirectional_hd(const BinaryMask& x, const BinaryMask& y);

/// 95th percentile (linear interpolation) of the combined multiset of
/// directed point-to-set distances from both directions.
double hd95(const BinaryMask& pred, const BinaryMask& truth);

struct RegionScore {
    double dice = 0.0;
    double hd95 = 0.0;
    bool penalty_applied = false;
};

struct RegionReport {
    RegionScore et;
    RegionScore wt;
    RegionScore tc;
};

/// Per region: both masks empty -> dice 1.0 / hd95 0.0 (penalty_applied set);
/// exactly one empty -> dice 0.0 / hd95 373.12866 (penalty_applied set);
/// otherwise dice and hd95 computed normally.
RegionReport evaluate_regions(const Tensor& pred_labels, const Tensor& truth_labels);

}  // namespace dybat
