#include "dybat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dybat/preprocess.hpp"

namespace dybat {

namespace {

struct Voxel {
    std::int64_t z, y, x;
};

std::vector<Voxel> mask_points(const BinaryMask& m) {
    std::vector<Voxel> pts;
    std::size_t i = 0;
    for (std::size_t z = 0; z < m.dims[0]; ++z) {
        for (std::size_t y = 0; y < m.dims[1]; ++y) {
            for (std::size_t x = 0; x < m.dims[2]; ++x, ++i) {
                if (m.bits[i]) {
                    pts.push_back({static_cast<std::int64_t>(z), static_cast<std::int64_t>(y),
                                   static_cast<std::int64_t>(x)});
                }
            }
        }
    }
    return pts;
}

// Integer squared distances keep the point-to-set minima exact.
std::uint64_t sq_dist(const Voxel& a, const Voxel& b) {
    const std::int64_t dz = a.z - b.z, dy = a.y - b.y, dx = a.x - b.x;
    return static_cast<std::uint64_t>(dz * dz + dy * dy + dx * dx);
}

// min over ys of squared distance from p.
std::uint64_t min_sq_dist(const Voxel& p, const std::vector<Voxel>& ys) {
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (const auto& q : ys) {
        const std::uint64_t d = sq_dist(p, q);
        if (d < best) {
            best = d;
            if (best == 0) break;
        }
    }
    return best;
}

void check_same_dims(const BinaryMask& a, const BinaryMask& b, const char* what) {
    if (a.dims != b.dims) {
        throw ShapeError(std::string(what) + ": mask dims mismatch");
    }
}

void append_directed_distances(const std::vector<Voxel>& xs, const std::vector<Voxel>& ys,
                               std::vector<double>& out) {
    for (const auto& p : xs) {
        out.push_back(std::sqrt(static_cast<double>(min_sq_dist(p, ys))));
    }
}

RegionScore score_region(const BinaryMask& pred, const BinaryMask& truth) {
    const bool pred_empty = pred.empty();
    const bool truth_empty = truth.empty();
    if (truth_empty && pred_empty) return {1.0, 0.0, true};
    if (truth_empty != pred_empty) return {0.0, kHd95Penalty, true};
    return {dice(pred, truth), hd95(pred, truth), false};
}

}  // namespace

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (auto b : bits) n += (b != 0);
    return n;
}

RegionMasks region_masks(const Tensor& labels) {
    if (labels.rank() != 3) {
        throw ShapeError("region_masks expects [D,H,W] labels, got " +
                         Tensor::dims_to_string(labels.dims()));
    }
    const std::array<std::size_t, 3> dims{labels.dim(0), labels.dim(1), labels.dim(2)};
    RegionMasks m{BinaryMask(dims), BinaryMask(dims), BinaryMask(dims)};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double v = labels[i];
        const int lab = static_cast<int>(v);
        if (static_cast<double>(lab) != v || label_to_channel(lab) < 0) {
            throw DataError("region_masks: invalid label value " + std::to_string(v) +
                            " at voxel " + std::to_string(i));
        }
        m.et.bits[i] = (lab == 4);
        m.tc.bits[i] = (lab == 1 || lab == 4);
        m.wt.bits[i] = (lab != 0);
    }
    return m;
}

double dice(const BinaryMask& pred, const BinaryMask& truth) {
    check_same_dims(pred, truth, "dice");
    std::size_t tp = 0, pred_n = 0, truth_n = 0;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        const bool p = pred.bits[i] != 0;
        const bool t = truth.bits[i] != 0;
        tp += (p && t);
        pred_n += p;
        truth_n += t;
    }
    // denominator (TP+FP) + (TP+FN) = |pred| + |truth|
    if (pred_n + truth_n == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(pred_n + truth_n);
}

double directed_hd(const BinaryMask& x, const BinaryMask& y) {
    check_same_dims(x, y, "directed_hd");
    const auto xs = mask_points(x);
    const auto ys = mask_points(y);
    if (xs.empty() || ys.empty()) {
        throw PreconditionError("directed_hd: masks must be nonempty");
    }
    std::uint64_t worst = 0;
    for (const auto& p : xs) {
        worst = std::max(worst, min_sq_dist(p, ys));
    }
    return std::sqrt(static_cast<double>(worst));
}

double bidirectional_hd(const BinaryMask& x, const BinaryMask& y) {
    return std::max(directed_hd(x, y), directed_hd(y, x));
}

double hd95(const BinaryMask& pred, const BinaryMask& truth) {
    check_same_dims(pred, truth, "hd95");
    const auto xs = mask_points(pred);
    const auto ys = mask_points(truth);
    if (xs.empty() || ys.empty()) {
        throw PreconditionError("hd95: masks must be nonempty");
    }
    std::vector<double> dists;
    dists.reserve(xs.size() + ys.size());
    append_directed_distances(xs, ys, dists);
    append_directed_distances(ys, xs, dists);
    std::sort(dists.begin(), dists.end());

    // Linear-interpolation percentile over the combined multiset.
    const double pos = 0.95 * static_cast<double>(dists.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= dists.size()) return dists.back();
    const double frac = pos - static_cast<double>(lo);
    return dists[lo] + frac * (dists[lo + 1] - dists[lo]);
}

RegionReport evaluate_regions(const Tensor& pred_labels, const Tensor& truth_labels) {
    if (pred_labels.dims() != truth_labels.dims()) {
        throw ShapeError("evaluate_regions: label volumes differ in dims");
    }
    const RegionMasks pred = region_masks(pred_labels);
    const RegionMasks truth = region_masks(truth_labels);
    RegionReport report;
    report.et = score_region(pred.et, truth.et);
    report.wt = score_region(pred.wt, truth.wt);
    report.tc = score_region(pred.tc, truth.tc);
    return report;
}

}  // namespace dybat
