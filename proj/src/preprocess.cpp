#include "dybat/preprocess.hpp"

#include <cmath>
#include <string>

namespace dybat {

int label_to_channel(int label) {
    switch (label) {
    case 0: return 0;
    case 1: return 1;
    case 2: return 2;
    case 4: return 3;
    default: return -1;
    }
}

int channel_to_label(std::size_t channel) {
    return kLabelValues.at(channel);
}

ZscoreResult zscore_normalize(const Tensor& volume, double foreground_threshold) {
    if (!volume.all_finite()) {
        throw DataError("zscore_normalize: volume contains non-finite values");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < volume.size(); ++i) {
        if (volume[i] > foreground_threshold) {
            sum += volume[i];
            ++count;
        }
    }
    if (count == 0) {
        return {volume, true};
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t i = 0; i < volume.size(); ++i) {
        if (volume[i] > foreground_threshold) {
            const double d = volume[i] - mean;
            sq += d * d;
        }
    }
    const double std_dev = std::sqrt(sq / static_cast<double>(count));

    Tensor out = volume;
    if (std_dev == 0.0) {
        // Constant foreground: shift to zero, no scaling.
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (volume[i] > foreground_threshold) out[i] = 0.0;
        }
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (volume[i] > foreground_threshold) out[i] = (volume[i] - mean) / std_dev;
        }
    }
    return {std::move(out), false};
}

Tensor one_hot(const Tensor& labels) {
    if (labels.rank() != 3) {
        throw ShapeError("one_hot expects [D,H,W] labels, got " +
                         Tensor::dims_to_string(labels.dims()));
    }
    std::vector<std::size_t> out_dims = labels.dims();
    out_dims.push_back(kNumClasses);
    Tensor out(out_dims);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double v = labels[i];
        const int lab = static_cast<int>(v);
        const int ch = (static_cast<double>(lab) == v) ? label_to_channel(lab) : -1;
        if (ch < 0) {
            throw DataError("one_hot: invalid label value " + std::to_string(v) +
                            " at voxel " + std::to_string(i));
        }
        out[i * kNumClasses + static_cast<std::size_t>(ch)] = 1.0;
    }
    return out;
}

Tensor argmax_labels(const Tensor& probs) {
    if (probs.rank() != 4 || probs.dims().back() != kNumClasses) {
        throw ShapeError("argmax_labels expects [D,H,W," + std::to_string(kNumClasses) +
                         "], got " + Tensor::dims_to_string(probs.dims()));
    }
    std::vector<std::size_t> out_dims(probs.dims().begin(), probs.dims().end() - 1);
    Tensor out(out_dims);
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_v = probs[i * kNumClasses];
        for (std::size_t k = 1; k < kNumClasses; ++k) {
            const double v = probs[i * kNumClasses + k];
            if (v > best_v) {
                best_v = v;
                best = k;
            }
        }
        out[i] = static_cast<double>(channel_to_label(best));
    }
    return out;
}

Tensor stack_modalities(const std::vector<Tensor>& volumes) {
    if (volumes.empty()) {
        throw ShapeError("stack_modalities: no volumes given");
    }
    const auto& dims = volumes.front().dims();
    if (dims.size() != 3) {
        throw ShapeError("stack_modalities expects [D,H,W] volumes, got " +
                         Tensor::dims_to_string(dims));
    }
    for (const auto& v : volumes) {
        if (v.dims() != dims) {
            throw ShapeError("stack_modalities: dims mismatch " + Tensor::dims_to_string(dims) +
                             " vs " + Tensor::dims_to_string(v.dims()));
        }
    }
    const std::size_t channels = volumes.size();
    Tensor out({dims[0], dims[1], dims[2], channels});
    const std::size_t voxels = volumes.front().size();
    for (std::size_t c = 0; c < channels; ++c) {
        const double* src = volumes[c].data();
        double* dst = out.data();
        for (std::size_t i = 0; i < voxels; ++i) {
            dst[i * channels + c] = src[i];
        }
    }
    return out;
}

}  // namespace dybat
