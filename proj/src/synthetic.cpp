#include "dybat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dybat/preprocess.hpp"
#include "dybat/rng.hpp"

namespace dybat {

namespace {

// Per-class intensity signature over (modality % 3); keeps every class
// separable from brain tissue and from each other by local intensity alone.
constexpr double kBumpAmplitude = 0.6;
constexpr double kSignature[3][3] = {
    {0.9, 0.2, 0.1},  // NET/NCR (label 1)
    {0.2, 0.9, 0.1},  // ED (label 2)
    {0.3, 0.3, 1.0},  // ET (label 4)
};

double class_bump(int label, std::size_t modality) {
    const std::size_t m = modality % 3;
    switch (label) {
    case 1: return kBumpAmplitude * kSignature[0][m];
    case 2: return kBumpAmplitude * kSignature[1][m];
    case 4: return kBumpAmplitude * kSignature[2][m];
    default: return 0.0;
    }
}

struct SampleOptions {
    bool empty = false;
    bool no_et = false;
    bool tiny = false;
    double noise_mult = 1.0;
};

struct Ellipsoid {
    double cz, cy, cx;
    double rz, ry, rx;

    double u(std::size_t z, std::size_t y, std::size_t x) const {
        const double dz = (static_cast<double>(z) - cz) / rz;
        const double dy = (static_cast<double>(y) - cy) / ry;
        const double dx = (static_cast<double>(x) - cx) / rx;
        return dz * dz + dy * dy + dx * dx;
    }
};

// Nearest voxel to a fractional center, clamped into the volume.
std::size_t nearest(double c, std::size_t dim) {
    const auto i = static_cast<long long>(std::llround(c));
    return static_cast<std::size_t>(std::clamp<long long>(i, 0, static_cast<long long>(dim) - 1));
}

VolumeSample generate_sample(const GeneratorSpec& spec, const std::string& patient_id,
                             const SampleOptions& opt, Rng rng) {
    const std::size_t D = spec.depth, H = spec.height, W = spec.width;
    const std::size_t C = spec.modalities.size();

    const Ellipsoid brain{static_cast<double>(D - 1) / 2.0,
                          static_cast<double>(H - 1) / 2.0,
                          static_cast<double>(W - 1) / 2.0,
                          0.50 * static_cast<double>(D),
                          0.47 * static_cast<double>(H),
                          0.47 * static_cast<double>(W)};

    // Tumor geometry: nested WT > TC > ET ellipsoids around a shared center.
    const double cz = rng.uniform(0.35, 0.65) * static_cast<double>(D - 1);
    const double cy = rng.uniform(0.35, 0.65) * static_cast<double>(H - 1);
    const double cx = rng.uniform(0.35, 0.65) * static_cast<double>(W - 1);

    double s_wt = rng.uniform(0.45, 0.62);
    double s_tc = rng.uniform(0.60, 0.75);
    double s_et = rng.uniform(0.55, 0.70);
    if (opt.tiny) {
        s_wt *= 0.45;
        s_tc = 0.7;
        s_et = 0.5;
    }
    const Ellipsoid wt{cz, cy, cx, std::max(1.2, s_wt * 0.5 * static_cast<double>(D)),
                       std::max(1.6, s_wt * 0.5 * static_cast<double>(H)),
                       std::max(1.6, s_wt * 0.5 * static_cast<double>(W))};
    const Ellipsoid tc{cz, cy, cx, wt.rz * s_tc, wt.ry * s_tc, wt.rx * s_tc};
    const Ellipsoid et{cz, cy, cx, tc.rz * s_et, tc.ry * s_et, tc.rx * s_et};

    Tensor labels({D, H, W});
    if (!opt.empty) {
        for (std::size_t z = 0; z < D; ++z) {
            for (std::size_t y = 0; y < H; ++y) {
                for (std::size_t x = 0; x < W; ++x) {
                    if (brain.u(z, y, x) > 1.0) continue;
                    int label = 0;
                    if (!opt.no_et && !opt.tiny && et.u(z, y, x) <= 1.0) label = 4;
                    else if (tc.u(z, y, x) <= 1.0) label = 1;
                    else if (wt.u(z, y, x) <= 1.0) label = 2;
                    labels[labels.offset3(z, y, x)] = static_cast<double>(label);
                }
            }
        }
        // Rasterization at desk-scale dims can miss thin shells; pin one voxel
        // per requested region so WT/TC nesting is always exercised.
        const std::size_t center =
            labels.offset3(nearest(cz, D), nearest(cy, H), nearest(cx, W));
        if (opt.tiny) {
            labels[center] = 4.0;  // single-voxel ET
        } else if (!opt.no_et) {
            bool has_et = false;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == 4.0) { has_et = true; break; }
            }
            if (!has_et) labels[center] = 4.0;
        } else {
            labels[center] = 1.0;
        }
    }

    Tensor input({D, H, W, C});
    const double noise = spec.noise * opt.noise_mult;
    for (std::size_t z = 0; z < D; ++z) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                if (brain.u(z, y, x) > 1.0) continue;  // outside brain stays exactly 0
                const int label = static_cast<int>(labels[labels.offset3(z, y, x)]);
                for (std::size_t m = 0; m < C; ++m) {
                    const double base = 0.5 + 0.15 * static_cast<double>(m);
                    input[input.offset4(z, y, x, m)] =
                        base + class_bump(label, m) + noise * rng.normal();
                }
            }
        }
    }

    return VolumeSample{patient_id, std::move(input), std::move(labels)};
}

void permute_labels(Tensor& labels) {
    // Fixed derangement of the label alphabet: 0->1, 1->2, 2->4, 4->0.
    for (std::size_t i = 0; i < labels.size(); ++i) {
        switch (static_cast<int>(labels[i])) {
        case 0: labels[i] = 1.0; break;
        case 1: labels[i] = 2.0; break;
        case 2: labels[i] = 4.0; break;
        case 4: labels[i] = 0.0; break;
        default: break;
        }
    }
}

std::string patient_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%03zu", index);
    return buf;
}

}  // namespace

void GeneratorSpec::validate() const {
    if (num_samples < 1) throw ConfigError("generator: num_samples must be >= 1");
    if (modalities.empty()) throw ConfigError("generator: at least one modality required");
    if (noise < 0.0) throw ConfigError("generator: noise must be >= 0");
    if (depth < 2 || height < 8 || width < 8) {
        throw DataError("generator: dims too small to contain the nested tumor geometry "
                        "(need depth >= 2, height >= 8, width >= 8), got " +
                        Tensor::dims_to_string({depth, height, width}));
    }
    const std::size_t special = injections.label_permutation + injections.rare_class_absent +
                                injections.tiny_region + injections.heavy_noise + empty_samples;
    if (special > num_samples) {
        throw ConfigError("generator: injections plus empty samples exceed num_samples");
    }
}

SyntheticCorpus generate_synthetic_corpus(const GeneratorSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    // Disjoint injection assignment via one shuffle of the sample indices.
    std::vector<std::size_t> order(spec.num_samples);
    std::iota(order.begin(), order.end(), 0);
    rng.fork(0xA551).shuffle(order);

    enum class Kind { plain, permuted, no_et, tiny, noisy, empty };
    std::vector<Kind> kind(spec.num_samples, Kind::plain);
    std::size_t cursor = 0;
    auto assign = [&](std::size_t count, Kind k) {
        for (std::size_t i = 0; i < count; ++i) kind[order[cursor++]] = k;
    };
    assign(spec.injections.label_permutation, Kind::permuted);
    assign(spec.injections.rare_class_absent, Kind::no_et);
    assign(spec.injections.tiny_region, Kind::tiny);
    assign(spec.injections.heavy_noise, Kind::noisy);
    assign(spec.empty_samples, Kind::empty);

    SyntheticCorpus corpus;
    corpus.manifest.version = 1;
    corpus.manifest.synthetic = true;
    corpus.manifest.seed = spec.seed;

    for (std::size_t i = 0; i < spec.num_samples; ++i) {
        const std::string id = patient_name(i);
        SampleOptions opt;
        switch (kind[i]) {
        case Kind::no_et: opt.no_et = true; break;
        case Kind::tiny: opt.tiny = true; break;
        case Kind::noisy: opt.noise_mult = 10.0; break;
        case Kind::empty: opt.empty = true; break;
        default: break;
        }

        VolumeSample sample = generate_sample(spec, id, opt, rng.fork(i));
        if (kind[i] == Kind::permuted) permute_labels(sample.labels);
        if (kind[i] != Kind::plain && kind[i] != Kind::empty) {
            corpus.manifest.hard_ids.push_back(id);
        }

        ManifestEntry entry;
        entry.patient_id = id;
        entry.dims = {spec.depth, spec.height, spec.width};
        entry.modalities = spec.modalities;
        entry.input_path = id + "/input.raw";
        entry.labels_path = id + "/labels.raw";
        corpus.manifest.samples.push_back(std::move(entry));
        corpus.samples.push_back(std::move(sample));
    }
    std::sort(corpus.manifest.hard_ids.begin(), corpus.manifest.hard_ids.end());
    return corpus;
}

}  // namespace dybat
