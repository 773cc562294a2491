#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dybat/corpus.hpp"

namespace dybat {

/// Hard-sample injections. Injected patients are disjoint and recorded in the
/// manifest's hard_ids.
struct InjectionCounts {
    std::size_t label_permutation = 0;  // labels cyclically remapped; input untouched
    std::size_t rare_class_absent = 0;  // no ET voxels anywhere in the sample
    std::size_t tiny_region = 0;        // few-voxel tumor, single-voxel ET
    std::size_t heavy_noise = 0;        // 10x intensity noise
};

struct GeneratorSpec {
    std::size_t num_samples = 12;
    std::size_t depth = 8;
    std::size_t height = 16;
    std::size_t width = 16;
    std::vector<std::string> modalities = {"FLAIR", "T1CE", "T2"};
    double noise = 0.05;
    std::uint64_t seed = 7;
    /// Tumor-free samples (labels all background); not counted as hard.
    std::size_t empty_samples = 0;
    InjectionCounts injections;

    void validate() const;
};

struct SyntheticCorpus {
    CorpusManifest manifest;
    std::vector<VolumeSample> samples;
};

/// Deterministic corpus from (spec, spec.seed): nested ellipsoidal tumor
/// regions (ET inside TC inside WT) over a brain-tissue ellipsoid, with
/// class-dependent intensity signatures per modality.
SyntheticCorpus generate_synthetic_corpus(const GeneratorSpec& spec);

}  // namespace dybat
