#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dybat/tensor.hpp"

namespace dybat {

/// One patient: stacked input intensities and the label volume.
struct VolumeSample {
    std::string patient_id;
    Tensor input;   // [D,H,W,C_in]
    Tensor labels;  // [D,H,W], values in {0,1,2,4}

    std::size_t depth() const { return labels.dim(0); }
};

/// A frozen contiguous slab of one sample's slices; the schedulable and
/// loss-tracked unit. batch_id is unique and stable for the whole run.
struct BatchUnit {
    int batch_id = 0;
    std::string patient_id;
    std::size_t slice_begin = 0;
    std::size_t slice_end = 0;  // half-open [begin, end)
    Tensor input;               // [d,H,W,C_in]
    Tensor target;              // [d,H,W,4] one-hot
};

/// Splits a sample along the slice axis into ceil(D / batch_size) units with
/// contiguous ascending ranges; all but possibly the last hold batch_size
/// slices. Ids are assigned sequentially starting at first_batch_id.
std::vector<BatchUnit> partition_batches(const VolumeSample& sample, std::size_t batch_size,
                                         int first_batch_id = 0);

/// Partitions every sample, assigning globally unique ids in corpus order.
std::vector<BatchUnit> partition_corpus(const std::vector<VolumeSample>& samples,
                                        std::size_t batch_size);

struct ManifestEntry {
    std::string patient_id;
    std::array<std::size_t, 3> dims{};  // D,H,W
    std::vector<std::string> modalities;
    std::string input_path;   // relative to the corpus dir
    std::string labels_path;
};

struct CorpusManifest {
    int version = 1;
    std::vector<ManifestEntry> samples;
    bool synthetic = false;
    std::uint64_t seed = 0;
    std::vector<std::string> hard_ids;  // injected hard-sample patient ids
};

/// Writes manifest.json plus per-sample input.raw (little-endian float32,
/// row-major [D,H,W,C]) and labels.raw (uint8 in {0,1,2,4}).
void write_corpus(const std::vector<VolumeSample>& samples, const CorpusManifest& manifest,
                  const std::filesystem::path& dir);

/// Loads and validates manifest.json: files must exist with the declared sizes.
CorpusManifest load_manifest(const std::filesystem::path& dir);

VolumeSample load_sample(const std::filesystem::path& dir, const ManifestEntry& entry);

std::vector<VolumeSample> load_corpus(const std::filesystem::path& dir,
                                      const CorpusManifest& manifest);

/// Z-scores each modality channel of the raw stacked input (foreground only)
/// and returns the sample ready for batching.
VolumeSample preprocess_sample(const VolumeSample& raw, double foreground_threshold = 0.0);

}  // namespace dybat
