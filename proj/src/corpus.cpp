#include "dybat/corpus.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dybat/preprocess.hpp"

namespace dybat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raw files are pinned little-endian; byte-swap on big-endian hosts.
std::uint32_t to_le32(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

void write_input_raw(const fs::path& path, const Tensor& input) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    std::vector<std::uint32_t> buf(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const float f = static_cast<float>(input[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof(bits));
        buf[i] = to_le32(bits);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
    if (!out) throw IoError("short write: " + path.string());
}

void write_labels_raw(const fs::path& path, const Tensor& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    std::vector<std::uint8_t> buf(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        buf[i] = static_cast<std::uint8_t>(labels[i]);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write: " + path.string());
}

std::vector<char> read_exact(const fs::path& path, std::size_t expected_bytes) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open: " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size != expected_bytes) {
        throw DataError("file size mismatch for " + path.string() + ": expected " +
                        std::to_string(expected_bytes) + " bytes, found " + std::to_string(size));
    }
    std::vector<char> buf(size);
    in.seekg(0);
    in.read(buf.data(), static_cast<std::streamsize>(size));
    if (!in) throw IoError("short read: " + path.string());
    return buf;
}

}  // namespace

std::vector<BatchUnit> partition_batches(const VolumeSample& sample, std::size_t batch_size,
                                         int first_batch_id) {
    if (batch_size < 1) throw PreconditionError("partition_batches: batch_size must be >= 1");
    const std::size_t depth = sample.depth();
    const auto& in_dims = sample.input.dims();
    const std::size_t height = in_dims[1], width = in_dims[2], channels = in_dims[3];
    const Tensor target_full = one_hot(sample.labels);

    std::vector<BatchUnit> units;
    int id = first_batch_id;
    for (std::size_t begin = 0; begin < depth; begin += batch_size, ++id) {
        const std::size_t end = std::min(begin + batch_size, depth);
        const std::size_t d = end - begin;
        BatchUnit unit;
        unit.batch_id = id;
        unit.patient_id = sample.patient_id;
        unit.slice_begin = begin;
        unit.slice_end = end;

        const std::size_t in_slice = height * width * channels;
        unit.input = Tensor({d, height, width, channels},
                            std::vector<double>(sample.input.data() + begin * in_slice,
                                                sample.input.data() + end * in_slice));
        const std::size_t tgt_slice = height * width * kNumClasses;
        unit.target = Tensor({d, height, width, kNumClasses},
                             std::vector<double>(target_full.data() + begin * tgt_slice,
                                                 target_full.data() + end * tgt_slice));
        units.push_back(std::move(unit));
    }
    return units;
}

std::vector<BatchUnit> partition_corpus(const std::vector<VolumeSample>& samples,
                                        std::size_t batch_size) {
    std::vector<BatchUnit> all;
    int next_id = 0;
    for (const auto& sample : samples) {
        auto units = partition_batches(sample, batch_size, next_id);
        next_id += static_cast<int>(units.size());
        for (auto& u : units) all.push_back(std::move(u));
    }
    return all;
}

void write_corpus(const std::vector<VolumeSample>& samples, const CorpusManifest& manifest,
                  const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create corpus dir: " + dir.string());
    }
    if (samples.size() != manifest.samples.size()) {
        throw DataError("write_corpus: manifest lists " + std::to_string(manifest.samples.size()) +
                        " samples but " + std::to_string(samples.size()) + " were given");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& entry = manifest.samples[i];
        fs::create_directories(dir / fs::path(entry.input_path).parent_path(), ec);
        write_input_raw(dir / entry.input_path, samples[i].input);
        write_labels_raw(dir / entry.labels_path, samples[i].labels);
    }

    json j;
    j["version"] = manifest.version;
    j["samples"] = json::array();
    for (const auto& e : manifest.samples) {
        j["samples"].push_back({{"patient_id", e.patient_id},
                                {"dims", {e.dims[0], e.dims[1], e.dims[2]}},
                                {"modalities", e.modalities},
                                {"input_path", e.input_path},
                                {"labels_path", e.labels_path}});
    }
    if (manifest.synthetic) {
        j["generator"] = {{"seed", manifest.seed}, {"hard_ids", manifest.hard_ids}};
    }
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest.json in " + dir.string());
    out << j.dump(2) << "\n";
}

CorpusManifest load_manifest(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("manifest.json parse error: " + std::string(e.what()));
    }

    CorpusManifest m;
    try {
        m.version = j.at("version").get<int>();
        for (const auto& s : j.at("samples")) {
            ManifestEntry e;
            e.patient_id = s.at("patient_id").get<std::string>();
            const auto dims = s.at("dims").get<std::vector<std::size_t>>();
            if (dims.size() != 3) {
                throw DataError("manifest entry " + e.patient_id + ": dims must have 3 entries");
            }
            e.dims = {dims[0], dims[1], dims[2]};
            e.modalities = s.at("modalities").get<std::vector<std::string>>();
            e.input_path = s.at("input_path").get<std::string>();
            e.labels_path = s.at("labels_path").get<std::string>();
            m.samples.push_back(std::move(e));
        }
        if (j.contains("generator")) {
            m.synthetic = true;
            m.seed = j["generator"].at("seed").get<std::uint64_t>();
            m.hard_ids = j["generator"].at("hard_ids").get<std::vector<std::string>>();
        }
    } catch (const json::exception& e) {
        throw DataError("manifest.json schema error: " + std::string(e.what()));
    }

    // Validate the referenced files up front.
    for (const auto& e : m.samples) {
        const std::size_t voxels = e.dims[0] * e.dims[1] * e.dims[2];
        const fs::path input_path = dir / e.input_path;
        const fs::path labels_path = dir / e.labels_path;
        if (!fs::exists(input_path)) throw DataError("missing file: " + input_path.string());
        if (!fs::exists(labels_path)) throw DataError("missing file: " + labels_path.string());
        const auto input_bytes = fs::file_size(input_path);
        const auto labels_bytes = fs::file_size(labels_path);
        if (input_bytes != voxels * e.modalities.size() * 4) {
            throw DataError("declared dims do not match file size: " + input_path.string());
        }
        if (labels_bytes != voxels) {
            throw DataError("declared dims do not match file size: " + labels_path.string());
        }
    }
    return m;
}

VolumeSample load_sample(const fs::path& dir, const ManifestEntry& entry) {
    const std::size_t voxels = entry.dims[0] * entry.dims[1] * entry.dims[2];
    const std::size_t channels = entry.modalities.size();

    VolumeSample sample;
    sample.patient_id = entry.patient_id;

    const auto input_bytes = read_exact(dir / entry.input_path, voxels * channels * 4);
    std::vector<double> input(voxels * channels);
    for (std::size_t i = 0; i < input.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, input_bytes.data() + i * 4, 4);
        bits = to_le32(bits);
        float f;
        std::memcpy(&f, &bits, 4);
        input[i] = static_cast<double>(f);
    }
    sample.input = Tensor({entry.dims[0], entry.dims[1], entry.dims[2], channels},
                          std::move(input));

    const auto label_bytes = read_exact(dir / entry.labels_path, voxels);
    std::vector<double> labels(voxels);
    for (std::size_t i = 0; i < voxels; ++i) {
        const auto v = static_cast<std::uint8_t>(label_bytes[i]);
        if (label_to_channel(v) < 0) {
            throw DataError("sample " + entry.patient_id + ": invalid label value " +
                            std::to_string(v) + " at voxel " + std::to_string(i));
        }
        labels[i] = static_cast<double>(v);
    }
    sample.labels = Tensor({entry.dims[0], entry.dims[1], entry.dims[2]}, std::move(labels));
    return sample;
}

std::vector<VolumeSample> load_corpus(const fs::path& dir, const CorpusManifest& manifest) {
    std::vector<VolumeSample> samples;
    samples.reserve(manifest.samples.size());
    for (const auto& entry : manifest.samples) {
        samples.push_back(load_sample(dir, entry));
    }
    return samples;
}

VolumeSample preprocess_sample(const VolumeSample& raw, double foreground_threshold) {
    const auto& dims = raw.input.dims();
    const std::size_t channels = dims[3];
    const std::size_t voxels = dims[0] * dims[1] * dims[2];

    std::vector<Tensor> normalized;
    normalized.reserve(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        Tensor modality({dims[0], dims[1], dims[2]});
        for (std::size_t i = 0; i < voxels; ++i) {
            modality[i] = raw.input[i * channels + c];
        }
        normalized.push_back(zscore_normalize(modality, foreground_threshold).volume);
    }

    VolumeSample out;
    out.patient_id = raw.patient_id;
    out.input = stack_modalities(normalized);
    out.labels = raw.labels;
    return out;
}

}  // namespace dybat
