#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "dybat/corpus.hpp"
#include "dybat/preprocess.hpp"
#include "dybat/rng.hpp"
#include "dybat/synthetic.hpp"

using namespace dybat;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("dybat_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("zscore: foreground {1,2,3} standardizes, background untouched") {
    Tensor vol({1, 2, 3}, 0.0);
    vol[0] = 1.0;
    vol[2] = 2.0;
    vol[4] = 3.0;
    const auto result = zscore_normalize(vol, 0.0);
    CHECK_FALSE(result.degenerate);
    CHECK(result.volume[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(result.volume[2] == doctest::Approx(0.0));
    CHECK(result.volume[4] == doctest::Approx(1.2247).epsilon(1e-4));
    CHECK(result.volume[1] == 0.0);
    CHECK(result.volume[3] == 0.0);

    // foreground moments after normalization
    const double mean = (result.volume[0] + result.volume[2] + result.volume[4]) / 3.0;
    CHECK(std::abs(mean) < 1e-9);
    const double var = (result.volume[0] * result.volume[0] +
                        result.volume[2] * result.volume[2] +
                        result.volume[4] * result.volume[4]) / 3.0;
    CHECK(std::abs(var - 1.0) < 1e-9);
}

TEST_CASE("zscore: constant foreground shifts to zero without scaling") {
    Tensor vol({1, 1, 4}, {5.0, 5.0, 0.0, 5.0});
    const auto result = zscore_normalize(vol, 0.0);
    CHECK_FALSE(result.degenerate);
    CHECK(result.volume[0] == 0.0);
    CHECK(result.volume[1] == 0.0);
    CHECK(result.volume[2] == 0.0);
    CHECK(result.volume[3] == 0.0);
}

TEST_CASE("zscore: all-background volume is returned unchanged and flagged") {
    const Tensor vol({1, 1, 3}, {0.0, -1.0, 0.0});
    const auto result = zscore_normalize(vol, 0.0);
    CHECK(result.degenerate);
    CHECK(result.volume.values() == vol.values());
}

TEST_CASE("zscore: idempotent on already-normalized foreground") {
    // All-foreground volume relative to a low threshold: the foreground set is
    // stable under the transform, so a second pass changes nothing.
    Rng rng(14);
    Tensor vol({2, 3, 3});
    for (std::size_t i = 0; i < vol.size(); ++i) vol[i] = rng.uniform(1.0, 9.0);
    const double threshold = -1e9;
    const Tensor once = zscore_normalize(vol, threshold).volume;
    const Tensor twice = zscore_normalize(once, threshold).volume;
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(std::abs(once[i] - twice[i]) < 1e-9);
    }
}

TEST_CASE("one_hot examples and the argmax round trip") {
    SUBCASE("label 4 maps to channel 3") {
        const Tensor labels({1, 1, 1}, {4.0});
        const Tensor oh = one_hot(labels);
        CHECK(oh.values() == std::vector<double>{0.0, 0.0, 0.0, 1.0});
    }
    SUBCASE("label 0 maps to channel 0") {
        const Tensor labels({1, 1, 1}, {0.0});
        CHECK(one_hot(labels).values() == std::vector<double>{1.0, 0.0, 0.0, 0.0});
    }
    SUBCASE("volume of all 2s fills channel 2") {
        const Tensor labels({2, 2, 2}, 2.0);
        const Tensor oh = one_hot(labels);
        for (std::size_t v = 0; v < 8; ++v) {
            CHECK(oh[v * 4 + 2] == 1.0);
            CHECK(oh[v * 4 + 0] == 0.0);
        }
    }
    SUBCASE("unknown label names the voxel") {
        Tensor labels({1, 1, 3}, {0.0, 3.0, 0.0});
        CHECK_THROWS_WITH_AS(one_hot(labels), doctest::Contains("voxel 1"), DataError);
    }
    SUBCASE("one_hot then argmax reproduces the label map") {
        Rng rng(5);
        Tensor labels({3, 4, 4});
        for (std::size_t i = 0; i < labels.size(); ++i) {
            labels[i] = double(kLabelValues[rng.uniform_int(4)]);
        }
        const Tensor round = argmax_labels(one_hot(labels));
        CHECK(round.values() == labels.values());
    }
}

TEST_CASE("stack_modalities keeps channel order and shape") {
    Tensor a({1, 2, 2}, 1.0), b({1, 2, 2}, 2.0), c({1, 2, 2}, 3.0);
    const Tensor stacked = stack_modalities({a, b, c});
    CHECK(stacked.dims() == std::vector<std::size_t>{1, 2, 2, 3});
    CHECK(stacked[stacked.offset4(0, 1, 1, 1)] == 2.0);  // second input in channel 1

    const Tensor single = stack_modalities({a});
    CHECK(single.dims() == std::vector<std::size_t>{1, 2, 2, 1});

    Tensor mismatched({1, 2, 3}, 0.0);
    CHECK_THROWS_AS(stack_modalities({a, mismatched}), ShapeError);
}

TEST_CASE("partition_batches: sizes, coverage, frozen ids") {
    VolumeSample sample;
    sample.patient_id = "p000";
    sample.input = Tensor({155, 4, 4, 2}, 0.5);
    sample.labels = Tensor({155, 4, 4}, 0.0);

    SUBCASE("155 slices at batch 64 -> 64,64,27") {
        const auto units = partition_batches(sample, 64, 10);
        REQUIRE(units.size() == 3);
        CHECK(units[0].input.dim(0) == 64);
        CHECK(units[1].input.dim(0) == 64);
        CHECK(units[2].input.dim(0) == 27);
        CHECK(units[0].batch_id == 10);
        CHECK(units[2].batch_id == 12);

        // contiguous cover of [0, D)
        std::size_t cursor = 0;
        for (const auto& u : units) {
            CHECK(u.slice_begin == cursor);
            cursor = u.slice_end;
            CHECK(u.patient_id == "p000");
            CHECK(u.target.dims() ==
                  std::vector<std::size_t>{u.slice_end - u.slice_begin, 4, 4, 4});
        }
        CHECK(cursor == 155);
    }
    SUBCASE("exact fit gives one unit") {
        sample.input = Tensor({64, 4, 4, 2}, 0.0);
        sample.labels = Tensor({64, 4, 4}, 0.0);
        CHECK(partition_batches(sample, 64).size() == 1);
    }
    SUBCASE("remainder unit sizes 2,2,1") {
        sample.input = Tensor({5, 4, 4, 2}, 0.0);
        sample.labels = Tensor({5, 4, 4}, 0.0);
        const auto units = partition_batches(sample, 2);
        REQUIRE(units.size() == 3);
        CHECK(units[2].input.dim(0) == 1);
    }
    SUBCASE("per-voxel one-hot target sums to one") {
        sample.labels = Tensor({155, 4, 4}, 2.0);
        const auto units = partition_batches(sample, 64);
        for (const auto& u : units) {
            const std::size_t voxels = u.target.size() / 4;
            for (std::size_t v = 0; v < voxels; ++v) {
                double s = 0.0;
                for (std::size_t k = 0; k < 4; ++k) s += u.target[v * 4 + k];
                REQUIRE(s == 1.0);
            }
        }
    }
}

TEST_CASE("partition_corpus assigns globally unique ascending ids") {
    std::vector<VolumeSample> samples;
    for (int i = 0; i < 3; ++i) {
        VolumeSample s;
        s.patient_id = "p" + std::to_string(i);
        s.input = Tensor({5, 4, 4, 1}, 0.0);
        s.labels = Tensor({5, 4, 4}, 0.0);
        samples.push_back(std::move(s));
    }
    const auto units = partition_corpus(samples, 2);
    REQUIRE(units.size() == 9);
    for (std::size_t i = 0; i < units.size(); ++i) {
        CHECK(units[i].batch_id == static_cast<int>(i));
    }
}

TEST_CASE("synthetic corpus: injections recorded, geometry as requested") {
    GeneratorSpec spec;
    spec.num_samples = 12;
    spec.depth = 4;
    spec.height = 12;
    spec.width = 12;
    spec.seed = 7;
    spec.injections.label_permutation = 2;
    spec.injections.rare_class_absent = 1;

    const SyntheticCorpus corpus = generate_synthetic_corpus(spec);
    CHECK(corpus.manifest.hard_ids.size() == 3);
    CHECK(corpus.samples.size() == 12);

    // at least one sample with no ET voxels anywhere
    bool found_absent = false;
    for (const auto& s : corpus.samples) {
        bool has_et = false;
        for (std::size_t i = 0; i < s.labels.size(); ++i) has_et |= (s.labels[i] == 4.0);
        found_absent |= !has_et;
    }
    CHECK(found_absent);

    // labels stay in the alphabet; at least one plain sample has all classes
    bool full_alphabet = false;
    for (const auto& s : corpus.samples) {
        bool c1 = false, c2 = false, c4 = false;
        for (std::size_t i = 0; i < s.labels.size(); ++i) {
            const int v = static_cast<int>(s.labels[i]);
            REQUIRE(label_to_channel(v) >= 0);
            c1 |= v == 1;
            c2 |= v == 2;
            c4 |= v == 4;
        }
        full_alphabet |= (c1 && c2 && c4);
    }
    CHECK(full_alphabet);

    CHECK_THROWS_AS(generate_synthetic_corpus([] {
                        GeneratorSpec s;
                        s.height = 4;  // too small for the nested geometry
                        return s;
                    }()),
                    DataError);
}

TEST_CASE("corpus round trip: write, validate, load; generation is seed-pure") {
    GeneratorSpec spec;
    spec.num_samples = 4;
    spec.depth = 3;
    spec.height = 10;
    spec.width = 10;
    spec.seed = 99;
    spec.empty_samples = 1;

    const auto dir_a = temp_dir("corpus_a");
    const auto dir_b = temp_dir("corpus_b");
    const SyntheticCorpus a = generate_synthetic_corpus(spec);
    const SyntheticCorpus b = generate_synthetic_corpus(spec);
    write_corpus(a.samples, a.manifest, dir_a);
    write_corpus(b.samples, b.manifest, dir_b);

    // byte-identical outputs for equal (spec, seed)
    CHECK(file_bytes(dir_a / "manifest.json") == file_bytes(dir_b / "manifest.json"));
    for (const auto& e : a.manifest.samples) {
        CHECK(file_bytes(dir_a / e.input_path) == file_bytes(dir_b / e.input_path));
        CHECK(file_bytes(dir_a / e.labels_path) == file_bytes(dir_b / e.labels_path));
    }

    const CorpusManifest manifest = load_manifest(dir_a);
    CHECK(manifest.synthetic);
    CHECK(manifest.seed == 99);
    REQUIRE(manifest.samples.size() == 4);

    const auto samples = load_corpus(dir_a, manifest);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples[i].patient_id == a.samples[i].patient_id);
        CHECK(samples[i].labels.values() == a.samples[i].labels.values());
        // float32 round trip: inputs match to single precision
        for (std::size_t j = 0; j < samples[i].input.size(); ++j) {
            CHECK(samples[i].input[j] ==
                  doctest::Approx(a.samples[i].input[j]).epsilon(1e-6));
        }
    }

    // a missing file invalidates the manifest
    fs::remove(dir_a / manifest.samples[0].labels_path);
    CHECK_THROWS_AS(load_manifest(dir_a), DataError);
}

TEST_CASE("preprocess_sample z-scores each modality over brain tissue") {
    GeneratorSpec spec;
    spec.num_samples = 1;
    spec.depth = 3;
    spec.height = 10;
    spec.width = 10;
    spec.seed = 3;
    const auto corpus = generate_synthetic_corpus(spec);
    const VolumeSample pre = preprocess_sample(corpus.samples[0], 0.0);

    const auto& dims = pre.input.dims();
    const std::size_t voxels = dims[0] * dims[1] * dims[2];
    for (std::size_t c = 0; c < dims[3]; ++c) {
        double sum = 0.0, sq = 0.0;
        std::size_t n = 0;
        for (std::size_t v = 0; v < voxels; ++v) {
            const double raw = corpus.samples[0].input[v * dims[3] + c];
            if (raw > 0.0) {
                const double z = pre.input[v * dims[3] + c];
                sum += z;
                sq += z * z;
                ++n;
            }
        }
        REQUIRE(n > 0);
        CHECK(std::abs(sum / double(n)) < 1e-9);
        CHECK(std::abs(sq / double(n) - 1.0) < 1e-9);
    }
}
