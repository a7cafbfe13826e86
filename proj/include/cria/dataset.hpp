#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cria/dsp.hpp"
#include "cria/rng.hpp"

namespace cria {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Packed slice corpus: fixed-stride float32 records make splits and
// shuffles trivial and byte-auditable.
struct SliceDataset {
    int channels = 0;
    int slice_len = 0;  // samples per channel per slice
    double sample_rate = 0.0;
    int num_classes = 0;
    std::vector<std::string> channel_names;
    std::vector<float> samples;  // n * channels * slice_len, row-major
    std::vector<int> labels;     // one per slice

    std::size_t size() const { return labels.size(); }
    EegSlice slice(std::size_t i) const;
    void append(const EegSlice& s, int label);
};

void save_dataset(const std::string& path, const SliceDataset& ds);
SliceDataset load_dataset(const std::string& path);

struct SyntheticSpec {
    int classes = 3;
    int channels = 8;
    int slice_len = 2000;
    double sample_rate = 200.0;
    int per_class = 300;
    double noise_sigma = 0.7;
    std::uint64_t seed = 0;
};

// Class k mixes band-limited tones around a class-specific center
// frequency with per-channel gains, random phases, and Gaussian
// background: inseparable raw waveforms, separable spectra.
SliceDataset generate_synthetic_dataset(const SyntheticSpec& spec);

double synthetic_class_center_hz(int k);

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Seeded shuffle split by slice.
SplitIndices split_dataset(std::size_t n, double train_frac, double val_frac, std::uint64_t seed);

}  // namespace cria
