#include "cria/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace cria {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'I', 'A'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& off, const char* what) {
    if (off + sizeof(T) > in.size())
        throw DatasetError("dataset: truncated " + std::string(what) + " at byte " + std::to_string(off));
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

EegSlice SliceDataset::slice(std::size_t i) const {
    if (i >= size()) throw DatasetError("dataset: slice index out of range");
    EegSlice s;
    s.channel_names = channel_names;
    s.label = labels[i];
    s.data.resize(channels);
    const std::size_t stride = static_cast<std::size_t>(channels) * slice_len;
    for (int c = 0; c < channels; ++c) {
        const float* p = samples.data() + i * stride + static_cast<std::size_t>(c) * slice_len;
        s.data[c].assign(p, p + slice_len);
    }
    return s;
}

void SliceDataset::append(const EegSlice& s, int label) {
    if (static_cast<int>(s.data.size()) != channels)
        throw DatasetError("dataset: slice channel count mismatch");
    for (const auto& ch : s.data)
        if (static_cast<int>(ch.size()) != slice_len)
            throw DatasetError("dataset: slice length mismatch");
    if (label < 0 || label >= num_classes) throw DatasetError("dataset: label out of range");
    for (const auto& ch : s.data)
        for (double v : ch) samples.push_back(static_cast<float>(v));
    labels.push_back(label);
}

void save_dataset(const std::string& path, const SliceDataset& ds) {
    if (ds.channel_names.size() != static_cast<std::size_t>(ds.channels))
        throw DatasetError("dataset: one name per channel required");
    const std::size_t stride = static_cast<std::size_t>(ds.channels) * ds.slice_len;
    if (ds.samples.size() != stride * ds.size())
        throw DatasetError("dataset: sample buffer does not match record count");

    std::string out;
    out.append(kMagic, 4);
    put<std::uint16_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.channels));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.slice_len));
    put<double>(out, ds.sample_rate);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_classes));
    for (const auto& n : ds.channel_names) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(n.size()));
        out.append(n);
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(ds.labels[i]));
        out.append(reinterpret_cast<const char*>(ds.samples.data() + i * stride), stride * sizeof(float));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DatasetError("dataset: cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DatasetError("dataset: short write to '" + path + "'");
}

SliceDataset load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DatasetError("dataset: cannot open '" + path + "'");
    std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    std::size_t off = 0;
    if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0)
        throw DatasetError("dataset: bad magic in '" + path + "'");
    off = 4;
    const auto version = get<std::uint16_t>(in, off, "version");
    if (version != kVersion)
        throw DatasetError("dataset: unsupported version " + std::to_string(version) + " (expected " +
                           std::to_string(kVersion) + ")");
    SliceDataset ds;
    ds.channels = static_cast<int>(get<std::uint32_t>(in, off, "channel count"));
    ds.slice_len = static_cast<int>(get<std::uint32_t>(in, off, "slice length"));
    ds.sample_rate = get<double>(in, off, "sample rate");
    ds.num_classes = static_cast<int>(get<std::uint32_t>(in, off, "class count"));
    if (ds.channels <= 0 || ds.slice_len <= 0 || ds.num_classes < 2 || ds.sample_rate <= 0.0)
        throw DatasetError("dataset: invalid header values in '" + path + "'");
    for (int c = 0; c < ds.channels; ++c) {
        const auto len = get<std::uint16_t>(in, off, "channel name length");
        if (off + len > in.size())
            throw DatasetError("dataset: truncated channel name at byte " + std::to_string(off));
        ds.channel_names.emplace_back(in.substr(off, len));
        off += len;
    }
    const auto n = get<std::uint32_t>(in, off, "record count");
    const std::size_t stride = static_cast<std::size_t>(ds.channels) * ds.slice_len;
    const std::size_t need = off + n * (2 + stride * sizeof(float));
    if (in.size() != need)
        throw DatasetError("dataset: file length " + std::to_string(in.size()) + " does not match declared " +
                           std::to_string(n) + " records (expected " + std::to_string(need) + ")");
    ds.samples.resize(stride * n);
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto label = get<std::uint16_t>(in, off, "label");
        if (label >= ds.num_classes)
            throw DatasetError("dataset: record " + std::to_string(i) + " label " + std::to_string(label) +
                               " outside class count");
        ds.labels[i] = label;
        std::memcpy(ds.samples.data() + i * stride, in.data() + off, stride * sizeof(float));
        off += stride * sizeof(float);
    }
    return ds;
}

double synthetic_class_center_hz(int k) {
    static const double centers[3] = {6.0, 15.0, 35.0};
    if (k < 3) return centers[k];
    return 45.0 + 10.0 * (k - 3);
}

SliceDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.classes < 2 || spec.channels < 1 || spec.slice_len < 2 || spec.sample_rate <= 0.0 ||
        spec.per_class < 0)
        throw DatasetError("synthetic: invalid generation spec");
    for (int k = 0; k < spec.classes; ++k)
        if (synthetic_class_center_hz(k) >= spec.sample_rate / 2.0)
            throw DatasetError("synthetic: class center above Nyquist");

    SliceDataset ds;
    ds.channels = spec.channels;
    ds.slice_len = spec.slice_len;
    ds.sample_rate = spec.sample_rate;
    ds.num_classes = spec.classes;
    for (int c = 0; c < spec.channels; ++c) ds.channel_names.push_back("SYN" + std::to_string(c));

    Rng rng = Rng(spec.seed).substream("synthetic-dataset");
    EegSlice s;
    s.channel_names = ds.channel_names;
    s.data.assign(spec.channels, std::vector<double>(spec.slice_len));
    for (int k = 0; k < spec.classes; ++k) {
        const double center = synthetic_class_center_hz(k);
        for (int i = 0; i < spec.per_class; ++i) {
            // two tones near the class center, phase-randomized per channel
            const double f1 = center * rng.uniform(0.95, 1.05);
            const double f2 = center * rng.uniform(0.85, 1.15);
            for (int c = 0; c < spec.channels; ++c) {
                const double gain = rng.uniform(0.5, 1.5);
                const double ph1 = rng.uniform(0.0, 2.0 * 3.141592653589793238462643);
                const double ph2 = rng.uniform(0.0, 2.0 * 3.141592653589793238462643);
                for (int t = 0; t < spec.slice_len; ++t) {
                    const double tt = t / spec.sample_rate;
                    s.data[c][t] = gain * (std::sin(2.0 * 3.141592653589793238462643 * f1 * tt + ph1) +
                                           0.5 * std::sin(2.0 * 3.141592653589793238462643 * f2 * tt + ph2)) +
                                   rng.normal(0.0, spec.noise_sigma);
                }
            }
            ds.append(percentile_normalize(s), k);
        }
    }
    return ds;
}

SplitIndices split_dataset(std::size_t n, double train_frac, double val_frac, std::uint64_t seed) {
    if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0)
        throw DatasetError("split: fractions must be non-negative and sum to at most 1");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng(seed).substream("dataset-split");
    for (std::size_t i = n; i > 1; --i)  // Fisher-Yates
        std::swap(idx[i - 1], idx[rng.below(i)]);
    const std::size_t n_train = static_cast<std::size_t>(std::floor(train_frac * n));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(val_frac * n));
    SplitIndices out;
    out.train.assign(idx.begin(), idx.begin() + n_train);
    out.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    out.test.assign(idx.begin() + n_train + n_val, idx.end());
    return out;
}

}  // namespace cria
