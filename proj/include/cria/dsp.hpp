#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cria {

struct SignalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raw multi-channel recording; row-major channels x samples.
struct EegRecording {
    std::vector<std::string> channel_names;
    double sample_rate = 0.0;
    std::vector<std::vector<double>> data;  // one vector per channel

    int channels() const { return static_cast<int>(data.size()); }
    std::size_t samples() const { return data.empty() ? 0 : data[0].size(); }
};

// Fixed-rate slice; the model input unit before segmentation.
struct EegSlice {
    std::vector<std::string> channel_names;
    std::vector<std::vector<double>> data;
    std::optional<int> label;
};

// Second-order IIR section: b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
    double b0, b1, b2, a1, a2;
};

// ---- filter design ----
std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double sample_rate);
std::vector<Biquad> butterworth_highpass(int order, double cutoff_hz, double sample_rate);
std::vector<Biquad> notch_biquad(double freq_hz, double quality, double sample_rate);

// Zero-phase (forward-backward) application of an SOS cascade with
// odd-reflection edge padding.
std::vector<double> filtfilt(const std::vector<Biquad>& sos, const std::vector<double>& x);

// ---- preprocessing operations ----
EegRecording resample(const EegRecording& rec, double target_rate);
// Band-pass realized as high-pass(low) then low-pass(high), `order` each.
EegRecording bandpass_butterworth(const EegRecording& rec, double low_hz, double high_hz, int order = 4);
EegRecording notch_filter(const EegRecording& rec, const std::vector<double>& freqs_hz, double quality = 30.0);
EegSlice percentile_normalize(const EegSlice& slice);

// Linear-interpolation percentile of |values|, q in [0, 100].
double percentile_abs(const std::vector<double>& values, double q);

struct SegmentedSlice {
    int channels = 0, segments = 0, segment_len = 0;
    std::vector<double> data;  // C x N x D row-major
    std::vector<int> channel_ids;

    double at(int c, int n, int d) const {
        return data[(static_cast<std::size_t>(c) * segments + n) * segment_len + d];
    }
};

SegmentedSlice segment_slice(const EegSlice& slice, int segment_len,
                             const std::vector<int>& channel_ids = {});

}  // namespace cria
