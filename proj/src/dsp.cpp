#include "cria/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace cria {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Continued-fraction rational approximation of r with denominator <= max_den.
std::pair<long, long> rational_approx(double r, long max_den) {
    long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double x = r;
    for (int it = 0; it < 64; ++it) {
        const long a = static_cast<long>(std::floor(x));
        const long p2 = a * p1 + p0, q2 = a * q1 + q0;
        if (q2 > max_den) break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        const double frac = x - static_cast<double>(a);
        if (frac < 1e-12) break;
        x = 1.0 / frac;
    }
    return {p1, q1};
}

// One second-order section, direct form II transposed, zero initial state.
void sos_filter_inplace(const Biquad& s, std::vector<double>& x) {
    double w1 = 0.0, w2 = 0.0;
    for (double& v : x) {
        const double in = v;
        const double out = s.b0 * in + w1;
        w1 = s.b1 * in - s.a1 * out + w2;
        w2 = s.b2 * in - s.a2 * out;
        v = out;
    }
}

std::complex<double> sos_response(const std::vector<Biquad>& sos, std::complex<double> z) {
    std::complex<double> h(1.0, 0.0);
    const std::complex<double> zi = 1.0 / z;
    for (const auto& s : sos)
        h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
    return h;
}

std::vector<Biquad> butterworth_design(int order, double cutoff_hz, double sample_rate, bool highpass) {
    if (order < 1) throw SignalError("butterworth: order must be >= 1");
    if (cutoff_hz <= 0.0 || cutoff_hz >= sample_rate / 2.0)
        throw SignalError("butterworth: cutoff " + std::to_string(cutoff_hz) + " Hz outside (0, " +
                          std::to_string(sample_rate / 2.0) + ") at fs=" + std::to_string(sample_rate));
    const double warped = std::tan(kPi * cutoff_hz / sample_rate);
    std::vector<Biquad> sos;
    // conjugate pole pairs of the analog prototype
    for (int k = 0; k < order / 2; ++k) {
        const double ang = kPi * (2.0 * k + 1.0 + order) / (2.0 * order);
        std::complex<double> proto(std::cos(ang), std::sin(ang));
        std::complex<double> p = highpass ? warped / proto : warped * proto;
        const std::complex<double> zp = (1.0 + p) / (1.0 - p);
        Biquad s{};
        s.a1 = -2.0 * zp.real();
        s.a2 = std::norm(zp);
        if (highpass) {
            s.b0 = 1.0;
            s.b1 = -2.0;
            s.b2 = 1.0;
        } else {
            s.b0 = 1.0;
            s.b1 = 2.0;
            s.b2 = 1.0;
        }
        sos.push_back(s);
    }
    if (order % 2) {  // real pole, prototype at -1 for both transforms
        const double pa = -warped;
        const double zp = (1.0 + pa) / (1.0 - pa);
        Biquad s{};
        s.a1 = -zp;
        s.a2 = 0.0;
        s.b0 = 1.0;
        s.b1 = highpass ? -1.0 : 1.0;
        s.b2 = 0.0;
        sos.push_back(s);
    }
    // unity gain at DC (low-pass) or Nyquist (high-pass), split per section
    const std::complex<double> ref = highpass ? std::complex<double>(-1.0, 0.0) : std::complex<double>(1.0, 0.0);
    for (auto& s : sos) {
        const double g = std::abs(sos_response({s}, ref));
        s.b0 /= g;
        s.b1 /= g;
        s.b2 /= g;
    }
    return sos;
}

}  // namespace

std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double sample_rate) {
    return butterworth_design(order, cutoff_hz, sample_rate, false);
}

std::vector<Biquad> butterworth_highpass(int order, double cutoff_hz, double sample_rate) {
    return butterworth_design(order, cutoff_hz, sample_rate, true);
}

std::vector<Biquad> notch_biquad(double freq_hz, double quality, double sample_rate) {
    if (freq_hz <= 0.0 || freq_hz >= sample_rate / 2.0)
        throw SignalError("notch: frequency " + std::to_string(freq_hz) + " Hz outside (0, Nyquist) at fs=" +
                          std::to_string(sample_rate));
    const double w0 = 2.0 * kPi * freq_hz / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * quality);
    const double a0 = 1.0 + alpha;
    Biquad s{};
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * std::cos(w0) / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * std::cos(w0) / a0;
    s.a2 = (1.0 - alpha) / a0;
    return {s};
}

std::vector<double> filtfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    if (x.empty()) return {};
    const std::size_t n = x.size();
    const std::size_t npad = std::min<std::size_t>(n - 1, 27 * sos.size() + 9);
    // odd-reflection extension keeps the operation linear in x
    std::vector<double> ext;
    ext.reserve(n + 2 * npad);
    for (std::size_t i = 0; i < npad; ++i) ext.push_back(2.0 * x[0] - x[npad - i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < npad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 2 - i]);

    for (const auto& s : sos) sos_filter_inplace(s, ext);
    std::reverse(ext.begin(), ext.end());
    for (const auto& s : sos) sos_filter_inplace(s, ext);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + static_cast<long>(npad), ext.begin() + static_cast<long>(npad + n)};
}

EegRecording resample(const EegRecording& rec, double target_rate) {
    if (target_rate <= 0.0) throw SignalError("resample: target rate must be positive");
    if (rec.samples() == 0) throw SignalError("resample: empty signal");
    if (target_rate == rec.sample_rate) return rec;

    const auto [up, down] = rational_approx(target_rate / rec.sample_rate, 1024);
    const long p = std::max(up, 1L), q = std::max(down, 1L);
    const std::size_t in_len = rec.samples();
    const std::size_t out_len =
        static_cast<std::size_t>(std::llround(static_cast<double>(in_len) * target_rate / rec.sample_rate));

    // Blackman-windowed sinc at the virtual high rate fs*p, cutoff below
    // both the source and target Nyquist.
    const long half = 16 * std::max(p, q);
    const double fc = 0.5 / static_cast<double>(std::max(p, q));
    std::vector<double> h(static_cast<std::size_t>(half) + 1);
    for (long k = 0; k <= half; ++k) {
        const double t = static_cast<double>(k);
        const double sinc = k == 0 ? 1.0 : std::sin(2.0 * kPi * fc * t) / (2.0 * kPi * fc * t);
        const double u = (t + half) / (2.0 * half);  // window argument in [0.5, 1]
        const double w = 0.42 - 0.5 * std::cos(2.0 * kPi * u) + 0.08 * std::cos(4.0 * kPi * u);
        h[static_cast<std::size_t>(k)] = 2.0 * fc * sinc * w * static_cast<double>(p);
    }

    EegRecording out;
    out.channel_names = rec.channel_names;
    out.sample_rate = target_rate;
    out.data.resize(rec.data.size());
    for (std::size_t ch = 0; ch < rec.data.size(); ++ch) {
        const auto& xin = rec.data[ch];
        auto& y = out.data[ch];
        y.assign(out_len, 0.0);
        for (std::size_t t = 0; t < out_len; ++t) {
            const long m = static_cast<long>(t) * q;  // high-rate index
            long i0 = (m - half + p - 1) / p;
            long i1 = (m + half) / p;
            i0 = std::max(i0, 0L);
            i1 = std::min(i1, static_cast<long>(in_len) - 1);
            double acc = 0.0;
            for (long i = i0; i <= i1; ++i) {
                const long k = std::labs(m - i * p);
                acc += xin[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(k)];
            }
            y[t] = acc;
        }
    }
    return out;
}

EegRecording bandpass_butterworth(const EegRecording& rec, double low_hz, double high_hz, int order) {
    if (rec.samples() == 0) throw SignalError("bandpass: empty signal");
    if (!(0.0 < low_hz && low_hz < high_hz && high_hz < rec.sample_rate / 2.0))
        throw SignalError("bandpass: cutoffs (" + std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                          ") invalid for fs=" + std::to_string(rec.sample_rate));
    auto sos = butterworth_highpass(order, low_hz, rec.sample_rate);
    const auto lp = butterworth_lowpass(order, high_hz, rec.sample_rate);
    sos.insert(sos.end(), lp.begin(), lp.end());

    EegRecording out = rec;
    for (auto& ch : out.data) ch = filtfilt(sos, ch);
    return out;
}

EegRecording notch_filter(const EegRecording& rec, const std::vector<double>& freqs_hz, double quality) {
    if (rec.samples() == 0) throw SignalError("notch: empty signal");
    std::vector<Biquad> sos;
    for (double f : freqs_hz) {
        const auto s = notch_biquad(f, quality, rec.sample_rate);
        sos.insert(sos.end(), s.begin(), s.end());
    }
    EegRecording out = rec;
    if (!sos.empty())
        for (auto& ch : out.data) ch = filtfilt(sos, ch);
    return out;
}

double percentile_abs(const std::vector<double>& values, double q) {
    if (values.empty()) throw SignalError("percentile: empty input");
    std::vector<double> mags(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) mags[i] = std::fabs(values[i]);
    std::sort(mags.begin(), mags.end());
    const double rank = q / 100.0 * static_cast<double>(mags.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, mags.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return mags[lo] * (1.0 - frac) + mags[hi] * frac;
}

EegSlice percentile_normalize(const EegSlice& slice) {
    if (slice.data.empty()) throw SignalError("normalize: empty slice");
    EegSlice out = slice;
    for (auto& ch : out.data) {
        const double p95 = percentile_abs(ch, 95.0);
        if (p95 > 0.0)
            for (double& v : ch) v /= p95;
    }
    return out;
}

SegmentedSlice segment_slice(const EegSlice& slice, int segment_len, const std::vector<int>& channel_ids) {
    if (slice.data.empty()) throw SignalError("segment: empty slice");
    const int c = static_cast<int>(slice.data.size());
    const int l = static_cast<int>(slice.data[0].size());
    if (l < segment_len)
        throw SignalError("segment: slice length " + std::to_string(l) + " shorter than segment length " +
                          std::to_string(segment_len));
    SegmentedSlice out;
    out.channels = c;
    out.segments = l / segment_len;
    out.segment_len = segment_len;
    out.data.resize(static_cast<std::size_t>(c) * out.segments * segment_len);
    for (int ch = 0; ch < c; ++ch)
        for (int n = 0; n < out.segments; ++n)
            for (int d = 0; d < segment_len; ++d)
                out.data[(static_cast<std::size_t>(ch) * out.segments + n) * segment_len + d] =
                    slice.data[ch][static_cast<std::size_t>(n) * segment_len + d];
    if (channel_ids.empty()) {
        out.channel_ids.resize(c);
        std::iota(out.channel_ids.begin(), out.channel_ids.end(), 0);
    } else {
        if (static_cast<int>(channel_ids.size()) != c)
            throw SignalError("segment: channel id count mismatch");
        out.channel_ids = channel_ids;
    }
    return out;
}

}  // namespace cria
