#include "cria/edf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace cria {

namespace {

std::string field(const std::string& buf, std::size_t off, std::size_t len) {
    if (off + len > buf.size())
        throw EdfError("edf: truncated header at byte " + std::to_string(off));
    std::string s = buf.substr(off, len);
    const auto b = s.find_first_not_of(' ');
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(' ');
    return s.substr(b, e - b + 1);
}

long parse_long(const std::string& buf, std::size_t off, std::size_t len, const char* what) {
    const std::string s = field(buf, off, len);
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw EdfError("edf: non-numeric " + std::string(what) + " field at byte " + std::to_string(off) +
                       " ('" + s + "')");
    }
}

double parse_double(const std::string& buf, std::size_t off, std::size_t len, const char* what) {
    const std::string s = field(buf, off, len);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw EdfError("edf: non-numeric " + std::string(what) + " field at byte " + std::to_string(off) +
                       " ('" + s + "')");
    }
}

std::string pad(const std::string& s, std::size_t len) {
    std::string out = s.substr(0, len);
    out.resize(len, ' ');
    return out;
}

std::string num_field(double v, std::size_t len) {
    std::ostringstream os;
    os << v;
    std::string s = os.str();
    if (s.size() > len) {  // fall back to fixed precision that fits
        os.str("");
        os.precision(static_cast<int>(len) - 2);
        os << v;
        s = os.str().substr(0, len);
    }
    return pad(s, len);
}

}  // namespace

EegRecording parse_edf(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw EdfError("edf: cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 256) throw EdfError("edf: truncated header at byte " + std::to_string(bytes.size()));

    const long header_bytes = parse_long(bytes, 184, 8, "header-size");
    const long n_records = parse_long(bytes, 236, 8, "record-count");
    const double record_dur = parse_double(bytes, 244, 8, "record-duration");
    const long ns = parse_long(bytes, 252, 4, "signal-count");
    if (ns <= 0) throw EdfError("edf: signal count must be positive at byte 252");
    if (n_records < 0) throw EdfError("edf: negative record count at byte 236");
    if (record_dur <= 0.0) throw EdfError("edf: record duration must be positive at byte 244");
    const std::size_t expect_header = 256 + 256 * static_cast<std::size_t>(ns);
    if (static_cast<std::size_t>(header_bytes) != expect_header)
        throw EdfError("edf: header size field " + std::to_string(header_bytes) + " at byte 184 does not match " +
                       std::to_string(expect_header) + " for " + std::to_string(ns) + " signals");
    if (bytes.size() < expect_header)
        throw EdfError("edf: truncated signal headers at byte " + std::to_string(bytes.size()));

    // per-signal header blocks are field-major: all labels, then all transducers, ...
    const std::size_t base = 256;
    const std::size_t nsz = static_cast<std::size_t>(ns);
    std::vector<std::string> labels(nsz);
    std::vector<double> phys_min(nsz), phys_max(nsz), dig_min(nsz), dig_max(nsz);
    std::vector<long> spr(nsz);
    for (std::size_t i = 0; i < nsz; ++i) {
        labels[i] = field(bytes, base + 16 * i, 16);
        phys_min[i] = parse_double(bytes, base + nsz * (16 + 80 + 8) + 8 * i, 8, "physical-min");
        phys_max[i] = parse_double(bytes, base + nsz * (16 + 80 + 8 + 8) + 8 * i, 8, "physical-max");
        dig_min[i] = parse_double(bytes, base + nsz * (16 + 80 + 8 + 8 + 8) + 8 * i, 8, "digital-min");
        dig_max[i] = parse_double(bytes, base + nsz * (16 + 80 + 8 + 8 + 8 + 8) + 8 * i, 8, "digital-max");
        spr[i] = parse_long(bytes, base + nsz * (16 + 80 + 8 + 8 + 8 + 8 + 8 + 80) + 8 * i, 8,
                            "samples-per-record");
        if (spr[i] <= 0)
            throw EdfError("edf: samples-per-record must be positive for signal " + std::to_string(i));
        if (dig_max[i] == dig_min[i])
            throw EdfError("edf: degenerate digital range for signal " + std::to_string(i));
    }

    std::size_t record_bytes = 0;
    for (long s : spr) record_bytes += static_cast<std::size_t>(s) * 2;
    const std::size_t need = expect_header + record_bytes * static_cast<std::size_t>(n_records);
    if (bytes.size() < need)
        throw EdfError("edf: data truncated at byte " + std::to_string(bytes.size()) + ", need " +
                       std::to_string(need));

    EegRecording rec;
    std::vector<std::size_t> keep;
    double rate = 0.0;
    for (std::size_t i = 0; i < nsz; ++i) {
        if (labels[i].rfind("EDF Annotations", 0) == 0) continue;
        const double r = spr[i] / record_dur;
        if (rate == 0.0) rate = r;
        else if (std::abs(r - rate) > 1e-9)
            throw EdfError("edf: mixed sample rates across signals are not supported");
        keep.push_back(i);
        rec.channel_names.push_back(labels[i]);
        rec.data.emplace_back();
        rec.data.back().reserve(static_cast<std::size_t>(spr[i]) * n_records);
    }
    rec.sample_rate = rate;

    const char* p = bytes.data() + expect_header;
    for (long r = 0; r < n_records; ++r) {
        std::size_t out = 0;
        for (std::size_t i = 0; i < nsz; ++i) {
            const bool kept = out < keep.size() && keep[out] == i;
            for (long t = 0; t < spr[i]; ++t) {
                std::int16_t raw;
                std::memcpy(&raw, p, 2);
                p += 2;
                if (kept) {
                    const double g = (phys_max[i] - phys_min[i]) / (dig_max[i] - dig_min[i]);
                    rec.data[out].push_back((raw - dig_min[i]) * g + phys_min[i]);
                }
            }
            if (kept) ++out;
        }
    }
    return rec;
}

void write_edf(const std::string& path, const EegRecording& rec) {
    if (rec.data.empty()) throw EdfError("edf write: empty recording");
    if (rec.sample_rate <= 0.0 || rec.sample_rate != std::floor(rec.sample_rate))
        throw EdfError("edf write: sample rate must be a positive integer for one-second records");
    const std::size_t nsamp = rec.samples();
    for (const auto& ch : rec.data)
        if (ch.size() != nsamp) throw EdfError("edf write: ragged channel lengths");
    const long spr = static_cast<long>(rec.sample_rate);
    if (nsamp % static_cast<std::size_t>(spr) != 0)
        throw EdfError("edf write: sample count must be a whole number of one-second records");
    const long n_records = static_cast<long>(nsamp / static_cast<std::size_t>(spr));
    const std::size_t nsz = rec.data.size();

    std::vector<double> pmin(nsz), pmax(nsz);
    for (std::size_t i = 0; i < nsz; ++i) {
        auto [lo, hi] = std::minmax_element(rec.data[i].begin(), rec.data[i].end());
        pmin[i] = *lo;
        pmax[i] = *hi;
        if (pmax[i] <= pmin[i]) pmax[i] = pmin[i] + 1.0;  // constant signal still needs a range
    }

    std::ostringstream out;
    out << pad("0", 8) << pad("", 80) << pad("", 80) << pad("01.01.00", 8) << pad("00.00.00", 8)
        << pad(std::to_string(256 + 256 * nsz), 8) << pad("", 44) << pad(std::to_string(n_records), 8)
        << pad("1", 8) << pad(std::to_string(nsz), 4);
    for (std::size_t i = 0; i < nsz; ++i)
        out << pad(i < rec.channel_names.size() ? rec.channel_names[i] : "ch" + std::to_string(i), 16);
    for (std::size_t i = 0; i < nsz; ++i) out << pad("", 80);   // transducer
    for (std::size_t i = 0; i < nsz; ++i) out << pad("uV", 8);  // dimension
    for (std::size_t i = 0; i < nsz; ++i) out << num_field(pmin[i], 8);
    for (std::size_t i = 0; i < nsz; ++i) out << num_field(pmax[i], 8);
    for (std::size_t i = 0; i < nsz; ++i) out << pad("-32768", 8);
    for (std::size_t i = 0; i < nsz; ++i) out << pad("32767", 8);
    for (std::size_t i = 0; i < nsz; ++i) out << pad("", 80);  // prefiltering
    for (std::size_t i = 0; i < nsz; ++i) out << pad(std::to_string(spr), 8);
    for (std::size_t i = 0; i < nsz; ++i) out << pad("", 32);

    // the calibration the parser inverts uses the *written* text fields,
    // so quantize against the re-parsed physical bounds
    std::vector<double> wmin(nsz), wmax(nsz);
    for (std::size_t i = 0; i < nsz; ++i) {
        wmin[i] = std::stod(num_field(pmin[i], 8));
        wmax[i] = std::stod(num_field(pmax[i], 8));
        if (wmax[i] <= wmin[i]) throw EdfError("edf write: physical range collapsed in 8-char field");
    }

    for (long r = 0; r < n_records; ++r)
        for (std::size_t i = 0; i < nsz; ++i)
            for (long t = 0; t < spr; ++t) {
                const double v = rec.data[i][static_cast<std::size_t>(r) * spr + t];
                const double g = 65535.0 / (wmax[i] - wmin[i]);
                long q = std::lround((v - wmin[i]) * g) - 32768;
                q = std::clamp(q, -32768L, 32767L);
                const std::int16_t raw = static_cast<std::int16_t>(q);
                out.write(reinterpret_cast<const char*>(&raw), 2);
            }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw EdfError("edf write: cannot open '" + path + "'");
    const std::string s = out.str();
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) throw EdfError("edf write: short write to '" + path + "'");
}

}  // namespace cria
