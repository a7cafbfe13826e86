#pragma once

#include <stdexcept>
#include <string>

#include "cria/dsp.hpp"

namespace cria {

struct EdfError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Minimal EDF reader: 256-byte fixed header, 256 bytes of per-signal
// header fields, 16-bit little-endian samples with physical/digital
// calibration. Annotation signals are skipped. Parse failures name the
// byte offset.
EegRecording parse_edf(const std::string& path);

// Companion writer (uniform sample rate, one-second records); physical
// range per signal is the data range, digital range the full 16 bits.
void write_edf(const std::string& path, const EegRecording& rec);

}  // namespace cria
