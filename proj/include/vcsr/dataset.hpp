#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcsr/datagen.hpp"

namespace vcsr {

struct DatasetHeader {
    int format_version = 1;
    int d_in = 0;
    int n_frames = 0;
    std::string mode = "mc";
    int vocab_size = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<SyntheticSample> samples;
};

// Standard base64 (RFC 4648, with padding).
std::string base64_encode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> base64_decode(const std::string& text);

// Tensor payloads as base64 of little-endian 32-bit floats. Values must
// already be exactly representable in 32 bits for the round trip to be
// bit-exact; the generator quantizes at the source.
std::string encode_f32(const Tensor& t);

// One header line followed by one structured-text record per sample.
void save_dataset(const std::string& path, const DatasetHeader& header,
                  const std::vector<SyntheticSample>& samples);
Dataset load_dataset(const std::string& path);

DatasetHeader header_for(const GenSpec& spec);

}  // namespace vcsr
