#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcsr/config.hpp"
#include "vcsr/params.hpp"

namespace vcsr {

struct ParamBlob {
    std::string name;
    Shape shape;
    std::vector<double> values;  // exactly representable in 32 bits
};

struct Checkpoint {
    TrainConfig config;
    std::vector<ParamBlob> blobs;
};

uint64_t fnv1a64(const std::vector<uint8_t>& bytes);

// Text header (config snapshot + parameter manifest with per-tensor byte
// offsets and checksums) followed by one contiguous little-endian 32-bit
// float payload.
void save_checkpoint(const std::string& path, const TrainConfig& config, const ParamStore& params);
Checkpoint load_checkpoint(const std::string& path);

// Copies blob values into the store's parameters; names and shapes must match
// the store exactly.
void apply_checkpoint(const Checkpoint& ckpt, ParamStore& params);

}  // namespace vcsr
