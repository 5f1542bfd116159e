#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "geomancer/params.hpp"

namespace geomancer {

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed = 0);

// Binary tensor archive: magic "GMNC", version, entry count; per entry the
// name, rank, dims, a dtype tag (f32 little-endian payload) and raw data; a
// trailing CRC32 of everything after the magic. Values are stored as f32, so
// F32-precision parameters round-trip bit-exactly.
void save_checkpoint(const std::string& path, const ParamStore& store);

struct CheckpointEntry {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> values;
};

std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

// Copies loaded values into matching names; throws on missing names or shape
// mismatches (checkpoint/config incompatibility).
void apply_checkpoint(ParamStore& store, const std::vector<CheckpointEntry>& entries);

std::uint32_t file_crc32(const std::string& path);

}  // namespace geomancer
