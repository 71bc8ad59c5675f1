#pragma once

#include "deeppt/network.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dpt {

struct CorruptFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Little-endian weights container:
///   magic "DPT1", version u32, entry count u32, then per entry
///   name length u32 + UTF-8 name, rank u32, extents u32 each, raw f32 data;
///   trailing CRC32 over all preceding bytes.
/// Entries are named conv{i}.kernels / conv{i}.bias and
/// {head}.fc{i}.weight / {head}.fc{i}.bias.
void save_params(const NetworkParams<float>& params, const std::string& path);
NetworkParams<float> load_params(const std::string& path);

/// IEEE 802.3 CRC-32 (the zlib polynomial), for the weights container.
uint32_t crc32_bytes(const void* data, size_t len, uint32_t seed = 0);

/// FNV-1a over every parameter byte, in serialization order. Cheap identity
/// check for freeze contracts and determinism tests.
uint64_t params_digest(const NetworkParams<float>& params);

}  // namespace dpt
