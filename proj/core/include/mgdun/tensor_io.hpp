// MGT1 binary tensor container: 4-byte magic "MGT1", four little-endian u32
// dims (n,c,h,w), then n*c*h*w little-endian f32 values, row-major.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "mgdun/tensor.hpp"

namespace mgdun {

void write_mgt(const Tensor& t, std::ostream& os);
void write_mgt(const Tensor& t, const std::string& path);
Tensor read_mgt(std::istream& is);
Tensor read_mgt(const std::string& path);

// 16-bit PGM (P5, maxval 65535) for eyeballing [0,1] images; values are
// clipped then quantized. Multi-channel/batch tensors export plane (0,0).
void write_pgm16(const Tensor& t, const std::string& path);

// FNV-1a over a file's bytes; used by dataset manifests.
std::uint64_t fnv1a_file(const std::string& path);
std::string hex_u64(std::uint64_t v);

}  // namespace mgdun
