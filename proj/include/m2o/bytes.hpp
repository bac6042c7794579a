#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace m2o {

using Bytes = std::vector<uint8_t>;
using BytesView = std::span<const uint8_t>;

std::string to_hex(BytesView data);
Bytes from_hex(const std::string& hex);  // throws std::invalid_argument on bad input

// Constant-time equality; false when lengths differ.
bool ct_equal(BytesView a, BytesView b);

inline void append(Bytes& out, BytesView more) {
    out.insert(out.end(), more.begin(), more.end());
}

inline Bytes concat(BytesView a, BytesView b) {
    Bytes out(a.begin(), a.end());
    append(out, b);
    return out;
}

// Big-endian fixed-width integer packing
void put_u16(Bytes& out, uint16_t v);
void put_u32(Bytes& out, uint32_t v);
uint16_t get_u16(BytesView in, size_t off);
uint32_t get_u32(BytesView in, size_t off);

}  // namespace m2o
