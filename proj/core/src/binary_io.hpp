#pragma once

// Little-endian primitives shared by the image, mask and checkpoint formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "latentfuse/errors.hpp"

namespace latentfuse::binary {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, std::uint32_t(v & 0xffffffffu));
    put_u32(os, std::uint32_t(v >> 32));
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline void put_magic(std::ostream& os, const std::array<char, 4>& magic) { os.write(magic.data(), 4); }

inline void read_exact(std::istream& is, char* dst, std::size_t n, const std::string& what) {
    is.read(dst, std::streamsize(n));
    if (std::size_t(is.gcount()) != n) throw ValidationError(what + ": truncated file");
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    read_exact(is, reinterpret_cast<char*>(b), 4, what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is, const std::string& what) {
    const std::uint64_t lo = get_u32(is, what);
    const std::uint64_t hi = get_u32(is, what);
    return lo | (hi << 32);
}

inline float get_f32(std::istream& is, const std::string& what) { return std::bit_cast<float>(get_u32(is, what)); }

inline std::array<char, 4> get_magic(std::istream& is, const std::string& what) {
    std::array<char, 4> m{};
    read_exact(is, m.data(), 4, what);
    return m;
}

inline std::string magic_string(const std::array<char, 4>& m) { return std::string(m.data(), 4); }

} // namespace latentfuse::binary
