#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "histotile/errors.hpp"
#include "histotile/net.hpp"

namespace histotile {

// Flat binary parameter file:
//   magic "HISTONET" (8 bytes) | u32 version | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 ndim | u32 dims[ndim]
//               | f64 data (row-major)
// All integers and floats little-endian.

inline constexpr char kParamsMagic[8] = {'H', 'I', 'S', 'T', 'O', 'N', 'E', 'T'};
inline constexpr std::uint32_t kParamsVersion = 1;

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    char buf[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                   static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(buf, 4);
}

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw ParseError("params file: truncated u32");
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

inline void write_f64(std::ostream& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(buf, 8);
}

inline double read_f64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw ParseError("params file: truncated f64");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace detail

inline void save_params(const Params& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_params: cannot open " + path + " for writing");
    out.write(kParamsMagic, 8);
    detail::write_u32(out, kParamsVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
        detail::write_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        detail::write_u32(out, static_cast<std::uint32_t>(t.value.shape.size()));
        for (int d : t.value.shape) detail::write_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.value.data) detail::write_f64(out, v);
    }
    if (!out) throw IoError("save_params: write failed for " + path);
}

inline Params load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_params: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kParamsMagic, 8) != 0)
        throw ParseError("load_params: " + path + " is not a parameter file");
    std::uint32_t version = detail::read_u32(in);
    if (version != kParamsVersion)
        throw ParseError("load_params: unsupported version " + std::to_string(version));
    std::uint32_t count = detail::read_u32(in);
    Params params;
    params.tensors.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        std::uint32_t name_len = detail::read_u32(in);
        if (name_len > 4096) throw ParseError("load_params: implausible name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw ParseError("load_params: truncated name");
        std::uint32_t ndim = detail::read_u32(in);
        if (ndim > 8) throw ParseError("load_params: implausible rank");
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(detail::read_u32(in));
        Tensor tensor(shape);
        for (auto& v : tensor.data) v = detail::read_f64(in);
        params.tensors.push_back({std::move(name), std::move(tensor)});
    }
    return params;
}

} // namespace histotile
