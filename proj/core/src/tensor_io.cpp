#include "mgdun/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mgdun {

namespace {

void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
           std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

void put_f32le(std::ostream& os, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32le(os, v);
}

float get_f32le(std::istream& is) {
    std::uint32_t v = get_u32le(is);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace

void write_mgt(const Tensor& t, std::ostream& os) {
    const Shape& s = t.shape();
    os.write("MGT1", 4);
    put_u32le(os, std::uint32_t(s.n));
    put_u32le(os, std::uint32_t(s.c));
    put_u32le(os, std::uint32_t(s.h));
    put_u32le(os, std::uint32_t(s.w));
    for (std::int64_t i = 0; i < t.numel(); ++i) put_f32le(os, t[i]);
    if (!os) throw std::runtime_error("write_mgt: stream write failed");
}

void write_mgt(const Tensor& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_mgt: cannot open " + path);
    write_mgt(t, f);
}

Tensor read_mgt(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MGT1", 4) != 0)
        throw std::runtime_error("read_mgt: bad magic (expected MGT1)");
    Shape s;
    s.n = int(get_u32le(is));
    s.c = int(get_u32le(is));
    s.h = int(get_u32le(is));
    s.w = int(get_u32le(is));
    if (!is || s.numel() < 0 || s.numel() > (std::int64_t(1) << 31))
        throw std::runtime_error("read_mgt: implausible dims " + s.str());
    Tensor t(s);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = get_f32le(is);
    if (!is) throw std::runtime_error("read_mgt: truncated payload for " + s.str());
    return t;
}

Tensor read_mgt(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_mgt: cannot open " + path);
    return read_mgt(f);
}

void write_pgm16(const Tensor& t, const std::string& path) {
    const Shape& s = t.shape();
    require(s.n >= 1 && s.c >= 1, "write_pgm16: empty tensor");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm16: cannot open " + path);
    f << "P5\n" << s.w << " " << s.h << "\n65535\n";
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            const float v = std::clamp(t.at(0, 0, y, x), 0.0f, 1.0f);
            const std::uint16_t q = std::uint16_t(std::lround(v * 65535.0f));
            // PGM 16-bit samples are big-endian
            f.put(char(q >> 8));
            f.put(char(q & 0xff));
        }
    if (!f) throw std::runtime_error("write_pgm16: write failed for " + path);
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("fnv1a_file: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (f.read(buf, sizeof buf) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= std::uint64_t(static_cast<unsigned char>(buf[i]));
            h *= 0x100000001b3ull;
        }
        if (!f) break;
    }
    return h;
}

std::string hex_u64(std::uint64_t v) {
    static const char* d = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[std::size_t(i)] = d[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace mgdun
