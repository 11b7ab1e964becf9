#include "splatscan/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace splatscan {

namespace {

uint8_t to_byte(double v) {
    double c = std::clamp(v, 0.0, 1.0);
    return uint8_t(std::lround(c * 255.0));
}

void put_u32_le(std::ofstream& os, uint32_t v) {
    unsigned char b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32_le(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace

void write_ppm(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw std::runtime_error("write_ppm: need 1 or 3 channels, got " +
                                 std::to_string(img.channels));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_ppm: cannot open " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(size_t(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = img.at(x, y, img.channels == 3 ? c : 0);
                row[size_t(x) * 3 + c] = to_byte(v);
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!os) throw std::runtime_error("write_ppm: write failed for " + path);
}

void write_float_raw(const Image& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_float_raw: cannot open " + path);
    os.write("FP32", 4);
    put_u32_le(os, uint32_t(img.width));
    put_u32_le(os, uint32_t(img.height));
    put_u32_le(os, uint32_t(img.channels));
    std::vector<float> plane(img.pixel_count());
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                plane[size_t(y) * img.width + x] = float(img.at(x, y, c));
        os.write(reinterpret_cast<const char*>(plane.data()),
                 std::streamsize(plane.size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("write_float_raw: write failed for " + path);
}

Image read_float_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_float_raw: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FP32", 4) != 0)
        throw std::runtime_error("read_float_raw: bad magic in " + path);
    uint32_t w = get_u32_le(is), h = get_u32_le(is), c = get_u32_le(is);
    if (!is || w == 0 || h == 0 || c == 0 || c > 16)
        throw std::runtime_error("read_float_raw: bad header in " + path);
    Image img{int(w), int(h), int(c)};
    std::vector<float> plane(img.pixel_count());
    for (uint32_t ch = 0; ch < c; ++ch) {
        is.read(reinterpret_cast<char*>(plane.data()),
                std::streamsize(plane.size() * sizeof(float)));
        if (!is) throw std::runtime_error("read_float_raw: truncated file " + path);
        for (uint32_t y = 0; y < h; ++y)
            for (uint32_t x = 0; x < w; ++x)
                img.at(int(x), int(y), int(ch)) = plane[size_t(y) * w + x];
    }
    return img;
}

}  // namespace splatscan
