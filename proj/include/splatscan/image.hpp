// Planar-agnostic float image container plus the two on-disk formats:
// 8-bit binary PPM (P6) for quick inspection and a raw little-endian float32
// planar dump ("FP32" magic) for lossless metric computation.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splatscan {

// Row-major, channel-interleaved. Values are doubles in working memory; the
// metric path never quantizes. Pixel (x, y) covers [x, x+1) x [y, y+1) in
// pixel coordinates, center at (x + 0.5, y + 0.5).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return data[(size_t(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(size_t(y) * width + x) * channels + c];
    }

    size_t pixel_count() const { return size_t(width) * height; }
    bool same_dims(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// Throws std::runtime_error on IO failure.
void write_ppm(const Image& img, const std::string& path);

// Raw float32 planar dump. Header: magic "FP32", then uint32 width, height,
// channels (little-endian), followed by width*height floats per channel in
// channel-major (planar) order.
void write_float_raw(const Image& img, const std::string& path);
Image read_float_raw(const std::string& path);

}  // namespace splatscan
