#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stf {

/// Row-major interleaved float image, values nominally in [0,1].
struct ImageF {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    ImageF() = default;
    ImageF(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool same_shape(const ImageF& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1, 3 or 4
    std::vector<std::uint8_t> data;
};

ImageU8 quantize(const ImageF& img);
ImageF to_float(const ImageU8& img);

/// 8-bit PNG, color types gray/RGB/RGBA, no interlace.
void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

void write_ppm(const std::string& path, const ImageU8& rgb);

double image_psnr(const ImageF& a, const ImageF& b);  // capped at 99 dB

}  // namespace stf
