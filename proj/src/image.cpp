#include "stf/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stf {

ImageU8 quantize(const ImageF& img) {
    ImageU8 out{img.width, img.height, img.channels, {}};
    out.data.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double v = std::clamp(img.data[i], 0.0, 1.0);
        out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

ImageF to_float(const ImageU8& img) {
    ImageF out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0;
    return out;
}

double image_psnr(const ImageF& a, const ImageF& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: image size mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) mse += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

void be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t read_be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    be32(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    std::uint32_t crc = crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    be32(out, crc);
}

int png_color_type(int channels) {
    switch (channels) {
        case 1: return 0;
        case 3: return 2;
        case 4: return 6;
        default: throw std::invalid_argument("png: unsupported channel count");
    }
}

}  // namespace

void write_png(const std::string& path, const ImageU8& img) {
    if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("png: empty image");
    const int ch = img.channels;
    const std::size_t stride = static_cast<std::size_t>(img.width) * ch;

    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        const std::uint8_t* row = img.data.data() + y * stride;
        raw.insert(raw.end(), row, row + stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    compressed.resize(bound);

    std::vector<std::uint8_t> file = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    be32(ihdr, static_cast<std::uint32_t>(img.width));
    be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(static_cast<std::uint8_t>(png_color_type(ch)));
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    append_chunk(file, "IHDR", ihdr);
    append_chunk(file, "IDAT", compressed);
    append_chunk(file, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
}

namespace {

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

ImageU8 read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
        throw std::runtime_error(path + ": not a PNG file");

    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= file.size()) {
        std::uint32_t len = read_be32(&file[pos]);
        if (pos + 12 + len > file.size()) throw std::runtime_error(path + ": truncated PNG");
        const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
        const std::uint8_t* payload = &file[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            width = static_cast<int>(read_be32(payload));
            height = static_cast<int>(read_be32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw std::runtime_error(path + ": interlaced PNG unsupported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (bit_depth != 8) throw std::runtime_error(path + ": only 8-bit PNG supported");
    int ch;
    switch (color_type) {
        case 0: ch = 1; break;
        case 2: ch = 3; break;
        case 6: ch = 4; break;
        default: throw std::runtime_error(path + ": unsupported PNG color type");
    }

    const std::size_t stride = static_cast<std::size_t>(width) * ch;
    std::vector<std::uint8_t> raw((stride + 1) * height);
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw std::runtime_error("png: inflate init failed");
    zs.next_in = idat.data();
    zs.avail_in = static_cast<uInt>(idat.size());
    zs.next_out = raw.data();
    zs.avail_out = static_cast<uInt>(raw.size());
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.avail_out != 0)
        throw std::runtime_error(path + ": PNG decompression failed");

    ImageU8 out{width, height, ch, {}};
    out.data.resize(stride * height);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = &raw[y * (stride + 1) + 1];
        std::uint8_t* dst = &out.data[y * stride];
        const std::uint8_t* up = y > 0 ? &out.data[(y - 1) * stride] : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            int a = x >= static_cast<std::size_t>(ch) ? dst[x - ch] : 0;
            int b = up ? up[x] : 0;
            int c = (up && x >= static_cast<std::size_t>(ch)) ? up[x - ch] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error(path + ": bad PNG filter type");
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return out;
}

void write_ppm(const std::string& path, const ImageU8& rgb) {
    if (rgb.channels != 3) throw std::invalid_argument("ppm: RGB image required");
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(f, "P6\n%d %d\n255\n", rgb.width, rgb.height);
    std::fwrite(rgb.data.data(), 1, rgb.data.size(), f);
    std::fclose(f);
}

}  // namespace stf
