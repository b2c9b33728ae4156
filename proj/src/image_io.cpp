#include "edip/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "edip/error.hpp"

namespace edip {

namespace {

void push_u32(std::vector<unsigned char>& out, uint32_t x) {
    out.push_back(static_cast<unsigned char>(x >> 24));
    out.push_back(static_cast<unsigned char>(x >> 16));
    out.push_back(static_cast<unsigned char>(x >> 8));
    out.push_back(static_cast<unsigned char>(x));
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<unsigned char>& data) {
    std::vector<unsigned char> head;
    push_u32(head, static_cast<uint32_t>(data.size()));
    f.write(reinterpret_cast<const char*>(head.data()), 4);
    f.write(type, 4);
    if (!data.empty()) f.write(reinterpret_cast<const char*>(data.data()), data.size());
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<unsigned char> tail;
    push_u32(tail, static_cast<uint32_t>(crc));
    f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png(const std::string& path, std::span<const unsigned char> pixels, int64_t width,
               int64_t height, int channels) {
    if (channels != 1 && channels != 3) throw Error("write_png: channels must be 1 or 3");
    if (width < 1 || height < 1 ||
        static_cast<int64_t>(pixels.size()) != width * height * channels)
        throw Error("write_png: pixel buffer size mismatch");

    // filter byte 0 (None) per scanline
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(height * (width * channels + 1)));
    for (int64_t y = 0; y < height; ++y) {
        raw.push_back(0);
        const unsigned char* row = pixels.data() + y * width * channels;
        raw.insert(raw.end(), row, row + width * channels);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> deflated(bound);
    if (compress2(deflated.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw Error("write_png: deflate failed");
    deflated.resize(bound);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr;
    push_u32(ihdr, static_cast<uint32_t>(width));
    push_u32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);                                // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);            // gray / truecolor
    ihdr.push_back(0);                                // compression
    ihdr.push_back(0);                                // filter
    ihdr.push_back(0);                                // no interlace
    write_chunk(f, "IHDR", ihdr);
    write_chunk(f, "IDAT", deflated);
    write_chunk(f, "IEND", {});
    if (!f) throw IoError("write failed: " + path);
}

void write_png_gray(const std::string& path, std::span<const double> image, int64_t width,
                    int64_t height, double lo, double hi) {
    if (static_cast<int64_t>(image.size()) != width * height)
        throw Error("write_png_gray: image size mismatch");
    std::vector<unsigned char> px(image.size());
    const double span = hi - lo;
    for (size_t i = 0; i < image.size(); ++i) {
        double v = span != 0.0 ? (image[i] - lo) / span : 0.5;
        v = std::clamp(v, 0.0, 1.0);
        px[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    write_png(path, px, width, height, 1);
}

}  // namespace edip
