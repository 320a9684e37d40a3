#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <zlib.h>

#include "fieldmap/util.hpp"

namespace fieldmap {

namespace detail {

inline void push_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void push_chunk(std::vector<uint8_t>& out, const char type[4],
                       const std::vector<uint8_t>& payload) {
    push_u32(out, static_cast<uint32_t>(payload.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    push_u32(out, static_cast<uint32_t>(crc));
}

}  // namespace detail

// RGBA8 pixels, row-major from the top row down. Fixed compression settings
// keep the byte stream reproducible.
inline std::vector<uint8_t> encode_png_rgba(int width, int height,
                                            const std::vector<uint8_t>& rgba) {
    if (width < 1 || height < 1) throw pipeline_error("png: empty image");
    if (rgba.size() != static_cast<size_t>(width) * height * 4)
        throw pipeline_error("png: pixel buffer size mismatch");

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 4));
    for (int r = 0; r < height; ++r) {
        raw.push_back(0);  // filter type: none
        const uint8_t* row = rgba.data() + static_cast<size_t>(r) * width * 4;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 4);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK)
        throw pipeline_error("png: deflate failed");
    compressed.resize(bound);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<uint8_t> ihdr;
    detail::push_u32(ihdr, static_cast<uint32_t>(width));
    detail::push_u32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(6);  // color type: RGBA
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace
    detail::push_chunk(out, "IHDR", ihdr);
    detail::push_chunk(out, "IDAT", compressed);
    detail::push_chunk(out, "IEND", {});
    return out;
}

inline std::string base64_encode(const std::vector<uint8_t>& bytes) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
    }
    if (i + 1 == bytes.size()) {
        uint32_t v = bytes[i] << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

}  // namespace fieldmap
