// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/imageio.hpp"

#include <cmath>
#include <cstring>

#include "glyphroute/errors.hpp"
#include "glyphroute/serialize.hpp"

namespace {

uint32_t crc32_table_entry(uint32_t n) {
    uint32_t c = n;
    for (int k = 0; k < 8; k++) {
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    }
    return c;
}

uint32_t crc32(const uint8_t* data, size_t len) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t n = 0; n < 256; n++) table[n] = crc32_table_entry(n);
        init = true;
    }
    uint32_t c = 0xffffffffu;
    for (size_t i = 0; i < len; i++) c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

uint32_t adler32(const uint8_t* data, size_t len) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < len; i++) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void push_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t read_u32_be(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void push_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    push_u32_be(out, static_cast<uint32_t>(data.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    push_u32_be(out, crc32(out.data() + crc_start, out.size() - crc_start));
}

// zlib stream holding stored (BTYPE=00) deflate blocks only.
std::vector<uint8_t> zlib_store(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> out;
    out.push_back(0x78);
    out.push_back(0x01);
    size_t pos = 0;
    do {
        size_t take = std::min<size_t>(raw.size() - pos, 65535);
        bool final = pos + take == raw.size();
        out.push_back(final ? 1 : 0);
        out.push_back(static_cast<uint8_t>(take & 0xff));
        out.push_back(static_cast<uint8_t>(take >> 8));
        out.push_back(static_cast<uint8_t>(~take & 0xff));
        out.push_back(static_cast<uint8_t>((~take >> 8) & 0xff));
        out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + take);
        pos += take;
    } while (pos < raw.size());
    push_u32_be(out, adler32(raw.data(), raw.size()));
    return out;
}

std::vector<uint8_t> zlib_unstore(const std::vector<uint8_t>& z) {
    GR_CHECK(z.size() >= 6, IoError, "zlib stream truncated");
    GR_CHECK((z[0] & 0x0f) == 8, IoError, "unsupported zlib compression method");
    std::vector<uint8_t> raw;
    size_t pos = 2;
    bool final = false;
    while (!final) {
        GR_CHECK(pos < z.size(), IoError, "deflate stream truncated");
        uint8_t header = z[pos++];
        final = header & 1;
        uint8_t btype = (header >> 1) & 3;
        GR_CHECK(btype == 0, IoError,
                 "compressed PNG not supported (this codec reads stored-block PNGs "
                 "produced by this tool)");
        GR_CHECK(pos + 4 <= z.size(), IoError, "stored block header truncated");
        uint16_t len = static_cast<uint16_t>(z[pos] | (z[pos + 1] << 8));
        uint16_t nlen = static_cast<uint16_t>(z[pos + 2] | (z[pos + 3] << 8));
        GR_CHECK(static_cast<uint16_t>(~len) == nlen, IoError, "stored block length mismatch");
        pos += 4;
        GR_CHECK(pos + len <= z.size(), IoError, "stored block payload truncated");
        raw.insert(raw.end(), z.begin() + pos, z.begin() + pos + len);
        pos += len;
    }
    return raw;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void quantize_u8(Image& img) {
    for (auto& v : img.px) {
        double clamped = std::min(1.0, std::max(0.0, v));
        v = std::round(clamped * 255.0) / 255.0;
    }
}

std::vector<uint8_t> encode_png(const Image& img) {
    GR_CHECK(img.c == 1 || img.c == 3, IoError, "PNG encoder supports 1 or 3 channels");
    uint8_t color_type = img.c == 1 ? 0 : 2;

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.h) * (1 + static_cast<size_t>(img.w) * img.c));
    for (int y = 0; y < img.h; y++) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < img.w; x++) {
            for (int ch = 0; ch < img.c; ch++) {
                double v = std::min(1.0, std::max(0.0, img.at(y, x, ch)));
                raw.push_back(static_cast<uint8_t>(std::lround(v * 255.0)));
            }
        }
    }

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<uint8_t> ihdr;
    push_u32_be(ihdr, static_cast<uint32_t>(img.w));
    push_u32_be(ihdr, static_cast<uint32_t>(img.h));
    ihdr.push_back(8);           // bit depth
    ihdr.push_back(color_type);  // 0 gray, 2 rgb
    ihdr.push_back(0);           // compression
    ihdr.push_back(0);           // filter method
    ihdr.push_back(0);           // no interlace
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", zlib_store(raw));
    push_chunk(out, "IEND", {});
    return out;
}

Image decode_png(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    GR_CHECK(bytes.size() > 8 && std::memcmp(bytes.data(), sig, 8) == 0, IoError,
             "not a PNG file");
    size_t pos = 8;
    int w = 0, h = 0, channels = 0;
    std::vector<uint8_t> idat;
    while (pos + 8 <= bytes.size()) {
        uint32_t len = read_u32_be(bytes.data() + pos);
        GR_CHECK(pos + 12 + len <= bytes.size(), IoError, "PNG chunk truncated");
        std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
        const uint8_t* data = bytes.data() + pos + 8;
        if (type == "IHDR") {
            w = static_cast<int>(read_u32_be(data));
            h = static_cast<int>(read_u32_be(data + 4));
            GR_CHECK(data[8] == 8, IoError, "PNG: only 8-bit depth supported");
            if (data[9] == 0) channels = 1;
            else if (data[9] == 2) channels = 3;
            else throw IoError("PNG: unsupported color type");
            GR_CHECK(data[12] == 0, IoError, "PNG: interlacing not supported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    GR_CHECK(w > 0 && h > 0 && channels > 0, IoError, "PNG: missing IHDR");
    auto raw = zlib_unstore(idat);
    size_t stride = static_cast<size_t>(w) * channels;
    GR_CHECK(raw.size() == static_cast<size_t>(h) * (stride + 1), IoError,
             "PNG: unexpected scanline payload size");

    // Unfilter (filters 0-4).
    std::vector<uint8_t> pix(static_cast<size_t>(h) * stride);
    int bpp = channels;
    for (int y = 0; y < h; y++) {
        uint8_t filter = raw[static_cast<size_t>(y) * (stride + 1)];
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1) + 1;
        uint8_t* dst = pix.data() + static_cast<size_t>(y) * stride;
        const uint8_t* prev = y > 0 ? pix.data() + static_cast<size_t>(y - 1) * stride : nullptr;
        for (size_t i = 0; i < stride; i++) {
            int a = i >= static_cast<size_t>(bpp) ? dst[i - bpp] : 0;
            int b = prev ? prev[i] : 0;
            int c = (prev && i >= static_cast<size_t>(bpp)) ? prev[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw IoError("PNG: unknown filter type");
            }
            dst[i] = static_cast<uint8_t>(v & 0xff);
        }
    }

    Image img(h, w, channels);
    for (size_t i = 0; i < pix.size(); i++) img.px[i] = pix[i] / 255.0;
    return img;
}

void write_png(const std::string& path, const Image& img) {
    write_file_bytes(path, encode_png(img));
}

Image read_png(const std::string& path) {
    return decode_png(read_file_bytes(path));
}

Image mask_to_image(const std::vector<double>& mask, int h, int w) {
    GR_CHECK(mask.size() == static_cast<size_t>(h) * w, ShapeError, "mask size mismatch");
    Image img(h, w, 1);
    for (size_t i = 0; i < mask.size(); i++) img.px[i] = mask[i] > 0.5 ? 1.0 : 0.0;
    return img;
}
