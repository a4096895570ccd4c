// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Images are doubles in [0,1], row-major, channel-interleaved. The renderer
// quantizes to the 8-bit grid (multiples of 1/255), so PNG round trips are
// exact and "lossless image files" means what it says.
//
// The PNG codec is self-contained: writes use stored (uncompressed) deflate
// blocks, reads accept stored-block streams plus all five scanline filters.
// That covers every file this project produces; foreign compressed PNGs are
// rejected with a clear error.

struct Image {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> px;

    Image() = default;
    Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), px(static_cast<size_t>(h_) * w_ * c_, 0.0) {}
    double& at(int y, int x, int ch) { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }
    double at(int y, int x, int ch) const { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }
    size_t size() const { return px.size(); }
};

// Quantize every sample to the nearest multiple of 1/255.
void quantize_u8(Image& img);

std::vector<uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<uint8_t>& bytes);

void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Binary mask helpers (single-channel images with values in {0,1}).
Image mask_to_image(const std::vector<double>& mask, int h, int w);
