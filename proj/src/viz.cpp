// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/viz.hpp"

#include <algorithm>
#include <set>

#include "glyphroute/errors.hpp"
#include "glyphroute/nn.hpp"

Image trace_mosaic(const RoutingTrace& trace, int cell, bool include_background) {
    GR_CHECK(!trace.entries.empty(), ConfigError, "trace_mosaic: empty trace");

    // Keep only substep-0 entries (one column per sampler step).
    std::set<int> steps_set, layers_set;
    int subjects = trace.entries.front().subjects;
    for (const auto& e : trace.entries) {
        if (e.substep != 0) continue;
        steps_set.insert(e.step);
        layers_set.insert(e.layer);
    }
    std::vector<int> steps(steps_set.begin(), steps_set.end());
    std::vector<int> layers(layers_set.begin(), layers_set.end());
    int tokens = subjects + (include_background ? 1 : 0);

    int pad = 1;
    int band_h = static_cast<int>(layers.size()) * (cell + pad) + pad;
    int mosaic_h = tokens * (band_h + 2 * pad);
    int mosaic_w = static_cast<int>(steps.size()) * (cell + pad) + pad;
    Image out(mosaic_h, mosaic_w, 1);
    std::fill(out.px.begin(), out.px.end(), 0.25);

    for (const auto& e : trace.entries) {
        if (e.substep != 0) continue;
        int col = static_cast<int>(std::lower_bound(steps.begin(), steps.end(), e.step) -
                                   steps.begin());
        int lay = static_cast<int>(std::lower_bound(layers.begin(), layers.end(), e.layer) -
                                   layers.begin());
        for (int tok = 0; tok < tokens; tok++) {
            std::vector<double> field(static_cast<size_t>(e.h) * e.w);
            for (size_t u = 0; u < field.size(); u++) {
                field[u] = e.soft[static_cast<size_t>(tok) * e.h * e.w + u];
            }
            auto up = resample_nearest(field, e.h, e.w, cell, cell);
            int oy = tok * (band_h + 2 * pad) + pad + lay * (cell + pad) + pad;
            int ox = pad + col * (cell + pad);
            for (int y = 0; y < cell; y++) {
                for (int x = 0; x < cell; x++) {
                    out.at(oy + y, ox + x, 0) =
                        std::min(1.0, std::max(0.0, up[static_cast<size_t>(y) * cell + x]));
                }
            }
        }
    }
    quantize_u8(out);
    return out;
}

void write_trace_mosaic(const RoutingTrace& trace, const std::string& path) {
    write_png(path, trace_mosaic(trace));
}
