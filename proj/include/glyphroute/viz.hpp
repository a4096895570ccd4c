// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "glyphroute/imageio.hpp"
#include "glyphroute/router.hpp"

// Routing-map mosaics: one row band per routing token (subjects top to
// bottom, background last), within a band the sampler steps run left to
// right and the cross-attention layers top to bottom. Soft maps render as
// grayscale, upsampled nearest to a fixed cell size.

Image trace_mosaic(const RoutingTrace& trace, int cell = 32, bool include_background = true);

void write_trace_mosaic(const RoutingTrace& trace, const std::string& path);
