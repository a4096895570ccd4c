// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <json.hpp>

// Dimensions of the miniature latent-diffusion stack. The denoiser and the
// detail encoder share one block layout: four transformer blocks over two
// resolutions (full latent grid and a 2x downsample), channels
// [base, mid, mid, base]. The detail encoder runs the same layout on the
// reference latent, minus every cross-attention piece.

struct ModelConfig {
    int image_size = 64;
    int ref_size = 32;
    int patch = 4;

    int base_channels = 48;
    int mid_channels = 80;
    int attn_dim = 64;
    int heads = 4;
    int ffn_mult = 2;
    int time_dim = 128;

    int text_dim = 64;       // d_c; equals the text-condition dim by construction
    int concept_tokens = 64; // m
    int concept_width = 64;
    int concept_patch = 4;
    int concept_layers = 3;
    int qformer_layers = 4;
    int routing_dim = 32;    // d_r

    int max_subjects = 4;
    double eta = 1.0;
    double gamma = 0.0;

    int schedule_steps = 1000;
    double noise_ratio_min = 0.002;
    double noise_ratio_max = 80.0;
    // EDM-style preconditioning scale inside the epsilon parametrization.
    double sigma_data = 0.5;

    int latent_hw() const { return image_size / patch; }
    int latent_channels() const { return 3 * patch * patch; }
    int ref_latent_hw() const { return ref_size / patch; }
    int n_blocks() const { return 4; }
    std::vector<int> block_channels() const {
        return {base_channels, mid_channels, mid_channels, base_channels};
    }
    // Spatial side of each block for a trunk whose input grid is `hw`.
    std::vector<int> block_sides(int hw) const { return {hw, hw / 2, hw / 2, hw}; }
    int concept_patches() const {
        int side = ref_size / concept_patch;
        return side * side;
    }

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    void validate() const;
};
