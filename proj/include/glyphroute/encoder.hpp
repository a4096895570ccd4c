// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "glyphroute/denoiser.hpp"
#include "glyphroute/imageio.hpp"
#include "glyphroute/latent.hpp"
#include "glyphroute/scene.hpp"

// Subject encoders. The concept path is a small patch transformer trained
// from scratch (its penultimate patch states stand in for a pretrained
// vision encoder's features) followed by an m-query query-transformer that
// yields the concept tokens E. The detail path mirrors the denoiser's block
// layout with every cross-attention piece removed and consumes the
// segmented reference latent plus a subject-mask channel; hidden states of
// self-attention layers 2..L are the detail features.

struct ConceptEncoder {
    int width = 0, patch = 0, ref_size = 0, heads = 1;
    Linear patch_embed;
    Tensor cls;
    Tensor pos;
    struct Block {
        LayerNorm ln1;
        Linear q, k, v, o;
        LayerNorm ln2;
        Linear f1, f2;
    };
    std::vector<Block> blocks;
    LayerNorm final_ln;

    static ConceptEncoder create(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng);

    // Patch features including a leading CLS row: (patches+1) x width.
    Tensor trunk_features(Tape& t, const Image& ref_image) const;
};

struct SubjectQFormer {
    Tensor queries;  // m x d_c
    Linear feat_proj;
    struct Layer {
        LayerNorm ln1;
        Linear sq, sk, sv, so;
        LayerNorm ln2;
        Linear cq, ck, cv, co;
        LayerNorm ln3;
        Linear f1, f2;
    };
    std::vector<Layer> layers;
    int heads = 1;

    static SubjectQFormer create(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng);
    Tensor forward(Tape& t, const Tensor& trunk_features) const;  // m x d_c
};

struct DetailEncoder {
    ModelConfig cfg;
    bool with_cross = false;  // census-only variant retaining cross-attention
    Linear conv_in;           // (latent_channels+1) -> base
    Linear down, up_conv;
    std::vector<ResBlock> res;
    std::vector<SelfFfn> blocks;
    // census-only cross-attention pieces (never run)
    struct CrossPiece {
        LayerNorm ln;
        Linear q, k, v, o;
    };
    std::vector<CrossPiece> cross;

    static DetailEncoder create(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng,
                                bool with_cross = false,
                                ParamGroup group = ParamGroup::detail);

    // Input: segmented reference latent + mask channel, (hw x c+1).
    // Returns one hidden state per block (the residual stream entering each
    // self-attention layer). Callers drop index 0 per the layer-alignment
    // rule; the denoiser pairs G[b] with its own block b.
    std::vector<Tensor> forward(Tape& t, const Tensor& f_vae) const;
};

// Builds the detail-encoder input: encode the white-composited reference at
// reference resolution and concatenate the nearest-downsampled mask channel.
Tensor detail_input(const ReferencePack& ref, const ModelConfig& cfg);

// Parameter census per variant; "full" retains the cross-attention blocks.
size_t detail_encoder_param_count(const ModelConfig& cfg, bool with_cross);
