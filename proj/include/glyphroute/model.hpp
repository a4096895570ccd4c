// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "glyphroute/encoder.hpp"
#include "glyphroute/latent.hpp"

// The full encode-then-route stack: concept/detail/routing encoders, the
// routed denoiser, the noise schedule, and everything that needs them
// (sampling, reference-prompted segmentation, checkpoints).

struct SampleSettings {
    int steps = 25;
    double guidance = 7.5;
    double rho = 7.0;
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    uint64_t seed = 0;
    double eta = 1.0;
    double gamma = 0.0;
    RoutingOverride override_mode = RoutingOverride::none;
    bool record_trace = true;
};

struct SampleResult {
    Image image;
    Tensor z0;
    RoutingTrace trace;
    EdmTrajectory trajectory;
    int cond_calls = 0;
    int uncond_calls = 0;
};

struct Model {
    ModelConfig cfg;
    int vocab = 0;
    int text_len = 0;
    ParamRegistry reg;
    NoiseSchedule sched;
    LatentCodec codec;

    ConceptEncoder concept_encoder;
    SubjectQFormer subject_qf;
    Router router;
    DetailEncoder detail;
    Denoiser denoiser;

    static Model create(const ModelConfig& cfg, uint64_t init_seed);

    // Copies denoiser weights into the detail encoder wherever names (sans
    // prefix) and shapes line up; the mirrored layout makes that most of it.
    void init_detail_from_denoiser();

    // ---- encodings ----
    Tensor encode_text(Tape& t, const std::vector<int>& caption) const;
    Tensor encode_concept(Tape& t, const Image& segmented_ref) const;  // E, m x d_c
    Tensor background_concept(Tape& t) const;                          // E_{N+1}
    Tensor routing_token_for(Tape& t, const Image& ref_or_zero) const;
    std::vector<Tensor> encode_detail_features(Tape& t, const ReferencePack& ref) const;
    // The detail-feature sets as consumed downstream: the first
    // self-attention layer's hidden state is dropped, leaving L-1 sets.
    std::vector<Tensor> detail_feature_sets(Tape& t, const ReferencePack& ref) const;
    SubjectEncoding encode_subject(Tape& t, const ReferencePack& ref) const;
    SubjectEncoding background_encoding(Tape& t) const;
    ConditioningBundle make_bundle(Tape& t, const std::vector<int>& caption,
                                   const std::vector<ReferencePack>& refs, double eta,
                                   double gamma) const;

    DenoiseOutput forward(Tape& t, const Tensor& z_t, double lambda_cond,
                          const ConditioningBundle& bundle, const ForwardOptions& opt) const {
        return denoiser.forward(t, z_t, lambda_cond, bundle, router, opt);
    }

    // ---- inference ----
    SampleResult sample(const std::vector<int>& caption,
                        const std::vector<ReferencePack>& refs,
                        const SampleSettings& settings) const;

    // Reference-prompted segmentation: encode, add a small amount of noise,
    // run one denoiser forward, return the final layer's hardened subject
    // maps upsampled to image resolution (plus derived background).
    std::vector<std::vector<double>> segment_by_reference(
        const Image& image, const std::vector<ReferencePack>& refs, int t_index = 2,
        uint64_t noise_seed = 0) const;

    // ---- persistence ----
    void save_checkpoint(const std::string& path, const nlohmann::json& extra_meta) const;
    static Model load_checkpoint(const std::string& path);
    static nlohmann::json checkpoint_meta(const std::string& path);

    uint64_t group_hash(ParamGroup g) const { return reg.group_hash(g); }
    uint64_t all_params_hash() const;
};

// Zero-valued reference image at the configured reference size.
Image zero_reference_image(const ModelConfig& cfg);
