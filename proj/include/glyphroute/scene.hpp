// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glyphroute/imageio.hpp"

// Procedural multi-subject glyph world. Every render is a pure function of
// specs and seeds; images are quantized to the 8-bit grid so PNG files are
// exact. Instance masks are hard (pixel-center) and resolved in painter's
// order, so they are pairwise disjoint by construction.

constexpr int kGlyphShapeCount = 8;
const char* glyph_shape_name(int shape_id);

constexpr int kColorCount = 8;
const char* color_name(int color_id);
void color_rgb(int color_id, double rgb[3]);

struct SubjectSpec {
    uint32_t identity_id = 0;
    int shape_id = 0;
    double color[3] = {0, 0, 0};
    int color_id = 0;
    uint64_t texture_seed = 0;
    double base_scale = 0.3;  // glyph extent as a fraction of image height
};

// identity_id determines (shape_id, color, texture_seed, base_scale).
SubjectSpec spec_from_identity(uint32_t identity_id);

struct SceneConfig {
    int image_size = 64;
    int ref_size = 32;
    int max_subjects = 4;
    int retry_limit = 32;
    double min_mask_frac = 0.01;
};

struct Scene {
    Image image;                             // H x W x 3
    std::vector<std::vector<double>> masks;  // per subject, H*W, values {0,1}
    std::vector<int> caption;                // padded token sequence
    std::vector<SubjectSpec> subjects;
    int bg_color_id = 0;
    uint64_t layout_seed = 0;
    uint64_t bg_seed = 0;
};

struct AugmentRecord {
    bool applied = false;
    double rotation_deg = 0.0;
    int crop_x0 = 0, crop_y0 = 0, crop_w = 0, crop_h = 0;
    int pad_x = 0, pad_y = 0;  // placement offset of the crop on the canvas
};

struct ReferencePack {
    Image image;               // ref_size^2 x 3, white outside mask (pre-augment)
    std::vector<double> mask;  // ref_size^2, {0,1}
    uint32_t identity_id = 0;
    AugmentRecord aug;
};

Scene render_scene(const std::vector<SubjectSpec>& specs, uint64_t layout_seed,
                   uint64_t bg_seed, const SceneConfig& cfg = {});

ReferencePack render_reference(const SubjectSpec& spec, uint64_t view_seed, bool augment,
                               const SceneConfig& cfg = {});

// Applies a concrete augmentation record (rotation about the canvas center,
// crop, zero-pad placement). Exposed so the identity record can be tested.
ReferencePack apply_augment(const ReferencePack& pack, const AugmentRecord& rec);
AugmentRecord sample_augment(uint64_t seed, int size);

std::pair<ReferencePack, Scene> make_pair(const SubjectSpec& spec, uint64_t ref_seed,
                                          uint64_t scene_seed, const SceneConfig& cfg = {});

// Builds a reference pack from a subject's appearance inside a scene: crop
// the mask bounding box, resample to ref_size, white background. Used by the
// router training stage, where unpaired scenes double as their own
// references.
ReferencePack reference_from_scene(const Scene& scene, int subject_index,
                                   const SceneConfig& cfg = {});

// ---- caption vocabulary (closed, fixed grammar) ----
int vocab_size();
const std::vector<std::string>& vocab_words();
int word_token(const std::string& word);  // throws ConfigError on unknown word
int caption_length(const SceneConfig& cfg);
std::vector<int> make_caption(const std::vector<SubjectSpec>& specs, int bg_color_id,
                              const SceneConfig& cfg);
std::string caption_to_string(const std::vector<int>& tokens);
std::vector<int> caption_from_string(const std::string& text, const SceneConfig& cfg);

struct ParsedCaption {
    std::vector<std::pair<int, int>> subjects;  // (color_id, shape_id)
    int bg_color_id = -1;
};
ParsedCaption parse_caption(const std::vector<int>& tokens);

// ---- dataset ----
struct DatasetConfig {
    int n_samples = 0;
    int subjects_min = 1;
    int subjects_max = 3;
    double single_subject_fraction = 0.5;
    uint64_t seed = 0;
    uint32_t identity_pool = 4096;  // identities are sampled below this bound
    std::string out_dir;
    SceneConfig scene;
};

struct SampleRecord {
    std::vector<uint32_t> identities;
    uint64_t layout_seed = 0;
    uint64_t bg_seed = 0;
    std::vector<uint64_t> ref_seeds;
};

struct DatasetManifest {
    DatasetConfig config;
    std::vector<SampleRecord> samples;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

struct LoadedSample {
    Scene scene;
    std::vector<ReferencePack> refs;  // canonical (unaugmented) references
};

// Renders a sample from its record; bitwise reproducible.
LoadedSample materialize_sample(const SampleRecord& rec, const SceneConfig& cfg);

// Generates records, writes PNGs plus manifest.json under cfg.out_dir.
DatasetManifest build_dataset(const DatasetConfig& cfg);
DatasetManifest load_dataset_manifest(const std::string& path);
