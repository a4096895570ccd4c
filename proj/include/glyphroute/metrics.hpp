// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "glyphroute/model.hpp"

// Quantified versions of the qualitative router claims: routing accuracy as
// IoU, subject fidelity from region statistics, cross-subject leakage under
// a color swap, and background whiteness bias. The ablation harness flips
// only the routing override (all-ones / ground truth); parameters are never
// touched, which callers can assert via Model::all_params_hash.

double mask_iou(const std::vector<double>& a, const std::vector<double>& b);

struct IouEntry {
    int step = 0, substep = 0, layer = 0, subject = 0;
    double iou = 0.0;
};

// IoU of hardened trace maps (nearest-upsampled) against ground-truth masks.
std::vector<IouEntry> routing_iou(const RoutingTrace& trace,
                                  const std::vector<std::vector<double>>& gt_masks, int h,
                                  int w);
double mean_iou(const std::vector<IouEntry>& entries);

struct FidelityResult {
    double score = 0.0;      // color similarity x (0.5 + 0.5 * edge similarity)
    bool empty_region = false;
};

// Compares the generated subject region (located by a mask at image
// resolution) against the subject's canonical reference rendering, after
// aligning bounding boxes. In [0,1]; exact re-render scores 1.
FidelityResult subject_fidelity(const Image& generated, const std::vector<double>& region,
                                const SubjectSpec& spec, const SceneConfig& cfg);

struct LeakagePair {
    double leakage_on = 0.0;
    double leakage_off = 0.0;
    Image image_on_a, image_on_b;  // kept for inspection
};

// Renders the same prompt/seed twice, swapping only subject B's color, and
// measures the mean absolute change inside subject A's routed region (taken
// from the router-on run so both modes integrate over the same pixels).
LeakagePair leakage_score(const Model& model, const SubjectSpec& a, const SubjectSpec& b,
                          uint64_t seed, const SampleSettings& base_settings,
                          const SceneConfig& scene_cfg);

struct BackgroundBiasPair {
    double bias_on = 0.0;
    double bias_off = 0.0;
};

// Mean min-channel value over a region: 1 for pure white, 0 for black or
// any saturated color.
double region_whiteness(const Image& img, const std::vector<double>& region);

// Whiteness (min channel) of the background-routed region under a colored
// background prompt; lower is better.
BackgroundBiasPair background_bias_score(const Model& model,
                                         const std::vector<SubjectSpec>& subjects,
                                         int bg_color_id, uint64_t seed,
                                         const SampleSettings& base_settings,
                                         const SceneConfig& scene_cfg);

struct EvalReport {
    int scenes = 0;
    double mean_segmentation_iou = 0.0;
    std::vector<double> per_scene_iou;
    double mean_fidelity = 0.0;
    int leakage_wins = 0;
    int leakage_total = 0;
    int bias_wins = 0;
    int bias_total = 0;
    double mean_leakage_on = 0.0, mean_leakage_off = 0.0;
    double mean_bias_on = 0.0, mean_bias_off = 0.0;

    nlohmann::json to_json() const;
    void write_csv(const std::string& path) const;
};
