// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/metrics.hpp"

#include <cmath>
#include <fstream>

#include "glyphroute/errors.hpp"

double mask_iou(const std::vector<double>& a, const std::vector<double>& b) {
    GR_CHECK(a.size() == b.size(), ShapeError, "mask_iou: size mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.size(); i++) {
        bool pa = a[i] > 0.5, pb = b[i] > 0.5;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) return 1.0;  // both empty
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<IouEntry> routing_iou(const RoutingTrace& trace,
                                  const std::vector<std::vector<double>>& gt_masks, int h,
                                  int w) {
    std::vector<IouEntry> out;
    for (const auto& e : trace.entries) {
        for (int s = 0; s < std::min(e.subjects, static_cast<int>(gt_masks.size())); s++) {
            std::vector<double> pred(static_cast<size_t>(e.h) * e.w);
            for (size_t u = 0; u < pred.size(); u++) {
                pred[u] = e.hard[static_cast<size_t>(s) * e.h * e.w + u];
            }
            auto up = resample_nearest(pred, e.h, e.w, h, w);
            IouEntry entry;
            entry.step = e.step;
            entry.substep = e.substep;
            entry.layer = e.layer;
            entry.subject = s;
            entry.iou = mask_iou(up, gt_masks[static_cast<size_t>(s)]);
            out.push_back(entry);
        }
    }
    return out;
}

double mean_iou(const std::vector<IouEntry>& entries) {
    if (entries.empty()) return 0.0;
    double acc = 0;
    for (const auto& e : entries) acc += e.iou;
    return acc / static_cast<double>(entries.size());
}

namespace {

struct Bbox {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    bool valid() const { return x1 >= x0 && y1 >= y0; }
    int w() const { return x1 - x0 + 1; }
    int h() const { return y1 - y0 + 1; }
};

Bbox mask_bbox(const std::vector<double>& mask, int h, int w) {
    Bbox b;
    b.x0 = w;
    b.y0 = h;
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            if (mask[static_cast<size_t>(y) * w + x] > 0.5) {
                b.x0 = std::min(b.x0, x);
                b.x1 = std::max(b.x1, x);
                b.y0 = std::min(b.y0, y);
                b.y1 = std::max(b.y1, y);
            }
        }
    }
    return b;
}

double luminance(const Image& img, int y, int x) {
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

// Magnitude-weighted 4-bin gradient orientation histogram inside a mask.
std::vector<double> edge_histogram(const Image& img, const std::vector<double>& mask) {
    std::vector<double> hist(4, 0.0);
    for (int y = 1; y < img.h - 1; y++) {
        for (int x = 1; x < img.w - 1; x++) {
            if (mask[static_cast<size_t>(y) * img.w + x] <= 0.5) continue;
            double gx = luminance(img, y, x + 1) - luminance(img, y, x - 1);
            double gy = luminance(img, y + 1, x) - luminance(img, y - 1, x);
            double mag = std::sqrt(gx * gx + gy * gy);
            if (mag < 1e-9) continue;
            double ang = std::atan2(gy, gx);  // [-pi, pi]
            int bin = static_cast<int>(std::floor((ang + 3.14159265358979) / (3.14159265358979 / 2.0)));
            bin = std::min(3, std::max(0, bin));
            hist[static_cast<size_t>(bin)] += mag;
        }
    }
    return hist;
}

double cosine_sim(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); i++) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 && nb == 0) return 1.0;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

FidelityResult subject_fidelity(const Image& generated, const std::vector<double>& region,
                                const SubjectSpec& spec, const SceneConfig& cfg) {
    FidelityResult res;
    Bbox gb = mask_bbox(region, generated.h, generated.w);
    if (!gb.valid()) {
        res.empty_region = true;
        return res;
    }
    // canonical rendering: deterministic view, no augmentation
    ReferencePack canon = render_reference(spec, 0, false, cfg);
    Bbox cb = mask_bbox(canon.mask, canon.image.h, canon.image.w);
    GR_CHECK(cb.valid(), ShapeError, "subject_fidelity: canonical render has empty mask");

    // Resample both regions into the generated bounding box frame so the
    // comparison is pixel-aligned; an exact re-render reproduces the crop
    // bitwise and scores exactly 1.
    double diff_acc = 0;
    size_t count = 0;
    Image gen_crop(gb.h(), gb.w(), 3);
    Image canon_crop(gb.h(), gb.w(), 3);
    std::vector<double> gen_mask(static_cast<size_t>(gb.h()) * gb.w(), 0.0);
    std::vector<double> canon_mask(static_cast<size_t>(gb.h()) * gb.w(), 0.0);
    for (int y = 0; y < gb.h(); y++) {
        for (int x = 0; x < gb.w(); x++) {
            int cy = cb.y0 + y * cb.h() / gb.h();
            int cx = cb.x0 + x * cb.w() / gb.w();
            bool on_gen =
                region[static_cast<size_t>(gb.y0 + y) * generated.w + (gb.x0 + x)] > 0.5;
            bool on_canon =
                canon.mask[static_cast<size_t>(cy) * canon.image.w + cx] > 0.5;
            if (on_gen) {
                gen_mask[static_cast<size_t>(y) * gb.w() + x] = 1.0;
                for (int c = 0; c < 3; c++) {
                    gen_crop.at(y, x, c) = generated.at(gb.y0 + y, gb.x0 + x, c);
                }
            }
            if (on_canon) {
                canon_mask[static_cast<size_t>(y) * gb.w() + x] = 1.0;
                for (int c = 0; c < 3; c++) {
                    canon_crop.at(y, x, c) = canon.image.at(cy, cx, c);
                }
            }
            if (!on_gen || !on_canon) continue;
            for (int c = 0; c < 3; c++) {
                diff_acc += std::fabs(gen_crop.at(y, x, c) - canon_crop.at(y, x, c));
            }
            count += 3;
        }
    }
    if (count == 0) {
        res.empty_region = true;
        return res;
    }
    double color_sim = std::max(0.0, 1.0 - diff_acc / static_cast<double>(count));

    auto canon_hist = edge_histogram(canon_crop, canon_mask);
    auto gen_hist = edge_histogram(gen_crop, gen_mask);
    double edge_sim = cosine_sim(gen_hist, canon_hist);

    // Squared color term: complement-colored impostors land near zero.
    res.score = color_sim * color_sim * (0.5 + 0.5 * std::max(0.0, edge_sim));
    return res;
}

namespace {

// Shared two-subject generation for the leakage probe.
struct SwapRun {
    Image base, swapped;
    std::vector<double> region_a;  // router-on final-layer region of subject A
};

SwapRun run_swap(const Model& model, const SubjectSpec& a, const SubjectSpec& b,
                 const SubjectSpec& b_swapped, uint64_t seed,
                 const SampleSettings& base_settings, const SceneConfig& scene_cfg,
                 RoutingOverride mode, const std::vector<double>* region_override) {
    SwapRun out;
    auto make_refs = [&](const SubjectSpec& second) {
        std::vector<ReferencePack> refs;
        refs.push_back(render_reference(a, derive_seed(seed, tag_hash("refA")), false,
                                        scene_cfg));
        refs.push_back(render_reference(second, derive_seed(seed, tag_hash("refB")), false,
                                        scene_cfg));
        return refs;
    };
    int bg_color = static_cast<int>(seed % kColorCount);

    SampleSettings st = base_settings;
    st.seed = seed;
    st.override_mode = mode;
    st.record_trace = true;

    auto caption_for = [&](const SubjectSpec& second) {
        return make_caption({a, second}, bg_color, scene_cfg);
    };

    auto r1 = model.sample(caption_for(b), make_refs(b), st);
    auto r2 = model.sample(caption_for(b_swapped), make_refs(b_swapped), st);
    out.base = r1.image;
    out.swapped = r2.image;

    if (region_override != nullptr) {
        out.region_a = *region_override;
    } else {
        // subject A's hardened region at the final layer of the last call
        const auto& entries = r1.trace.entries;
        GR_CHECK(!entries.empty(), ConfigError, "leakage probe needs a recorded trace");
        const auto& last = entries.back();
        std::vector<double> pred(static_cast<size_t>(last.h) * last.w);
        for (size_t u = 0; u < pred.size(); u++) pred[u] = last.hard[u];
        out.region_a = resample_nearest(pred, last.h, last.w, model.cfg.image_size,
                                        model.cfg.image_size);
    }
    return out;
}

double mean_abs_change(const Image& x, const Image& y, const std::vector<double>& region) {
    double acc = 0;
    size_t count = 0;
    for (int yy = 0; yy < x.h; yy++) {
        for (int xx = 0; xx < x.w; xx++) {
            if (region[static_cast<size_t>(yy) * x.w + xx] <= 0.5) continue;
            for (int c = 0; c < 3; c++) {
                acc += std::fabs(x.at(yy, xx, c) - y.at(yy, xx, c));
            }
            count += 3;
        }
    }
    return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

}  // namespace

LeakagePair leakage_score(const Model& model, const SubjectSpec& a, const SubjectSpec& b,
                          uint64_t seed, const SampleSettings& base_settings,
                          const SceneConfig& scene_cfg) {
    // Swap only subject B's color.
    SubjectSpec b_swapped = b;
    b_swapped.color_id = (b.color_id + 3) % kColorCount;
    color_rgb(b_swapped.color_id, b_swapped.color);

    auto on = run_swap(model, a, b, b_swapped, seed, base_settings, scene_cfg,
                       RoutingOverride::none, nullptr);
    auto off = run_swap(model, a, b, b_swapped, seed, base_settings, scene_cfg,
                        RoutingOverride::force_ones, &on.region_a);

    LeakagePair pair;
    pair.leakage_on = mean_abs_change(on.base, on.swapped, on.region_a);
    pair.leakage_off = mean_abs_change(off.base, off.swapped, on.region_a);
    pair.image_on_a = on.base;
    pair.image_on_b = on.swapped;
    return pair;
}

BackgroundBiasPair background_bias_score(const Model& model,
                                         const std::vector<SubjectSpec>& subjects,
                                         int bg_color_id, uint64_t seed,
                                         const SampleSettings& base_settings,
                                         const SceneConfig& scene_cfg) {
    std::vector<ReferencePack> refs;
    for (size_t i = 0; i < subjects.size(); i++) {
        refs.push_back(render_reference(subjects[i],
                                        derive_seed(seed, tag_hash("biasref"), i), false,
                                        scene_cfg));
    }
    auto caption = make_caption(subjects, bg_color_id, scene_cfg);

    SampleSettings st = base_settings;
    st.seed = seed;
    st.record_trace = true;

    st.override_mode = RoutingOverride::none;
    auto on = model.sample(caption, refs, st);
    st.override_mode = RoutingOverride::force_ones;
    auto off = model.sample(caption, refs, st);

    // Background region: complement of the subjects' final-layer regions in
    // the router-on run, shared by both measurements.
    const auto& entries = on.trace.entries;
    GR_CHECK(!entries.empty(), ConfigError, "bias probe needs a recorded trace");
    const auto& last = entries.back();
    std::vector<double> bg(static_cast<size_t>(last.h) * last.w);
    for (size_t u = 0; u < bg.size(); u++) {
        bg[u] = last.hard[static_cast<size_t>(last.subjects) * last.h * last.w + u];
    }
    auto region = resample_nearest(bg, last.h, last.w, model.cfg.image_size,
                                   model.cfg.image_size);

    BackgroundBiasPair pair;
    pair.bias_on = region_whiteness(on.image, region);
    pair.bias_off = region_whiteness(off.image, region);
    return pair;
}

double region_whiteness(const Image& img, const std::vector<double>& region) {
    double acc = 0;
    size_t count = 0;
    for (int y = 0; y < img.h; y++) {
        for (int x = 0; x < img.w; x++) {
            if (region[static_cast<size_t>(y) * img.w + x] <= 0.5) continue;
            acc += std::min({img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
            count++;
        }
    }
    return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

nlohmann::json EvalReport::to_json() const {
    return {{"scenes", scenes},
            {"mean_segmentation_iou", mean_segmentation_iou},
            {"per_scene_iou", per_scene_iou},
            {"mean_fidelity", mean_fidelity},
            {"leakage_wins", leakage_wins},
            {"leakage_total", leakage_total},
            {"bias_wins", bias_wins},
            {"bias_total", bias_total},
            {"mean_leakage_on", mean_leakage_on},
            {"mean_leakage_off", mean_leakage_off},
            {"mean_bias_on", mean_bias_on},
            {"mean_bias_off", mean_bias_off}};
}

void EvalReport::write_csv(const std::string& path) const {
    std::ofstream f(path);
    GR_CHECK(f.good(), IoError, "cannot write eval csv: " + path);
    f << "metric,value\n";
    f << "scenes," << scenes << "\n";
    f << "mean_segmentation_iou," << mean_segmentation_iou << "\n";
    f << "mean_fidelity," << mean_fidelity << "\n";
    f << "leakage_wins," << leakage_wins << "\n";
    f << "leakage_total," << leakage_total << "\n";
    f << "bias_wins," << bias_wins << "\n";
    f << "bias_total," << bias_total << "\n";
    f << "mean_leakage_on," << mean_leakage_on << "\n";
    f << "mean_leakage_off," << mean_leakage_off << "\n";
    f << "mean_bias_on," << mean_bias_on << "\n";
    f << "mean_bias_off," << mean_bias_off << "\n";
}
