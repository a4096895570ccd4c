// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "glyphroute/errors.hpp"
#include "glyphroute/rng.hpp"
#include "glyphroute/serialize.hpp"

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* kShapeNames[kGlyphShapeCount] = {"circle", "square",  "triangle", "diamond",
                                             "ring",   "cross",   "star",     "heart"};

const char* kColorNames[kColorCount] = {"red",  "green",  "blue", "yellow",
                                        "purple", "orange", "cyan", "pink"};

const double kColorRgb[kColorCount][3] = {
    {0.90, 0.10, 0.10}, {0.10, 0.80, 0.15}, {0.15, 0.20, 0.90}, {0.95, 0.85, 0.10},
    {0.60, 0.15, 0.80}, {0.95, 0.50, 0.10}, {0.10, 0.80, 0.85}, {0.95, 0.45, 0.70}};

bool inside_shape(int shape_id, double u, double v) {
    switch (shape_id) {
        case 0:  // circle
            return u * u + v * v <= 0.9 * 0.9;
        case 1:  // square
            return std::max(std::fabs(u), std::fabs(v)) <= 0.78;
        case 2: {  // triangle, apex up (image v grows downward)
            if (v < -0.85 || v > 0.7) return false;
            double halfw = 0.82 * (v + 0.85) / 1.55;
            return std::fabs(u) <= halfw;
        }
        case 3:  // diamond
            return std::fabs(u) + std::fabs(v) <= 0.88;
        case 4: {  // ring
            double r2 = u * u + v * v;
            return r2 <= 0.9 * 0.9 && r2 >= 0.45 * 0.45;
        }
        case 5:  // cross
            return (std::fabs(u) <= 0.28 && std::fabs(v) <= 0.86) ||
                   (std::fabs(v) <= 0.28 && std::fabs(u) <= 0.86);
        case 6: {  // five-point star: piecewise-linear radius between spikes
            double r = std::sqrt(u * u + v * v);
            if (r < 1e-12) return true;
            double theta = std::atan2(-v, u) + kPi / 2.0;  // spike up
            double sector = 2.0 * kPi / 5.0;
            double phi = std::fmod(std::fmod(theta, sector) + sector, sector) - sector / 2.0;
            double t = std::fabs(phi) / (sector / 2.0);
            double rmax = 0.95 + (0.38 - 0.95) * (1.0 - t);
            // t=1 at spike angles, t=0 at valleys
            return r <= rmax;
        }
        case 7: {  // heart
            double hx = u * 1.25;
            double hy = -v * 1.25 + 0.35;
            double a = hx * hx + hy * hy - 1.0;
            return a * a * a - hx * hx * hy * hy * hy <= 0.0;
        }
        default:
            return false;
    }
}

// Texture pattern in glyph-local coordinates; rotates with the glyph.
// Pattern kind and phase come from texture_seed and are not in the caption,
// so references carry appearance information text alone cannot.
bool texture_on(uint64_t texture_seed, double u, double v) {
    uint64_t s = texture_seed;
    uint64_t kind = splitmix64(s) % 4;
    double phase = static_cast<double>(splitmix64(s) % 997) / 997.0;
    double freq = 2.0 + static_cast<double>(splitmix64(s) % 3);
    switch (kind) {
        case 0:  // stripes
            return std::sin((u * freq + phase * 2.0) * kPi) > 0.0;
        case 1:  // checker
            return (std::sin((u * freq + phase) * kPi) > 0.0) !=
                   (std::sin((v * freq + phase) * kPi) > 0.0);
        case 2: {  // dots
            double gu = std::fmod(std::fabs(u * freq + phase), 1.0) - 0.5;
            double gv = std::fmod(std::fabs(v * freq + phase), 1.0) - 0.5;
            return gu * gu + gv * gv < 0.09;
        }
        default: {  // radial rings
            double r = std::sqrt(u * u + v * v);
            return std::sin((r * freq + phase) * 2.0 * kPi) > 0.0;
        }
    }
}

void texture_color(const SubjectSpec& spec, double u, double v, double out[3]) {
    uint64_t s = spec.texture_seed ^ 0x5bd1e995u;
    uint64_t variant = splitmix64(s) % 3;
    bool on = texture_on(spec.texture_seed, u, v);
    for (int c = 0; c < 3; c++) out[c] = spec.color[c];
    if (!on) return;
    switch (variant) {
        case 0:  // darken
            for (int c = 0; c < 3; c++) out[c] *= 0.45;
            break;
        case 1:  // lighten toward white
            for (int c = 0; c < 3; c++) out[c] = out[c] + (1.0 - out[c]) * 0.55;
            break;
        default:  // channel rotation
            std::swap(out[0], out[1]);
            std::swap(out[1], out[2]);
            break;
    }
}

struct Placement {
    double cx, cy;       // pixels
    double half_extent;  // pixels
    double rot;          // radians
};

// Renders one glyph over image/mask. Mask is hard (pixel centers).
void paint_glyph(Image& img, std::vector<double>& mask, const SubjectSpec& spec,
                 const Placement& p) {
    int h = img.h, w = img.w;
    double cr = std::cos(p.rot), sr = std::sin(p.rot);
    int y0 = std::max(0, static_cast<int>(std::floor(p.cy - p.half_extent * 1.5)));
    int y1 = std::min(h - 1, static_cast<int>(std::ceil(p.cy + p.half_extent * 1.5)));
    int x0 = std::max(0, static_cast<int>(std::floor(p.cx - p.half_extent * 1.5)));
    int x1 = std::min(w - 1, static_cast<int>(std::ceil(p.cx + p.half_extent * 1.5)));
    for (int y = y0; y <= y1; y++) {
        for (int x = x0; x <= x1; x++) {
            double dx = (x + 0.5 - p.cx) / p.half_extent;
            double dy = (y + 0.5 - p.cy) / p.half_extent;
            double u = dx * cr + dy * sr;
            double v = -dx * sr + dy * cr;
            if (!inside_shape(spec.shape_id, u, v)) continue;
            double rgb[3];
            texture_color(spec, u, v, rgb);
            for (int c = 0; c < 3; c++) img.at(y, x, c) = rgb[c];
            mask[static_cast<size_t>(y) * w + x] = 1.0;
        }
    }
}

Placement sample_scene_placement(uint64_t layout_seed, uint32_t identity, int attempt,
                                 const SubjectSpec& spec, int size) {
    Rng rng(derive_seed(layout_seed, tag_hash("place"), identity, static_cast<uint64_t>(attempt)));
    Placement p;
    p.half_extent = spec.base_scale * size / 2.0 * (0.9 + 0.2 * rng.uniform());
    double margin = 0.22;
    p.cx = (margin + (1.0 - 2 * margin) * rng.uniform()) * size;
    p.cy = (margin + (1.0 - 2 * margin) * rng.uniform()) * size;
    p.rot = (rng.uniform() * 2.0 - 1.0) * (30.0 * kPi / 180.0);
    return p;
}

void paint_background(Image& img, uint64_t bg_seed, int bg_color_id) {
    Rng rng(derive_seed(bg_seed, tag_hash("bgshade")));
    double base[3];
    color_rgb(bg_color_id, base);
    // Dim vertical gradient; keeps "whiteness" of generated backgrounds
    // a meaningful signal.
    double top = 0.42 + 0.12 * rng.uniform();
    double bottom = 0.62 + 0.12 * rng.uniform();
    for (int y = 0; y < img.h; y++) {
        double f = top + (bottom - top) * (static_cast<double>(y) / (img.h - 1));
        for (int x = 0; x < img.w; x++) {
            for (int c = 0; c < 3; c++) img.at(y, x, c) = base[c] * f;
        }
    }
}

}  // namespace

const char* glyph_shape_name(int shape_id) {
    GR_CHECK(shape_id >= 0 && shape_id < kGlyphShapeCount, ConfigError, "bad shape id");
    return kShapeNames[shape_id];
}

const char* color_name(int color_id) {
    GR_CHECK(color_id >= 0 && color_id < kColorCount, ConfigError, "bad color id");
    return kColorNames[color_id];
}

void color_rgb(int color_id, double rgb[3]) {
    GR_CHECK(color_id >= 0 && color_id < kColorCount, ConfigError, "bad color id");
    for (int c = 0; c < 3; c++) rgb[c] = kColorRgb[color_id][c];
}

SubjectSpec spec_from_identity(uint32_t identity_id) {
    SubjectSpec s;
    s.identity_id = identity_id;
    s.shape_id = static_cast<int>(identity_id % kGlyphShapeCount);
    s.color_id = static_cast<int>((identity_id / kGlyphShapeCount) % kColorCount);
    color_rgb(s.color_id, s.color);
    s.texture_seed = derive_seed(identity_id, tag_hash("texture"));
    // Sized so a glyph spans several latent cells; routing maps live on a
    // 4x-downsampled grid and tiny glyphs would be unresolvable there.
    s.base_scale = 0.44 + 0.07 * static_cast<double>((identity_id / 64) % 3);
    return s;
}

Scene render_scene(const std::vector<SubjectSpec>& specs, uint64_t layout_seed,
                   uint64_t bg_seed, const SceneConfig& cfg) {
    GR_CHECK(!specs.empty(), PlacementError, "render_scene: no subjects requested");
    GR_CHECK(static_cast<int>(specs.size()) <= cfg.max_subjects, PlacementError,
             "render_scene: too many subjects");
    for (size_t i = 0; i < specs.size(); i++) {
        for (size_t j = i + 1; j < specs.size(); j++) {
            GR_CHECK(specs[i].identity_id != specs[j].identity_id, ConfigError,
                     "render_scene: duplicate identity_id");
        }
    }

    int size = cfg.image_size;
    Rng bg_rng(derive_seed(bg_seed, tag_hash("bgcolor")));
    int bg_color_id = static_cast<int>(bg_rng.uniform_int(kColorCount));

    double min_pixels = cfg.min_mask_frac * size * size;
    for (int attempt = 0; attempt < cfg.retry_limit; attempt++) {
        Scene scene;
        scene.layout_seed = layout_seed;
        scene.bg_seed = bg_seed;
        scene.subjects = specs;
        scene.bg_color_id = bg_color_id;
        scene.image = Image(size, size, 3);
        paint_background(scene.image, bg_seed, bg_color_id);
        scene.masks.assign(specs.size(), std::vector<double>(static_cast<size_t>(size) * size, 0.0));

        // Painter's order by list index; later subjects occlude earlier ones.
        for (size_t i = 0; i < specs.size(); i++) {
            Placement p = sample_scene_placement(layout_seed, specs[i].identity_id, attempt,
                                                 specs[i], size);
            // clear occluded pixels of earlier subjects as we go
            std::vector<double> fresh(static_cast<size_t>(size) * size, 0.0);
            paint_glyph(scene.image, fresh, specs[i], p);
            for (size_t j = 0; j < i; j++) {
                for (size_t px = 0; px < fresh.size(); px++) {
                    if (fresh[px] > 0.5) scene.masks[j][px] = 0.0;
                }
            }
            scene.masks[i] = std::move(fresh);
        }

        bool ok = true;
        for (const auto& m : scene.masks) {
            double area = 0;
            for (double v : m) area += v;
            if (area < min_pixels) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;

        quantize_u8(scene.image);
        scene.caption = make_caption(specs, bg_color_id, cfg);
        return scene;
    }
    throw PlacementError("render_scene: no valid layout after retries");
}

AugmentRecord sample_augment(uint64_t seed, int size) {
    Rng rng(derive_seed(seed, tag_hash("augment")));
    AugmentRecord rec;
    rec.applied = true;
    rec.rotation_deg = (rng.uniform() * 2.0 - 1.0) * 25.0;
    int min_keep = static_cast<int>(size * 0.75);
    rec.crop_w = min_keep + static_cast<int>(rng.uniform_int(size - min_keep + 1));
    rec.crop_h = min_keep + static_cast<int>(rng.uniform_int(size - min_keep + 1));
    rec.crop_x0 = static_cast<int>(rng.uniform_int(size - rec.crop_w + 1));
    rec.crop_y0 = static_cast<int>(rng.uniform_int(size - rec.crop_h + 1));
    rec.pad_x = static_cast<int>(rng.uniform_int(size - rec.crop_w + 1));
    rec.pad_y = static_cast<int>(rng.uniform_int(size - rec.crop_h + 1));
    return rec;
}

ReferencePack apply_augment(const ReferencePack& pack, const AugmentRecord& rec) {
    int size = pack.image.h;
    ReferencePack out;
    out.identity_id = pack.identity_id;
    out.aug = rec;
    out.image = Image(size, size, 3);
    out.mask.assign(static_cast<size_t>(size) * size, 0.0);

    // Rotate about the canvas center (inverse mapping, nearest neighbor);
    // out-of-range samples are white background.
    double rad = rec.rotation_deg * kPi / 180.0;
    double cr = std::cos(rad), sr = std::sin(rad);
    double cc = size / 2.0;
    Image rotated(size, size, 3);
    std::vector<double> rot_mask(static_cast<size_t>(size) * size, 0.0);
    for (int y = 0; y < size; y++) {
        for (int x = 0; x < size; x++) {
            double dx = x + 0.5 - cc, dy = y + 0.5 - cc;
            double sx = dx * cr + dy * sr + cc;
            double sy = -dx * sr + dy * cr + cc;
            int ix = static_cast<int>(std::floor(sx));
            int iy = static_cast<int>(std::floor(sy));
            if (ix >= 0 && ix < size && iy >= 0 && iy < size) {
                for (int c = 0; c < 3; c++) rotated.at(y, x, c) = pack.image.at(iy, ix, c);
                rot_mask[static_cast<size_t>(y) * size + x] =
                    pack.mask[static_cast<size_t>(iy) * size + ix];
            } else {
                for (int c = 0; c < 3; c++) rotated.at(y, x, c) = 1.0;
            }
        }
    }

    // Crop, then zero-pad onto a fresh canvas at the recorded offset.
    for (int y = 0; y < rec.crop_h; y++) {
        for (int x = 0; x < rec.crop_w; x++) {
            int sy = rec.crop_y0 + y, sx = rec.crop_x0 + x;
            int dy = rec.pad_y + y, dx = rec.pad_x + x;
            if (sy < 0 || sy >= size || sx < 0 || sx >= size) continue;
            if (dy < 0 || dy >= size || dx < 0 || dx >= size) continue;
            for (int c = 0; c < 3; c++) out.image.at(dy, dx, c) = rotated.at(sy, sx, c);
            out.mask[static_cast<size_t>(dy) * size + dx] =
                rot_mask[static_cast<size_t>(sy) * size + sx];
        }
    }
    quantize_u8(out.image);
    return out;
}

ReferencePack render_reference(const SubjectSpec& spec, uint64_t view_seed, bool augment,
                               const SceneConfig& cfg) {
    int size = cfg.ref_size;
    Rng rng(derive_seed(view_seed, tag_hash("refview"), spec.identity_id));
    ReferencePack pack;
    pack.identity_id = spec.identity_id;
    pack.image = Image(size, size, 3);
    std::fill(pack.image.px.begin(), pack.image.px.end(), 1.0);  // white background
    pack.mask.assign(static_cast<size_t>(size) * size, 0.0);

    Placement p;
    p.half_extent = 0.40 * size * (0.9 + 0.2 * rng.uniform());
    p.cx = size / 2.0 + (rng.uniform() * 2.0 - 1.0) * size * 0.04;
    p.cy = size / 2.0 + (rng.uniform() * 2.0 - 1.0) * size * 0.04;
    p.rot = (rng.uniform() * 2.0 - 1.0) * (20.0 * kPi / 180.0);
    paint_glyph(pack.image, pack.mask, spec, p);
    quantize_u8(pack.image);

    if (augment) {
        return apply_augment(pack, sample_augment(view_seed, size));
    }
    return pack;
}

std::pair<ReferencePack, Scene> make_pair(const SubjectSpec& spec, uint64_t ref_seed,
                                          uint64_t scene_seed, const SceneConfig& cfg) {
    ReferencePack ref = render_reference(spec, ref_seed, false, cfg);
    Scene scene = render_scene({spec}, derive_seed(scene_seed, tag_hash("pairlayout")),
                               derive_seed(scene_seed, tag_hash("pairbg")), cfg);
    return {std::move(ref), std::move(scene)};
}

ReferencePack reference_from_scene(const Scene& scene, int subject_index,
                                   const SceneConfig& cfg) {
    GR_CHECK(subject_index >= 0 && subject_index < static_cast<int>(scene.masks.size()),
             ShapeError, "reference_from_scene: bad subject index");
    const auto& mask = scene.masks[subject_index];
    int h = scene.image.h, w = scene.image.w;
    int x0 = w, x1 = -1, y0 = h, y1 = -1;
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            if (mask[static_cast<size_t>(y) * w + x] > 0.5) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
        }
    }
    GR_CHECK(x1 >= x0 && y1 >= y0, ShapeError, "reference_from_scene: empty mask");

    int size = cfg.ref_size;
    ReferencePack pack;
    pack.identity_id = scene.subjects[subject_index].identity_id;
    pack.image = Image(size, size, 3);
    std::fill(pack.image.px.begin(), pack.image.px.end(), 1.0);
    pack.mask.assign(static_cast<size_t>(size) * size, 0.0);

    // Fit the bounding box into the reference canvas with a small border,
    // preserving aspect via the larger side.
    int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
    int side = std::max(bw, bh);
    double scale = (size * 0.9) / side;
    double ox = (size - bw * scale) / 2.0;
    double oy = (size - bh * scale) / 2.0;
    for (int y = 0; y < size; y++) {
        for (int x = 0; x < size; x++) {
            int sx = x0 + static_cast<int>((x + 0.5 - ox) / scale);
            int sy = y0 + static_cast<int>((y + 0.5 - oy) / scale);
            if (sx < x0 || sx > x1 || sy < y0 || sy > y1) continue;
            if (mask[static_cast<size_t>(sy) * w + sx] <= 0.5) continue;
            for (int c = 0; c < 3; c++) pack.image.at(y, x, c) = scene.image.at(sy, sx, c);
            pack.mask[static_cast<size_t>(y) * size + x] = 1.0;
        }
    }
    quantize_u8(pack.image);
    return pack;
}

// ---- vocabulary ----

namespace {

std::vector<std::string> build_vocab() {
    std::vector<std::string> v = {"<pad>", "<bos>", "<eos>", "a", "and", "on", "background"};
    for (int i = 0; i < kColorCount; i++) v.push_back(kColorNames[i]);
    for (int i = 0; i < kGlyphShapeCount; i++) v.push_back(kShapeNames[i]);
    return v;
}

const std::vector<std::string>& vocab() {
    static const std::vector<std::string> v = build_vocab();
    return v;
}

constexpr int kPad = 0, kBos = 1, kEos = 2, kA = 3, kAnd = 4, kOn = 5, kBackground = 6;
constexpr int kColorBase = 7;
constexpr int kShapeBase = kColorBase + kColorCount;

}  // namespace

int vocab_size() { return static_cast<int>(vocab().size()); }
const std::vector<std::string>& vocab_words() { return vocab(); }

int word_token(const std::string& word) {
    const auto& v = vocab();
    for (size_t i = 0; i < v.size(); i++) {
        if (v[i] == word) return static_cast<int>(i);
    }
    throw ConfigError("unknown caption word: " + word);
}

int caption_length(const SceneConfig& cfg) {
    // bos + N*(a color shape) + (N-1)*and + "on a color background" + eos
    return 1 + cfg.max_subjects * 3 + (cfg.max_subjects - 1) + 4 + 1;
}

std::vector<int> make_caption(const std::vector<SubjectSpec>& specs, int bg_color_id,
                              const SceneConfig& cfg) {
    std::vector<int> toks;
    toks.push_back(kBos);
    for (size_t i = 0; i < specs.size(); i++) {
        if (i > 0) toks.push_back(kAnd);
        toks.push_back(kA);
        toks.push_back(kColorBase + specs[i].color_id);
        toks.push_back(kShapeBase + specs[i].shape_id);
    }
    toks.push_back(kOn);
    toks.push_back(kA);
    toks.push_back(kColorBase + bg_color_id);
    toks.push_back(kBackground);
    toks.push_back(kEos);
    int pad_to = caption_length(cfg);
    GR_CHECK(static_cast<int>(toks.size()) <= pad_to, ConfigError, "caption overflow");
    while (static_cast<int>(toks.size()) < pad_to) toks.push_back(kPad);
    return toks;
}

std::string caption_to_string(const std::vector<int>& tokens) {
    std::string out;
    for (int t : tokens) {
        if (t == kPad || t == kBos) continue;
        if (t == kEos) break;
        if (!out.empty()) out += ' ';
        out += vocab()[static_cast<size_t>(t)];
    }
    return out;
}

std::vector<int> caption_from_string(const std::string& text, const SceneConfig& cfg) {
    std::vector<int> toks{kBos};
    std::istringstream is(text);
    std::string word;
    while (is >> word) toks.push_back(word_token(word));
    toks.push_back(kEos);
    int pad_to = caption_length(cfg);
    GR_CHECK(static_cast<int>(toks.size()) <= pad_to, ConfigError,
             "caption too long for configured maximum");
    while (static_cast<int>(toks.size()) < pad_to) toks.push_back(kPad);
    return toks;
}

ParsedCaption parse_caption(const std::vector<int>& tokens) {
    ParsedCaption out;
    size_t i = 0;
    auto expect = [&](int tok, const char* what) {
        GR_CHECK(i < tokens.size() && tokens[i] == tok, ConfigError,
                 std::string("caption grammar: expected ") + what);
        i++;
    };
    expect(kBos, "<bos>");
    bool first = true;
    while (i < tokens.size() && tokens[i] != kOn) {
        if (!first) expect(kAnd, "'and'");
        first = false;
        expect(kA, "'a'");
        GR_CHECK(i < tokens.size() && tokens[i] >= kColorBase && tokens[i] < kColorBase + kColorCount,
                 ConfigError, "caption grammar: expected color");
        int color_id = tokens[i++] - kColorBase;
        GR_CHECK(i < tokens.size() && tokens[i] >= kShapeBase &&
                     tokens[i] < kShapeBase + kGlyphShapeCount,
                 ConfigError, "caption grammar: expected shape");
        int shape_id = tokens[i++] - kShapeBase;
        out.subjects.emplace_back(color_id, shape_id);
    }
    expect(kOn, "'on'");
    expect(kA, "'a'");
    GR_CHECK(i < tokens.size() && tokens[i] >= kColorBase && tokens[i] < kColorBase + kColorCount,
             ConfigError, "caption grammar: expected background color");
    out.bg_color_id = tokens[i++] - kColorBase;
    expect(kBackground, "'background'");
    expect(kEos, "<eos>");
    for (; i < tokens.size(); i++) {
        GR_CHECK(tokens[i] == kPad, ConfigError, "caption grammar: trailing non-pad tokens");
    }
    return out;
}

// ---- dataset ----

namespace {

nlohmann::json scene_config_json(const SceneConfig& c) {
    return {{"image_size", c.image_size},
            {"ref_size", c.ref_size},
            {"max_subjects", c.max_subjects},
            {"retry_limit", c.retry_limit},
            {"min_mask_frac", c.min_mask_frac}};
}

SceneConfig scene_config_from_json(const nlohmann::json& j) {
    SceneConfig c;
    c.image_size = j.value("image_size", 64);
    c.ref_size = j.value("ref_size", 32);
    c.max_subjects = j.value("max_subjects", 4);
    c.retry_limit = j.value("retry_limit", 32);
    c.min_mask_frac = j.value("min_mask_frac", 0.01);
    return c;
}

}  // namespace

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json j;
    j["format"] = "glyphroute-dataset-v1";
    j["config"] = {{"n_samples", config.n_samples},
                   {"subjects_min", config.subjects_min},
                   {"subjects_max", config.subjects_max},
                   {"single_subject_fraction", config.single_subject_fraction},
                   {"seed", config.seed},
                   {"identity_pool", config.identity_pool},
                   {"scene", scene_config_json(config.scene)}};
    j["vocabulary"] = vocab_words();
    auto arr = nlohmann::json::array();
    for (const auto& s : samples) {
        arr.push_back({{"identities", s.identities},
                       {"layout_seed", s.layout_seed},
                       {"bg_seed", s.bg_seed},
                       {"ref_seeds", s.ref_seeds}});
    }
    j["samples"] = arr;
    return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    GR_CHECK(j.value("format", "") == "glyphroute-dataset-v1", ConfigError,
             "unrecognized dataset manifest format");
    DatasetManifest m;
    const auto& c = j.at("config");
    m.config.n_samples = c.at("n_samples");
    m.config.subjects_min = c.at("subjects_min");
    m.config.subjects_max = c.at("subjects_max");
    m.config.single_subject_fraction = c.at("single_subject_fraction");
    m.config.seed = c.at("seed");
    m.config.identity_pool = c.at("identity_pool");
    m.config.scene = scene_config_from_json(c.at("scene"));
    for (const auto& s : j.at("samples")) {
        SampleRecord r;
        r.identities = s.at("identities").get<std::vector<uint32_t>>();
        r.layout_seed = s.at("layout_seed");
        r.bg_seed = s.at("bg_seed");
        r.ref_seeds = s.at("ref_seeds").get<std::vector<uint64_t>>();
        m.samples.push_back(std::move(r));
    }
    return m;
}

LoadedSample materialize_sample(const SampleRecord& rec, const SceneConfig& cfg) {
    LoadedSample out;
    std::vector<SubjectSpec> specs;
    specs.reserve(rec.identities.size());
    for (uint32_t id : rec.identities) specs.push_back(spec_from_identity(id));
    out.scene = render_scene(specs, rec.layout_seed, rec.bg_seed, cfg);
    for (size_t i = 0; i < specs.size(); i++) {
        out.refs.push_back(render_reference(specs[i], rec.ref_seeds[i], false, cfg));
    }
    return out;
}

DatasetManifest build_dataset(const DatasetConfig& cfg) {
    GR_CHECK(cfg.n_samples >= 0, ConfigError, "build_dataset: negative sample count");
    GR_CHECK(cfg.subjects_min >= 1 && cfg.subjects_max >= cfg.subjects_min, ConfigError,
             "build_dataset: bad subject count range");
    GR_CHECK(cfg.subjects_max <= cfg.scene.max_subjects, ConfigError,
             "build_dataset: subjects_max exceeds scene max_subjects");

    DatasetManifest manifest;
    manifest.config = cfg;

    Rng rng(derive_seed(cfg.seed, tag_hash("dataset")));
    for (int s = 0; s < cfg.n_samples; s++) {
        SampleRecord rec;
        int n;
        if (rng.uniform() < cfg.single_subject_fraction) {
            n = 1;
        } else {
            n = cfg.subjects_min +
                static_cast<int>(rng.uniform_int(static_cast<uint64_t>(cfg.subjects_max - cfg.subjects_min + 1)));
        }
        // Distinct (shape, color) pairs within one scene keep instances
        // visually distinguishable for routing supervision.
        std::vector<uint32_t> combos;
        while (static_cast<int>(rec.identities.size()) < n) {
            uint32_t id = static_cast<uint32_t>(rng.uniform_int(cfg.identity_pool));
            uint32_t combo = id % (kGlyphShapeCount * kColorCount);
            bool dup = false;
            for (uint32_t c : combos) dup = dup || c == combo;
            for (uint32_t e : rec.identities) dup = dup || e == id;
            if (dup) continue;
            combos.push_back(combo);
            rec.identities.push_back(id);
        }
        rec.layout_seed = rng.u64();
        rec.bg_seed = rng.u64();
        for (int i = 0; i < n; i++) rec.ref_seeds.push_back(rng.u64());
        manifest.samples.push_back(std::move(rec));
    }

    if (!cfg.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        for (size_t s = 0; s < manifest.samples.size(); s++) {
            auto sample = materialize_sample(manifest.samples[s], cfg.scene);
            std::string base = cfg.out_dir + "/sample_" + std::to_string(s);
            write_png(base + "_scene.png", sample.scene.image);
            for (size_t i = 0; i < sample.refs.size(); i++) {
                write_png(base + "_ref" + std::to_string(i) + ".png", sample.refs[i].image);
                write_png(base + "_mask" + std::to_string(i) + ".png",
                          mask_to_image(sample.scene.masks[i], sample.scene.image.h,
                                        sample.scene.image.w));
            }
        }
        write_json_file(cfg.out_dir + "/manifest.json", manifest.to_json());
    }
    return manifest;
}

DatasetManifest load_dataset_manifest(const std::string& path) {
    return DatasetManifest::from_json(read_json_file(path));
}
