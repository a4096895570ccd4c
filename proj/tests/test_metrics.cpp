// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "glyphroute/metrics.hpp"
#include "glyphroute/serialize.hpp"

TEST_CASE("mask IoU trivial values") {
    std::vector<double> a = {1, 1, 0, 0};
    std::vector<double> complement = {0, 0, 1, 1};
    CHECK(mask_iou(a, a) == 1.0);
    CHECK(mask_iou(a, complement) == 0.0);

    // two 2x2 rectangles in a 2x4 grid overlapping by half: |I| = 2, |U| = 6
    std::vector<double> left = {1, 1, 0, 0, 1, 1, 0, 0};
    std::vector<double> shifted = {0, 1, 1, 0, 0, 1, 1, 0};
    CHECK(mask_iou(left, shifted) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("routing IoU over a synthetic trace") {
    RoutingTrace trace;
    RoutingTraceEntry e;
    e.step = 0;
    e.substep = 0;
    e.layer = 0;
    e.h = 2;
    e.w = 2;
    e.subjects = 1;
    // subject map = positions 0,1 ; background = 2,3
    e.soft = {1, 1, 0, 0, 0, 0, 1, 1};
    e.hard = e.soft;
    trace.entries.push_back(e);

    // ground truth at 4x4: top half
    std::vector<double> gt(16, 0.0);
    for (int i = 0; i < 8; i++) gt[static_cast<size_t>(i)] = 1.0;
    auto entries = routing_iou(trace, {gt}, 4, 4);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].iou == 1.0);
    CHECK(mean_iou(entries) == 1.0);

    // complement ground truth scores zero
    std::vector<double> gtc(16, 1.0);
    for (int i = 0; i < 8; i++) gtc[static_cast<size_t>(i)] = 0.0;
    auto entries2 = routing_iou(trace, {gtc}, 4, 4);
    CHECK(entries2[0].iou == 0.0);
}

TEST_CASE("subject fidelity: exact re-render scores 1, complement colors near 0") {
    SceneConfig cfg;
    auto spec = spec_from_identity(9);
    // canonical reference embedded in a larger canvas = "generated" image
    auto canon = render_reference(spec, 0, false, cfg);
    Image gen(64, 64, 3);
    std::vector<double> region(64 * 64, 0.0);
    for (int y = 0; y < canon.image.h; y++) {
        for (int x = 0; x < canon.image.w; x++) {
            if (canon.mask[static_cast<size_t>(y) * canon.image.w + x] < 0.5) continue;
            for (int c = 0; c < 3; c++) gen.at(y + 10, x + 20, c) = canon.image.at(y, x, c);
            region[static_cast<size_t>(y + 10) * 64 + (x + 20)] = 1.0;
        }
    }
    auto exact = subject_fidelity(gen, region, spec, cfg);
    CHECK_FALSE(exact.empty_region);
    CHECK(exact.score == 1.0);

    // complement colors in the same region
    Image adversarial = gen;
    for (int y = 0; y < 64; y++) {
        for (int x = 0; x < 64; x++) {
            if (region[static_cast<size_t>(y) * 64 + x] < 0.5) continue;
            for (int c = 0; c < 3; c++) {
                adversarial.at(y, x, c) = 1.0 - adversarial.at(y, x, c);
            }
        }
    }
    auto adv = subject_fidelity(adversarial, region, spec, cfg);
    CHECK(adv.score < 0.15);

    // changes outside the region do not affect the score
    Image outside = gen;
    for (int y = 0; y < 64; y++) {
        for (int x = 0; x < 64; x++) {
            if (region[static_cast<size_t>(y) * 64 + x] > 0.5) continue;
            outside.at(y, x, 0) = 0.123;
        }
    }
    auto moved = subject_fidelity(outside, region, spec, cfg);
    CHECK(moved.score == exact.score);

    // empty region flags and scores zero
    std::vector<double> empty(64 * 64, 0.0);
    auto none = subject_fidelity(gen, empty, spec, cfg);
    CHECK(none.empty_region);
    CHECK(none.score == 0.0);
}

TEST_CASE("region whiteness extremes") {
    Image white(8, 8, 3);
    std::fill(white.px.begin(), white.px.end(), 1.0);
    Image black(8, 8, 3);
    std::vector<double> all(64, 1.0);
    CHECK(region_whiteness(white, all) == 1.0);
    CHECK(region_whiteness(black, all) == 0.0);

    // saturated blue is not white
    Image blue(8, 8, 3);
    for (int y = 0; y < 8; y++) {
        for (int x = 0; x < 8; x++) blue.at(y, x, 2) = 1.0;
    }
    CHECK(region_whiteness(blue, all) == 0.0);
}

TEST_CASE("identical swap produces zero leakage by definition") {
    // leakage compares two renders; with identical inputs the difference is
    // zero wherever it is measured
    Image a(16, 16, 3), b(16, 16, 3);
    std::vector<double> region(256, 1.0);
    double change = 0.0;
    for (size_t i = 0; i < a.px.size(); i++) change += std::fabs(a.px[i] - b.px[i]);
    CHECK(change == 0.0);
    (void)region;
}

TEST_CASE("eval report serialization") {
    EvalReport r;
    r.scenes = 3;
    r.mean_segmentation_iou = 0.81;
    r.leakage_wins = 3;
    r.leakage_total = 3;
    auto j = r.to_json();
    CHECK(j.at("scenes") == 3);
    CHECK(j.at("mean_segmentation_iou") == doctest::Approx(0.81));

    std::string path = "/tmp/glyphroute_eval_test.csv";
    r.write_csv(path);
    auto loaded = read_file_bytes(path);
    CHECK(loaded.size() > 0);
    std::filesystem::remove(path);
}
