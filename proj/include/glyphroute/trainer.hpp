// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "glyphroute/config.hpp"
#include "glyphroute/model.hpp"

// Two-stage training. Stage "encoder" trains the subject encoders, the
// injection K/V matrices, and the base denoiser with the diffusion loss;
// the router is frozen and routing is bypassed (maps forced to all-ones),
// since an untrained router would gate injection randomly. Stage "router"
// freezes everything else and trains only the router with
// diffusion + lambda * routing regularization; scenes double as their own
// references via their masks.
//
// Batches are gradient-accumulation loops; every random draw derives from
// (seed, step, slot), so identical (config, seed, manifest) reproduce the
// final parameters bitwise.

struct AdamW {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int64_t steps_taken = 0;

    void step(ParamRegistry& reg, const std::set<ParamGroup>& trainable);
};

// Bernoulli(p) per slot; drawn one per slot regardless of outcome.
std::vector<bool> drop_condition_mask(int batch, double p, Rng& rng);

std::set<ParamGroup> trainable_groups_for_stage(const std::string& stage);

struct StageResult {
    // one row per step: {step, diffusion, routing, total}
    std::vector<std::array<double, 4>> log;
    double mean_first(int k, int column) const;
    double mean_last(int k, int column) const;
};

// Runs cfg.steps optimizer steps on the model in place. When csv_path is
// non-empty, writes "step,diffusion_loss,routing_loss,total_loss" with
// full-precision values, one row per step.
StageResult run_training_stage(Model& model, const DatasetManifest& manifest,
                               const TrainConfig& cfg, const std::string& csv_path = "",
                               bool verbose = false);
