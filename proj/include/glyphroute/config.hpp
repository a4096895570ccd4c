// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <json.hpp>

#include "glyphroute/model.hpp"
#include "glyphroute/scene.hpp"

// Run configuration: one JSON file with sections for the model, dataset
// synthesis, training, and sampling. Parsing is strict: unknown keys are
// schema errors, so typos fail loudly instead of silently using defaults.

struct TrainConfig {
    std::string stage = "encoder";  // "encoder" or "router"
    int steps = 500;
    int batch = 16;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double lambda = 0.1;
    double cond_dropout = 0.1;
    uint64_t seed = 0;
    std::string dataset;  // manifest path
    bool augment_references = true;
    double gumbel_t0 = 1.0;
    double gumbel_t1 = 0.5;
    // Training noise-level distribution: log(sigma) ~ N(p_mean, p_std^2),
    // snapped to the schedule grid (EDM reference defaults).
    double sigma_p_mean = -1.2;
    double sigma_p_std = 1.2;
    std::string init_checkpoint;
    int log_every = 25;
};

struct RunConfig {
    ModelConfig model;
    DatasetConfig data;
    TrainConfig train;
    SampleSettings sample;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
};

nlohmann::json train_config_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json sample_settings_json(const SampleSettings& s);
SampleSettings sample_settings_from_json(const nlohmann::json& j);
nlohmann::json dataset_config_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);
