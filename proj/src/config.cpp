// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/config.hpp"

#include <set>

#include "glyphroute/errors.hpp"
#include "glyphroute/serialize.hpp"

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& section) {
    GR_CHECK(j.is_object(), ConfigError, "config section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (allowed.count(it.key()) == 0) {
            throw ConfigError("unknown config key '" + section + "." + it.key() + "'");
        }
    }
}

}  // namespace

nlohmann::json ModelConfig::to_json() const {
    return {{"image_size", image_size},
            {"ref_size", ref_size},
            {"patch", patch},
            {"base_channels", base_channels},
            {"mid_channels", mid_channels},
            {"attn_dim", attn_dim},
            {"heads", heads},
            {"ffn_mult", ffn_mult},
            {"time_dim", time_dim},
            {"text_dim", text_dim},
            {"concept_tokens", concept_tokens},
            {"concept_width", concept_width},
            {"concept_patch", concept_patch},
            {"concept_layers", concept_layers},
            {"qformer_layers", qformer_layers},
            {"routing_dim", routing_dim},
            {"max_subjects", max_subjects},
            {"eta", eta},
            {"gamma", gamma},
            {"schedule_steps", schedule_steps},
            {"noise_ratio_min", noise_ratio_min},
            {"noise_ratio_max", noise_ratio_max}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    check_keys(j, {"image_size", "ref_size", "patch", "base_channels", "mid_channels",
                   "attn_dim", "heads", "ffn_mult", "time_dim", "text_dim", "concept_tokens",
                   "concept_width", "concept_patch", "concept_layers", "qformer_layers",
                   "routing_dim", "max_subjects", "eta", "gamma", "schedule_steps",
                   "noise_ratio_min", "noise_ratio_max"},
               "model");
    ModelConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.ref_size = j.value("ref_size", c.ref_size);
    c.patch = j.value("patch", c.patch);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.mid_channels = j.value("mid_channels", c.mid_channels);
    c.attn_dim = j.value("attn_dim", c.attn_dim);
    c.heads = j.value("heads", c.heads);
    c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
    c.time_dim = j.value("time_dim", c.time_dim);
    c.text_dim = j.value("text_dim", c.text_dim);
    c.concept_tokens = j.value("concept_tokens", c.concept_tokens);
    c.concept_width = j.value("concept_width", c.concept_width);
    c.concept_patch = j.value("concept_patch", c.concept_patch);
    c.concept_layers = j.value("concept_layers", c.concept_layers);
    c.qformer_layers = j.value("qformer_layers", c.qformer_layers);
    c.routing_dim = j.value("routing_dim", c.routing_dim);
    c.max_subjects = j.value("max_subjects", c.max_subjects);
    c.eta = j.value("eta", c.eta);
    c.gamma = j.value("gamma", c.gamma);
    c.schedule_steps = j.value("schedule_steps", c.schedule_steps);
    c.noise_ratio_min = j.value("noise_ratio_min", c.noise_ratio_min);
    c.noise_ratio_max = j.value("noise_ratio_max", c.noise_ratio_max);
    c.validate();
    return c;
}

void ModelConfig::validate() const {
    GR_CHECK(image_size > 0 && image_size % (patch * 4) == 0, ConfigError,
             "model.image_size must be divisible by 4*patch");
    GR_CHECK(ref_size > 0 && ref_size % (patch * 4) == 0, ConfigError,
             "model.ref_size must be divisible by 4*patch");
    GR_CHECK(ref_size % concept_patch == 0, ConfigError,
             "model.ref_size must be divisible by concept_patch");
    GR_CHECK(attn_dim % heads == 0, ConfigError, "model.attn_dim must be divisible by heads");
    GR_CHECK(text_dim % heads == 0, ConfigError, "model.text_dim must be divisible by heads");
    GR_CHECK(concept_width % heads == 0, ConfigError,
             "model.concept_width must be divisible by heads");
    GR_CHECK(time_dim % 2 == 0, ConfigError, "model.time_dim must be even");
    GR_CHECK(concept_tokens >= 1, ConfigError, "model.concept_tokens must be >= 1");
    GR_CHECK(max_subjects >= 1, ConfigError, "model.max_subjects must be >= 1");
    GR_CHECK(schedule_steps >= 1, ConfigError, "model.schedule_steps must be >= 1");
    GR_CHECK(noise_ratio_min > 0 && noise_ratio_max > noise_ratio_min, ConfigError,
             "model noise ratio range invalid");
}

nlohmann::json train_config_json(const TrainConfig& c) {
    return {{"stage", c.stage},
            {"steps", c.steps},
            {"batch", c.batch},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"lambda", c.lambda},
            {"cond_dropout", c.cond_dropout},
            {"seed", c.seed},
            {"dataset", c.dataset},
            {"augment_references", c.augment_references},
            {"gumbel_t0", c.gumbel_t0},
            {"gumbel_t1", c.gumbel_t1},
            {"sigma_p_mean", c.sigma_p_mean},
            {"sigma_p_std", c.sigma_p_std},
            {"init_checkpoint", c.init_checkpoint},
            {"log_every", c.log_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    check_keys(j, {"stage", "steps", "batch", "lr", "weight_decay", "lambda", "cond_dropout",
                   "seed", "dataset", "augment_references", "gumbel_t0", "gumbel_t1",
                   "sigma_p_mean", "sigma_p_std", "init_checkpoint", "log_every"},
               "train");
    TrainConfig c;
    c.stage = j.value("stage", c.stage);
    GR_CHECK(c.stage == "encoder" || c.stage == "router", ConfigError,
             "train.stage must be 'encoder' or 'router'");
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lambda = j.value("lambda", c.lambda);
    c.cond_dropout = j.value("cond_dropout", c.cond_dropout);
    GR_CHECK(c.lambda >= 0.0, ConfigError, "train.lambda must be >= 0");
    GR_CHECK(c.cond_dropout >= 0.0 && c.cond_dropout <= 1.0, ConfigError,
             "train.cond_dropout must be in [0,1]");
    c.seed = j.value("seed", c.seed);
    c.dataset = j.value("dataset", c.dataset);
    c.augment_references = j.value("augment_references", c.augment_references);
    c.gumbel_t0 = j.value("gumbel_t0", c.gumbel_t0);
    c.gumbel_t1 = j.value("gumbel_t1", c.gumbel_t1);
    c.sigma_p_mean = j.value("sigma_p_mean", c.sigma_p_mean);
    c.sigma_p_std = j.value("sigma_p_std", c.sigma_p_std);
    c.init_checkpoint = j.value("init_checkpoint", c.init_checkpoint);
    c.log_every = j.value("log_every", c.log_every);
    return c;
}

nlohmann::json sample_settings_json(const SampleSettings& s) {
    return {{"steps", s.steps},
            {"guidance", s.guidance},
            {"rho", s.rho},
            {"sigma_min", s.sigma_min},
            {"sigma_max", s.sigma_max},
            {"seed", s.seed},
            {"eta", s.eta},
            {"gamma", s.gamma}};
}

SampleSettings sample_settings_from_json(const nlohmann::json& j) {
    check_keys(j, {"steps", "guidance", "rho", "sigma_min", "sigma_max", "seed", "eta",
                   "gamma"},
               "sample");
    SampleSettings s;
    s.steps = j.value("steps", s.steps);
    GR_CHECK(s.steps >= 1, ConfigError, "sample.steps must be >= 1");
    s.guidance = j.value("guidance", s.guidance);
    s.rho = j.value("rho", s.rho);
    s.sigma_min = j.value("sigma_min", s.sigma_min);
    s.sigma_max = j.value("sigma_max", s.sigma_max);
    s.seed = j.value("seed", s.seed);
    s.eta = j.value("eta", s.eta);
    s.gamma = j.value("gamma", s.gamma);
    return s;
}

nlohmann::json dataset_config_json(const DatasetConfig& c) {
    return {{"n_samples", c.n_samples},
            {"subjects_min", c.subjects_min},
            {"subjects_max", c.subjects_max},
            {"single_subject_fraction", c.single_subject_fraction},
            {"seed", c.seed},
            {"identity_pool", c.identity_pool},
            {"out_dir", c.out_dir}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
    check_keys(j, {"n_samples", "subjects_min", "subjects_max", "single_subject_fraction",
                   "seed", "identity_pool", "out_dir"},
               "data");
    DatasetConfig c;
    c.n_samples = j.value("n_samples", c.n_samples);
    c.subjects_min = j.value("subjects_min", c.subjects_min);
    c.subjects_max = j.value("subjects_max", c.subjects_max);
    c.single_subject_fraction = j.value("single_subject_fraction", c.single_subject_fraction);
    c.seed = j.value("seed", c.seed);
    c.identity_pool = j.value("identity_pool", c.identity_pool);
    c.out_dir = j.value("out_dir", c.out_dir);
    return c;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["model"] = model.to_json();
    j["data"] = dataset_config_json(data);
    j["train"] = train_config_json(train);
    j["sample"] = sample_settings_json(sample);
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    check_keys(j, {"model", "data", "train", "sample"}, "<root>");
    RunConfig c;
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("data")) c.data = dataset_config_from_json(j.at("data"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("sample")) c.sample = sample_settings_from_json(j.at("sample"));
    c.data.scene.image_size = c.model.image_size;
    c.data.scene.ref_size = c.model.ref_size;
    c.data.scene.max_subjects = c.model.max_subjects;
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_json(read_json_file(path));
}
