// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "glyphroute/errors.hpp"

void AdamW::step(ParamRegistry& reg, const std::set<ParamGroup>& trainable) {
    steps_taken++;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps_taken));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps_taken));
    for (auto& e : reg.entries()) {
        if (trainable.count(e.group) == 0) continue;
        if (!e.adam_m) {
            e.adam_m = make_tensor(e.t->rows, e.t->cols);
            e.adam_v = make_tensor(e.t->rows, e.t->cols);
        }
        e.t->ensure_grad();
        size_t n = e.t->size();
        for (size_t i = 0; i < n; i++) {
            double g = e.t->g[i];
            double m = e.adam_m->v[i] = beta1 * e.adam_m->v[i] + (1.0 - beta1) * g;
            double v = e.adam_v->v[i] = beta2 * e.adam_v->v[i] + (1.0 - beta2) * g * g;
            double mhat = m / bc1;
            double vhat = v / bc2;
            // decoupled weight decay
            e.t->v[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * e.t->v[i]);
        }
    }
}

std::vector<bool> drop_condition_mask(int batch, double p, Rng& rng) {
    std::vector<bool> mask(static_cast<size_t>(batch));
    for (int i = 0; i < batch; i++) mask[static_cast<size_t>(i)] = rng.uniform() < p;
    return mask;
}

std::set<ParamGroup> trainable_groups_for_stage(const std::string& stage) {
    if (stage == "encoder") {
        return {ParamGroup::denoiser, ParamGroup::inject, ParamGroup::concept_enc,
                ParamGroup::detail};
    }
    GR_CHECK(stage == "router", ConfigError, "unknown training stage: " + stage);
    return {ParamGroup::router};
}

double StageResult::mean_first(int k, int column) const {
    double acc = 0;
    int n = std::min<int>(k, static_cast<int>(log.size()));
    for (int i = 0; i < n; i++) acc += log[static_cast<size_t>(i)][static_cast<size_t>(column)];
    return n > 0 ? acc / n : 0.0;
}

double StageResult::mean_last(int k, int column) const {
    double acc = 0;
    int n = std::min<int>(k, static_cast<int>(log.size()));
    for (int i = 0; i < n; i++) {
        acc += log[log.size() - 1 - static_cast<size_t>(i)][static_cast<size_t>(column)];
    }
    return n > 0 ? acc / n : 0.0;
}

namespace {

struct CachedSample {
    LoadedSample data;
    bool single_subject() const { return data.refs.size() == 1; }
};

}  // namespace

StageResult run_training_stage(Model& model, const DatasetManifest& manifest,
                               const TrainConfig& cfg, const std::string& csv_path,
                               bool verbose) {
    const bool encoder_stage = cfg.stage == "encoder";
    auto trainable = trainable_groups_for_stage(cfg.stage);

    // Materialize the dataset once; renders are cheap and deterministic.
    std::vector<CachedSample> cache;
    for (const auto& rec : manifest.samples) {
        cache.push_back({materialize_sample(rec, manifest.config.scene)});
    }
    // The encoder stage consumes paired single-subject data only.
    std::vector<size_t> usable;
    for (size_t i = 0; i < cache.size(); i++) {
        if (!encoder_stage || cache[i].single_subject()) usable.push_back(i);
    }
    GR_CHECK(!usable.empty(), ConfigError,
             "training stage has no usable samples (encoder stage needs single-subject data)");

    AdamW opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;

    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path);
        GR_CHECK(csv.good(), IoError, "cannot open metrics csv: " + csv_path);
        csv << "step,diffusion_loss,routing_loss,total_loss\n";
    }

    StageResult result;
    for (int step = 0; step < cfg.steps; step++) {
        model.reg.zero_grads();
        double diff_acc = 0.0, rout_acc = 0.0;

        double anneal = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 0.0;
        double temperature = cfg.gumbel_t0 + (cfg.gumbel_t1 - cfg.gumbel_t0) * anneal;

        Rng step_rng(derive_seed(cfg.seed, tag_hash("train-step"), static_cast<uint64_t>(step)));
        auto dropped = drop_condition_mask(cfg.batch, cfg.cond_dropout, step_rng);

        for (int slot = 0; slot < cfg.batch; slot++) {
            Rng rng(derive_seed(cfg.seed, tag_hash("train-sample"),
                                static_cast<uint64_t>(step), static_cast<uint64_t>(slot)));
            const auto& sample = cache[usable[rng.uniform_int(usable.size())]];
            const Scene& scene = sample.data.scene;

            Tape tape;
            // references
            std::vector<ReferencePack> refs;
            if (encoder_stage) {
                refs = sample.data.refs;
                if (cfg.augment_references) {
                    for (auto& r : refs) {
                        r = apply_augment(r, sample_augment(rng.u64(), r.image.h));
                    }
                }
            } else {
                // unpaired router data: the scene is its own reference source
                for (size_t i = 0; i < scene.masks.size(); i++) {
                    refs.push_back(reference_from_scene(scene, static_cast<int>(i),
                                                        manifest.config.scene));
                }
            }

            ConditioningBundle bundle;
            bool drop = dropped[static_cast<size_t>(slot)];
            if (drop) {
                bundle.text = model.encode_text(tape, scene.caption);
                bundle.background = model.background_encoding(tape);
            } else {
                bundle = model.make_bundle(tape, scene.caption, refs, model.cfg.eta,
                                           model.cfg.gamma);
            }
            bundle.eta = model.cfg.eta;
            bundle.gamma = model.cfg.gamma;

            // diffusion target; noise level drawn lognormal and snapped to
            // the schedule grid (lambda is linear in t for this schedule)
            int t_step;
            {
                double lam = cfg.sigma_p_mean + cfg.sigma_p_std * rng.gaussian();
                double lam_min = model.sched.lambda_for(1);
                double lam_max = model.sched.lambda_for(model.sched.T);
                double f = (lam - lam_min) / (lam_max - lam_min);
                f = std::min(1.0, std::max(0.0, f));
                t_step = 1 + static_cast<int>(std::lround(f * (model.sched.T - 1)));
            }
            auto z0 = model.codec.encode(scene.image);
            auto eps = randn_tensor(z0->rows, z0->cols, rng, 1.0);
            auto z_t = add_noise(z0, t_step, eps, model.sched);

            Rng gumbel_rng(rng.u64());
            ForwardOptions opt_fwd;
            opt_fwd.router.mode = HardenMode::train;
            opt_fwd.router.gumbel_temperature = temperature;
            opt_fwd.router.gumbel_rng = &gumbel_rng;
            if (encoder_stage) {
                opt_fwd.override_mode = RoutingOverride::force_ones;
            }

            auto out = model.forward(tape, z_t, model.sched.lambda_for(t_step), bundle,
                                     opt_fwd);
            auto diff_loss = mse(tape, out.eps, eps);

            Tensor total = diff_loss;
            double rout_val = 0.0;
            if (!encoder_stage && !drop) {
                auto rout = routing_loss(tape, out.maps, scene.masks, scene.image.h,
                                         scene.image.w, cfg.lambda);
                rout_val = rout->v[0] / std::max(cfg.lambda, 1e-300);
                total = add(tape, diff_loss, rout);
            }

            if (!std::isfinite(total->v[0])) {
                throw NumericError("training loss non-finite at step " + std::to_string(step) +
                                   " slot " + std::to_string(slot));
            }

            // scale so accumulated gradients average over the batch
            auto scaled = scale(tape, total, 1.0 / cfg.batch);
            tape.backward(scaled);

            diff_acc += diff_loss->v[0];
            rout_acc += rout_val;
        }

        opt.step(model.reg, trainable);

        double diffusion = diff_acc / cfg.batch;
        double routing = rout_acc / cfg.batch;
        double total = diffusion + cfg.lambda * routing;
        result.log.push_back({static_cast<double>(step), diffusion, routing, total});
        if (csv.is_open()) {
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", step, diffusion,
                          routing, total);
            csv << line;
        }
        if (verbose && (step % std::max(1, cfg.log_every) == 0 || step == cfg.steps - 1)) {
            std::fprintf(stderr, "[%s] step %d diffusion %.5f routing %.5f total %.5f\n",
                         cfg.stage.c_str(), step, diffusion, routing, total);
        }
    }
    return result;
}
