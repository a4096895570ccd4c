// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

// glyphroute: one binary for the whole pipeline.
//
//   synth    render a synthetic dataset from seeds
//   train    run one training stage (encoder or router)
//   sample   generate an image from a prompt plus reference images
//   segment  reference-prompted segmentation of an existing image
//   eval     routing/leakage/background evaluation of a checkpoint
//   census   parameter counts of the detail encoder variants
//   viz      routing-trace mosaic rendering
//   rerun    replay a run manifest and verify artifact hashes
//
// Every command resolves its full configuration up front, writes its
// artifacts under --out, and drops a run_manifest.json with content hashes
// so any run can be replayed bitwise.

#include <chrono>
#include <cstdio>
#include <filesystem>

#include <CLI11.hpp>

#include "glyphroute/config.hpp"
#include "glyphroute/errors.hpp"
#include "glyphroute/manifest.hpp"
#include "glyphroute/metrics.hpp"
#include "glyphroute/serialize.hpp"
#include "glyphroute/sha256.hpp"
#include "glyphroute/trainer.hpp"
#include "glyphroute/viz.hpp"

namespace fs = std::filesystem;

namespace {

RunConfig config_from_args(const nlohmann::json& args) {
    if (args.contains("config")) return RunConfig::from_json(args.at("config"));
    return RunConfig{};
}

// Reference packs from identity ids (canonical render) or PNG paths
// (background must be white; the mask is the non-white footprint).
std::vector<ReferencePack> resolve_references(const nlohmann::json& args,
                                              const SceneConfig& scf) {
    std::vector<ReferencePack> refs;
    if (args.contains("ref_identities")) {
        for (uint32_t id : args.at("ref_identities").get<std::vector<uint32_t>>()) {
            refs.push_back(render_reference(spec_from_identity(id), 0, false, scf));
        }
    }
    if (args.contains("ref_paths")) {
        for (const std::string& path : args.at("ref_paths").get<std::vector<std::string>>()) {
            ReferencePack pack;
            pack.image = read_png(path);
            GR_CHECK(pack.image.c == 3, IoError, "reference image must be RGB: " + path);
            GR_CHECK(pack.image.h == scf.ref_size && pack.image.w == scf.ref_size, ConfigError,
                     "reference image must be " + std::to_string(scf.ref_size) + "x" +
                         std::to_string(scf.ref_size) + ": " + path);
            pack.mask.assign(pack.image.size() / 3, 0.0);
            for (int y = 0; y < pack.image.h; y++) {
                for (int x = 0; x < pack.image.w; x++) {
                    bool white = pack.image.at(y, x, 0) == 1.0 &&
                                 pack.image.at(y, x, 1) == 1.0 && pack.image.at(y, x, 2) == 1.0;
                    if (!white) pack.mask[static_cast<size_t>(y) * pack.image.w + x] = 1.0;
                }
            }
            refs.push_back(std::move(pack));
        }
    }
    GR_CHECK(!refs.empty(), ConfigError, "no references given (--ref or --ref-identity)");
    return refs;
}

std::string checkpoint_input_hash(const nlohmann::json& args) {
    if (!args.contains("checkpoint")) return "";
    std::string path = args.at("checkpoint");
    std::string hash = sha256_file_hex(path);
    if (args.contains("checkpoint_hash")) {
        std::string expect = args.at("checkpoint_hash");
        GR_CHECK(hash == expect, ChecksumError,
                 "checkpoint hash mismatch for " + path + " (expected " + expect + ")");
    }
    return hash;
}

RunManifest run_synth(const nlohmann::json& args, const std::string& out_dir) {
    RunConfig cfg = config_from_args(args);
    cfg.data.out_dir = out_dir;
    fs::create_directories(out_dir);
    auto manifest = build_dataset(cfg.data);

    RunManifest rm;
    rm.command = "synth";
    rm.resolved_config = {{"config", cfg.to_json()}};
    record_artifact(rm, out_dir + "/manifest.json");
    for (size_t s = 0; s < manifest.samples.size(); s++) {
        record_artifact(rm, out_dir + "/sample_" + std::to_string(s) + "_scene.png");
    }
    return rm;
}

RunManifest run_train(const nlohmann::json& args, const std::string& out_dir) {
    RunConfig cfg = config_from_args(args);
    fs::create_directories(out_dir);

    Model model = [&] {
        if (!cfg.train.init_checkpoint.empty()) {
            return Model::load_checkpoint(cfg.train.init_checkpoint);
        }
        return Model::create(cfg.model, cfg.train.seed);
    }();
    GR_CHECK(!cfg.train.dataset.empty(), ConfigError, "train.dataset manifest path required");
    auto dataset = load_dataset_manifest(cfg.train.dataset);

    std::string ckpt_path = out_dir + "/checkpoint.gra";
    std::string csv_path = out_dir + "/metrics.csv";
    auto result = run_training_stage(model, dataset, cfg.train, csv_path, true);

    nlohmann::json extra = {{"stage", cfg.train.stage},
                            {"steps", cfg.train.steps},
                            {"final_diffusion_loss", result.mean_last(10, 1)},
                            {"final_routing_loss", result.mean_last(10, 2)}};
    model.save_checkpoint(ckpt_path, extra);

    RunManifest rm;
    rm.command = "train";
    rm.resolved_config = {{"config", cfg.to_json()}};
    if (!cfg.train.init_checkpoint.empty()) {
        rm.input_checkpoint_hash = sha256_file_hex(cfg.train.init_checkpoint);
    }
    record_artifact(rm, ckpt_path);
    record_artifact(rm, csv_path);
    return rm;
}

RunManifest run_sample(const nlohmann::json& args, const std::string& out_dir) {
    RunConfig cfg = config_from_args(args);
    fs::create_directories(out_dir);
    std::string input_hash = checkpoint_input_hash(args);
    Model model = Model::load_checkpoint(args.at("checkpoint"));

    SceneConfig scf;
    scf.image_size = model.cfg.image_size;
    scf.ref_size = model.cfg.ref_size;
    scf.max_subjects = model.cfg.max_subjects;

    auto caption = caption_from_string(args.at("prompt"), scf);
    auto refs = resolve_references(args, scf);

    SampleSettings st = cfg.sample;
    st.eta = args.value("eta", model.cfg.eta);
    st.gamma = args.value("gamma", model.cfg.gamma);
    if (args.contains("router_off") && args.at("router_off").get<bool>()) {
        st.override_mode = RoutingOverride::force_ones;
    }
    auto result = model.sample(caption, refs, st);

    std::string img_path = out_dir + "/sample.png";
    std::string trace_path = out_dir + "/trace.gra";
    write_png(img_path, result.image);
    result.trace.save(trace_path);

    std::string traj_path;
    if (args.value("trajectory", false)) {
        traj_path = out_dir + "/trajectory.gra";
        TensorArchive ar;
        ar.meta = {{"format", "glyphroute-trajectory-v1"},
                   {"denoiser_calls", result.trajectory.denoiser_calls}};
        for (size_t i = 0; i < result.trajectory.xs.size(); i++) {
            ar.put("x" + std::to_string(i), result.trajectory.xs[i]);
        }
        ar.save(traj_path, ArchiveDtype::f32);
    }

    RunManifest rm;
    rm.command = "sample";
    rm.resolved_config = {{"config", cfg.to_json()},
                          {"checkpoint", args.at("checkpoint")},
                          {"checkpoint_hash", input_hash},
                          {"prompt", args.at("prompt")},
                          {"eta", st.eta},
                          {"gamma", st.gamma}};
    if (args.contains("ref_identities")) {
        rm.resolved_config["ref_identities"] = args.at("ref_identities");
    }
    if (args.contains("ref_paths")) rm.resolved_config["ref_paths"] = args.at("ref_paths");
    if (args.contains("router_off")) rm.resolved_config["router_off"] = args.at("router_off");
    if (args.contains("trajectory")) rm.resolved_config["trajectory"] = args.at("trajectory");
    rm.input_checkpoint_hash = input_hash;
    record_artifact(rm, img_path);
    record_artifact(rm, trace_path);
    if (!traj_path.empty()) record_artifact(rm, traj_path);
    return rm;
}

RunManifest run_segment(const nlohmann::json& args, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::string input_hash = checkpoint_input_hash(args);
    Model model = Model::load_checkpoint(args.at("checkpoint"));

    SceneConfig scf;
    scf.image_size = model.cfg.image_size;
    scf.ref_size = model.cfg.ref_size;
    scf.max_subjects = model.cfg.max_subjects;

    Image image = read_png(args.at("image"));
    auto refs = resolve_references(args, scf);
    int t_index = args.value("t_index", 2);
    auto masks = model.segment_by_reference(image, refs, t_index,
                                            args.value("noise_seed", uint64_t{0}));

    RunManifest rm;
    rm.command = "segment";
    rm.resolved_config = {{"checkpoint", args.at("checkpoint")},
                          {"checkpoint_hash", input_hash},
                          {"image", args.at("image")},
                          {"t_index", t_index},
                          {"noise_seed", args.value("noise_seed", uint64_t{0})}};
    if (args.contains("ref_identities")) {
        rm.resolved_config["ref_identities"] = args.at("ref_identities");
    }
    if (args.contains("ref_paths")) rm.resolved_config["ref_paths"] = args.at("ref_paths");
    rm.input_checkpoint_hash = input_hash;
    for (size_t i = 0; i < masks.size(); i++) {
        std::string name = i + 1 < masks.size() ? "mask_subject" + std::to_string(i)
                                                : "mask_background";
        std::string path = out_dir + "/" + name + ".png";
        write_png(path, mask_to_image(masks[i], image.h, image.w));
        record_artifact(rm, path);
    }
    return rm;
}

RunManifest run_eval(const nlohmann::json& args, const std::string& out_dir) {
    RunConfig cfg = config_from_args(args);
    fs::create_directories(out_dir);
    std::string input_hash = checkpoint_input_hash(args);
    Model model = Model::load_checkpoint(args.at("checkpoint"));

    SceneConfig scf;
    scf.image_size = model.cfg.image_size;
    scf.ref_size = model.cfg.ref_size;
    scf.max_subjects = model.cfg.max_subjects;

    int scenes = args.value("scenes", 20);
    uint64_t seed = args.value("seed", uint64_t{7000});
    uint64_t params_before = model.all_params_hash();

    EvalReport report;
    report.scenes = scenes;
    Rng rng(derive_seed(seed, tag_hash("eval")));
    double fid_acc = 0;
    int fid_count = 0;
    for (int s = 0; s < scenes; s++) {
        // held-out two-subject scene
        uint32_t id_a = static_cast<uint32_t>(rng.uniform_int(4096));
        uint32_t id_b = static_cast<uint32_t>(rng.uniform_int(4096));
        while ((id_b % 64) == (id_a % 64)) id_b = static_cast<uint32_t>(rng.uniform_int(4096));
        auto spec_a = spec_from_identity(id_a);
        auto spec_b = spec_from_identity(id_b);
        uint64_t layout = rng.u64(), bg = rng.u64();
        auto scene = render_scene({spec_a, spec_b}, layout, bg, scf);

        // segmentation IoU with true references
        std::vector<ReferencePack> refs = {
            render_reference(spec_a, rng.u64(), false, scf),
            render_reference(spec_b, rng.u64(), false, scf)};
        auto masks = model.segment_by_reference(scene.image, refs, 2, 0);
        double iou = 0.5 * (mask_iou(masks[0], scene.masks[0]) +
                            mask_iou(masks[1], scene.masks[1]));
        report.per_scene_iou.push_back(iou);

        // leakage + background bias probes
        SampleSettings probe = cfg.sample;
        probe.record_trace = true;
        auto leak = leakage_score(model, spec_a, spec_b, rng.u64(), probe, scf);
        report.leakage_total++;
        report.mean_leakage_on += leak.leakage_on;
        report.mean_leakage_off += leak.leakage_off;
        if (leak.leakage_on < leak.leakage_off) report.leakage_wins++;

        auto bias = background_bias_score(model, {spec_a, spec_b},
                                          static_cast<int>(rng.uniform_int(kColorCount)),
                                          rng.u64(), probe, scf);
        report.bias_total++;
        report.mean_bias_on += bias.bias_on;
        report.mean_bias_off += bias.bias_off;
        if (bias.bias_on <= bias.bias_off) report.bias_wins++;

        // fidelity of the router-on leakage image's subject A region
        std::vector<double> region_a(static_cast<size_t>(scene.image.h) * scene.image.w);
        auto seg_region = model.segment_by_reference(leak.image_on_a, refs, 2, 0);
        auto fid = subject_fidelity(leak.image_on_a, seg_region[0], spec_a, scf);
        if (!fid.empty_region) {
            fid_acc += fid.score;
            fid_count++;
        }
        (void)region_a;
    }
    double iou_acc = 0;
    for (double v : report.per_scene_iou) iou_acc += v;
    report.mean_segmentation_iou = scenes > 0 ? iou_acc / scenes : 0.0;
    report.mean_fidelity = fid_count > 0 ? fid_acc / fid_count : 0.0;
    if (report.leakage_total > 0) {
        report.mean_leakage_on /= report.leakage_total;
        report.mean_leakage_off /= report.leakage_total;
    }
    if (report.bias_total > 0) {
        report.mean_bias_on /= report.bias_total;
        report.mean_bias_off /= report.bias_total;
    }

    GR_CHECK(model.all_params_hash() == params_before, ChecksumError,
             "evaluation mutated model parameters");

    std::string json_path = out_dir + "/eval_report.json";
    std::string csv_path = out_dir + "/eval_report.csv";
    write_json_file(json_path, report.to_json());
    report.write_csv(csv_path);

    RunManifest rm;
    rm.command = "eval";
    rm.resolved_config = {{"config", cfg.to_json()},
                          {"checkpoint", args.at("checkpoint")},
                          {"checkpoint_hash", input_hash},
                          {"scenes", scenes},
                          {"seed", seed}};
    rm.input_checkpoint_hash = input_hash;
    record_artifact(rm, json_path);
    record_artifact(rm, csv_path);
    return rm;
}

RunManifest run_census(const nlohmann::json& args, const std::string& out_dir) {
    RunConfig cfg = config_from_args(args);
    fs::create_directories(out_dir);
    size_t simplified = detail_encoder_param_count(cfg.model, false);
    size_t full = detail_encoder_param_count(cfg.model, true);
    nlohmann::json j = {{"simplified", simplified},
                        {"full", full},
                        {"removed_by_simplification", full - simplified}};
    std::string path = out_dir + "/census.json";
    write_json_file(path, j);
    std::printf("detail encoder parameters: simplified=%zu full=%zu removed=%zu\n", simplified,
                full, full - simplified);

    RunManifest rm;
    rm.command = "census";
    rm.resolved_config = {{"config", cfg.to_json()}};
    record_artifact(rm, path);
    return rm;
}

RunManifest run_viz(const nlohmann::json& args, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto trace = RoutingTrace::load(args.at("trace"));
    std::string path = out_dir + "/routing_mosaic.png";
    write_trace_mosaic(trace, path);

    RunManifest rm;
    rm.command = "viz";
    rm.resolved_config = {{"trace", args.at("trace")}};
    record_artifact(rm, path);
    return rm;
}

RunManifest dispatch(const std::string& command, const nlohmann::json& args,
                     const std::string& out_dir) {
    if (command == "synth") return run_synth(args, out_dir);
    if (command == "train") return run_train(args, out_dir);
    if (command == "sample") return run_sample(args, out_dir);
    if (command == "segment") return run_segment(args, out_dir);
    if (command == "eval") return run_eval(args, out_dir);
    if (command == "census") return run_census(args, out_dir);
    if (command == "viz") return run_viz(args, out_dir);
    throw ConfigError("unknown command in manifest: " + command);
}

int run_and_record(const std::string& command, const nlohmann::json& args,
                   const std::string& out_dir) {
    auto start = std::chrono::steady_clock::now();
    RunManifest rm = dispatch(command, args, out_dir);
    rm.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
    rm.code_version = glyphroute_version();
    // store the exact argument set for replay
    rm.resolved_config["args"] = args;
    rm.save(out_dir + "/run_manifest.json");
    std::printf("%s: wrote %zu artifact(s) to %s\n", command.c_str(),
                rm.artifact_hashes.size(), out_dir.c_str());
    return 0;
}

int run_rerun(const std::string& manifest_path, const std::string& out_dir) {
    RunManifest original = RunManifest::load(manifest_path);
    nlohmann::json args = original.resolved_config.value("args", original.resolved_config);
    if (!original.input_checkpoint_hash.empty() && args.contains("checkpoint")) {
        // replaying against a modified input checkpoint cannot reproduce
        args["checkpoint_hash"] = original.input_checkpoint_hash;
    }
    auto start = std::chrono::steady_clock::now();
    RunManifest replay = dispatch(original.command, args, out_dir);
    replay.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    replay.code_version = glyphroute_version();
    replay.resolved_config["args"] = args;
    replay.save(out_dir + "/run_manifest.json");

    bool ok = true;
    for (const auto& [name, hash] : original.artifact_hashes) {
        auto it = replay.artifact_hashes.find(name);
        if (it == replay.artifact_hashes.end()) {
            std::fprintf(stderr, "rerun: missing artifact %s\n", name.c_str());
            ok = false;
        } else if (it->second != hash) {
            std::fprintf(stderr, "rerun: hash mismatch for %s\n", name.c_str());
            ok = false;
        } else {
            std::printf("rerun: %s reproduced (%s)\n", name.c_str(),
                        hash.substr(0, 12).c_str());
        }
    }
    GR_CHECK(ok, ChecksumError, "rerun did not reproduce the original artifacts");
    std::printf("rerun: all %zu artifact hashes reproduced bitwise\n",
                original.artifact_hashes.size());
    return 0;
}

nlohmann::json load_config_arg(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{}.to_json();
    return RunConfig::from_file(config_path).to_json();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"glyphroute: routed subject-conditioned diffusion on a glyph world"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", checkpoint, prompt, image_path, trace_path,
                manifest_path;
    std::vector<std::string> ref_paths;
    std::vector<uint32_t> ref_identities;
    int scenes = 20, t_index = 2;
    uint64_t seed_flag = 0;
    bool router_off = false;
    int steps_flag = 0;
    double guidance_flag = -1.0;
    std::string stage_flag, dataset_flag, init_ckpt_flag;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration JSON");
        cmd->add_option("--out", out_dir, "output directory");
    };

    auto* synth = app.add_subcommand("synth", "render a dataset");
    add_common(synth);
    synth->add_option("--samples", steps_flag, "number of samples (overrides config)");
    synth->add_option("--seed", seed_flag, "dataset seed (overrides config)");

    auto* train = app.add_subcommand("train", "run one training stage");
    add_common(train);
    train->add_option("--stage", stage_flag, "encoder or router");
    train->add_option("--dataset", dataset_flag, "dataset manifest path");
    train->add_option("--init", init_ckpt_flag, "initial checkpoint");
    train->add_option("--steps", steps_flag, "steps (overrides config)");
    train->add_option("--seed", seed_flag, "training seed (overrides config)");

    auto* sample = app.add_subcommand("sample", "generate an image");
    add_common(sample);
    sample->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    sample->add_option("--prompt", prompt, "caption text")->required();
    sample->add_option("--ref", ref_paths, "reference PNG path (repeatable)");
    sample->add_option("--ref-identity", ref_identities, "reference identity id (repeatable)");
    sample->add_option("--steps", steps_flag, "sampler steps (overrides config)");
    sample->add_option("--guidance", guidance_flag, "guidance scale (overrides config)");
    sample->add_option("--seed", seed_flag, "sampling seed");
    sample->add_flag("--router-off", router_off, "ablation: force all-ones routing maps");
    bool save_trajectory = false;
    sample->add_flag("--trajectory", save_trajectory, "also export the latent trajectory");

    auto* segment = app.add_subcommand("segment", "reference-prompted segmentation");
    add_common(segment);
    segment->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    segment->add_option("--image", image_path, "input image PNG")->required();
    segment->add_option("--ref", ref_paths, "reference PNG path (repeatable)");
    segment->add_option("--ref-identity", ref_identities, "reference identity id");
    segment->add_option("--t-index", t_index, "noise level index from the clean end");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    eval_cmd->add_option("--scenes", scenes, "evaluation scene count");
    eval_cmd->add_option("--seed", seed_flag, "evaluation seed");

    auto* census = app.add_subcommand("census", "detail encoder parameter census");
    add_common(census);

    auto* viz = app.add_subcommand("viz", "render a routing-trace mosaic");
    add_common(viz);
    viz->add_option("--trace", trace_path, "routing trace archive")->required();

    auto* rerun = app.add_subcommand("rerun", "replay a run manifest and verify hashes");
    rerun->add_option("--manifest", manifest_path, "run_manifest.json path")->required();
    rerun->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);

        if (rerun->parsed()) return run_rerun(manifest_path, out_dir);

        auto was_set = [](CLI::App* cmd, const char* name) {
            return cmd->count(name) > 0;
        };

        nlohmann::json args;
        args["config"] = load_config_arg(config_path);

        if (synth->parsed()) {
            if (steps_flag > 0) args["config"]["data"]["n_samples"] = steps_flag;
            if (was_set(synth, "--seed")) args["config"]["data"]["seed"] = seed_flag;
            return run_and_record("synth", args, out_dir);
        }
        if (train->parsed()) {
            if (!stage_flag.empty()) args["config"]["train"]["stage"] = stage_flag;
            if (!dataset_flag.empty()) args["config"]["train"]["dataset"] = dataset_flag;
            if (!init_ckpt_flag.empty()) {
                args["config"]["train"]["init_checkpoint"] = init_ckpt_flag;
            }
            if (steps_flag > 0) args["config"]["train"]["steps"] = steps_flag;
            if (was_set(train, "--seed")) args["config"]["train"]["seed"] = seed_flag;
            return run_and_record("train", args, out_dir);
        }
        if (sample->parsed()) {
            args["checkpoint"] = checkpoint;
            args["prompt"] = prompt;
            if (!ref_paths.empty()) args["ref_paths"] = ref_paths;
            if (!ref_identities.empty()) args["ref_identities"] = ref_identities;
            if (steps_flag > 0) args["config"]["sample"]["steps"] = steps_flag;
            if (guidance_flag >= 0.0) args["config"]["sample"]["guidance"] = guidance_flag;
            if (was_set(sample, "--seed")) args["config"]["sample"]["seed"] = seed_flag;
            if (router_off) args["router_off"] = true;
            if (save_trajectory) args["trajectory"] = true;
            return run_and_record("sample", args, out_dir);
        }
        if (segment->parsed()) {
            args["checkpoint"] = checkpoint;
            args["image"] = image_path;
            if (!ref_paths.empty()) args["ref_paths"] = ref_paths;
            if (!ref_identities.empty()) args["ref_identities"] = ref_identities;
            args["t_index"] = t_index;
            return run_and_record("segment", args, out_dir);
        }
        if (eval_cmd->parsed()) {
            args["checkpoint"] = checkpoint;
            args["scenes"] = scenes;
            if (was_set(eval_cmd, "--seed")) args["seed"] = seed_flag;
            return run_and_record("eval", args, out_dir);
        }
        if (census->parsed()) return run_and_record("census", args, out_dir);
        if (viz->parsed()) {
            args["trace"] = trace_path;
            return run_and_record("viz", args, out_dir);
        }
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const ChecksumError& e) {
        std::fprintf(stderr, "checksum error: %s\n", e.what());
        return 4;
    } catch (const PlacementError& e) {
        std::fprintf(stderr, "placement error: %s\n", e.what());
        return 5;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 6;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "shape error: %s\n", e.what());
        return 7;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
