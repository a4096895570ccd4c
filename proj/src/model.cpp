// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/model.hpp"

#include <algorithm>
#include <cmath>

#include "glyphroute/errors.hpp"
#include "glyphroute/serialize.hpp"

Model Model::create(const ModelConfig& cfg, uint64_t init_seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    SceneConfig scene_cfg;
    scene_cfg.image_size = cfg.image_size;
    scene_cfg.ref_size = cfg.ref_size;
    scene_cfg.max_subjects = cfg.max_subjects;
    m.vocab = vocab_size();
    m.text_len = caption_length(scene_cfg);
    m.sched = NoiseSchedule::geometric_vp(cfg.schedule_steps, cfg.noise_ratio_min,
                                          cfg.noise_ratio_max);
    m.codec = LatentCodec{cfg.image_size, cfg.patch};

    Rng rng(derive_seed(init_seed, tag_hash("model-init")));
    m.concept_encoder = ConceptEncoder::create(m.reg, cfg, rng);
    m.subject_qf = SubjectQFormer::create(m.reg, cfg, rng);
    m.router = Router::create(m.reg, cfg.concept_width, cfg.routing_dim, cfg.qformer_layers,
                              cfg.block_channels(), rng);
    m.detail = DetailEncoder::create(m.reg, cfg, rng);
    m.denoiser = Denoiser::create(m.reg, cfg, m.vocab, m.text_len, rng);
    m.init_detail_from_denoiser();
    return m;
}

void Model::init_detail_from_denoiser() {
    for (auto& e : reg.entries()) {
        if (e.group != ParamGroup::detail) continue;
        const std::string prefix = "detail.";
        std::string suffix = e.name.substr(prefix.size());
        const auto* src = reg.find("denoiser." + suffix);
        if (src == nullptr) continue;
        if (src->t->rows != e.t->rows || src->t->cols != e.t->cols) continue;
        e.t->v = src->t->v;
    }
}

Tensor Model::encode_text(Tape& t, const std::vector<int>& caption) const {
    return denoiser.encode_text(t, caption);
}

Tensor Model::encode_concept(Tape& t, const Image& segmented_ref) const {
    return subject_qf.forward(t, concept_encoder.trunk_features(t, segmented_ref));
}

Tensor Model::background_concept(Tape& t) const {
    return encode_concept(t, zero_reference_image(cfg));
}

Tensor Model::routing_token_for(Tape& t, const Image& ref_or_zero) const {
    return router.routing_token(t, concept_encoder.trunk_features(t, ref_or_zero));
}

std::vector<Tensor> Model::encode_detail_features(Tape& t, const ReferencePack& ref) const {
    return detail.forward(t, detail_input(ref, cfg));
}

std::vector<Tensor> Model::detail_feature_sets(Tape& t, const ReferencePack& ref) const {
    auto all = encode_detail_features(t, ref);
    return std::vector<Tensor>(all.begin() + 1, all.end());
}

SubjectEncoding Model::encode_subject(Tape& t, const ReferencePack& ref) const {
    SubjectEncoding s;
    s.identity_id = ref.identity_id;
    auto trunk = concept_encoder.trunk_features(t, ref.image);
    s.E = subject_qf.forward(t, trunk);
    s.R = router.routing_token(t, trunk);
    s.G = detail.forward(t, detail_input(ref, cfg));
    return s;
}

SubjectEncoding Model::background_encoding(Tape& t) const {
    SubjectEncoding s;
    auto zero = zero_reference_image(cfg);
    auto trunk = concept_encoder.trunk_features(t, zero);
    s.E = subject_qf.forward(t, trunk);
    s.R = router.routing_token(t, trunk);
    return s;
}

ConditioningBundle Model::make_bundle(Tape& t, const std::vector<int>& caption,
                                      const std::vector<ReferencePack>& refs, double eta,
                                      double gamma) const {
    GR_CHECK(static_cast<int>(refs.size()) <= cfg.max_subjects, ConfigError,
             "make_bundle: too many references");
    ConditioningBundle b;
    b.text = encode_text(t, caption);
    for (const auto& r : refs) b.subjects.push_back(encode_subject(t, r));
    b.background = background_encoding(t);
    b.eta = eta;
    b.gamma = gamma;
    return b;
}

namespace {

void record_trace(RoutingTrace& trace, const std::vector<RoutingMapsLayer>& maps,
                  int call_index) {
    for (size_t layer = 0; layer < maps.size(); layer++) {
        const auto& ml = maps[layer];
        RoutingTraceEntry e;
        e.step = call_index / 2;
        e.substep = call_index % 2;
        e.layer = static_cast<int>(layer);
        e.h = ml.h;
        e.w = ml.w;
        e.subjects = ml.subjects;
        e.soft = ml.soft->v;
        e.hard = ml.hard->v;
        trace.entries.push_back(std::move(e));
    }
}

}  // namespace

SampleResult Model::sample(const std::vector<int>& caption,
                           const std::vector<ReferencePack>& refs,
                           const SampleSettings& settings) const {
    Tape tape;
    tape.enabled = false;

    auto bundle_cond = make_bundle(tape, caption, refs, settings.eta, settings.gamma);
    ConditioningBundle bundle_uncond;
    bundle_uncond.text = bundle_cond.text;
    bundle_uncond.background = bundle_cond.background;
    bundle_uncond.eta = settings.eta;
    bundle_uncond.gamma = settings.gamma;

    ForwardOptions opt;
    opt.router.mode = HardenMode::eval;
    opt.override_mode = settings.override_mode;

    SampleResult result;
    Rng noise_rng(derive_seed(settings.seed, tag_hash("sample-noise")));
    int hw = cfg.latent_hw() * cfg.latent_hw();
    auto x0 = randn_tensor(hw, cfg.latent_channels(), noise_rng, 1.0);
    for (auto& v : x0->v) v *= settings.sigma_max;

    auto sigmas = karras_sigmas(settings.steps, settings.sigma_min, settings.sigma_max,
                                settings.rho);

    EdmDenoiser D = [&](const Tensor& x, double sigma, int call_index) -> Tensor {
        double alpha = vp_alpha_of_sigma(sigma);
        double lam = std::log(sigma);
        Tape t2;
        t2.enabled = false;
        auto z_vp = make_tensor(x->rows, x->cols);
        for (size_t i = 0; i < x->size(); i++) z_vp->v[i] = alpha * x->v[i];

        auto cond = forward(t2, z_vp, lam, bundle_cond, opt);
        result.cond_calls++;
        auto uncond = forward(t2, z_vp, lam, bundle_uncond, opt);
        result.uncond_calls++;
        if (settings.record_trace) record_trace(result.trace, cond.maps, call_index);

        auto eps = cfg_combine(uncond.eps, cond.eps, settings.guidance);
        auto denoised = make_tensor(x->rows, x->cols);
        for (size_t i = 0; i < x->size(); i++) denoised->v[i] = x->v[i] - sigma * eps->v[i];
        return denoised;
    };

    result.trajectory = edm_heun_sample(D, x0, sigmas);
    result.z0 = result.trajectory.xs.back();
    result.image = codec.decode(result.z0);
    for (auto& v : result.image.px) v = std::min(1.0, std::max(0.0, v));
    quantize_u8(result.image);
    return result;
}

std::vector<std::vector<double>> Model::segment_by_reference(
    const Image& image, const std::vector<ReferencePack>& refs, int t_index,
    uint64_t noise_seed) const {
    GR_CHECK(!refs.empty(), ConfigError, "segment_by_reference: need at least one reference");
    Tape tape;
    tape.enabled = false;

    // Noise level: entry t_index counted from the clean end of a 25-step
    // EDM grid, i.e. a small sigma.
    auto sigmas = karras_sigmas(25, cfg.noise_ratio_min, cfg.noise_ratio_max, 7.0);
    double sigma = sigmas[sigmas.size() - 2 - static_cast<size_t>(t_index)];
    double alpha = vp_alpha_of_sigma(sigma);

    auto z0 = codec.encode(image);
    Rng rng(derive_seed(noise_seed, tag_hash("segment-noise")));
    auto z = make_tensor(z0->rows, z0->cols);
    for (size_t i = 0; i < z->size(); i++) {
        // VP-space z_t = alpha*(z0 + sigma*eps)
        z->v[i] = alpha * (z0->v[i] + sigma * rng.gaussian());
    }

    // The caption only has to be grammatical here; build it in a canonical
    // order so predicted masks are exactly permutation-equivariant in the
    // reference order.
    std::vector<SubjectSpec> specs;
    for (const auto& r : refs) specs.push_back(spec_from_identity(r.identity_id));
    std::sort(specs.begin(), specs.end(),
              [](const SubjectSpec& a, const SubjectSpec& b) {
                  return a.identity_id < b.identity_id;
              });
    SceneConfig scf;
    scf.image_size = cfg.image_size;
    scf.ref_size = cfg.ref_size;
    scf.max_subjects = cfg.max_subjects;
    auto caption = make_caption(specs, 0, scf);

    auto bundle = make_bundle(tape, caption, refs, cfg.eta, cfg.gamma);
    ForwardOptions opt;
    opt.router.mode = HardenMode::eval;
    auto out = forward(tape, z, std::log(sigma), bundle, opt);

    const auto& final_maps = out.maps.back();
    int n = static_cast<int>(refs.size());
    std::vector<std::vector<double>> masks;
    for (int i = 0; i <= n; i++) {  // subjects plus background complement
        std::vector<double> layer_mask(static_cast<size_t>(final_maps.h) * final_maps.w);
        for (size_t u = 0; u < layer_mask.size(); u++) {
            layer_mask[u] = final_maps.hard->at(i, static_cast<int>(u));
        }
        masks.push_back(resample_nearest(layer_mask, final_maps.h, final_maps.w,
                                         cfg.image_size, cfg.image_size));
    }
    return masks;
}

void Model::save_checkpoint(const std::string& path, const nlohmann::json& extra_meta) const {
    TensorArchive ar;
    ar.meta["format"] = "glyphroute-checkpoint-v1";
    ar.meta["config"] = cfg.to_json();
    ar.meta["extra"] = extra_meta;
    auto groups = nlohmann::json::object();
    for (const auto& e : reg.entries()) {
        ar.put(e.name, e.t);
        groups[e.name] = param_group_name(e.group);
    }
    ar.meta["groups"] = groups;
    ar.save(path, ArchiveDtype::f64);
}

Model Model::load_checkpoint(const std::string& path) {
    auto ar = TensorArchive::load(path);
    GR_CHECK(ar.meta.value("format", "") == "glyphroute-checkpoint-v1", IoError,
             "not a checkpoint archive: " + path);
    ModelConfig cfg = ModelConfig::from_json(ar.meta.at("config"));
    Model m = Model::create(cfg, 0);
    GR_CHECK(ar.tensors.size() == m.reg.entries().size(), IoError,
             "checkpoint parameter set does not match the configured model");
    for (auto& e : m.reg.entries()) {
        const auto& t = ar.get(e.name);
        GR_CHECK(t->rows == e.t->rows && t->cols == e.t->cols, IoError,
                 "checkpoint tensor shape mismatch: " + e.name);
        e.t->v = t->v;
    }
    return m;
}

nlohmann::json Model::checkpoint_meta(const std::string& path) {
    auto ar = TensorArchive::load(path);
    return ar.meta;
}

uint64_t Model::all_params_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : reg.entries()) {
        h ^= tensor_value_hash(e.t);
        h *= 0x100000001b3ULL;
    }
    return h;
}

Image zero_reference_image(const ModelConfig& cfg) {
    return Image(cfg.ref_size, cfg.ref_size, 3);
}
