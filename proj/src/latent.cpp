// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/latent.hpp"

#include <cmath>

#include "glyphroute/errors.hpp"

Tensor LatentCodec::encode(const Image& img) const {
    GR_CHECK(img.h == image_size && img.w == image_size, ShapeError,
             "encode: image size mismatch");
    GR_CHECK(image_size % patch == 0, ShapeError, "encode: size not divisible by patch");
    int hw = latent_hw();
    int cl = img.c * patch * patch;
    auto z = make_tensor(hw * hw, cl);
    for (int y = 0; y < hw; y++) {
        for (int x = 0; x < hw; x++) {
            double* cell = z->row(y * hw + x);
            int k = 0;
            for (int py = 0; py < patch; py++) {
                for (int px = 0; px < patch; px++) {
                    for (int c = 0; c < img.c; c++) {
                        cell[k++] = img.at(y * patch + py, x * patch + px, c);
                    }
                }
            }
        }
    }
    return z;
}

Image LatentCodec::decode(const Tensor& z, int image_channels) const {
    int hw = latent_hw();
    GR_CHECK(z->rows == hw * hw, ShapeError, "decode: latent rows mismatch");
    GR_CHECK(z->cols == image_channels * patch * patch, ShapeError,
             "decode: latent channels mismatch");
    Image img(image_size, image_size, image_channels);
    for (int y = 0; y < hw; y++) {
        for (int x = 0; x < hw; x++) {
            const double* cell = z->row(y * hw + x);
            int k = 0;
            for (int py = 0; py < patch; py++) {
                for (int px = 0; px < patch; px++) {
                    for (int c = 0; c < image_channels; c++) {
                        img.at(y * patch + py, x * patch + px, c) = cell[k++];
                    }
                }
            }
        }
    }
    return img;
}

NoiseSchedule NoiseSchedule::geometric_vp(int T, double ratio_min, double ratio_max) {
    GR_CHECK(T >= 1, ConfigError, "schedule: T must be >= 1");
    GR_CHECK(ratio_min > 0 && ratio_max > ratio_min, ConfigError, "schedule: bad ratio range");
    NoiseSchedule s;
    s.T = T;
    s.alpha.resize(T + 1);
    s.sigma.resize(T + 1);
    s.alpha[0] = 1.0;
    s.sigma[0] = 0.0;
    double log_min = std::log(ratio_min), log_max = std::log(ratio_max);
    for (int t = 1; t <= T; t++) {
        double f = T == 1 ? 1.0 : static_cast<double>(t - 1) / (T - 1);
        double ratio = std::exp(log_min + (log_max - log_min) * f);
        double denom = std::sqrt(1.0 + ratio * ratio);
        s.alpha[t] = 1.0 / denom;
        s.sigma[t] = ratio / denom;
    }
    return s;
}

double NoiseSchedule::lambda_for(int t) const {
    GR_CHECK(t >= 1 && t <= T, ConfigError, "lambda_for: t out of range");
    return std::log(sigma[t] / alpha[t]);
}

Tensor add_noise(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    GR_CHECK(t >= 0 && t <= sched.T, ShapeError, "add_noise: t out of range");
    GR_CHECK(z0->rows == eps->rows && z0->cols == eps->cols, ShapeError,
             "add_noise: shape mismatch");
    auto zt = make_tensor(z0->rows, z0->cols);
    double a = sched.alpha[t], s = sched.sigma[t];
    for (size_t i = 0; i < zt->size(); i++) zt->v[i] = a * z0->v[i] + s * eps->v[i];
    return zt;
}

std::vector<double> karras_sigmas(int steps, double sigma_min, double sigma_max, double rho) {
    GR_CHECK(steps >= 1, ConfigError, "karras_sigmas: steps must be >= 1");
    std::vector<double> out(steps + 1);
    if (steps == 1) {
        out[0] = sigma_max;
    } else {
        double min_inv = std::pow(sigma_min, 1.0 / rho);
        double max_inv = std::pow(sigma_max, 1.0 / rho);
        for (int i = 0; i < steps; i++) {
            double f = static_cast<double>(i) / (steps - 1);
            out[i] = std::pow(max_inv + f * (min_inv - max_inv), rho);
        }
    }
    out[steps] = 0.0;
    return out;
}

double vp_alpha_of_sigma(double sigma) { return 1.0 / std::sqrt(1.0 + sigma * sigma); }

EdmTrajectory edm_heun_sample(const EdmDenoiser& denoise, const Tensor& x_init,
                              const std::vector<double>& sigmas) {
    GR_CHECK(sigmas.size() >= 2, ConfigError, "edm_heun_sample: need at least one step");
    EdmTrajectory traj;
    Tensor x = clone_tensor(x_init);
    traj.xs.push_back(clone_tensor(x));
    int steps = static_cast<int>(sigmas.size()) - 1;
    for (int i = 0; i < steps; i++) {
        double s0 = sigmas[i], s1 = sigmas[i + 1];
        Tensor den = denoise(x, s0, traj.denoiser_calls++);
        double dt = s1 - s0;
        auto d = make_tensor(x->rows, x->cols);
        for (size_t j = 0; j < x->size(); j++) d->v[j] = (x->v[j] - den->v[j]) / s0;
        if (s1 == 0.0) {
            for (size_t j = 0; j < x->size(); j++) x->v[j] += d->v[j] * dt;
        } else {
            auto x2 = make_tensor(x->rows, x->cols);
            for (size_t j = 0; j < x->size(); j++) x2->v[j] = x->v[j] + d->v[j] * dt;
            Tensor den2 = denoise(x2, s1, traj.denoiser_calls++);
            for (size_t j = 0; j < x->size(); j++) {
                double d2 = (x2->v[j] - den2->v[j]) / s1;
                x->v[j] += 0.5 * (d->v[j] + d2) * dt;
            }
        }
        for (size_t j = 0; j < x->size(); j++) {
            if (!std::isfinite(x->v[j])) {
                throw NumericError("edm_heun_sample: non-finite latent at step " +
                                   std::to_string(i));
            }
        }
        traj.xs.push_back(clone_tensor(x));
    }
    return traj;
}
