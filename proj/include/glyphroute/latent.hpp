// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "glyphroute/imageio.hpp"
#include "glyphroute/tensor.hpp"

// Deterministic invertible latent codec (space-to-depth) plus the noise
// schedule and EDM sampling math. The codec replaces a learned VAE: encoding
// is exact, so the routing-as-segmentation mode sees lossless latents and
// the diffusion model is the only trained component.

struct LatentCodec {
    int image_size = 64;
    int patch = 4;

    int latent_hw() const { return image_size / patch; }
    int latent_channels(int image_channels = 3) const { return image_channels * patch * patch; }

    // (h*w) x (c*p*p) from an image whose sides are divisible by patch.
    Tensor encode(const Image& img) const;
    Image decode(const Tensor& z, int image_channels = 3) const;
};

// Variance-preserving schedule driven by a log-spaced noise-level grid:
//   sigma_ratio_t = sigma_t / alpha_t log-spaced over [ratio_min, ratio_max],
//   alpha_t = 1/sqrt(1+ratio^2), sigma_t = ratio/sqrt(1+ratio^2).
// alpha_0 = 1, sigma_0 = 0, sigma strictly increasing, alpha^2+sigma^2 = 1.
struct NoiseSchedule {
    std::string kind = "geometric_vp";
    int T = 0;
    std::vector<double> alpha;  // T+1 entries
    std::vector<double> sigma;  // T+1 entries

    static NoiseSchedule geometric_vp(int T, double ratio_min = 0.002, double ratio_max = 80.0);

    // Noise-level conditioning input for the network: log(sigma_t/alpha_t).
    // Defined for t >= 1.
    double lambda_for(int t) const;
    double ratio_for(int t) const { return sigma[t] / alpha[t]; }
};

Tensor add_noise(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched);

// ---- EDM sampling (Karras et al. 2022, arXiv:2206.00364) ----

// Descending sigma grid with rho-spacing, plus a trailing zero.
std::vector<double> karras_sigmas(int steps, double sigma_min, double sigma_max,
                                  double rho = 7.0);

// VP bridge: the epsilon-network is conditioned on lambda = log(sigma) and
// fed alpha(sigma) * x, where alpha = 1/sqrt(1+sigma^2) maps the EDM-space
// state x = z0 + sigma*eps back to the VP-space z_t the network trained on.
double vp_alpha_of_sigma(double sigma);

// Denoised-prediction callback: D(x, sigma) -> x_hat. call_index is a
// running count for diagnostics.
using EdmDenoiser = std::function<Tensor(const Tensor& x, double sigma, int call_index)>;

struct EdmTrajectory {
    std::vector<Tensor> xs;  // x after each step; xs.front() is the initial state
    int denoiser_calls = 0;
};

// Heun (2nd order) deterministic sampler over the given sigma grid.
EdmTrajectory edm_heun_sample(const EdmDenoiser& denoise, const Tensor& x_init,
                              const std::vector<double>& sigmas);
