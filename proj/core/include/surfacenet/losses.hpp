#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "surfacenet/material.hpp"
#include "surfacenet/tensor.hpp"

namespace surfacenet {

/// Loss weighting and per-term toggles for ablations. alpha scales the
/// adversarial term in the total; beta scales the MS-SSIM term inside
/// the reconstruction loss.
struct LossWeights {
    double alpha = 0.2;
    double beta = 0.84;
    bool use_l1 = true;
    bool use_msssim = true;
    bool use_adversarial = true;

    void validate() const; // throws ConfigError
};

/// Per-term values for one training step, serialized as one structured
/// log line per step.
struct LossReport {
    std::array<double, 4> l1{};     // per MapKind, kMapKinds order
    std::array<double, 4> msssim{}; // similarity values in [0,1]
    double supervised = 0.0;
    double adv_g = 0.0;
    double adv_d_real = 0.0; // D output on real maps
    double adv_d_fake = 0.0; // D output on generated maps
    double disc_loss = 0.0;
    double total = 0.0;
    bool has_supervised = false;
    bool has_adversarial = false;

    std::string log_line(std::int64_t step, const std::string& stream) const;
};

/// Mean absolute difference over all pixels and channels.
double l1_map_loss(const Image& pred, const Image& gt);

/// Multi-scale SSIM similarity in [0,1]. Gaussian window 11, sigma 1.5,
/// scale weights renormalized when fewer than 5 scales fit the input.
double ms_ssim(const Image& a, const Image& b);

/// Number of scales used at a given resolution (error below one scale).
int ms_ssim_scale_count(int height, int width);

// Tensor-facing variants used by the trainer. When `grad` is non-null,
// `scale * d(value)/d(first argument)` is accumulated into it.
double l1_loss(const Tensor& pred, const Tensor& gt, Tensor* grad = nullptr, double scale = 1.0);
double ms_ssim(const Tensor& a, const Tensor& b, Tensor* grad_a = nullptr, double scale = 1.0);

struct SupervisedLoss {
    double value = 0.0;
    std::array<double, 4> l1{};
    std::array<double, 4> msssim{};
};

/// Reconstruction loss over all four maps: sum_k [ L1_k + beta*(1 - MS-SSIM_k) ],
/// with each term subject to its toggle. Gradients accumulate into
/// `grads` scaled by `grad_scale` when provided.
SupervisedLoss supervised_loss(const std::array<Tensor, 4>& pred, const std::array<Tensor, 4>& gt,
                               const LossWeights& weights,
                               std::array<Tensor, 4>* grads = nullptr, double grad_scale = 1.0);

/// Convenience overload for assembled map sets (metric/test path).
SupervisedLoss supervised_loss(const MaterialMaps& pred, const MaterialMaps& gt,
                               const LossWeights& weights);

/// Discriminator objective to minimize: -[log d_real + log(1 - d_fake)],
/// stabilized by +1e-8 inside each log.
double discriminator_loss(double d_real, double d_fake);
double discriminator_loss_grad_real(double d_real);
double discriminator_loss_grad_fake(double d_fake);

/// Non-saturating generator objective to minimize: -log d_fake.
double generator_adv_loss(double d_fake);
double generator_adv_loss_grad(double d_fake);

/// supervised + alpha * adv_g, honoring the adversarial toggle.
double total_generator_loss(double supervised, double adv_g, const LossWeights& weights);

} // namespace surfacenet
