#pragma once

#include <array>
#include <string>
#include <vector>

#include "surfacenet/material.hpp"
#include "surfacenet/nn.hpp"

namespace surfacenet {

struct ConvSpec {
    int out_channels;
    int kernel;
    int stride;
    int pad;
};

/// Six-layer patch discriminator over concatenated map sets. The default
/// layer arithmetic reduces 256×256 to a 14×14 single-channel score map:
/// four stride-2 kernel-4 layers, one stride-1 kernel-3 pad-1 layer, and
/// a final stride-1 kernel-3 pad-0 layer.
struct DiscriminatorConfig {
    int input_channels = 10; // normal(3) + diffuse(3) + roughness(1) + specular(3)
    std::vector<ConvSpec> layers = default_layers(64);

    /// Patch mode emits one score per receptive field; image mode pools
    /// logits globally into a single score (the "+Image" ablation).
    bool patch = true;

    static std::vector<ConvSpec> default_layers(int width);
    static DiscriminatorConfig desk();
    static DiscriminatorConfig paper();
    static DiscriminatorConfig tiny();

    /// Throws ConfigError unless the stack has exactly 6 layers and maps
    /// a 256 input to a 14×14 1-channel score map.
    void validate() const;

    /// Output spatial side for a given input side (may be <= 0 when the
    /// input is too small).
    int score_size(int input_size) const;

    /// Receptive field side and stride of one output score in input pixels.
    std::pair<int, int> receptive_field() const;
};

class DiscriminatorNetwork {
public:
    explicit DiscriminatorNetwork(const DiscriminatorConfig& config, std::uint64_t param_seed = 0);

    /// Training-path forward over a 10-channel CHW tensor; returns the
    /// per-patch score map in (0,1).
    Tensor forward(const Tensor& maps, bool cache = true);

    /// Backward from score-map gradients. Returns the gradient wrt the
    /// input maps (needed when the generator trains through a frozen D).
    Tensor backward(const Tensor& grad_scores, bool accumulate = true);

    /// Inference entries over assembled map sets.
    Image patch_scores(const MaterialMaps& maps);
    double discriminate(const MaterialMaps& maps);

    const std::vector<nn::ParamRef>& params() const { return params_; }
    std::size_t parameter_count() const { return nn::parameter_count(params_); }
    const DiscriminatorConfig& config() const { return config_; }

private:
    DiscriminatorConfig config_;
    // Plain conv + leaky-relu stack. No normalization layers: their global
    // statistics would couple distant patches and break the per-patch
    // locality contract.
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::LeakyReLU> relus_;
    nn::Sigmoid sigmoid_;
    int pre_pool_h_ = 0, pre_pool_w_ = 0;
    std::vector<nn::ParamRef> params_;
};

/// Concatenates a map set into the fixed discriminator input order
/// [normal, diffuse, roughness, specular].
Tensor discriminator_input(const MaterialMaps& maps);

/// Same concatenation from raw generator head outputs (kMapKinds order).
Tensor discriminator_input(const std::array<Tensor, 4>& heads);

/// Splits a gradient wrt the concatenated input back into head order.
std::array<Tensor, 4> split_discriminator_grad(const Tensor& grad);

/// Mean of all patch scores.
double mean_score(const Tensor& scores);

} // namespace surfacenet
