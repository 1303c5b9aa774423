#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surfacenet/material.hpp"
#include "surfacenet/nn.hpp"

namespace surfacenet {

/// One output head of the generator; there is exactly one per MapKind and
/// every head ends in a sigmoid so outputs stay inside [0,1].
struct HeadSpec {
    MapKind kind;
    int channels;
};

struct GeneratorConfig {
    std::string scale = "desk";

    int stem_channels = 16;
    std::vector<int> encoder_block_counts = {2, 2, 2};
    std::vector<int> encoder_channels = {16, 24, 32};
    std::vector<int> aspp_dilations = {1, 2, 4};
    int aspp_channels = 64;
    std::vector<int> decoder_channels = {48, 32, 24};
    int trunk_channels = 64;
    int head_hidden = 16;
    std::vector<HeadSpec> heads = default_heads();

    /// Input sides must be divisible by this; the encoder itself needs 8.
    int input_multiple = 32;

    /// Ablation switches: the base variant upsamples by interpolation and
    /// takes no input skips.
    bool learned_upsampling = true;
    bool input_skips = true;

    static std::vector<HeadSpec> default_heads();
    static GeneratorConfig desk();
    static GeneratorConfig paper();
    /// Shrunk variant for finite-difference gradient checks (8×8 inputs).
    static GeneratorConfig tiny();

    void validate() const; // throws ConfigError
};

/// conv-norm-relu-conv-norm with an identity or projected shortcut.
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(int in_ch, int out_ch, int stride);

    void init(Rng& rng);
    Tensor forward(const Tensor& x, bool cache = true);
    Tensor backward(const Tensor& grad_out, bool accumulate = true);
    void collect(const std::string& prefix, std::vector<nn::ParamRef>& out);

private:
    bool projected_ = false;
    nn::Conv2d conv1_, conv2_, shortcut_;
    nn::GroupNorm norm1_, norm2_;
    nn::LeakyReLU relu1_{0.0}, relu_out_{0.0};
};

/// Atrous spatial pyramid pooling: one dilated 3×3 branch per dilation
/// plus a global-pooling branch, concatenated and projected back down.
class Aspp {
public:
    Aspp() = default;
    Aspp(int in_ch, int out_ch, const std::vector<int>& dilations);

    void init(Rng& rng);
    Tensor forward(const Tensor& x, bool cache = true);
    Tensor backward(const Tensor& grad_out, bool accumulate = true);
    void collect(const std::string& prefix, std::vector<nn::ParamRef>& out);

private:
    int in_h_ = 0, in_w_ = 0;
    std::vector<nn::Conv2d> branch_convs_;
    std::vector<nn::GroupNorm> branch_norms_;
    std::vector<nn::LeakyReLU> branch_relus_;
    nn::Conv2d pool_conv_;
    nn::LeakyReLU pool_relu_{0.0};
    nn::Conv2d project_;
    nn::GroupNorm project_norm_;
    nn::LeakyReLU project_relu_{0.0};
};

/// Area-average downsampling of an input image by factor 1, 2 or 4.
/// Preserves mean brightness; dimensions must divide evenly.
Image downsample_input(const Image& image, int factor);

/// Fully-convolutional multi-head SVBRDF estimator: stride-8 residual
/// encoder, ASPP bottleneck, three learnable upsampling stages fed by
/// downsampled copies of the input, a shared trunk, and one prediction
/// head per reflectance map.
class GeneratorNetwork {
public:
    explicit GeneratorNetwork(const GeneratorConfig& config, std::uint64_t param_seed = 0);

    /// Training-path forward on a CHW tensor. Head outputs are returned in
    /// kMapKinds order with sigmoid already applied.
    std::array<Tensor, 4> forward(const Tensor& rgb, bool cache = true);

    /// Backward from per-head gradients; parameter gradients accumulate
    /// unless accumulate=false.
    void backward(const std::array<Tensor, 4>& head_grads, bool accumulate = true);

    /// Inference entry: validates resolution against config.input_multiple
    /// and value range, returns assembled MaterialMaps.
    MaterialMaps forward_maps(const Image& image);

    /// Shared feature maps right before the prediction heads (probe for
    /// shape tests; runs without caching).
    Tensor trunk_features(const Tensor& rgb);

    const std::vector<nn::ParamRef>& params() const { return params_; }
    std::size_t parameter_count() const { return nn::parameter_count(params_); }
    const GeneratorConfig& config() const { return config_; }

private:
    struct DecoderStage {
        nn::ConvTranspose2d up;
        nn::GroupNorm up_norm;
        nn::LeakyReLU up_relu{0.0};
        ResidualBlock refine;
        int skip_factor = 1;
        int concat_channels = 0;
    };

    GeneratorConfig config_;

    nn::Conv2d stem_;
    nn::GroupNorm stem_norm_;
    nn::LeakyReLU stem_relu_{0.0};
    std::vector<ResidualBlock> encoder_blocks_;
    Aspp aspp_;
    std::vector<DecoderStage> decoder_;
    int base_upsample_factor_ = 8;
    nn::Conv2d trunk_;
    nn::GroupNorm trunk_norm_;
    nn::LeakyReLU trunk_relu_{0.0};

    struct Head {
        MapKind kind;
        nn::Conv2d reduce;
        nn::LeakyReLU relu{0.0};
        nn::Conv2d predict;
        nn::Sigmoid sigmoid;
    };
    std::vector<Head> heads_;

    std::vector<nn::ParamRef> params_;

    void build_params();
    Tensor forward_trunk(const Tensor& rgb, bool cache);
};

/// Builds a generator, seeding every parameter deterministically.
GeneratorNetwork build_generator(const GeneratorConfig& config, std::uint64_t param_seed = 0);

} // namespace surfacenet
