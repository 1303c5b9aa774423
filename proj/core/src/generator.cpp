#include "surfacenet/generator.hpp"

#include <algorithm>
#include <cmath>

#include "surfacenet/error.hpp"

namespace surfacenet {

namespace {

// At least eight channels per group. Tiny groups degenerate at a 1x1
// bottleneck: a 2-element group normalizes to +-1 with near-singular
// curvature, which destabilizes both training and gradient checks.
int norm_groups(int channels) {
    for (int g : {8, 4, 2}) {
        if (channels % g == 0 && channels / g >= 8) return g;
    }
    return 1;
}

} // namespace

std::vector<HeadSpec> GeneratorConfig::default_heads() {
    std::vector<HeadSpec> heads;
    for (MapKind kind : kMapKinds) heads.push_back({kind, channel_count(kind)});
    return heads;
}

GeneratorConfig GeneratorConfig::desk() { return GeneratorConfig{}; }

GeneratorConfig GeneratorConfig::paper() {
    GeneratorConfig cfg;
    cfg.scale = "paper";
    cfg.stem_channels = 32;
    cfg.encoder_block_counts = {3, 4, 6};
    cfg.encoder_channels = {32, 64, 128};
    cfg.aspp_dilations = {1, 6, 12, 18};
    cfg.aspp_channels = 128;
    cfg.decoder_channels = {128, 96, 64};
    cfg.trunk_channels = 256;
    cfg.head_hidden = 32;
    return cfg;
}

GeneratorConfig GeneratorConfig::tiny() {
    GeneratorConfig cfg;
    cfg.scale = "tiny";
    cfg.stem_channels = 4;
    cfg.encoder_block_counts = {1, 1, 1};
    cfg.encoder_channels = {4, 6, 8};
    cfg.aspp_dilations = {1, 2};
    cfg.aspp_channels = 8;
    cfg.decoder_channels = {8, 6, 6};
    cfg.trunk_channels = 8;
    cfg.head_hidden = 4;
    cfg.input_multiple = 8;
    return cfg;
}

void GeneratorConfig::validate() const {
    if (stem_channels <= 0 || aspp_channels <= 0 || trunk_channels <= 0 || head_hidden <= 0) {
        throw ConfigError("generator: channel counts must be positive");
    }
    if (encoder_block_counts.size() != 3 || encoder_channels.size() != 3) {
        throw ConfigError("generator: encoder needs exactly 3 stages (stride-8 contract)");
    }
    for (int n : encoder_block_counts) {
        if (n < 1) throw ConfigError("generator: encoder stages need at least one block");
    }
    if (aspp_dilations.empty()) throw ConfigError("generator: aspp_dilations must be non-empty");
    for (int d : aspp_dilations) {
        if (d <= 0) throw ConfigError("generator: dilation must be positive, got " +
                                      std::to_string(d));
    }
    if (decoder_channels.size() != 3) {
        throw ConfigError("generator: decoder needs exactly 3 upsampling stages");
    }
    if (heads.empty()) throw ConfigError("generator: heads must be non-empty");
    for (MapKind kind : kMapKinds) {
        int found = 0;
        for (const auto& head : heads) {
            if (head.kind == kind) {
                ++found;
                if (head.channels != channel_count(kind)) {
                    throw ConfigError(std::string("generator: head for ") + to_string(kind) +
                                      " must have " + std::to_string(channel_count(kind)) +
                                      " channels");
                }
            }
        }
        if (found != 1) {
            throw ConfigError(std::string("generator: expected exactly one head for ") +
                              to_string(kind));
        }
    }
    if (input_multiple < 8 || input_multiple % 8 != 0) {
        throw ConfigError("generator: input_multiple must be a positive multiple of 8");
    }
    if (input_skips && !learned_upsampling) {
        throw ConfigError("generator: input skips require the learned decoder");
    }
}

// ---------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(int in_ch, int out_ch, int stride)
    : projected_(in_ch != out_ch || stride != 1),
      conv1_(in_ch, out_ch, 3, stride, 1),
      conv2_(out_ch, out_ch, 3, 1, 1),
      norm1_(out_ch, norm_groups(out_ch)), norm2_(out_ch, norm_groups(out_ch)) {
    if (projected_) shortcut_ = nn::Conv2d(in_ch, out_ch, 1, stride, 0);
}

void ResidualBlock::init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    if (projected_) shortcut_.init(rng);
    norm1_.init(rng);
    norm2_.init(rng);
}

Tensor ResidualBlock::forward(const Tensor& x, bool cache) {
    Tensor branch = relu1_.forward(norm1_.forward(conv1_.forward(x, cache), cache), cache);
    branch = norm2_.forward(conv2_.forward(branch, cache), cache);
    const Tensor residual = projected_ ? shortcut_.forward(x, cache) : x;
    for (std::size_t i = 0; i < branch.size(); ++i) branch.v[i] += residual.v[i];
    return relu_out_.forward(branch, cache);
}

Tensor ResidualBlock::backward(const Tensor& grad_out, bool accumulate) {
    const Tensor d_sum = relu_out_.backward(grad_out);
    Tensor d_branch = conv1_.backward(
        norm1_.backward(relu1_.backward(conv2_.backward(norm2_.backward(d_sum, accumulate),
                                                        accumulate)),
                        accumulate),
        accumulate);
    const Tensor d_res = projected_ ? shortcut_.backward(d_sum, accumulate) : d_sum;
    for (std::size_t i = 0; i < d_branch.size(); ++i) d_branch.v[i] += d_res.v[i];
    return d_branch;
}

void ResidualBlock::collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    conv1_.collect(prefix + ".conv1", out);
    norm1_.collect(prefix + ".norm1", out);
    conv2_.collect(prefix + ".conv2", out);
    norm2_.collect(prefix + ".norm2", out);
    if (projected_) shortcut_.collect(prefix + ".shortcut", out);
}

// ------------------------------------------------------------------- Aspp

Aspp::Aspp(int in_ch, int out_ch, const std::vector<int>& dilations)
    : pool_conv_(in_ch, out_ch, 1), project_(out_ch * static_cast<int>(dilations.size() + 1),
                                             out_ch, 1),
      project_norm_(out_ch, norm_groups(out_ch)) {
    for (int d : dilations) {
        branch_convs_.emplace_back(in_ch, out_ch, 3, 1, d, d);
        branch_norms_.emplace_back(out_ch, norm_groups(out_ch));
        branch_relus_.emplace_back(0.0);
    }
}

void Aspp::init(Rng& rng) {
    for (auto& conv : branch_convs_) conv.init(rng);
    for (auto& norm : branch_norms_) norm.init(rng);
    pool_conv_.init(rng);
    project_.init(rng);
    project_norm_.init(rng);
}

Tensor Aspp::forward(const Tensor& x, bool cache) {
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor merged;
    for (std::size_t i = 0; i < branch_convs_.size(); ++i) {
        Tensor b = branch_relus_[i].forward(
            branch_norms_[i].forward(branch_convs_[i].forward(x, cache), cache), cache);
        merged = (i == 0) ? std::move(b) : nn::concat_channels(merged, b);
    }
    Tensor pooled = pool_relu_.forward(pool_conv_.forward(nn::global_avg_pool(x), cache), cache);
    merged = nn::concat_channels(merged, nn::broadcast_spatial(pooled, x.h, x.w));
    return project_relu_.forward(project_norm_.forward(project_.forward(merged, cache), cache),
                                 cache);
}

Tensor Aspp::backward(const Tensor& grad_out, bool accumulate) {
    Tensor d_merged = project_.backward(
        project_norm_.backward(project_relu_.backward(grad_out), accumulate), accumulate);

    const int out_ch = pool_conv_.out_channels();
    Tensor grad_in;
    for (std::size_t i = 0; i < branch_convs_.size(); ++i) {
        Tensor d_branch(out_ch, d_merged.h, d_merged.w);
        std::copy_n(d_merged.v.data() + static_cast<std::size_t>(i) * d_branch.size(),
                    d_branch.size(), d_branch.v.data());
        Tensor d_in = branch_convs_[i].backward(
            branch_norms_[i].backward(branch_relus_[i].backward(d_branch), accumulate),
            accumulate);
        if (i == 0) {
            grad_in = std::move(d_in);
        } else {
            for (std::size_t j = 0; j < grad_in.size(); ++j) grad_in.v[j] += d_in.v[j];
        }
    }

    Tensor d_pool(out_ch, d_merged.h, d_merged.w);
    std::copy_n(d_merged.v.data() + branch_convs_.size() * d_pool.size(), d_pool.size(),
                d_pool.v.data());
    Tensor d_pooled = pool_conv_.backward(pool_relu_.backward(nn::broadcast_spatial_backward(d_pool)),
                                          accumulate);
    Tensor d_from_pool = nn::global_avg_pool_backward(d_pooled, in_h_, in_w_);
    for (std::size_t j = 0; j < grad_in.size(); ++j) grad_in.v[j] += d_from_pool.v[j];
    return grad_in;
}

void Aspp::collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    for (std::size_t i = 0; i < branch_convs_.size(); ++i) {
        branch_convs_[i].collect(prefix + ".branch" + std::to_string(i) + ".conv", out);
        branch_norms_[i].collect(prefix + ".branch" + std::to_string(i) + ".norm", out);
    }
    pool_conv_.collect(prefix + ".pool.conv", out);
    project_.collect(prefix + ".project", out);
    project_norm_.collect(prefix + ".project_norm", out);
}

// -------------------------------------------------------- downsample_input

Image downsample_input(const Image& image, int factor) {
    if (factor != 1 && factor != 2 && factor != 4) {
        throw ValidationError("downsample_input: factor must be 1, 2 or 4");
    }
    if (image.height() % factor != 0 || image.width() % factor != 0) {
        throw ValidationError("downsample_input: image dimensions must be divisible by " +
                              std::to_string(factor));
    }
    if (factor == 1) return image;
    Image out(image.height() / factor, image.width() / factor, image.channels());
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int c = 0; c < out.channels(); ++c) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        s += image.at(y * factor + dy, x * factor + dx, c);
                    }
                }
                out.at(y, x, c) = s * inv;
            }
        }
    }
    return out;
}

// -------------------------------------------------------- GeneratorNetwork

GeneratorNetwork::GeneratorNetwork(const GeneratorConfig& config, std::uint64_t param_seed)
    : config_(config) {
    config_.validate();

    stem_ = nn::Conv2d(3, config_.stem_channels, 3, 2, 1);
    stem_norm_ = nn::GroupNorm(config_.stem_channels, norm_groups(config_.stem_channels));

    int ch = config_.stem_channels;
    for (std::size_t stage = 0; stage < 3; ++stage) {
        const int out_ch = config_.encoder_channels[stage];
        const int stride = stage == 0 ? 1 : 2;
        for (int block = 0; block < config_.encoder_block_counts[stage]; ++block) {
            encoder_blocks_.emplace_back(ch, out_ch, block == 0 ? stride : 1);
            ch = out_ch;
        }
    }

    aspp_ = Aspp(ch, config_.aspp_channels, config_.aspp_dilations);
    ch = config_.aspp_channels;

    if (config_.learned_upsampling) {
        const int skip_factors[3] = {4, 2, 1};
        for (int stage = 0; stage < 3; ++stage) {
            DecoderStage ds;
            const int out_ch = config_.decoder_channels[stage];
            ds.up = nn::ConvTranspose2d(ch, out_ch, 4, 2, 1);
            ds.up_norm = nn::GroupNorm(out_ch, norm_groups(out_ch));
            ds.skip_factor = skip_factors[stage];
            ds.concat_channels = out_ch + (config_.input_skips ? 3 : 0);
            ds.refine = ResidualBlock(ds.concat_channels, out_ch, 1);
            decoder_.push_back(std::move(ds));
            ch = out_ch;
        }
    }

    trunk_ = nn::Conv2d(ch, config_.trunk_channels, 3, 1, 1);
    trunk_norm_ = nn::GroupNorm(config_.trunk_channels, norm_groups(config_.trunk_channels));

    for (const auto& spec : config_.heads) {
        Head head;
        head.kind = spec.kind;
        head.reduce = nn::Conv2d(config_.trunk_channels, config_.head_hidden, 1);
        head.predict = nn::Conv2d(config_.head_hidden, spec.channels, 3, 1, 1);
        heads_.push_back(std::move(head));
    }

    build_params();

    Rng rng(param_seed);
    stem_.init(rng);
    stem_norm_.init(rng);
    for (auto& block : encoder_blocks_) block.init(rng);
    aspp_.init(rng);
    for (auto& stage : decoder_) {
        stage.up.init(rng);
        stage.up_norm.init(rng);
        stage.refine.init(rng);
    }
    trunk_.init(rng);
    trunk_norm_.init(rng);
    for (auto& head : heads_) {
        head.reduce.init(rng);
        head.predict.init(rng);
    }
}

void GeneratorNetwork::build_params() {
    params_.clear();
    stem_.collect("stem.conv", params_);
    stem_norm_.collect("stem.norm", params_);
    for (std::size_t i = 0; i < encoder_blocks_.size(); ++i) {
        encoder_blocks_[i].collect("encoder.block" + std::to_string(i), params_);
    }
    aspp_.collect("aspp", params_);
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        const std::string prefix = "decoder.stage" + std::to_string(i);
        decoder_[i].up.collect(prefix + ".up", params_);
        decoder_[i].up_norm.collect(prefix + ".up_norm", params_);
        decoder_[i].refine.collect(prefix + ".refine", params_);
    }
    trunk_.collect("trunk.conv", params_);
    trunk_norm_.collect("trunk.norm", params_);
    for (auto& head : heads_) {
        const std::string prefix = std::string("head.") + to_string(head.kind);
        head.reduce.collect(prefix + ".reduce", params_);
        head.predict.collect(prefix + ".predict", params_);
    }
}

Tensor GeneratorNetwork::forward_trunk(const Tensor& rgb, bool cache) {
    if (rgb.c != 3) throw ValidationError("generator: input must have 3 channels");
    if (rgb.h % 8 != 0 || rgb.w % 8 != 0) {
        throw ValidationError("generator: internal stride requires multiples of 8, got " +
                              std::to_string(rgb.h) + "x" + std::to_string(rgb.w));
    }

    Tensor x = stem_relu_.forward(stem_norm_.forward(stem_.forward(rgb, cache), cache), cache);
    for (auto& block : encoder_blocks_) x = block.forward(x, cache);
    x = aspp_.forward(x, cache);

    if (config_.learned_upsampling) {
        for (auto& stage : decoder_) {
            x = stage.up_relu.forward(stage.up_norm.forward(stage.up.forward(x, cache), cache),
                                      cache);
            if (config_.input_skips) {
                x = nn::concat_channels(x, nn::area_downsample(rgb, stage.skip_factor));
            }
            x = stage.refine.forward(x, cache);
        }
    } else {
        x = nn::bilinear_upsample(x, base_upsample_factor_);
    }

    return trunk_relu_.forward(trunk_norm_.forward(trunk_.forward(x, cache), cache), cache);
}

Tensor GeneratorNetwork::trunk_features(const Tensor& rgb) {
    return forward_trunk(rgb, /*cache=*/false);
}

std::array<Tensor, 4> GeneratorNetwork::forward(const Tensor& rgb, bool cache) {
    const Tensor x = forward_trunk(rgb, cache);

    std::array<Tensor, 4> outputs;
    for (auto& head : heads_) {
        Tensor hx = head.relu.forward(head.reduce.forward(x, cache), cache);
        hx = head.sigmoid.forward(head.predict.forward(hx, cache), cache);
        outputs[static_cast<std::size_t>(head.kind)] = std::move(hx);
    }
    return outputs;
}

void GeneratorNetwork::backward(const std::array<Tensor, 4>& head_grads, bool accumulate) {
    Tensor d_trunk_out;
    for (auto& head : heads_) {
        const Tensor& g = head_grads[static_cast<std::size_t>(head.kind)];
        Tensor d = head.predict.backward(head.sigmoid.backward(g), accumulate);
        d = head.reduce.backward(head.relu.backward(d), accumulate);
        if (d_trunk_out.size() == 0) {
            d_trunk_out = std::move(d);
        } else {
            for (std::size_t i = 0; i < d_trunk_out.size(); ++i) d_trunk_out.v[i] += d.v[i];
        }
    }

    Tensor d = trunk_.backward(trunk_norm_.backward(trunk_relu_.backward(d_trunk_out), accumulate),
                               accumulate);

    if (config_.learned_upsampling) {
        for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) {
            d = it->refine.backward(d, accumulate);
            if (config_.input_skips) {
                Tensor d_features, d_skip;
                nn::split_channels(d, it->concat_channels - 3, d_features, d_skip);
                d = std::move(d_features); // input copies carry no trainable path
            }
            d = it->up.backward(it->up_norm.backward(it->up_relu.backward(d), accumulate),
                                accumulate);
        }
    } else {
        d = nn::bilinear_upsample_backward(d, base_upsample_factor_);
    }

    d = aspp_.backward(d, accumulate);
    for (auto it = encoder_blocks_.rbegin(); it != encoder_blocks_.rend(); ++it) {
        d = it->backward(d, accumulate);
    }
    stem_.backward(stem_norm_.backward(stem_relu_.backward(d), accumulate), accumulate);
}

MaterialMaps GeneratorNetwork::forward_maps(const Image& image) {
    if (image.channels() != 3) {
        throw ValidationError("generator: input image must have 3 channels");
    }
    const int multiple = config_.input_multiple;
    if (image.height() % multiple != 0 || image.width() % multiple != 0) {
        throw ValidationError("generator: input resolution " + std::to_string(image.height()) +
                              "x" + std::to_string(image.width()) + " must be a multiple of " +
                              std::to_string(multiple));
    }
    for (double v : image.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("generator: input values must lie in [0,1]");
        }
    }

    const auto outputs = forward(image_to_tensor(image), /*cache=*/false);
    MaterialMaps maps(image.height(), image.width());
    for (MapKind kind : kMapKinds) {
        maps.map(kind) = tensor_to_image(outputs[static_cast<std::size_t>(kind)]);
    }
    return maps;
}

GeneratorNetwork build_generator(const GeneratorConfig& config, std::uint64_t param_seed) {
    return GeneratorNetwork(config, param_seed);
}

} // namespace surfacenet
