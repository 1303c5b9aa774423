#include "surfacenet/discriminator.hpp"

#include <cstring>

#include "surfacenet/error.hpp"

namespace surfacenet {

namespace {

constexpr std::array<MapKind, 4> kDiscriminatorOrder = {MapKind::Normal, MapKind::Diffuse,
                                                        MapKind::Roughness, MapKind::Specular};

} // namespace

std::vector<ConvSpec> DiscriminatorConfig::default_layers(int width) {
    return {
        {width, 4, 2, 1},     // 256 -> 128
        {width * 2, 4, 2, 1}, // 128 -> 64
        {width * 3, 4, 2, 1}, // 64  -> 32
        {width * 4, 4, 2, 1}, // 32  -> 16
        {width * 4, 3, 1, 1}, // 16  -> 16
        {1, 3, 1, 0},         // 16  -> 14
    };
}

DiscriminatorConfig DiscriminatorConfig::desk() {
    DiscriminatorConfig cfg;
    cfg.layers = {{24, 4, 2, 1}, {32, 4, 2, 1}, {48, 4, 2, 1},
                  {64, 4, 2, 1}, {64, 3, 1, 1}, {1, 3, 1, 0}};
    return cfg;
}

DiscriminatorConfig DiscriminatorConfig::paper() {
    DiscriminatorConfig cfg;
    cfg.layers = default_layers(64);
    return cfg;
}

DiscriminatorConfig DiscriminatorConfig::tiny() {
    DiscriminatorConfig cfg;
    cfg.layers = {{4, 4, 2, 1}, {6, 4, 2, 1}, {8, 4, 2, 1},
                  {8, 4, 2, 1}, {8, 3, 1, 1}, {1, 3, 1, 0}};
    return cfg;
}

int DiscriminatorConfig::score_size(int input_size) const {
    int s = input_size;
    for (const auto& layer : layers) {
        s = (s + 2 * layer.pad - layer.kernel) / layer.stride + 1;
    }
    return s;
}

std::pair<int, int> DiscriminatorConfig::receptive_field() const {
    int rf = 1;
    int jump = 1;
    for (const auto& layer : layers) {
        rf += (layer.kernel - 1) * jump;
        jump *= layer.stride;
    }
    return {rf, jump};
}

void DiscriminatorConfig::validate() const {
    if (input_channels <= 0) throw ConfigError("discriminator: input_channels must be positive");
    if (layers.size() != 6) {
        throw ConfigError("discriminator: exactly 6 convolutional layers required, got " +
                          std::to_string(layers.size()));
    }
    for (const auto& layer : layers) {
        if (layer.out_channels <= 0 || layer.kernel <= 0 || layer.stride <= 0 || layer.pad < 0) {
            throw ConfigError("discriminator: malformed layer spec");
        }
    }
    if (layers.back().out_channels != 1) {
        throw ConfigError("discriminator: final layer must emit a 1-channel score map");
    }
    const int score = score_size(256);
    if (score != 14) {
        throw ConfigError("discriminator: layer arithmetic must map 256 to a 14x14 score map; "
                          "this configuration computes " +
                          std::to_string(score) + "x" + std::to_string(score));
    }
}

DiscriminatorNetwork::DiscriminatorNetwork(const DiscriminatorConfig& config,
                                           std::uint64_t param_seed)
    : config_(config) {
    config_.validate();

    int ch = config_.input_channels;
    for (const auto& spec : config_.layers) {
        convs_.emplace_back(ch, spec.out_channels, spec.kernel, spec.stride, spec.pad);
        relus_.emplace_back(0.2);
        ch = spec.out_channels;
    }

    for (std::size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].collect("layer" + std::to_string(i + 1) + ".conv", params_);
    }

    Rng rng(param_seed);
    for (auto& conv : convs_) conv.init(rng);
}

Tensor DiscriminatorNetwork::forward(const Tensor& maps, bool cache) {
    if (maps.c != config_.input_channels) {
        throw ValidationError("discriminator: expected " + std::to_string(config_.input_channels) +
                              " channels, got " + std::to_string(maps.c));
    }
    if (config_.score_size(std::min(maps.h, maps.w)) < 1) {
        throw ValidationError("discriminator: input " + std::to_string(maps.h) + "x" +
                              std::to_string(maps.w) + " is too small for the layer stack");
    }

    Tensor x = maps;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        x = convs_[i].forward(x, cache);
        if (i + 1 < convs_.size()) x = relus_[i].forward(x, cache);
    }
    if (!config_.patch) {
        pre_pool_h_ = x.h;
        pre_pool_w_ = x.w;
        x = nn::global_avg_pool(x);
    }
    return sigmoid_.forward(x, cache);
}

Tensor DiscriminatorNetwork::backward(const Tensor& grad_scores, bool accumulate) {
    Tensor d = sigmoid_.backward(grad_scores);
    if (!config_.patch) d = nn::global_avg_pool_backward(d, pre_pool_h_, pre_pool_w_);
    for (std::size_t i = convs_.size(); i-- > 0;) {
        if (i + 1 < convs_.size()) d = relus_[i].backward(d);
        d = convs_[i].backward(d, accumulate);
    }
    return d;
}

Image DiscriminatorNetwork::patch_scores(const MaterialMaps& maps) {
    return tensor_to_image(forward(discriminator_input(maps), /*cache=*/false));
}

double DiscriminatorNetwork::discriminate(const MaterialMaps& maps) {
    return mean_score(forward(discriminator_input(maps), /*cache=*/false));
}

Tensor discriminator_input(const MaterialMaps& maps) {
    const int h = maps.height();
    const int w = maps.width();
    Tensor out(10, h, w);
    double* dst = out.v.data();
    for (MapKind kind : kDiscriminatorOrder) {
        const Tensor t = image_to_tensor(maps.map(kind));
        std::memcpy(dst, t.v.data(), t.size() * sizeof(double));
        dst += t.size();
    }
    return out;
}

Tensor discriminator_input(const std::array<Tensor, 4>& heads) {
    const Tensor& first = heads[0];
    Tensor out(10, first.h, first.w);
    double* dst = out.v.data();
    for (MapKind kind : kDiscriminatorOrder) {
        const Tensor& t = heads[static_cast<std::size_t>(kind)];
        std::memcpy(dst, t.v.data(), t.size() * sizeof(double));
        dst += t.size();
    }
    return out;
}

std::array<Tensor, 4> split_discriminator_grad(const Tensor& grad) {
    std::array<Tensor, 4> out;
    const double* src = grad.v.data();
    for (MapKind kind : kDiscriminatorOrder) {
        Tensor t(channel_count(kind), grad.h, grad.w);
        std::memcpy(t.v.data(), src, t.size() * sizeof(double));
        src += t.size();
        out[static_cast<std::size_t>(kind)] = std::move(t);
    }
    return out;
}

double mean_score(const Tensor& scores) {
    double s = 0.0;
    for (double v : scores.v) s += v;
    return s / static_cast<double>(scores.size());
}

} // namespace surfacenet
