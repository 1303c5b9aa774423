#include <doctest.h>

#include "gradcheck.hpp"
#include "surfacenet/error.hpp"
#include "surfacenet/generator.hpp"
#include "surfacenet/losses.hpp"
#include "test_util.hpp"

using namespace surfacenet;
using namespace surfacenet::testing;

TEST_CASE("generator config validation") {
    GeneratorConfig cfg = GeneratorConfig::desk();
    CHECK_NOTHROW(cfg.validate());

    SUBCASE("non-positive dilation") {
        cfg.aspp_dilations = {1, 0};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("empty heads") {
        cfg.heads.clear();
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("duplicate head") {
        cfg.heads.push_back({MapKind::Diffuse, 3});
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("skips without decoder") {
        cfg.learned_upsampling = false;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("bad input multiple") {
        cfg.input_multiple = 12;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
}

TEST_CASE("fully-convolutional shape contract across resolutions") {
    GeneratorNetwork net(GeneratorConfig::desk(), 11);
    Rng rng(2);
    for (int res : {64, 128}) {
        const Tensor x = random_tensor(3, res, res, rng);
        const auto maps = net.forward(x, false);
        for (MapKind kind : kMapKinds) {
            const Tensor& m = maps[static_cast<std::size_t>(kind)];
            CHECK(m.c == channel_count(kind));
            CHECK(m.h == res);
            CHECK(m.w == res);
        }
    }
}

TEST_CASE("head outputs stay in [0,1] for wild inputs") {
    GeneratorNetwork net(GeneratorConfig::tiny(), 3);
    Rng rng(4);
    Tensor x = random_tensor(3, 16, 16, rng, -50.0, 50.0);
    const auto maps = net.forward(x, false);
    for (const auto& m : maps) {
        for (double v : m.v) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("same parameter seed gives identical networks") {
    GeneratorNetwork a(GeneratorConfig::desk(), 123);
    GeneratorNetwork b(GeneratorConfig::desk(), 123);
    GeneratorNetwork c(GeneratorConfig::desk(), 124);
    CHECK(nn::parameter_hash(a.params()) == nn::parameter_hash(b.params()));
    CHECK(nn::parameter_hash(a.params()) != nn::parameter_hash(c.params()));

    // Forward is deterministic.
    Rng rng(5);
    const Tensor x = random_tensor(3, 32, 32, rng);
    const auto m1 = a.forward(x, false);
    const auto m2 = a.forward(x, false);
    for (std::size_t k = 0; k < 4; ++k) CHECK(m1[k].v == m2[k].v);
}

TEST_CASE("desk generator stays under the parameter budget") {
    GeneratorNetwork net(GeneratorConfig::desk(), 1);
    CHECK(net.parameter_count() <= 2'000'000);
    CHECK(net.parameter_count() > 0);
}

TEST_CASE("forward_maps rejects resolutions that are not multiples of 32") {
    GeneratorNetwork net(GeneratorConfig::desk(), 1);
    const Image bad(100, 100, 3, 0.5);
    CHECK_THROWS_WITH_AS(net.forward_maps(bad),
                         doctest::Contains("multiple of 32"), ValidationError);
}

TEST_CASE("forward_maps returns validated maps") {
    GeneratorNetwork net(GeneratorConfig::desk(), 7);
    Rng rng(8);
    const Image input = random_image(64, 64, 3, rng);
    const MaterialMaps maps = net.forward_maps(input);
    CHECK(maps.height() == 64);
    CHECK(validate_maps(maps).ok);
}

TEST_CASE("paper-scale trunk produces 256 feature maps at input resolution") {
    GeneratorConfig cfg = GeneratorConfig::paper();
    REQUIRE(cfg.trunk_channels == 256);
    GeneratorNetwork net(cfg, 1);
    Rng rng(9);
    const Tensor x = random_tensor(3, 256, 256, rng);
    const Tensor trunk = net.trunk_features(x);
    CHECK(trunk.c == 256);
    CHECK(trunk.h == 256);
    CHECK(trunk.w == 256);
}

TEST_CASE("zeroing one head changes only that head's output") {
    GeneratorNetwork net(GeneratorConfig::tiny(), 17);
    Rng rng(10);
    const Tensor x = random_tensor(3, 16, 16, rng);
    const auto before = net.forward(x, false);

    for (const auto& p : net.params()) {
        if (p.name.rfind("head.roughness", 0) == 0) {
            std::fill(p.value->begin(), p.value->end(), 0.0);
        }
    }
    const auto after = net.forward(x, false);
    CHECK(before[static_cast<std::size_t>(MapKind::Diffuse)].v ==
          after[static_cast<std::size_t>(MapKind::Diffuse)].v);
    CHECK(before[static_cast<std::size_t>(MapKind::Normal)].v ==
          after[static_cast<std::size_t>(MapKind::Normal)].v);
    CHECK(before[static_cast<std::size_t>(MapKind::Specular)].v ==
          after[static_cast<std::size_t>(MapKind::Specular)].v);
    CHECK(before[static_cast<std::size_t>(MapKind::Roughness)].v !=
          after[static_cast<std::size_t>(MapKind::Roughness)].v);
}

TEST_CASE("aspp keeps spatial size and handles the single-dilation case") {
    Rng rng(12);
    SUBCASE("dilations [1]") {
        Aspp aspp(4, 6, {1});
        aspp.init(rng);
        const Tensor x = random_tensor(4, 9, 9, rng);
        const Tensor y = aspp.forward(x, false);
        CHECK(y.c == 6);
        CHECK(y.h == 9);
        CHECK(y.w == 9);
    }
    SUBCASE("paper dilations at the 32x32 bottleneck") {
        Aspp aspp(8, 16, {1, 6, 12, 18});
        aspp.init(rng);
        const Tensor x = random_tensor(8, 32, 32, rng);
        const Tensor y = aspp.forward(x, false);
        CHECK(y.h == 32);
        CHECK(y.w == 32);
    }
    SUBCASE("zero input stays finite") {
        Aspp aspp(4, 6, {1, 2});
        aspp.init(rng);
        Tensor x(4, 8, 8, 0.0);
        const Tensor y = aspp.forward(x, false);
        for (double v : y.v) CHECK(std::isfinite(v));
    }
}

TEST_CASE("aspp gradients match finite differences") {
    Rng rng(13);
    Aspp aspp(3, 4, {1, 2});
    aspp.init(rng);
    std::vector<nn::ParamRef> params;
    aspp.collect("aspp", params);
    Tensor x = random_tensor(3, 7, 7, rng, -1.0, 1.0);

    const Tensor y0 = aspp.forward(x);
    const ProjectionLoss proj(y0);
    const Tensor input_grad = aspp.backward(proj.grad());
    const auto loss = [&] { return proj.value(aspp.forward(x, false)); };
    check_param_grads(params, loss, 1e-5, 1e-4, 12);
    check_input_grad(x, input_grad, loss, 1e-5, 1e-4);
}

TEST_CASE("residual block gradients match finite differences") {
    Rng rng(14);
    for (int stride : {1, 2}) {
        ResidualBlock block(4, 6, stride);
        block.init(rng);
        std::vector<nn::ParamRef> params;
        block.collect("block", params);
        Tensor x = random_tensor(4, 8, 8, rng, -1.0, 1.0);

        const Tensor y0 = block.forward(x);
        const ProjectionLoss proj(y0);
        const Tensor input_grad = block.backward(proj.grad());
        const auto loss = [&] { return proj.value(block.forward(x, false)); };
        check_param_grads(params, loss, 1e-5, 1e-4, 10);
        check_input_grad(x, input_grad, loss, 1e-5, 1e-4, 24);
    }
}

TEST_CASE("downsample_input examples") {
    SUBCASE("factor 1 is the identity") {
        Rng rng(15);
        const Image img = random_image(8, 8, 3, rng);
        CHECK(downsample_input(img, 1).data() == img.data());
    }
    SUBCASE("constant image keeps its value") {
        const Image img(8, 8, 3, 0.37);
        const Image out = downsample_input(img, 4);
        CHECK(out.height() == 2);
        for (double v : out.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
    }
    SUBCASE("2x2 block averages to 0.5") {
        Image img(2, 2, 1);
        img.at(0, 0, 0) = 0.0;
        img.at(0, 1, 0) = 0.0;
        img.at(1, 0, 0) = 1.0;
        img.at(1, 1, 0) = 1.0;
        const Image out = downsample_input(img, 2);
        CHECK(out.at(0, 0, 0) == doctest::Approx(0.5));
    }
    SUBCASE("invalid factors and shapes") {
        const Image img(6, 6, 3, 0.5);
        CHECK_THROWS_AS(downsample_input(img, 3), ValidationError);
        CHECK_THROWS_AS(downsample_input(img, 4), ValidationError);
    }
}

TEST_CASE("generator gradients on an 8x8 input match finite differences") {
    // The spec's h = 1e-3 / 1e-2 relative-error budget, on the tiny preset.
    GeneratorConfig cfg = GeneratorConfig::tiny();
    GeneratorNetwork net(cfg, 99);
    Rng rng(16);
    Tensor x = random_tensor(3, 8, 8, rng);

    // Targets offset from the initial prediction by +-0.5 keep every
    // |pred - gt| away from the L1 kink during the finite differencing.
    const auto pred0 = net.forward(x, false);
    std::array<Tensor, 4> gt;
    for (MapKind kind : kMapKinds) {
        const auto k = static_cast<std::size_t>(kind);
        gt[k] = pred0[k];
        for (double& v : gt[k].v) v += rng.uniform() < 0.5 ? -0.5 : 0.5;
    }

    const auto loss_value = [&] {
        const auto pred = net.forward(x, false);
        double total = 0.0;
        for (std::size_t k = 0; k < 4; ++k) total += l1_loss(pred[k], gt[k]);
        return total;
    };

    // Analytic gradients.
    const auto pred = net.forward(x);
    std::array<Tensor, 4> grads;
    for (std::size_t k = 0; k < 4; ++k) {
        grads[k] = Tensor(pred[k].c, pred[k].h, pred[k].w);
        l1_loss(pred[k], gt[k], &grads[k], 1.0);
    }
    net.backward(grads);

    // 5% of parameters, h = 1e-3, relative error <= 1e-2 (floored for
    // near-zero gradients).
    Rng pick(21);
    int checked = 0;
    for (const auto& p : net.params()) {
        const std::size_t n = p.value->size();
        const auto samples = std::max<std::size_t>(1, n / 20);
        for (std::size_t s = 0; s < samples; ++s) {
            const auto i = static_cast<std::size_t>(pick.uniform_int(n));
            const double numeric = central_difference(loss_value, (*p.value)[i], 1e-3);
            const double analytic = (*p.grad)[i];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
            INFO("param " << p.name << "[" << i << "] analytic=" << analytic
                          << " numeric=" << numeric);
            CHECK(std::abs(analytic - numeric) / denom <= 1e-2);
            ++checked;
        }
    }
    CHECK(checked > 50);
}
