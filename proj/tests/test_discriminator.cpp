#include <doctest.h>

#include "gradcheck.hpp"
#include "surfacenet/discriminator.hpp"
#include "surfacenet/error.hpp"
#include "test_util.hpp"

using namespace surfacenet;
using namespace surfacenet::testing;

TEST_CASE("discriminator config validation enforces the 6-layer 14x14 contract") {
    DiscriminatorConfig cfg = DiscriminatorConfig::desk();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.layers.size() == 6);

    SUBCASE("five layers rejected") {
        cfg.layers.pop_back();
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("bad arithmetic names the computed size") {
        for (auto& layer : cfg.layers) layer.stride = 1;
        CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("computes"), ConfigError);
    }
    SUBCASE("final layer must be single channel") {
        cfg.layers.back().out_channels = 2;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
}

TEST_CASE("256x256 input reduces to a 14x14 single-channel score map") {
    DiscriminatorNetwork net(DiscriminatorConfig::desk(), 1);
    Rng rng(2);
    const Tensor maps = random_tensor(10, 256, 256, rng);
    const Tensor scores = net.forward(maps, false);
    CHECK(scores.c == 1);
    CHECK(scores.h == 14);
    CHECK(scores.w == 14);
    // Overall spatial reduction close to the quoted factor of 18.
    CHECK(256.0 / 14.0 == doctest::Approx(18.29).epsilon(0.01));
}

TEST_CASE("desk-scale 64x64 input yields at least a 2x2 score map") {
    const DiscriminatorConfig cfg = DiscriminatorConfig::desk();
    CHECK(cfg.score_size(64) >= 2);
    DiscriminatorNetwork net(cfg, 1);
    Rng rng(3);
    const Tensor scores = net.forward(random_tensor(10, 64, 64, rng), false);
    CHECK(scores.h == cfg.score_size(64));
    CHECK(scores.h >= 2);
}

TEST_CASE("patch scores stay in (0,1) and repeat deterministically") {
    DiscriminatorNetwork net(DiscriminatorConfig::desk(), 5);
    Rng rng(6);
    const MaterialMaps maps = random_maps(64, rng);
    const Image a = net.patch_scores(maps);
    const Image b = net.patch_scores(maps);
    CHECK(a.data() == b.data());
    for (double v : a.data()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    MaterialMaps zero(64, 64);
    for (double& v : zero.normal.data()) v = 0.5; // flat-ish, all finite
    const Image z = net.patch_scores(zero);
    for (double v : z.data()) {
        CHECK(std::isfinite(v));
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("wrong channel count raises") {
    DiscriminatorNetwork net(DiscriminatorConfig::desk(), 1);
    Rng rng(7);
    Tensor bad = random_tensor(9, 64, 64, rng);
    CHECK_THROWS_AS(net.forward(bad, false), ValidationError);
}

TEST_CASE("far-corner scores ignore a local perturbation") {
    const DiscriminatorConfig cfg = DiscriminatorConfig::desk();
    const auto [rf, jump] = cfg.receptive_field();

    // Total left padding of the stack in input pixels.
    int pad_total = 0;
    int j = 1;
    for (const auto& layer : cfg.layers) {
        pad_total += layer.pad * j;
        j *= layer.stride;
    }

    const int res = 128;
    DiscriminatorNetwork net(cfg, 9);
    Rng rng(10);
    const Tensor base = random_tensor(10, res, res, rng);
    Tensor perturbed = base;
    for (int c = 0; c < 10; ++c) {
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                perturbed.at(c, y, x) = 1.0 - perturbed.at(c, y, x);
            }
        }
    }

    const Tensor s0 = net.forward(base, false);
    const Tensor s1 = net.forward(perturbed, false);
    REQUIRE(s0.h >= 4);

    // Pick the farthest score whose receptive field starts past the
    // perturbed block, derived from the layer arithmetic.
    const int last = s0.h - 1;
    const int start = last * jump - pad_total;
    REQUIRE(start >= 16);
    CHECK(std::abs(s0.at(0, last, last) - s1.at(0, last, last)) <= 1e-6);
    // Receptive field must cover the perturbation for the nearest score.
    CHECK(std::abs(s0.at(0, 0, 0) - s1.at(0, 0, 0)) > 0.0);
    (void)rf;
}

TEST_CASE("discriminate equals the mean of patch scores") {
    DiscriminatorNetwork net(DiscriminatorConfig::desk(), 11);
    Rng rng(12);
    const MaterialMaps maps = random_maps(64, rng);
    const Image scores = net.patch_scores(maps);
    double mean = 0.0;
    for (double v : scores.data()) mean += v;
    mean /= static_cast<double>(scores.size());
    CHECK(net.discriminate(maps) == doctest::Approx(mean).epsilon(1e-15));
}

TEST_CASE("mean_score of a uniform map is that value and is permutation invariant") {
    Tensor scores(1, 14, 14, 0.37);
    CHECK(mean_score(scores) == doctest::Approx(0.37));

    scores.fill(0.0);
    scores.at(0, 3, 5) = 1.0;
    CHECK(mean_score(scores) == doctest::Approx(1.0 / 196.0).epsilon(1e-12));

    Rng rng(13);
    Tensor shuffled = scores;
    // Swap a few entries; the mean must not move.
    for (int i = 0; i < 32; ++i) {
        const auto a = static_cast<std::size_t>(rng.uniform_int(shuffled.size()));
        const auto b = static_cast<std::size_t>(rng.uniform_int(shuffled.size()));
        std::swap(shuffled.v[a], shuffled.v[b]);
    }
    CHECK(mean_score(shuffled) == doctest::Approx(mean_score(scores)).epsilon(1e-15));
}

TEST_CASE("map concatenation order is normal, diffuse, roughness, specular") {
    MaterialMaps maps(4, 4);
    for (double& v : maps.normal.data()) v = 0.1;
    for (double& v : maps.diffuse.data()) v = 0.2;
    for (double& v : maps.roughness.data()) v = 0.3;
    for (double& v : maps.specular.data()) v = 0.4;
    const Tensor t = discriminator_input(maps);
    REQUIRE(t.c == 10);
    CHECK(t.at(0, 0, 0) == 0.1);
    CHECK(t.at(3, 0, 0) == 0.2);
    CHECK(t.at(6, 0, 0) == 0.3);
    CHECK(t.at(7, 0, 0) == 0.4);

    // split_discriminator_grad is the exact inverse packing.
    const auto split = split_discriminator_grad(t);
    CHECK(split[static_cast<std::size_t>(MapKind::Normal)].v ==
          image_to_tensor(maps.normal).v);
    CHECK(split[static_cast<std::size_t>(MapKind::Roughness)].v ==
          image_to_tensor(maps.roughness).v);
}

TEST_CASE("image-mode discriminator pools to a single score") {
    DiscriminatorConfig cfg = DiscriminatorConfig::desk();
    cfg.patch = false;
    DiscriminatorNetwork net(cfg, 14);
    Rng rng(15);
    const Tensor scores = net.forward(random_tensor(10, 64, 64, rng), false);
    CHECK(scores.c == 1);
    CHECK(scores.h == 1);
    CHECK(scores.w == 1);
}

TEST_CASE("discriminator gradients match finite differences at the smallest valid input") {
    // 48 is the smallest side the 6-layer arithmetic admits (48 -> 1).
    const DiscriminatorConfig cfg = DiscriminatorConfig::tiny();
    REQUIRE(cfg.score_size(48) >= 1);
    DiscriminatorNetwork net(cfg, 16);
    Rng rng(17);
    Tensor x = random_tensor(10, 48, 48, rng);

    const Tensor s0 = net.forward(x);
    const ProjectionLoss proj(s0, 18);
    const Tensor input_grad = net.backward(proj.grad());
    const auto loss = [&] { return proj.value(net.forward(x, false)); };
    check_param_grads(net.params(), loss, 1e-5, 1e-4, 12);
    check_input_grad(x, input_grad, loss, 1e-5, 1e-4, 24);
}
