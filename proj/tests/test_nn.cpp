#include <doctest.h>

#include "gradcheck.hpp"
#include "surfacenet/error.hpp"
#include "surfacenet/nn.hpp"
#include "test_util.hpp"

using namespace surfacenet;
using namespace surfacenet::testing;

TEST_CASE("tensor/image round trip preserves layout") {
    Rng rng(1);
    const Image img = random_image(5, 7, 3, rng);
    const Tensor t = image_to_tensor(img);
    CHECK(t.c == 3);
    CHECK(t.h == 5);
    CHECK(t.w == 7);
    CHECK(t.at(2, 4, 6) == img.at(4, 6, 2));
    const Image back = tensor_to_image(t);
    CHECK(back.data() == img.data());
}

TEST_CASE("conv2d output shapes follow the stride arithmetic") {
    nn::Conv2d conv(3, 8, 3, 2, 1);
    CHECK(conv.out_height(64) == 32);
    nn::Conv2d dilated(3, 8, 3, 1, 2, 2);
    CHECK(dilated.out_height(32) == 32);
    nn::Conv2d valid(3, 8, 3, 1, 0);
    CHECK(valid.out_height(16) == 14);
}

TEST_CASE("conv2d matches a direct convolution on a small case") {
    Rng rng(3);
    nn::Conv2d conv(2, 3, 3, 1, 1);
    conv.init(rng);
    std::vector<nn::ParamRef> params;
    conv.collect("conv", params);
    const Tensor x = random_tensor(2, 6, 5, rng, -1.0, 1.0);
    Tensor xm = x;
    const Tensor y = conv.forward(xm, false);
    REQUIRE(y.c == 3);
    REQUIRE(y.h == 6);
    REQUIRE(y.w == 5);

    // Direct evaluation of one arbitrary output element.
    const auto& w = *params[0].value; // [out][in*3*3]
    const auto& bias = *params[1].value;
    const int co = 1, oy = 2, ox = 3;
    double expected = bias[co];
    for (int ci = 0; ci < 2; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy - 1 + ky;
                const int ix = ox - 1 + kx;
                if (iy < 0 || iy >= 6 || ix < 0 || ix >= 5) continue;
                expected += w[((co * 2 + ci) * 3 + ky) * 3 + kx] * x.at(ci, iy, ix);
            }
        }
    }
    CHECK(y.at(co, oy, ox) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("conv2d gradients match finite differences") {
    for (const auto& [stride, pad, dilation] :
         {std::tuple{1, 1, 1}, std::tuple{2, 1, 1}, std::tuple{1, 2, 2}}) {
        Rng rng(17);
        nn::Conv2d conv(3, 4, 3, stride, pad, dilation);
        conv.init(rng);
        std::vector<nn::ParamRef> params;
        conv.collect("conv", params);
        Tensor x = random_tensor(3, 8, 8, rng, -1.0, 1.0);

        const Tensor y0 = conv.forward(x);
        const ProjectionLoss proj(y0);
        const Tensor input_grad = conv.backward(proj.grad());

        const auto loss = [&] { return proj.value(conv.forward(x, false)); };
        check_param_grads(params, loss);
        check_input_grad(x, input_grad, loss);
    }
}

TEST_CASE("conv2d backward with accumulate=false leaves parameter grads untouched") {
    Rng rng(5);
    nn::Conv2d conv(2, 2, 3, 1, 1);
    conv.init(rng);
    std::vector<nn::ParamRef> params;
    conv.collect("conv", params);
    const Tensor x = random_tensor(2, 6, 6, rng);
    const Tensor y = conv.forward(x);
    conv.backward(ProjectionLoss(y).grad(), /*accumulate=*/false);
    for (const auto& p : params) {
        for (double g : *p.grad) CHECK(g == 0.0);
    }
}

TEST_CASE("transposed conv doubles the resolution and matches finite differences") {
    Rng rng(23);
    nn::ConvTranspose2d tconv(3, 2, 4, 2, 1);
    tconv.init(rng);
    CHECK(tconv.out_height(8) == 16);

    std::vector<nn::ParamRef> params;
    tconv.collect("tconv", params);
    Tensor x = random_tensor(3, 5, 6, rng, -1.0, 1.0);
    const Tensor y0 = tconv.forward(x);
    REQUIRE(y0.h == 10);
    REQUIRE(y0.w == 12);

    const ProjectionLoss proj(y0);
    const Tensor input_grad = tconv.backward(proj.grad());
    const auto loss = [&] { return proj.value(tconv.forward(x, false)); };
    check_param_grads(params, loss);
    check_input_grad(x, input_grad, loss);
}

TEST_CASE("group norm normalizes per group and matches finite differences") {
    Rng rng(31);
    nn::GroupNorm norm(6, 2);
    std::vector<nn::ParamRef> params;
    norm.collect("norm", params);
    Tensor x = random_tensor(6, 5, 5, rng, -2.0, 2.0);

    const Tensor y0 = norm.forward(x);
    // Each 3-channel group is standardized before the affine transform.
    for (int g = 0; g < 2; ++g) {
        double mean = 0.0, var = 0.0;
        for (int c = g * 3; c < (g + 1) * 3; ++c) {
            for (int i = 0; i < 25; ++i) mean += y0.channel(c)[i];
        }
        mean /= 75.0;
        for (int c = g * 3; c < (g + 1) * 3; ++c) {
            for (int i = 0; i < 25; ++i) {
                var += (y0.channel(c)[i] - mean) * (y0.channel(c)[i] - mean);
            }
        }
        var /= 75.0;
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }

    // Perturb gamma/beta so the affine path is exercised too.
    (*params[0].value)[1] = 1.3;
    (*params[1].value)[4] = -0.2;
    const Tensor y1 = norm.forward(x);
    const ProjectionLoss proj(y1);
    const Tensor input_grad = norm.backward(proj.grad());
    const auto loss = [&] { return proj.value(norm.forward(x, false)); };
    check_param_grads(params, loss);
    check_input_grad(x, input_grad, loss);
}

TEST_CASE("group norm rejects indivisible channel counts") {
    CHECK_THROWS_AS(nn::GroupNorm(10, 4), ConfigError);
}

TEST_CASE("activations match finite differences") {
    Rng rng(37);
    Tensor x = random_tensor(2, 4, 4, rng, -1.0, 1.0);
    // Keep values away from the ReLU kink.
    for (double& v : x.v) {
        if (std::abs(v) < 0.05) v = 0.1;
    }

    SUBCASE("leaky relu") {
        nn::LeakyReLU relu(0.2);
        const Tensor y0 = relu.forward(x);
        const ProjectionLoss proj(y0);
        const Tensor input_grad = relu.backward(proj.grad());
        const auto loss = [&] { return proj.value(relu.forward(x, false)); };
        check_input_grad(x, input_grad, loss);
    }
    SUBCASE("sigmoid") {
        nn::Sigmoid sigmoid;
        const Tensor y0 = sigmoid.forward(x);
        for (double v : y0.v) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        const ProjectionLoss proj(y0);
        const Tensor input_grad = sigmoid.backward(proj.grad());
        const auto loss = [&] { return proj.value(sigmoid.forward(x, false)); };
        check_input_grad(x, input_grad, loss);
    }
}

TEST_CASE("pooling, broadcast, and resampling adjoints match finite differences") {
    Rng rng(41);
    Tensor x = random_tensor(3, 8, 8, rng, -1.0, 1.0);

    SUBCASE("global average pool") {
        Tensor y0 = nn::global_avg_pool(x);
        REQUIRE(y0.h == 1);
        const ProjectionLoss proj(y0);
        const Tensor input_grad = nn::global_avg_pool_backward(proj.grad(), 8, 8);
        const auto loss = [&] { return proj.value(nn::global_avg_pool(x)); };
        check_input_grad(x, input_grad, loss);
    }
    SUBCASE("area downsample") {
        Tensor y0 = nn::area_downsample(x, 2);
        REQUIRE(y0.h == 4);
        const ProjectionLoss proj(y0);
        const Tensor input_grad = nn::area_downsample_backward(proj.grad(), 2);
        const auto loss = [&] { return proj.value(nn::area_downsample(x, 2)); };
        check_input_grad(x, input_grad, loss);
    }
    SUBCASE("bilinear upsample") {
        Tensor y0 = nn::bilinear_upsample(x, 2);
        REQUIRE(y0.h == 16);
        const ProjectionLoss proj(y0);
        const Tensor input_grad = nn::bilinear_upsample_backward(proj.grad(), 2);
        const auto loss = [&] { return proj.value(nn::bilinear_upsample(x, 2)); };
        check_input_grad(x, input_grad, loss);
    }
    SUBCASE("broadcast from 1x1") {
        Tensor pooled = nn::global_avg_pool(x);
        Tensor y0 = nn::broadcast_spatial(pooled, 6, 6);
        const ProjectionLoss proj(y0);
        const Tensor g = nn::broadcast_spatial_backward(proj.grad());
        // Adjoint of a copy is a sum.
        double expected = 0.0;
        for (int i = 0; i < 36; ++i) expected += proj.weights.channel(1)[i];
        CHECK(g.v[1] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("area downsample preserves the mean and rejects bad factors") {
    Rng rng(43);
    const Tensor x = random_tensor(1, 8, 8, rng);
    const Tensor y = nn::area_downsample(x, 4);
    double mx = 0.0, my = 0.0;
    for (double v : x.v) mx += v;
    for (double v : y.v) my += v;
    CHECK(mx / x.size() == doctest::Approx(my / y.size()).epsilon(1e-12));
    Tensor odd = random_tensor(1, 6, 6, rng);
    CHECK_THROWS_AS(nn::area_downsample(odd, 4), ValidationError);
}

TEST_CASE("concat and split are exact inverses") {
    Rng rng(47);
    const Tensor a = random_tensor(2, 4, 4, rng);
    const Tensor b = random_tensor(3, 4, 4, rng);
    const Tensor joined = nn::concat_channels(a, b);
    REQUIRE(joined.c == 5);
    Tensor ga, gb;
    nn::split_channels(joined, 2, ga, gb);
    CHECK(ga.v == a.v);
    CHECK(gb.v == b.v);
}

TEST_CASE("adam minimizes a quadratic") {
    std::vector<double> value = {5.0, -3.0};
    std::vector<double> grad = {0.0, 0.0};
    std::vector<nn::ParamRef> params{{"p", &value, &grad}};
    nn::AdamOptimizer adam(params);
    for (int i = 0; i < 400; ++i) {
        grad[0] = 2.0 * value[0];
        grad[1] = 2.0 * (value[1] + 1.0);
        adam.step(params, 0.05);
    }
    CHECK(std::abs(value[0]) < 0.05);
    CHECK(std::abs(value[1] + 1.0) < 0.05);
    CHECK(adam.step_count() == 400);
}

TEST_CASE("parameter hash reacts to any single value change") {
    Rng rng(53);
    nn::Conv2d conv(2, 2, 3, 1, 1);
    conv.init(rng);
    std::vector<nn::ParamRef> params;
    conv.collect("conv", params);
    const std::uint64_t before = nn::parameter_hash(params);
    (*params[0].value)[3] += 1e-12;
    CHECK(nn::parameter_hash(params) != before);
}
