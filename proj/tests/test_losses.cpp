#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "gradcheck.hpp"
#include "surfacenet/error.hpp"
#include "surfacenet/losses.hpp"
#include "test_util.hpp"

using namespace surfacenet;
using namespace surfacenet::testing;

// ---------------------------------------------------------------------------
// Reference MS-SSIM, written independently of the production code: direct 2D
// convolution, no separability, plain loops. Used as the agreement oracle.
namespace reference {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 9e-4;

struct Buf {
    int h = 0, w = 0;
    std::vector<double> v;
};

std::vector<double> window11() {
    std::vector<double> k(121);
    double sum = 0.0;
    for (int y = 0; y < 11; ++y) {
        for (int x = 0; x < 11; ++x) {
            const double dy = y - 5.0;
            const double dx = x - 5.0;
            k[y * 11 + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            sum += k[y * 11 + x];
        }
    }
    for (double& v : k) v /= sum;
    return k;
}

Buf blur(const Buf& src) {
    static const std::vector<double> kernel = window11();
    Buf out{src.h - 10, src.w - 10, {}};
    out.v.assign(static_cast<std::size_t>(out.h) * out.w, 0.0);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            double s = 0.0;
            for (int ky = 0; ky < 11; ++ky) {
                for (int kx = 0; kx < 11; ++kx) {
                    s += kernel[ky * 11 + kx] * src.v[(y + ky) * src.w + (x + kx)];
                }
            }
            out.v[y * out.w + x] = s;
        }
    }
    return out;
}

Buf half(const Buf& src) {
    Buf out{src.h / 2, src.w / 2, {}};
    out.v.assign(static_cast<std::size_t>(out.h) * out.w, 0.0);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            out.v[y * out.w + x] =
                (src.v[(2 * y) * src.w + 2 * x] + src.v[(2 * y) * src.w + 2 * x + 1] +
                 src.v[(2 * y + 1) * src.w + 2 * x] + src.v[(2 * y + 1) * src.w + 2 * x + 1]) /
                4.0;
        }
    }
    return out;
}

/// Returns (mean cs, mean l*cs) for one scale.
std::pair<double, double> scale_stats(const Buf& a, const Buf& b) {
    Buf aa = a, bb = b, ab = a;
    for (std::size_t i = 0; i < aa.v.size(); ++i) {
        ab.v[i] = a.v[i] * b.v[i];
        aa.v[i] = a.v[i] * a.v[i];
        bb.v[i] = b.v[i] * b.v[i];
    }
    const Buf mu_a = blur(a), mu_b = blur(b), m_aa = blur(aa), m_bb = blur(bb), m_ab = blur(ab);
    double cs_sum = 0.0, full_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
        const double ma = mu_a.v[i], mb = mu_b.v[i];
        const double va = m_aa.v[i] - ma * ma;
        const double vb = m_bb.v[i] - mb * mb;
        const double cov = m_ab.v[i] - ma * mb;
        const double cs = (2.0 * cov + kC2) / (va + vb + kC2);
        const double lum = (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
        cs_sum += cs;
        full_sum += lum * cs;
    }
    const auto n = static_cast<double>(mu_a.v.size());
    return {cs_sum / n, full_sum / n};
}

double msssim(Buf a, Buf b) {
    const double base_weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    int scales = 1;
    while (scales < 5 && (std::min(a.h, a.w) >> scales) >= 11) ++scales;
    double wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += base_weights[s];

    double result = 1.0;
    for (int s = 0; s < scales; ++s) {
        if (s > 0) {
            a = half(a);
            b = half(b);
        }
        const auto [cs, full] = scale_stats(a, b);
        const double m = std::max(s == scales - 1 ? full : cs, 1e-12);
        result *= std::pow(m, base_weights[s] / wsum);
    }
    return result;
}

double msssim_image(const Image& a, const Image& b) {
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        Buf ba{a.height(), a.width(), {}};
        Buf bb{a.height(), a.width(), {}};
        for (int y = 0; y < a.height(); ++y) {
            for (int x = 0; x < a.width(); ++x) {
                ba.v.push_back(a.at(y, x, c));
                bb.v.push_back(b.at(y, x, c));
            }
        }
        total += msssim(ba, bb);
    }
    return total / a.channels();
}

} // namespace reference

TEST_CASE("l1 map loss hand cases") {
    Image a(1, 2, 1), b(1, 2, 1);
    CHECK(l1_map_loss(a, b) == 0.0);

    Image ones(2, 2, 1, 1.0), zeros(2, 2, 1, 0.0);
    CHECK(l1_map_loss(ones, zeros) == 1.0);

    Image p(2, 2, 1), g(2, 2, 1);
    p.at(0, 0, 0) = 0.0;
    p.at(0, 1, 0) = 0.0;
    p.at(1, 0, 0) = 1.0;
    p.at(1, 1, 0) = 1.0;
    g.at(0, 0, 0) = 1.0;
    g.at(0, 1, 0) = 0.0;
    g.at(1, 0, 0) = 1.0;
    g.at(1, 1, 0) = 0.0;
    CHECK(l1_map_loss(p, g) == doctest::Approx(0.5));

    Image wrong(3, 3, 1);
    CHECK_THROWS_AS(l1_map_loss(p, wrong), ValidationError);
}

TEST_CASE("ms-ssim scale count follows the resolution") {
    CHECK(ms_ssim_scale_count(176, 176) == 5);
    CHECK(ms_ssim_scale_count(64, 64) == 3);
    CHECK(ms_ssim_scale_count(32, 32) == 2);
    CHECK(ms_ssim_scale_count(16, 16) == 1);
    CHECK_THROWS_AS(ms_ssim_scale_count(10, 64), ValidationError);
}

TEST_CASE("ms-ssim self-similarity is exactly one") {
    Rng rng(1);
    const Image a = random_image(64, 64, 3, rng);
    CHECK(ms_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ms-ssim is symmetric") {
    Rng rng(2);
    const Image a = random_image(64, 64, 1, rng);
    const Image b = random_image(64, 64, 1, rng);
    CHECK(ms_ssim(a, b) == doctest::Approx(ms_ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("ms-ssim of constant black vs white matches the reference oracle") {
    const Image black(64, 64, 1, 0.0);
    const Image white(64, 64, 1, 1.0);
    const double ours = ms_ssim(black, white);
    const double ref = reference::msssim_image(black, white);
    CHECK(std::abs(ours - ref) <= 1e-4);
    CHECK(ours < 0.05); // strongly dissimilar
}

TEST_CASE("ms-ssim agrees with the reference oracle on random pairs") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(1000 + seed);
        const Image a = random_image(64, 64, 1, rng);
        const Image b = random_image(64, 64, 1, rng);
        const double ours = ms_ssim(a, b);
        const double ref = reference::msssim_image(a, b);
        INFO("seed " << seed << " ours=" << ours << " ref=" << ref);
        CHECK(std::abs(ours - ref) <= 1e-4);
    }
}

TEST_CASE("ms-ssim agrees with the oracle on smooth correlated pairs") {
    // Smooth fields exercise the luminance and structure terms away from
    // the noise regime.
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Image a(64, 64, 1), b(64, 64, 1);
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                const double base =
                    0.5 + 0.4 * std::sin(0.2 * x + static_cast<double>(seed)) *
                              std::cos(0.15 * y);
                a.at(y, x, 0) = base;
                b.at(y, x, 0) = 0.9 * base + 0.05;
            }
        }
        const double ours = ms_ssim(a, b);
        const double ref = reference::msssim_image(a, b);
        CHECK(std::abs(ours - ref) <= 1e-4);
        CHECK(ours > 0.5);
    }
}

TEST_CASE("ms-ssim gradient matches finite differences") {
    Rng rng(7);
    for (int res : {32, 64}) {
        Tensor a = random_tensor(1, res, res, rng);
        const Tensor b = random_tensor(1, res, res, rng);
        Tensor grad(1, res, res);
        ms_ssim(a, b, &grad, 1.0);

        const auto loss = [&] { return ms_ssim(a, b); };
        check_input_grad(a, grad, loss, 1e-5, 1e-4, 32, 11 + res);
    }
}

TEST_CASE("supervised loss is zero iff maps match, and respects toggles") {
    Rng rng(9);
    const MaterialMaps gt = random_maps(32, rng);
    LossWeights weights;

    SUBCASE("pred == gt gives zero") {
        const SupervisedLoss loss = supervised_loss(gt, gt, weights);
        CHECK(loss.value == doctest::Approx(0.0).epsilon(1e-12));
        for (double v : loss.msssim) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("beta = 0 reduces to the L1 sum") {
        MaterialMaps pred = gt;
        for (double& v : pred.diffuse.data()) v = std::clamp(v + 0.1, 0.0, 1.0);
        weights.beta = 0.0;
        const SupervisedLoss loss = supervised_loss(pred, gt, weights);
        double l1_sum = 0.0;
        for (MapKind kind : kMapKinds) l1_sum += l1_map_loss(pred.map(kind), gt.map(kind));
        CHECK(loss.value == doctest::Approx(l1_sum).epsilon(1e-12));
    }
    SUBCASE("perturbing one kind leaves the others' terms at zero") {
        MaterialMaps pred = gt;
        for (double& v : pred.roughness.data()) v = std::clamp(v + 0.2, 0.0, 1.0);
        const SupervisedLoss loss = supervised_loss(pred, gt, weights);
        CHECK(loss.l1[static_cast<std::size_t>(MapKind::Diffuse)] == 0.0);
        CHECK(loss.l1[static_cast<std::size_t>(MapKind::Normal)] == 0.0);
        CHECK(loss.l1[static_cast<std::size_t>(MapKind::Specular)] == 0.0);
        CHECK(loss.l1[static_cast<std::size_t>(MapKind::Roughness)] > 0.0);
        CHECK(loss.msssim[static_cast<std::size_t>(MapKind::Diffuse)] == doctest::Approx(1.0));
    }
}

TEST_CASE("supervised loss gradient matches finite differences") {
    Rng rng(10);
    std::array<Tensor, 4> pred, gt;
    for (MapKind kind : kMapKinds) {
        const auto k = static_cast<std::size_t>(kind);
        pred[k] = random_tensor(channel_count(kind), 32, 32, rng, 0.05, 0.95);
        gt[k] = random_tensor(channel_count(kind), 32, 32, rng, 0.05, 0.95);
    }
    LossWeights weights;
    std::array<Tensor, 4> grads;
    for (std::size_t k = 0; k < 4; ++k) grads[k] = Tensor(pred[k].c, 32, 32);
    supervised_loss(pred, gt, weights, &grads, 1.0);

    Rng pick(11);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto loss = [&] { return supervised_loss(pred, gt, weights).value; };
        for (int s = 0; s < 10; ++s) {
            const auto i = static_cast<std::size_t>(pick.uniform_int(pred[k].size()));
            const double numeric = central_difference(loss, pred[k].v[i], 1e-5);
            INFO("kind " << k << " index " << i);
            CHECK(grad_close(grads[k].v[i], numeric, 1e-4));
        }
    }
}

TEST_CASE("adversarial loss closed forms") {
    CHECK(discriminator_loss(0.5, 0.5) ==
          doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-6));
    CHECK(discriminator_loss(0.9, 0.1) == doctest::Approx(0.21072).epsilon(1e-4));
    CHECK(discriminator_loss(1.0 - 1e-9, 1e-9) == doctest::Approx(0.0).epsilon(1e-6));

    CHECK(generator_adv_loss(0.5) == doctest::Approx(std::numbers::ln2).epsilon(1e-6));
    CHECK(generator_adv_loss(1.0 - 1e-9) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(generator_adv_loss(0.3) > generator_adv_loss(0.6));

    // The minimax sign structure: a better discriminator lowers its loss.
    CHECK(discriminator_loss(0.9, 0.1) < discriminator_loss(0.6, 0.4));
    // Logs are stabilized at the endpoints.
    CHECK(std::isfinite(discriminator_loss(0.0, 1.0)));
    CHECK(std::isfinite(generator_adv_loss(0.0)));
}

TEST_CASE("adversarial loss gradients match finite differences") {
    for (double d : {0.2, 0.5, 0.8}) {
        double v = d;
        const auto real_loss = [&] { return discriminator_loss(v, 0.4); };
        CHECK(grad_close(discriminator_loss_grad_real(d),
                         central_difference(real_loss, v, 1e-7), 1e-5));
        const auto fake_loss = [&] { return discriminator_loss(0.6, v); };
        CHECK(grad_close(discriminator_loss_grad_fake(d),
                         central_difference(fake_loss, v, 1e-7), 1e-5));
        const auto gen_loss = [&] { return generator_adv_loss(v); };
        CHECK(grad_close(generator_adv_loss_grad(d), central_difference(gen_loss, v, 1e-7),
                         1e-5));
    }
}

TEST_CASE("total generator loss weighting and toggles") {
    LossWeights weights;
    weights.alpha = 0.2;
    CHECK(total_generator_loss(1.0, 0.5, weights) == doctest::Approx(1.1).epsilon(1e-12));

    weights.alpha = 0.0;
    CHECK(total_generator_loss(0.7, 123.0, weights) == doctest::Approx(0.7));

    weights.alpha = 0.2;
    weights.use_adversarial = false;
    CHECK(total_generator_loss(0.7, 123.0, weights) == doctest::Approx(0.7));
}

TEST_CASE("loss weight validation") {
    LossWeights weights;
    weights.alpha = -0.1;
    CHECK_THROWS_AS(weights.validate(), ConfigError);

    weights = LossWeights{};
    weights.use_l1 = false;
    weights.use_msssim = false;
    weights.use_adversarial = false;
    CHECK_THROWS_AS(weights.validate(), ConfigError);
}

TEST_CASE("loss report log line carries the step, stream, and terms") {
    LossReport report;
    report.has_supervised = true;
    report.has_adversarial = true;
    report.supervised = 0.5;
    report.total = 0.6;
    const std::string line = report.log_line(42, "synthetic");
    CHECK(line.find("step=42") != std::string::npos);
    CHECK(line.find("stream=synthetic") != std::string::npos);
    CHECK(line.find("supervised=0.5") != std::string::npos);
    CHECK(line.find("total=0.6") != std::string::npos);
    CHECK(line.find("l1_diffuse=") != std::string::npos);
}
