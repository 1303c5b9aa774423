#include "surfacenet/losses.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "surfacenet/error.hpp"

namespace surfacenet {

namespace {

constexpr double kLogEps = 1e-8;
constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr std::array<double, 5> kScaleWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

const std::array<double, kWindow>& gaussian_window() {
    static const std::array<double, kWindow> window = [] {
        std::array<double, kWindow> w{};
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - (kWindow - 1) / 2.0;
            w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += w[i];
        }
        for (double& v : w) v /= sum;
        return w;
    }();
    return window;
}

/// Single-channel plane with its own storage; the MS-SSIM pyramid works
/// on these.
struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    Plane() = default;
    Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

/// Valid separable Gaussian filter: output is (h-10) x (w-10).
Plane filter_valid(const Plane& src) {
    const auto& g = gaussian_window();
    const int oh = src.h - kWindow + 1;
    const int ow = src.w - kWindow + 1;
    Plane tmp(src.h, ow); // horizontal pass
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += g[k] * src.at(y, x + k);
            tmp.at(y, x) = s;
        }
    }
    Plane out(oh, ow); // vertical pass
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += g[k] * tmp.at(y + k, x);
            out.at(y, x) = s;
        }
    }
    return out;
}

/// Adjoint of filter_valid: scatters an (h-10) x (w-10) gradient back to h x w.
Plane filter_valid_adjoint(const Plane& grad, int h, int w) {
    const auto& g = gaussian_window();
    Plane tmp(h, grad.w);
    for (int y = 0; y < grad.h; ++y) {
        for (int x = 0; x < grad.w; ++x) {
            const double v = grad.at(y, x);
            for (int k = 0; k < kWindow; ++k) tmp.at(y + k, x) += g[k] * v;
        }
    }
    Plane out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < tmp.w; ++x) {
            const double v = tmp.at(y, x);
            for (int k = 0; k < kWindow; ++k) out.at(y, x + k) += g[k] * v;
        }
    }
    return out;
}

Plane downsample2(const Plane& src) {
    Plane out(src.h / 2, src.w / 2);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            out.at(y, x) = 0.25 * (src.at(2 * y, 2 * x) + src.at(2 * y, 2 * x + 1) +
                                   src.at(2 * y + 1, 2 * x) + src.at(2 * y + 1, 2 * x + 1));
        }
    }
    return out;
}

void downsample2_adjoint_acc(const Plane& grad, Plane& dst) {
    for (int y = 0; y < grad.h; ++y) {
        for (int x = 0; x < grad.w; ++x) {
            const double v = 0.25 * grad.at(y, x);
            dst.at(2 * y, 2 * x) += v;
            dst.at(2 * y, 2 * x + 1) += v;
            dst.at(2 * y + 1, 2 * x) += v;
            dst.at(2 * y + 1, 2 * x + 1) += v;
        }
    }
}

struct ScaleCache {
    Plane x, y;                  // scale inputs
    Plane mu_x, mu_y;            // filtered means
    Plane axx, ayy, axy;         // filtered second moments (before mean subtraction)
    Plane cs, lum;               // component maps (lum only at the last scale)
    double mean = 0.0;           // mean of cs (or lum*cs at the last scale)
};

ScaleCache ssim_scale(const Plane& x, const Plane& y, bool with_luminance) {
    ScaleCache cache;
    cache.x = x;
    cache.y = y;

    Plane xx(x.h, x.w), yy(x.h, x.w), xy(x.h, x.w);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        xx.v[i] = x.v[i] * x.v[i];
        yy.v[i] = y.v[i] * y.v[i];
        xy.v[i] = x.v[i] * y.v[i];
    }
    cache.mu_x = filter_valid(x);
    cache.mu_y = filter_valid(y);
    cache.axx = filter_valid(xx);
    cache.ayy = filter_valid(yy);
    cache.axy = filter_valid(xy);

    const int oh = cache.mu_x.h;
    const int ow = cache.mu_x.w;
    cache.cs = Plane(oh, ow);
    if (with_luminance) cache.lum = Plane(oh, ow);

    double total = 0.0;
    for (int i = 0; i < oh * ow; ++i) {
        const double mx = cache.mu_x.v[i];
        const double my = cache.mu_y.v[i];
        const double sxx = cache.axx.v[i] - mx * mx;
        const double syy = cache.ayy.v[i] - my * my;
        const double sxy = cache.axy.v[i] - mx * my;
        const double cs = (2.0 * sxy + kC2) / (sxx + syy + kC2);
        cache.cs.v[i] = cs;
        if (with_luminance) {
            const double lum = (2.0 * mx * my + kC1) / (mx * mx + my * my + kC1);
            cache.lum.v[i] = lum;
            total += lum * cs;
        } else {
            total += cs;
        }
    }
    cache.mean = total / (oh * ow);
    return cache;
}

/// dL/dx for one scale, given dL/d(mean of the scale's map).
Plane ssim_scale_backward(const ScaleCache& cache, double grad_mean, bool with_luminance) {
    const int oh = cache.mu_x.h;
    const int ow = cache.mu_x.w;
    const double g = grad_mean / (oh * ow);

    Plane f_mu(oh, ow), f_xx(oh, ow), f_xy(oh, ow);
    for (int i = 0; i < oh * ow; ++i) {
        const double mx = cache.mu_x.v[i];
        const double my = cache.mu_y.v[i];
        const double sxx = cache.axx.v[i] - mx * mx;
        const double syy = cache.ayy.v[i] - my * my;
        const double cs = cache.cs.v[i];
        const double denom = sxx + syy + kC2;

        // cs = (2(axy - mx my) + C2) / ((axx - mx^2) + (ayy - my^2) + C2)
        const double dcs_daxy = 2.0 / denom;
        const double dcs_daxx = -cs / denom;
        const double dcs_dmu = 2.0 * (mx * cs - my) / denom;

        if (with_luminance) {
            const double lum = cache.lum.v[i];
            const double denom_l = mx * mx + my * my + kC1;
            const double dl_dmu = 2.0 * (my - lum * mx) / denom_l;
            // map = lum * cs
            f_mu.v[i] = g * (cs * dl_dmu + lum * dcs_dmu);
            f_xx.v[i] = g * lum * dcs_daxx;
            f_xy.v[i] = g * lum * dcs_daxy;
        } else {
            f_mu.v[i] = g * dcs_dmu;
            f_xx.v[i] = g * dcs_daxx;
            f_xy.v[i] = g * dcs_daxy;
        }
    }

    const Plane a_mu = filter_valid_adjoint(f_mu, cache.x.h, cache.x.w);
    const Plane a_xx = filter_valid_adjoint(f_xx, cache.x.h, cache.x.w);
    const Plane a_xy = filter_valid_adjoint(f_xy, cache.x.h, cache.x.w);

    Plane dx(cache.x.h, cache.x.w);
    for (std::size_t i = 0; i < dx.v.size(); ++i) {
        dx.v[i] = a_mu.v[i] + 2.0 * cache.x.v[i] * a_xx.v[i] + cache.y.v[i] * a_xy.v[i];
    }
    return dx;
}

/// MS-SSIM over one channel plane; accumulates scale * d/da into grad_a
/// when provided.
double ms_ssim_plane(const Plane& a, const Plane& b, Plane* grad_a, double scale) {
    const int scales = ms_ssim_scale_count(a.h, a.w);

    std::vector<double> weights(kScaleWeights.begin(), kScaleWeights.begin() + scales);
    double weight_sum = 0.0;
    for (double w : weights) weight_sum += w;
    for (double& w : weights) w /= weight_sum;

    std::vector<ScaleCache> caches;
    caches.reserve(scales);
    Plane x = a, y = b;
    for (int s = 0; s < scales; ++s) {
        if (s > 0) {
            x = downsample2(x);
            y = downsample2(y);
        }
        caches.push_back(ssim_scale(x, y, s == scales - 1));
    }

    // Geometric combination of clamped scale means. A clamped (non-positive)
    // mean contributes the epsilon floor and a zero gradient.
    constexpr double kFloor = 1e-12;
    double log_sum = 0.0;
    std::vector<bool> clamped(scales, false);
    for (int s = 0; s < scales; ++s) {
        double m = caches[s].mean;
        if (m < kFloor) {
            m = kFloor;
            clamped[s] = true;
        }
        log_sum += weights[s] * std::log(m);
    }
    const double value = std::exp(log_sum);

    if (grad_a) {
        // d(value)/d(mean_s) = value * w_s / mean_s; chain each scale's input
        // gradient back down the average-pool pyramid.
        Plane acc; // dL/dx at the current scale, walking top-down
        for (int s = scales - 1; s >= 0; --s) {
            const double dmean = clamped[s]
                                     ? 0.0
                                     : scale * value * weights[s] / std::max(caches[s].mean, kFloor);
            Plane dx = ssim_scale_backward(caches[s], dmean, s == scales - 1);
            if (acc.v.empty()) {
                acc = std::move(dx);
            } else {
                Plane widened(caches[s].x.h, caches[s].x.w);
                downsample2_adjoint_acc(acc, widened);
                for (std::size_t i = 0; i < widened.v.size(); ++i) widened.v[i] += dx.v[i];
                acc = std::move(widened);
            }
        }
        for (std::size_t i = 0; i < acc.v.size(); ++i) grad_a->v[i] += acc.v[i];
    }
    return value;
}

Plane tensor_channel_plane(const Tensor& t, int c) {
    Plane p(t.h, t.w);
    std::copy_n(t.channel(c), p.v.size(), p.v.begin());
    return p;
}

} // namespace

void LossWeights::validate() const {
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("loss weights must be non-negative");
    if (!use_l1 && !use_msssim && !use_adversarial) {
        throw ConfigError("at least one loss term must be enabled");
    }
}

std::string LossReport::log_line(std::int64_t step, const std::string& stream) const {
    std::ostringstream out;
    out << "step=" << step << " stream=" << stream;
    if (has_supervised) {
        for (MapKind kind : kMapKinds) {
            const auto i = static_cast<std::size_t>(kind);
            out << " l1_" << to_string(kind) << "=" << l1[i];
            out << " msssim_" << to_string(kind) << "=" << msssim[i];
        }
        out << " supervised=" << supervised;
    }
    if (has_adversarial) {
        out << " adv_g=" << adv_g << " d_real=" << adv_d_real << " d_fake=" << adv_d_fake
            << " disc_loss=" << disc_loss;
    }
    out << " total=" << total;
    return out.str();
}

double l1_map_loss(const Image& pred, const Image& gt) {
    if (!pred.same_shape(gt)) throw ValidationError("l1: map shapes differ");
    if (pred.size() == 0) throw ValidationError("l1: empty maps");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred.data()[i] - gt.data()[i]);
    return s / static_cast<double>(pred.size());
}

double l1_loss(const Tensor& pred, const Tensor& gt, Tensor* grad, double scale) {
    if (!pred.same_shape(gt)) throw ValidationError("l1: tensor shapes differ");
    double s = 0.0;
    const double inv = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.v[i] - gt.v[i];
        s += std::abs(d);
        if (grad) grad->v[i] += scale * inv * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
    return s * inv;
}

int ms_ssim_scale_count(int height, int width) {
    const int side = std::min(height, width);
    if (side < kWindow) {
        throw ValidationError("ms-ssim: resolution " + std::to_string(height) + "x" +
                              std::to_string(width) + " is below the 11-pixel window");
    }
    int scales = 1;
    while (scales < 5 && (side >> scales) >= kWindow) ++scales;
    return scales;
}

double ms_ssim(const Tensor& a, const Tensor& b, Tensor* grad_a, double scale) {
    if (!a.same_shape(b)) throw ValidationError("ms-ssim: tensor shapes differ");
    double total = 0.0;
    const double per_channel = scale / a.c;
    for (int c = 0; c < a.c; ++c) {
        const Plane pa = tensor_channel_plane(a, c);
        const Plane pb = tensor_channel_plane(b, c);
        if (grad_a) {
            Plane g(a.h, a.w);
            total += ms_ssim_plane(pa, pb, &g, per_channel);
            double* dst = grad_a->channel(c);
            for (std::size_t i = 0; i < g.v.size(); ++i) dst[i] += g.v[i];
        } else {
            total += ms_ssim_plane(pa, pb, nullptr, 0.0);
        }
    }
    return total / a.c;
}

double ms_ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ValidationError("ms-ssim: image shapes differ");
    return ms_ssim(image_to_tensor(a), image_to_tensor(b));
}

SupervisedLoss supervised_loss(const std::array<Tensor, 4>& pred, const std::array<Tensor, 4>& gt,
                               const LossWeights& weights, std::array<Tensor, 4>* grads,
                               double grad_scale) {
    weights.validate();
    SupervisedLoss out;
    for (MapKind kind : kMapKinds) {
        const auto i = static_cast<std::size_t>(kind);
        Tensor* grad = grads ? &(*grads)[i] : nullptr;
        if (weights.use_l1) {
            out.l1[i] = l1_loss(pred[i], gt[i], grad, grad_scale);
            out.value += out.l1[i];
        }
        if (weights.use_msssim) {
            // beta * (1 - MS-SSIM): the similarity enters with a negative sign.
            out.msssim[i] = ms_ssim(pred[i], gt[i], grad, -weights.beta * grad_scale);
            out.value += weights.beta * (1.0 - out.msssim[i]);
        }
    }
    return out;
}

SupervisedLoss supervised_loss(const MaterialMaps& pred, const MaterialMaps& gt,
                               const LossWeights& weights) {
    std::array<Tensor, 4> p, g;
    for (MapKind kind : kMapKinds) {
        const auto i = static_cast<std::size_t>(kind);
        p[i] = image_to_tensor(pred.map(kind));
        g[i] = image_to_tensor(gt.map(kind));
    }
    return supervised_loss(p, g, weights);
}

double discriminator_loss(double d_real, double d_fake) {
    return -(std::log(d_real + kLogEps) + std::log(1.0 - d_fake + kLogEps));
}

double discriminator_loss_grad_real(double d_real) { return -1.0 / (d_real + kLogEps); }

double discriminator_loss_grad_fake(double d_fake) { return 1.0 / (1.0 - d_fake + kLogEps); }

double generator_adv_loss(double d_fake) { return -std::log(d_fake + kLogEps); }

double generator_adv_loss_grad(double d_fake) { return -1.0 / (d_fake + kLogEps); }

double total_generator_loss(double supervised, double adv_g, const LossWeights& weights) {
    return supervised + (weights.use_adversarial ? weights.alpha * adv_g : 0.0);
}

} // namespace surfacenet
