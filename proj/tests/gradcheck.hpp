#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <doctest.h>

#include "surfacenet/nn.hpp"
#include "surfacenet/rng.hpp"
#include "surfacenet/tensor.hpp"

namespace surfacenet::testing {

/// Central finite difference of a scalar function wrt one value.
inline double central_difference(const std::function<double()>& f, double& value, double h) {
    const double original = value;
    value = original + h;
    const double fp = f();
    value = original - h;
    const double fm = f();
    value = original;
    return (fp - fm) / (2.0 * h);
}

inline bool grad_close(double analytic, double numeric, double tol) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) <= tol * scale;
}

/// Checks every parameter gradient of `params` against finite differences
/// of `loss` (which must re-run the forward pass). `analytic` must already
/// hold the accumulated gradients for the unperturbed parameters.
inline void check_param_grads(const std::vector<nn::ParamRef>& params,
                              const std::function<double()>& loss, double h = 1e-5,
                              double tol = 1e-5, int max_per_tensor = 24,
                              std::uint64_t seed = 99) {
    Rng rng(seed);
    for (const auto& p : params) {
        const std::size_t n = p.value->size();
        const std::size_t samples = std::min<std::size_t>(n, max_per_tensor);
        for (std::size_t s = 0; s < samples; ++s) {
            const std::size_t i = n <= static_cast<std::size_t>(max_per_tensor)
                                      ? s
                                      : static_cast<std::size_t>(rng.uniform_int(n));
            const double numeric = central_difference(loss, (*p.value)[i], h);
            const double analytic = (*p.grad)[i];
            INFO("param " << p.name << "[" << i << "]: analytic=" << analytic
                          << " numeric=" << numeric);
            CHECK(grad_close(analytic, numeric, tol));
        }
    }
}

/// Same for the gradient wrt an input tensor.
inline void check_input_grad(Tensor& input, const Tensor& analytic,
                             const std::function<double()>& loss, double h = 1e-5,
                             double tol = 1e-5, int max_samples = 48, std::uint64_t seed = 7) {
    Rng rng(seed);
    const std::size_t n = input.size();
    const std::size_t samples = std::min<std::size_t>(n, max_samples);
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t i = n <= static_cast<std::size_t>(max_samples)
                                  ? s
                                  : static_cast<std::size_t>(rng.uniform_int(n));
        const double numeric = central_difference(loss, input.v[i], h);
        INFO("input[" << i << "]: analytic=" << analytic.v[i] << " numeric=" << numeric);
        CHECK(grad_close(analytic.v[i], numeric, tol));
    }
}

/// Fixed random projection used as a scalar test loss over a tensor.
struct ProjectionLoss {
    Tensor weights;
    explicit ProjectionLoss(const Tensor& shape_like, std::uint64_t seed = 5) {
        weights = Tensor(shape_like.c, shape_like.h, shape_like.w);
        Rng rng(seed);
        for (double& w : weights.v) w = rng.uniform(-1.0, 1.0);
    }
    double value(const Tensor& y) const {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += weights.v[i] * y.v[i];
        return s;
    }
    Tensor grad() const { return weights; }
};

} // namespace surfacenet::testing
