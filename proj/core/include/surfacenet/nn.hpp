#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surfacenet/rng.hpp"
#include "surfacenet/tensor.hpp"

namespace surfacenet {
namespace nn {

/// Named view of one parameter vector and its gradient accumulator.
struct ParamRef {
    std::string name;
    std::vector<double>* value;
    std::vector<double>* grad;
};

/// Layers process one sample at a time and cache whatever their backward
/// pass needs. Batches are looped outside; parameter gradients accumulate
/// across calls until zero_grads().

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int kernel, int stride = 1, int pad = 0, int dilation = 1);

    void init(Rng& rng);
    Tensor forward(const Tensor& x, bool cache = true);
    /// Returns grad wrt input; accumulates dW/db unless accumulate=false.
    Tensor backward(const Tensor& grad_out, bool accumulate = true);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

    int out_height(int h) const { return (h + 2 * pad_ - dilation_ * (kernel_ - 1) - 1) / stride_ + 1; }
    int out_width(int w) const { return out_height(w); }
    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }

private:
    int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0, dilation_ = 1;
    std::vector<double> weight_, bias_, dweight_, dbias_;
    Tensor cached_input_;
};

/// Transposed convolution; spatial size grows as (h-1)*stride - 2*pad + kernel.
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad);

    void init(Rng& rng);
    Tensor forward(const Tensor& x, bool cache = true);
    Tensor backward(const Tensor& grad_out, bool accumulate = true);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

    int out_height(int h) const { return (h - 1) * stride_ - 2 * pad_ + kernel_; }
    int out_channels() const { return out_ch_; }

private:
    int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 2, pad_ = 1;
    std::vector<double> weight_, bias_, dweight_, dbias_;
    Tensor cached_input_;
};

/// Batch-independent normalization over channel groups, so evaluation
/// behaves identically at any batch size.
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(int channels, int groups);

    void init(Rng& rng);
    Tensor forward(const Tensor& x, bool cache = true);
    Tensor backward(const Tensor& grad_out, bool accumulate = true);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

private:
    int channels_ = 0, groups_ = 0;
    std::vector<double> gamma_, beta_, dgamma_, dbeta_;
    Tensor cached_norm_; // normalized activations
    std::vector<double> cached_invstd_;
};

class LeakyReLU {
public:
    explicit LeakyReLU(double slope = 0.0) : slope_(slope) {}
    Tensor forward(const Tensor& x, bool cache = true);
    Tensor backward(const Tensor& grad_out);

private:
    double slope_;
    std::vector<std::uint8_t> mask_;
    int c_ = 0, h_ = 0, w_ = 0;
};

class Sigmoid {
public:
    Tensor forward(const Tensor& x, bool cache = true);
    Tensor backward(const Tensor& grad_out);

private:
    Tensor cached_output_;
};

/// (C,H,W) -> (C,1,1) mean per channel.
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& grad_out, int h, int w);

/// (C,1,1) -> (C,H,W) copy per channel.
Tensor broadcast_spatial(const Tensor& x, int h, int w);
Tensor broadcast_spatial_backward(const Tensor& grad_out);

/// Block-mean downsampling by an integer factor (dimensions must divide).
Tensor area_downsample(const Tensor& x, int factor);
Tensor area_downsample_backward(const Tensor& grad_out, int factor);

/// Bilinear upsampling by an integer factor (half-pixel centers).
Tensor bilinear_upsample(const Tensor& x, int factor);
Tensor bilinear_upsample_backward(const Tensor& grad_out, int factor);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& grad, int c_a, Tensor& grad_a, Tensor& grad_b);

/// Adam with decoupled per-parameter moment buffers, step count included.
class AdamOptimizer {
public:
    AdamOptimizer() = default;
    explicit AdamOptimizer(const std::vector<ParamRef>& params, double beta1 = 0.9,
                           double beta2 = 0.999, double epsilon = 1e-8);

    void step(const std::vector<ParamRef>& params, double learning_rate);
    void zero_grads(const std::vector<ParamRef>& params);

    std::int64_t step_count() const { return step_count_; }
    std::vector<double>& moment1(std::size_t i) { return m_[i]; }
    std::vector<double>& moment2(std::size_t i) { return v_[i]; }
    std::size_t slots() const { return m_.size(); }
    void set_step_count(std::int64_t t) { step_count_ = t; }

private:
    double beta1_ = 0.9, beta2_ = 0.999, epsilon_ = 1e-8;
    std::int64_t step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// FNV-1a over the raw bytes of every parameter, for mutation checks.
std::uint64_t parameter_hash(const std::vector<ParamRef>& params);

std::size_t parameter_count(const std::vector<ParamRef>& params);

} // namespace nn
} // namespace surfacenet
