#include "surfacenet/nn.hpp"

#include <cmath>
#include <cstring>

#include "surfacenet/error.hpp"

namespace surfacenet {
namespace nn {

namespace {

// im2col over a strip of output rows [row_begin, row_end).
// col is (in_ch*k*k) x (strip_rows * out_w), column index = (oy-row_begin)*out_w + ox.
void im2col_strip(const Tensor& x, int kernel, int stride, int pad, int dilation, int out_w,
                  int row_begin, int row_end, std::vector<double>& col) {
    const int strip = row_end - row_begin;
    const std::size_t cols = static_cast<std::size_t>(strip) * out_w;
    col.assign(static_cast<std::size_t>(x.c) * kernel * kernel * cols, 0.0);

    for (int ci = 0; ci < x.c; ++ci) {
        const double* src = x.channel(ci);
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                double* dst =
                    col.data() + (static_cast<std::size_t>((ci * kernel + ky) * kernel + kx)) * cols;
                for (int oy = row_begin; oy < row_end; ++oy) {
                    const int iy = oy * stride - pad + ky * dilation;
                    double* row_dst = dst + static_cast<std::size_t>(oy - row_begin) * out_w;
                    if (iy < 0 || iy >= x.h) continue;
                    const double* src_row = src + static_cast<std::size_t>(iy) * x.w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx * dilation;
                        if (ix >= 0 && ix < x.w) row_dst[ox] = src_row[ix];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col_strip: scatter-add columns back into the image.
void col2im_strip(const std::vector<double>& col, int kernel, int stride, int pad, int dilation,
                  int out_w, int row_begin, int row_end, Tensor& x) {
    const int strip = row_end - row_begin;
    const std::size_t cols = static_cast<std::size_t>(strip) * out_w;

    for (int ci = 0; ci < x.c; ++ci) {
        double* dst = x.channel(ci);
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const double* src =
                    col.data() + (static_cast<std::size_t>((ci * kernel + ky) * kernel + kx)) * cols;
                for (int oy = row_begin; oy < row_end; ++oy) {
                    const int iy = oy * stride - pad + ky * dilation;
                    if (iy < 0 || iy >= x.h) continue;
                    const double* src_row = src + static_cast<std::size_t>(oy - row_begin) * out_w;
                    double* dst_row = dst + static_cast<std::size_t>(iy) * x.w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx * dilation;
                        if (ix >= 0 && ix < x.w) dst_row[ix] += src_row[ox];
                    }
                }
            }
        }
    }
}

// Strip height that keeps the im2col workspace near 32 MB.
int strip_rows(int col_rows, int out_w, int out_h) {
    const std::size_t budget = 32ull << 20;
    const std::size_t per_row = static_cast<std::size_t>(col_rows) * out_w * sizeof(double);
    int rows = static_cast<int>(std::max<std::size_t>(1, budget / std::max<std::size_t>(per_row, 1)));
    return std::min(rows, out_h);
}

void he_init(std::vector<double>& weight, int fan_in, Rng& rng) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (double& w : weight) w = stddev * rng.normal();
}

} // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, int dilation)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      dilation_(dilation),
      weight_(static_cast<std::size_t>(out_ch) * in_ch * kernel * kernel, 0.0),
      bias_(out_ch, 0.0), dweight_(weight_.size(), 0.0), dbias_(out_ch, 0.0) {}

void Conv2d::init(Rng& rng) {
    he_init(weight_, in_ch_ * kernel_ * kernel_, rng);
    std::fill(bias_.begin(), bias_.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x, bool cache) {
    if (x.c != in_ch_) {
        throw ValidationError("conv: expected " + std::to_string(in_ch_) + " channels, got " +
                              std::to_string(x.c));
    }
    const int oh = out_height(x.h);
    const int ow = out_width(x.w);
    if (oh <= 0 || ow <= 0) throw ValidationError("conv: input too small for kernel");

    Tensor y(out_ch_, oh, ow);
    const int col_rows = in_ch_ * kernel_ * kernel_;
    std::vector<double> col;
    const int strip = strip_rows(col_rows, ow, oh);
    for (int row = 0; row < oh; row += strip) {
        const int row_end = std::min(row + strip, oh);
        im2col_strip(x, kernel_, stride_, pad_, dilation_, ow, row, row_end, col);
        const int n = (row_end - row) * ow;
        // y_strip = W * col, written into the right offset per channel.
        std::vector<double> out(static_cast<std::size_t>(out_ch_) * n);
        gemm(weight_.data(), col.data(), out.data(), out_ch_, col_rows, n);
        for (int co = 0; co < out_ch_; ++co) {
            double* dst = y.channel(co) + static_cast<std::size_t>(row) * ow;
            const double* src = out.data() + static_cast<std::size_t>(co) * n;
            for (int i = 0; i < n; ++i) dst[i] = src[i] + bias_[co];
        }
    }
    if (cache) cached_input_ = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, bool accumulate) {
    const Tensor& x = cached_input_;
    const int oh = grad_out.h;
    const int ow = grad_out.w;
    const int col_rows = in_ch_ * kernel_ * kernel_;

    Tensor grad_in(x.c, x.h, x.w);
    std::vector<double> col, dcol;
    const int strip = strip_rows(col_rows, ow, oh);
    for (int row = 0; row < oh; row += strip) {
        const int row_end = std::min(row + strip, oh);
        const int n = (row_end - row) * ow;

        // Gather the strip of output gradients into a dense matrix.
        std::vector<double> dy(static_cast<std::size_t>(out_ch_) * n);
        for (int co = 0; co < out_ch_; ++co) {
            const double* src = grad_out.channel(co) + static_cast<std::size_t>(row) * ow;
            std::memcpy(dy.data() + static_cast<std::size_t>(co) * n, src, n * sizeof(double));
        }

        if (accumulate) {
            im2col_strip(x, kernel_, stride_, pad_, dilation_, ow, row, row_end, col);
            gemm_tb_acc(dy.data(), col.data(), dweight_.data(), out_ch_, n, col_rows);
            for (int co = 0; co < out_ch_; ++co) {
                double s = 0.0;
                const double* src = dy.data() + static_cast<std::size_t>(co) * n;
                for (int i = 0; i < n; ++i) s += src[i];
                dbias_[co] += s;
            }
        }

        dcol.assign(static_cast<std::size_t>(col_rows) * n, 0.0);
        gemm_ta(weight_.data(), dy.data(), dcol.data(), col_rows, out_ch_, n);
        col2im_strip(dcol, kernel_, stride_, pad_, dilation_, ow, row, row_end, grad_in);
    }
    return grad_in;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    out.push_back({prefix + ".bias", &bias_, &dbias_});
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      weight_(static_cast<std::size_t>(in_ch) * out_ch * kernel * kernel, 0.0),
      bias_(out_ch, 0.0), dweight_(weight_.size(), 0.0), dbias_(out_ch, 0.0) {}

void ConvTranspose2d::init(Rng& rng) {
    he_init(weight_, in_ch_ * kernel_ * kernel_, rng);
    std::fill(bias_.begin(), bias_.end(), 0.0);
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool cache) {
    if (x.c != in_ch_) {
        throw ValidationError("tconv: expected " + std::to_string(in_ch_) + " channels, got " +
                              std::to_string(x.c));
    }
    const int oh = out_height(x.h);
    const int ow = out_height(x.w);
    Tensor y(out_ch_, oh, ow);

    // col = W^T * X, scattered into the upsampled grid. The scatter is the
    // adjoint of im2col with the same (kernel, stride, pad) and "output"
    // positions equal to the input grid.
    const int col_rows = out_ch_ * kernel_ * kernel_;
    const int n = x.h * x.w;
    std::vector<double> col(static_cast<std::size_t>(col_rows) * n);
    gemm_ta(weight_.data(), x.v.data(), col.data(), col_rows, in_ch_, n);

    Tensor scatter_target(out_ch_, oh, ow);
    col2im_strip(col, kernel_, stride_, pad_, 1, x.w, 0, x.h, scatter_target);
    for (int co = 0; co < out_ch_; ++co) {
        const double* src = scatter_target.channel(co);
        double* dst = y.channel(co);
        const std::size_t plane = static_cast<std::size_t>(oh) * ow;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] + bias_[co];
    }
    if (cache) cached_input_ = x;
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out, bool accumulate) {
    const Tensor& x = cached_input_;
    const int col_rows = out_ch_ * kernel_ * kernel_;
    const int n = x.h * x.w;

    // dcol = im2col(dY) evaluated at the input grid positions.
    std::vector<double> dcol;
    im2col_strip(grad_out, kernel_, stride_, pad_, 1, x.w, 0, x.h, dcol);

    Tensor grad_in(in_ch_, x.h, x.w);
    gemm(weight_.data(), dcol.data(), grad_in.v.data(), in_ch_, col_rows, n);

    if (accumulate) {
        gemm_tb_acc(x.v.data(), dcol.data(), dweight_.data(), in_ch_, n, col_rows);
        for (int co = 0; co < out_ch_; ++co) {
            const double* src = grad_out.channel(co);
            const std::size_t plane = static_cast<std::size_t>(grad_out.h) * grad_out.w;
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += src[i];
            dbias_[co] += s;
        }
    }
    return grad_in;
}

void ConvTranspose2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    out.push_back({prefix + ".bias", &bias_, &dbias_});
}

// -------------------------------------------------------------- GroupNorm

GroupNorm::GroupNorm(int channels, int groups) : channels_(channels), groups_(groups) {
    if (channels % groups != 0) {
        throw ConfigError("group norm: " + std::to_string(channels) + " channels not divisible by " +
                          std::to_string(groups) + " groups");
    }
    gamma_.assign(channels, 1.0);
    beta_.assign(channels, 0.0);
    dgamma_.assign(channels, 0.0);
    dbeta_.assign(channels, 0.0);
}

void GroupNorm::init(Rng&) {
    std::fill(gamma_.begin(), gamma_.end(), 1.0);
    std::fill(beta_.begin(), beta_.end(), 0.0);
}

Tensor GroupNorm::forward(const Tensor& x, bool cache) {
    constexpr double kEps = 1e-5;
    const int per_group = channels_ / groups_;
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    const std::size_t group_size = per_group * plane;

    Tensor norm(x.c, x.h, x.w);
    std::vector<double> invstd(groups_);
    for (int g = 0; g < groups_; ++g) {
        const double* src = x.channel(g * per_group);
        double mean = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) mean += src[i];
        mean /= static_cast<double>(group_size);
        double var = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) {
            const double d = src[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(group_size);
        const double is = 1.0 / std::sqrt(var + kEps);
        invstd[g] = is;
        double* dst = norm.channel(g * per_group);
        for (std::size_t i = 0; i < group_size; ++i) dst[i] = (src[i] - mean) * is;
    }

    Tensor y(x.c, x.h, x.w);
    for (int c = 0; c < x.c; ++c) {
        const double* src = norm.channel(c);
        double* dst = y.channel(c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = gamma_[c] * src[i] + beta_[c];
    }
    if (cache) {
        cached_norm_ = std::move(norm);
        cached_invstd_ = std::move(invstd);
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& grad_out, bool accumulate) {
    const int per_group = channels_ / groups_;
    const std::size_t plane = static_cast<std::size_t>(grad_out.h) * grad_out.w;
    const std::size_t group_size = per_group * plane;

    Tensor grad_in(grad_out.c, grad_out.h, grad_out.w);
    for (int g = 0; g < groups_; ++g) {
        // t = dy * gamma per element; dx = invstd * (t - mean(t) - xhat * mean(t*xhat))
        double sum_t = 0.0;
        double sum_tx = 0.0;
        for (int cc = 0; cc < per_group; ++cc) {
            const int c = g * per_group + cc;
            const double* dy = grad_out.channel(c);
            const double* xh = cached_norm_.channel(c);
            for (std::size_t i = 0; i < plane; ++i) {
                const double t = dy[i] * gamma_[c];
                sum_t += t;
                sum_tx += t * xh[i];
            }
        }
        const double mean_t = sum_t / static_cast<double>(group_size);
        const double mean_tx = sum_tx / static_cast<double>(group_size);
        for (int cc = 0; cc < per_group; ++cc) {
            const int c = g * per_group + cc;
            const double* dy = grad_out.channel(c);
            const double* xh = cached_norm_.channel(c);
            double* dx = grad_in.channel(c);
            for (std::size_t i = 0; i < plane; ++i) {
                const double t = dy[i] * gamma_[c];
                dx[i] = cached_invstd_[g] * (t - mean_t - xh[i] * mean_tx);
            }
        }
    }

    if (accumulate) {
        for (int c = 0; c < channels_; ++c) {
            const double* dy = grad_out.channel(c);
            const double* xh = cached_norm_.channel(c);
            double sg = 0.0, sb = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                sg += dy[i] * xh[i];
                sb += dy[i];
            }
            dgamma_[c] += sg;
            dbeta_[c] += sb;
        }
    }
    return grad_in;
}

void GroupNorm::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &dgamma_});
    out.push_back({prefix + ".beta", &beta_, &dbeta_});
}

// ------------------------------------------------------------ activations

Tensor LeakyReLU::forward(const Tensor& x, bool cache) {
    Tensor y(x.c, x.h, x.w);
    if (cache) {
        mask_.assign(x.size(), 0);
        c_ = x.c;
        h_ = x.h;
        w_ = x.w;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool pos = x.v[i] > 0.0;
        y.v[i] = pos ? x.v[i] : slope_ * x.v[i];
        if (cache) mask_[i] = pos;
    }
    return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) {
    Tensor g(c_, h_, w_);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.v[i] = mask_[i] ? grad_out.v[i] : slope_ * grad_out.v[i];
    }
    return g;
}

Tensor Sigmoid::forward(const Tensor& x, bool cache) {
    Tensor y(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = 1.0 / (1.0 + std::exp(-x.v[i]));
    if (cache) cached_output_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
    Tensor g(cached_output_.c, cached_output_.h, cached_output_.w);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = cached_output_.v[i];
        g.v[i] = grad_out.v[i] * y * (1.0 - y);
    }
    return g;
}

// ---------------------------------------------------------- shape helpers

Tensor global_avg_pool(const Tensor& x) {
    Tensor y(x.c, 1, 1);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int c = 0; c < x.c; ++c) {
        const double* src = x.channel(c);
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += src[i];
        y.v[c] = s / static_cast<double>(plane);
    }
    return y;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, int h, int w) {
    Tensor g(grad_out.c, h, w);
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int c = 0; c < grad_out.c; ++c) {
        const double v = grad_out.v[c] * inv;
        double* dst = g.channel(c);
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = v;
    }
    return g;
}

Tensor broadcast_spatial(const Tensor& x, int h, int w) {
    Tensor y(x.c, h, w);
    for (int c = 0; c < x.c; ++c) {
        const double v = x.v[c];
        double* dst = y.channel(c);
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = v;
    }
    return y;
}

Tensor broadcast_spatial_backward(const Tensor& grad_out) {
    Tensor g(grad_out.c, 1, 1);
    const std::size_t plane = static_cast<std::size_t>(grad_out.h) * grad_out.w;
    for (int c = 0; c < grad_out.c; ++c) {
        const double* src = grad_out.channel(c);
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += src[i];
        g.v[c] = s;
    }
    return g;
}

Tensor area_downsample(const Tensor& x, int factor) {
    if (factor == 1) return x;
    if (x.h % factor != 0 || x.w % factor != 0) {
        throw ValidationError("area downsample: dimensions not divisible by factor " +
                              std::to_string(factor));
    }
    Tensor y(x.c, x.h / factor, x.w / factor);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int c = 0; c < x.c; ++c) {
        for (int oy = 0; oy < y.h; ++oy) {
            for (int ox = 0; ox < y.w; ++ox) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        s += x.at(c, oy * factor + dy, ox * factor + dx);
                    }
                }
                y.at(c, oy, ox) = s * inv;
            }
        }
    }
    return y;
}

Tensor area_downsample_backward(const Tensor& grad_out, int factor) {
    if (factor == 1) return grad_out;
    Tensor g(grad_out.c, grad_out.h * factor, grad_out.w * factor);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int c = 0; c < grad_out.c; ++c) {
        for (int oy = 0; oy < grad_out.h; ++oy) {
            for (int ox = 0; ox < grad_out.w; ++ox) {
                const double v = grad_out.at(c, oy, ox) * inv;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        g.at(c, oy * factor + dy, ox * factor + dx) = v;
                    }
                }
            }
        }
    }
    return g;
}

namespace {

struct LerpTap {
    int i0, i1;
    double w1; // weight of i1; i0 takes 1 - w1
};

LerpTap bilinear_tap(int out_index, int factor, int in_size) {
    const double src = (out_index + 0.5) / factor - 0.5;
    double floor_src = std::floor(src);
    int i0 = static_cast<int>(floor_src);
    double w1 = src - floor_src;
    int i1 = i0 + 1;
    if (i0 < 0) {
        i0 = 0;
        i1 = 0;
        w1 = 0.0;
    }
    if (i1 >= in_size) {
        i1 = in_size - 1;
        if (i0 >= in_size) i0 = in_size - 1;
    }
    return {i0, i1, w1};
}

} // namespace

Tensor bilinear_upsample(const Tensor& x, int factor) {
    if (factor == 1) return x;
    Tensor y(x.c, x.h * factor, x.w * factor);
    for (int oy = 0; oy < y.h; ++oy) {
        const LerpTap ty = bilinear_tap(oy, factor, x.h);
        for (int ox = 0; ox < y.w; ++ox) {
            const LerpTap tx = bilinear_tap(ox, factor, x.w);
            for (int c = 0; c < x.c; ++c) {
                const double top =
                    x.at(c, ty.i0, tx.i0) * (1.0 - tx.w1) + x.at(c, ty.i0, tx.i1) * tx.w1;
                const double bot =
                    x.at(c, ty.i1, tx.i0) * (1.0 - tx.w1) + x.at(c, ty.i1, tx.i1) * tx.w1;
                y.at(c, oy, ox) = top * (1.0 - ty.w1) + bot * ty.w1;
            }
        }
    }
    return y;
}

Tensor bilinear_upsample_backward(const Tensor& grad_out, int factor) {
    if (factor == 1) return grad_out;
    Tensor g(grad_out.c, grad_out.h / factor, grad_out.w / factor);
    for (int oy = 0; oy < grad_out.h; ++oy) {
        const LerpTap ty = bilinear_tap(oy, factor, g.h);
        for (int ox = 0; ox < grad_out.w; ++ox) {
            const LerpTap tx = bilinear_tap(ox, factor, g.w);
            for (int c = 0; c < grad_out.c; ++c) {
                const double v = grad_out.at(c, oy, ox);
                g.at(c, ty.i0, tx.i0) += v * (1.0 - ty.w1) * (1.0 - tx.w1);
                g.at(c, ty.i0, tx.i1) += v * (1.0 - ty.w1) * tx.w1;
                g.at(c, ty.i1, tx.i0) += v * ty.w1 * (1.0 - tx.w1);
                g.at(c, ty.i1, tx.i1) += v * ty.w1 * tx.w1;
            }
        }
    }
    return g;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.h != b.h || a.w != b.w) throw ValidationError("concat: spatial sizes differ");
    Tensor y(a.c + b.c, a.h, a.w);
    std::memcpy(y.v.data(), a.v.data(), a.size() * sizeof(double));
    std::memcpy(y.v.data() + a.size(), b.v.data(), b.size() * sizeof(double));
    return y;
}

void split_channels(const Tensor& grad, int c_a, Tensor& grad_a, Tensor& grad_b) {
    grad_a = Tensor(c_a, grad.h, grad.w);
    grad_b = Tensor(grad.c - c_a, grad.h, grad.w);
    std::memcpy(grad_a.v.data(), grad.v.data(), grad_a.size() * sizeof(double));
    std::memcpy(grad_b.v.data(), grad.v.data() + grad_a.size(), grad_b.size() * sizeof(double));
}

// ------------------------------------------------------------------- Adam

AdamOptimizer::AdamOptimizer(const std::vector<ParamRef>& params, double beta1, double beta2,
                             double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p.value->size(), 0.0);
        v_.emplace_back(p.value->size(), 0.0);
    }
}

void AdamOptimizer::step(const std::vector<ParamRef>& params, double learning_rate) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<double>& value = *params[i].value;
        std::vector<double>& grad = *params[i].grad;
        std::vector<double>& m = m_[i];
        std::vector<double>& v = v_[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad[j] * grad[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            value[j] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon_);
        }
    }
}

void AdamOptimizer::zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

std::uint64_t parameter_hash(const std::vector<ParamRef>& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto mix = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& p : params) {
        mix(p.value->data(), p.value->size() * sizeof(double));
    }
    return h;
}

std::size_t parameter_count(const std::vector<ParamRef>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value->size();
    return n;
}

} // namespace nn
} // namespace surfacenet
