#pragma once

#include <cassert>
#include <vector>

#include "surfacenet/image.hpp"

namespace surfacenet {

/// Channel-major (CHW) activation tensor used by the network layers.
/// One tensor holds one sample; batches are processed sample by sample
/// so gradient accumulation order stays fixed.
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

    std::size_t size() const { return v.size(); }

    double& at(int ci, int y, int x) {
        assert(ci >= 0 && ci < c && y >= 0 && y < h && x >= 0 && x < w);
        return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
    }
    double at(int ci, int y, int x) const {
        assert(ci >= 0 && ci < c && y >= 0 && y < h && x >= 0 && x < w);
        return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
    }

    double* channel(int ci) { return v.data() + static_cast<std::size_t>(ci) * h * w; }
    const double* channel(int ci) const { return v.data() + static_cast<std::size_t>(ci) * h * w; }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    void fill(double value) { std::fill(v.begin(), v.end(), value); }
};

/// HWC image -> CHW tensor.
Tensor image_to_tensor(const Image& image);

/// CHW tensor -> HWC image.
Image tensor_to_image(const Tensor& tensor);

/// Row-major GEMM helpers over raw buffers, dispatched to Eigen.
/// c[m×n] = a[m×k] · b[k×n]; the _acc variant accumulates into c.
void gemm(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n);
/// c[m×n] = aᵀ[m×k] · b[k×n] where a is stored k×m.
void gemm_ta(const double* a, const double* b, double* c, int m, int k, int n);
/// c[m×n] += a[m×k] · bᵀ[k×n] where b is stored n×k.
void gemm_tb_acc(const double* a, const double* b, double* c, int m, int k, int n);

} // namespace surfacenet
