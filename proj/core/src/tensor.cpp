#include "surfacenet/tensor.hpp"

#include <Eigen/Core>

namespace surfacenet {

namespace {
using MatrixMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
} // namespace

Tensor image_to_tensor(const Image& image) {
    Tensor t(image.channels(), image.height(), image.width());
    for (int c = 0; c < image.channels(); ++c) {
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < image.width(); ++x) {
                t.at(c, y, x) = image.at(y, x, c);
            }
        }
    }
    return t;
}

Image tensor_to_image(const Tensor& tensor) {
    Image img(tensor.h, tensor.w, tensor.c);
    for (int c = 0; c < tensor.c; ++c) {
        for (int y = 0; y < tensor.h; ++y) {
            for (int x = 0; x < tensor.w; ++x) {
                img.at(y, x, c) = tensor.at(c, y, x);
            }
        }
    }
    return img;
}

void gemm(const double* a, const double* b, double* c, int m, int k, int n) {
    MatrixMap C(c, m, n);
    C.noalias() = ConstMatrixMap(a, m, k) * ConstMatrixMap(b, k, n);
}

void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    MatrixMap C(c, m, n);
    C.noalias() += ConstMatrixMap(a, m, k) * ConstMatrixMap(b, k, n);
}

void gemm_ta(const double* a, const double* b, double* c, int m, int k, int n) {
    MatrixMap C(c, m, n);
    C.noalias() = ConstMatrixMap(a, k, m).transpose() * ConstMatrixMap(b, k, n);
}

void gemm_tb_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    MatrixMap C(c, m, n);
    C.noalias() += ConstMatrixMap(a, m, k) * ConstMatrixMap(b, n, k).transpose();
}

} // namespace surfacenet
