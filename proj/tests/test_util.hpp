#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "surfacenet/material.hpp"
#include "surfacenet/rng.hpp"
#include "surfacenet/tensor.hpp"

namespace surfacenet::testing {

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        dir_ = std::filesystem::temp_directory_path() /
               ("surfacenet_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
};

inline Tensor random_tensor(int c, int h, int w, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor t(c, h, w);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

inline Image random_image(int h, int w, int c, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Image img(h, w, c);
    for (double& v : img.data()) v = rng.uniform(lo, hi);
    return img;
}

/// Random but valid material maps (normals decode to unit vectors).
inline MaterialMaps random_maps(int resolution, Rng& rng) {
    MaterialMaps maps(resolution, resolution);
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            for (int c = 0; c < 3; ++c) {
                maps.diffuse.at(y, x, c) = rng.uniform();
                maps.specular.at(y, x, c) = rng.uniform(0.0, 0.3);
            }
            maps.roughness.at(y, x, 0) = rng.uniform(0.05, 1.0);
            const Vec3 n = normalized({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0});
            const Vec3 e = encode_normal(n);
            maps.normal.at(y, x, 0) = e.x;
            maps.normal.at(y, x, 1) = e.y;
            maps.normal.at(y, x, 2) = e.z;
        }
    }
    return maps;
}

} // namespace surfacenet::testing
