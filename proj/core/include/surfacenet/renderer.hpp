#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "surfacenet/image.hpp"
#include "surfacenet/material.hpp"
#include "surfacenet/vec3.hpp"

namespace surfacenet {

// The rendered geometry is a unit plane spanning [-1,1]^2 at z = 0.
// Flash mode places a point light at the (co-located) camera position;
// environment mode integrates a fixed list of directional samples under
// an overhead orthographic view.

enum class LightMode { Flash, Environment };

struct EnvironmentSample {
    Vec3 direction; // unit, z > 0
    Vec3 radiance;  // RGB, >= 0
};

struct LightSetup {
    LightMode mode = LightMode::Flash;
    Vec3 flash_position{0.0, 0.0, 1.0};
    double flash_intensity = 1.0;
    std::vector<EnvironmentSample> environment;

    static LightSetup flash(const Vec3& position, double intensity = 1.0);
    static LightSetup from_environment(std::vector<EnvironmentSample> samples);

    /// Throws ValidationError when the mode's invariants do not hold.
    void validate() const;
};

/// Parses "dx dy dz r g b" per line; directions are normalized and must
/// point into the upper hemisphere. '#' starts a comment.
LightSetup load_environment_samples(const std::filesystem::path& path);

struct RenderedImage {
    Image pixels;      // H×W×3 linear radiance, >= 0
    Image tone_mapped; // clamp(pixels,0,1)^(1/2.2)
};

/// GGX microfacet normal distribution with a = max(roughness^2, 1e-3).
double ggx_distribution(double roughness, double cos_theta_h);

/// Smith shadowing-masking, separable form with k = a^2/2, a = roughness^2.
double smith_geometry(double roughness, double cos_theta_l, double cos_theta_v);

/// Schlick Fresnel approximation per channel.
Vec3 fresnel_schlick(const Vec3& f0, double cos_theta_d);

/// Decoded material parameters at one surface point.
struct ShadingPoint {
    Vec3 diffuse;
    Vec3 normal; // decoded, unit
    double roughness = 0.0;
    Vec3 specular_f0;
};

/// Cook-Torrance shading for one light sample. Returns exitant radiance;
/// zero when the configuration is backfacing.
Vec3 shade_pixel(const ShadingPoint& point, const Vec3& light_dir, const Vec3& view_dir,
                 const Vec3& light_radiance);

RenderedImage render_flash(const MaterialMaps& maps, const LightSetup& setup);
RenderedImage render_environment(const MaterialMaps& maps, const LightSetup& setup);

/// clamp to [0,1] followed by gamma 1/2.2, element-wise.
Image tonemap(const Image& linear);

/// Plane-space position of a pixel center.
inline double pixel_to_plane_x(int x, int width) { return -1.0 + 2.0 * (x + 0.5) / width; }
inline double pixel_to_plane_y(int y, int height) { return 1.0 - 2.0 * (y + 0.5) / height; }

/// The five flash positions used by the rendering-RMSE protocol:
/// four quadrant centers plus the image center, all at z = 1.
std::array<Vec3, 5> evaluation_flash_positions();

} // namespace surfacenet
