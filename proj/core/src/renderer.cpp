#include "surfacenet/renderer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "surfacenet/error.hpp"

namespace surfacenet {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kSpecularDenomClamp = 1e-6;
constexpr double kGamma = 2.2;
} // namespace

LightSetup LightSetup::flash(const Vec3& position, double intensity) {
    LightSetup setup;
    setup.mode = LightMode::Flash;
    setup.flash_position = position;
    setup.flash_intensity = intensity;
    setup.validate();
    return setup;
}

LightSetup LightSetup::from_environment(std::vector<EnvironmentSample> samples) {
    LightSetup setup;
    setup.mode = LightMode::Environment;
    setup.environment = std::move(samples);
    setup.validate();
    return setup;
}

void LightSetup::validate() const {
    if (mode == LightMode::Flash) {
        if (!(flash_position.z > 0.0)) {
            throw ValidationError("flash position must lie above the plane (z > 0)");
        }
        if (!(flash_intensity >= 0.0) || !std::isfinite(flash_intensity)) {
            throw ValidationError("flash intensity must be finite and non-negative");
        }
    } else {
        if (environment.empty()) {
            throw ValidationError("environment light requires at least one sample");
        }
        for (const auto& s : environment) {
            if (std::abs(length(s.direction) - 1.0) > 1e-6 || s.direction.z <= 0.0) {
                throw ValidationError(
                    "environment sample directions must be unit vectors with z > 0");
            }
            if (s.radiance.x < 0.0 || s.radiance.y < 0.0 || s.radiance.z < 0.0) {
                throw ValidationError("environment sample radiance must be non-negative");
            }
        }
    }
}

LightSetup load_environment_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open environment sample file: " + path.string());

    std::vector<EnvironmentSample> samples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        double dx, dy, dz, r, g, b;
        if (!(fields >> dx)) continue; // blank line
        if (!(fields >> dy >> dz >> r >> g >> b)) {
            throw IoError("malformed environment sample at " + path.string() + ":" +
                          std::to_string(line_no) + " (want \"dx dy dz r g b\")");
        }
        Vec3 dir{dx, dy, dz};
        const double len = length(dir);
        if (len < 1e-9 || dir.z <= 0.0) {
            throw IoError("environment sample at line " + std::to_string(line_no) +
                          " must point into the upper hemisphere");
        }
        samples.push_back({dir / len, {r, g, b}});
    }
    return LightSetup::from_environment(std::move(samples));
}

double ggx_distribution(double roughness, double cos_theta_h) {
    const double a = std::max(roughness * roughness, 1e-3);
    const double a2 = a * a;
    const double c2 = cos_theta_h * cos_theta_h;
    const double t = c2 * (a2 - 1.0) + 1.0;
    return a2 / (kPi * t * t);
}

double smith_geometry(double roughness, double cos_theta_l, double cos_theta_v) {
    const double a = roughness * roughness;
    const double k = a * a * 0.5;
    const auto g1 = [k](double c) { return c / (c * (1.0 - k) + k); };
    return g1(cos_theta_l) * g1(cos_theta_v);
}

Vec3 fresnel_schlick(const Vec3& f0, double cos_theta_d) {
    const double m = 1.0 - cos_theta_d;
    const double m5 = m * m * m * m * m;
    return {f0.x + (1.0 - f0.x) * m5, f0.y + (1.0 - f0.y) * m5, f0.z + (1.0 - f0.z) * m5};
}

Vec3 shade_pixel(const ShadingPoint& point, const Vec3& light_dir, const Vec3& view_dir,
                 const Vec3& light_radiance) {
    if (!finite(point.diffuse) || !finite(point.normal) || !finite(point.specular_f0) ||
        !std::isfinite(point.roughness) || !finite(light_dir) || !finite(view_dir) ||
        !finite(light_radiance)) {
        throw ValidationError("shade_pixel: non-finite input");
    }

    const double n_dot_l = dot(point.normal, light_dir);
    const double n_dot_v = dot(point.normal, view_dir);
    if (n_dot_l <= 0.0 || n_dot_v <= 0.0) return {0.0, 0.0, 0.0};

    const Vec3 h = normalized(light_dir + view_dir);
    const double n_dot_h = std::clamp(dot(point.normal, h), 0.0, 1.0);
    const double h_dot_l = std::clamp(dot(h, light_dir), 0.0, 1.0);

    const double d = ggx_distribution(point.roughness, n_dot_h);
    const double g = smith_geometry(point.roughness, n_dot_l, n_dot_v);
    const Vec3 f = fresnel_schlick(point.specular_f0, h_dot_l);

    const double denom = std::max(4.0 * n_dot_l * n_dot_v, kSpecularDenomClamp);
    const Vec3 specular = f * (d * g / denom);
    const Vec3 brdf = point.diffuse * (1.0 / kPi) + specular;
    const Vec3 out = brdf * n_dot_l * light_radiance;

    if (!finite(out)) throw ValidationError("shade_pixel: non-finite radiance");
    return out;
}

namespace {

ShadingPoint shading_point_at(const MaterialMaps& maps, int y, int x) {
    ShadingPoint p;
    p.diffuse = {maps.diffuse.at(y, x, 0), maps.diffuse.at(y, x, 1), maps.diffuse.at(y, x, 2)};
    p.normal = decode_normal(
        {maps.normal.at(y, x, 0), maps.normal.at(y, x, 1), maps.normal.at(y, x, 2)});
    p.roughness = maps.roughness.at(y, x, 0);
    p.specular_f0 = {maps.specular.at(y, x, 0), maps.specular.at(y, x, 1),
                     maps.specular.at(y, x, 2)};
    return p;
}

} // namespace

RenderedImage render_flash(const MaterialMaps& maps, const LightSetup& setup) {
    if (setup.mode != LightMode::Flash) {
        throw ValidationError("render_flash requires a flash light setup");
    }
    setup.validate();

    const int h = maps.height();
    const int w = maps.width();
    RenderedImage out;
    out.pixels = Image(h, w, 3);

    for (int y = 0; y < h; ++y) {
        const double py = pixel_to_plane_y(y, h);
        for (int x = 0; x < w; ++x) {
            const double px = pixel_to_plane_x(x, w);
            const Vec3 to_light = setup.flash_position - Vec3{px, py, 0.0};
            const double dist2 = dot(to_light, to_light);
            const Vec3 dir = to_light / std::sqrt(dist2);
            const double falloff = setup.flash_intensity / dist2;

            // Camera is co-located with the flash, so view == light direction.
            const Vec3 radiance = shade_pixel(shading_point_at(maps, y, x), dir, dir,
                                              {falloff, falloff, falloff});
            out.pixels.at(y, x, 0) = radiance.x;
            out.pixels.at(y, x, 1) = radiance.y;
            out.pixels.at(y, x, 2) = radiance.z;
        }
    }
    out.tone_mapped = tonemap(out.pixels);
    return out;
}

RenderedImage render_environment(const MaterialMaps& maps, const LightSetup& setup) {
    if (setup.mode != LightMode::Environment) {
        throw ValidationError("render_environment requires an environment light setup");
    }
    setup.validate();

    const int h = maps.height();
    const int w = maps.width();
    const Vec3 view{0.0, 0.0, 1.0}; // overhead orthographic
    RenderedImage out;
    out.pixels = Image(h, w, 3);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const ShadingPoint point = shading_point_at(maps, y, x);
            Vec3 total{0.0, 0.0, 0.0};
            for (const auto& sample : setup.environment) {
                total += shade_pixel(point, sample.direction, view, sample.radiance);
            }
            out.pixels.at(y, x, 0) = total.x;
            out.pixels.at(y, x, 1) = total.y;
            out.pixels.at(y, x, 2) = total.z;
        }
    }
    out.tone_mapped = tonemap(out.pixels);
    return out;
}

Image tonemap(const Image& linear) {
    Image out(linear.height(), linear.width(), linear.channels());
    for (std::size_t i = 0; i < linear.data().size(); ++i) {
        const double v = std::clamp(linear.data()[i], 0.0, 1.0);
        out.data()[i] = std::pow(v, 1.0 / kGamma);
    }
    return out;
}

std::array<Vec3, 5> evaluation_flash_positions() {
    return {Vec3{-0.5, 0.5, 1.0}, Vec3{0.5, 0.5, 1.0}, Vec3{-0.5, -0.5, 1.0},
            Vec3{0.5, -0.5, 1.0}, Vec3{0.0, 0.0, 1.0}};
}

} // namespace surfacenet
