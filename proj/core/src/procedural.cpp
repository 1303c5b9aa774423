#include "surfacenet/procedural.hpp"

#include <algorithm>
#include <cmath>

#include "surfacenet/error.hpp"
#include "surfacenet/rng.hpp"

namespace surfacenet {

namespace {

double hash_unit(std::uint64_t seed, std::int64_t ix, std::int64_t iy, std::uint64_t salt) {
    std::uint64_t h = splitmix64(seed ^ (salt * 0x9e3779b97f4a7c15ull));
    h = hash_combine(h, static_cast<std::uint64_t>(ix) * 0x85ebca6b0ull + 0x1234567ull);
    h = hash_combine(h, static_cast<std::uint64_t>(iy) * 0xc2b2ae35ull + 0x89abcdefull);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

/// Periodic value noise over a lattice of `period` cells.
double value_noise(std::uint64_t seed, double x, double y, int period, std::uint64_t salt) {
    const double fx = x * period;
    const double fy = y * period;
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(fx));
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(fy));
    const double tx = fade(fx - x0);
    const double ty = fade(fy - y0);

    const auto lattice = [&](std::int64_t ix, std::int64_t iy) {
        const std::int64_t px = ((ix % period) + period) % period;
        const std::int64_t py = ((iy % period) + period) % period;
        return hash_unit(seed, px, py, salt);
    };

    const double v00 = lattice(x0, y0);
    const double v10 = lattice(x0 + 1, y0);
    const double v01 = lattice(x0, y0 + 1);
    const double v11 = lattice(x0 + 1, y0 + 1);
    const double a = v00 + (v10 - v00) * tx;
    const double b = v01 + (v11 - v01) * tx;
    return a + (b - a) * ty;
}

/// Fractal sum of value noise, normalized to [0,1].
double fbm(std::uint64_t seed, double x, double y, int base_period, int octaves,
           std::uint64_t salt) {
    double sum = 0.0;
    double amplitude = 1.0;
    double total = 0.0;
    int period = base_period;
    for (int o = 0; o < octaves; ++o) {
        sum += amplitude * value_noise(seed, x, y, period, salt + 31 * o);
        total += amplitude;
        amplitude *= 0.5;
        period *= 2;
    }
    return sum / total;
}

struct CellResult {
    double f1 = 1e9;        // distance to nearest site
    double f2 = 1e9;        // second nearest
    std::uint64_t cell = 0; // id of the nearest site
};

/// Jittered-grid Voronoi with wraparound.
CellResult voronoi_cell(std::uint64_t seed, double x, double y, int cells) {
    const double fx = x * cells;
    const double fy = y * cells;
    const std::int64_t cx = static_cast<std::int64_t>(std::floor(fx));
    const std::int64_t cy = static_cast<std::int64_t>(std::floor(fy));

    CellResult result;
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            const std::int64_t ix = cx + dx;
            const std::int64_t iy = cy + dy;
            const std::int64_t px = ((ix % cells) + cells) % cells;
            const std::int64_t py = ((iy % cells) + cells) % cells;
            const double sx = ix + hash_unit(seed, px, py, 101);
            const double sy = iy + hash_unit(seed, px, py, 202);
            const double d = std::hypot(fx - sx, fy - sy);
            if (d < result.f1) {
                result.f2 = result.f1;
                result.f1 = d;
                result.cell = hash_combine(splitmix64(seed ^ 777),
                                           static_cast<std::uint64_t>(px * 7919 + py));
            } else if (d < result.f2) {
                result.f2 = d;
            }
        }
    }
    return result;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Vec3 palette_color(Rng& rng, double min_luma, double max_luma) {
    const double luma = rng.uniform(min_luma, max_luma);
    return {clamp01(luma * rng.uniform(0.6, 1.4)), clamp01(luma * rng.uniform(0.6, 1.4)),
            clamp01(luma * rng.uniform(0.6, 1.4))};
}

Vec3 lerp(const Vec3& a, const Vec3& b, double t) { return a + (b - a) * t; }

/// Builds the normal map from a height field via central differences
/// (toroidal wrap keeps the maps tileable).
void normals_from_height(const std::vector<double>& height, double strength,
                         MaterialMaps& maps) {
    const int res = maps.height();
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            const double hl = height[y * res + (x + res - 1) % res];
            const double hr = height[y * res + (x + 1) % res];
            const double hu = height[((y + res - 1) % res) * res + x];
            const double hd = height[((y + 1) % res) * res + x];
            // Plane y points up while rows grow downward.
            const Vec3 n = normalized(
                {-strength * (hr - hl) * res * 0.5, strength * (hd - hu) * res * 0.5, 1.0});
            const Vec3 e = encode_normal(n);
            maps.normal.at(y, x, 0) = e.x;
            maps.normal.at(y, x, 1) = e.y;
            maps.normal.at(y, x, 2) = e.z;
        }
    }
}

void fill_checker(std::uint64_t seed, MaterialMaps& maps) {
    const int res = maps.height();
    Rng rng(seed);
    const int tiles = 2 << rng.uniform_int(3); // 2, 4, or 8 per side
    const Vec3 color_a = palette_color(rng, 0.15, 0.8);
    const Vec3 color_b = palette_color(rng, 0.15, 0.8);
    const double rough_a = rng.uniform(0.2, 0.6);
    const double rough_b = rng.uniform(0.4, 0.95);
    const double spec_a = rng.uniform(0.03, 0.08);
    const double spec_b = rng.uniform(0.03, 0.3);
    const double bevel = rng.uniform(0.01, 0.04);

    std::vector<double> height(static_cast<std::size_t>(res) * res);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            const double u = (x + 0.5) / res;
            const double v = (y + 0.5) / res;
            const double su = u * tiles;
            const double sv = v * tiles;
            const int parity = (static_cast<int>(su) + static_cast<int>(sv)) & 1;

            // The diffuse map carries exactly the two tile colors.
            const Vec3 color = parity ? color_b : color_a;
            maps.diffuse.at(y, x, 0) = color.x;
            maps.diffuse.at(y, x, 1) = color.y;
            maps.diffuse.at(y, x, 2) = color.z;

            // Beveled tile edges give the normal map its structure.
            const double eu = std::min(su - std::floor(su), std::ceil(su) - su);
            const double ev = std::min(sv - std::floor(sv), std::ceil(sv) - sv);
            const double edge = std::min(eu, ev) / tiles;
            height[y * res + x] = std::min(edge / bevel, 1.0) * 0.02 +
                                  0.004 * fbm(seed, u, v, 8, 3, 5);

            const double rough_noise = 0.1 * (fbm(seed, u, v, 4, 3, 9) - 0.5);
            maps.roughness.at(y, x, 0) = clamp01((parity ? rough_b : rough_a) + rough_noise);

            const double spec = parity ? spec_b : spec_a;
            maps.specular.at(y, x, 0) = spec;
            maps.specular.at(y, x, 1) = spec;
            maps.specular.at(y, x, 2) = spec;
        }
    }
    normals_from_height(height, 1.2, maps);
}

void fill_bricks(std::uint64_t seed, MaterialMaps& maps) {
    const int res = maps.height();
    Rng rng(seed);
    const int rows = 4 + static_cast<int>(rng.uniform_int(4));
    const int cols = 2 + static_cast<int>(rng.uniform_int(3));
    const double mortar_width = rng.uniform(0.04, 0.10);
    const Vec3 brick_base = lerp({0.45, 0.17, 0.12}, {0.6, 0.4, 0.3}, rng.uniform());
    const Vec3 mortar_color = palette_color(rng, 0.5, 0.75);
    const double brick_rough = rng.uniform(0.35, 0.6);
    const double mortar_rough = rng.uniform(0.75, 0.95);

    std::vector<double> height(static_cast<std::size_t>(res) * res);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            const double u = (x + 0.5) / res;
            const double v = (y + 0.5) / res;
            const double rv = v * rows;
            const int row = static_cast<int>(rv);
            // Offset every other course by half a brick.
            const double uu = u + (row & 1 ? 0.5 / cols : 0.0);
            const double ru = uu * cols;
            const int col = static_cast<int>(std::floor(ru));

            const double du = std::min(ru - std::floor(ru), std::ceil(ru) - ru) / cols;
            const double dv = std::min(rv - row, row + 1.0 - rv) / rows;
            const double edge = std::min(du, dv);
            const double brick_mask = clamp01((edge - mortar_width * 0.5) / (mortar_width * 0.5));

            const std::uint64_t brick_id =
                hash_combine(splitmix64(seed ^ 0xb51c), static_cast<std::uint64_t>(
                                 (((row % rows) + rows) % rows) * 1000 + ((col % cols) + cols) % cols));
            const double tint = 0.75 + 0.5 * (static_cast<double>(brick_id >> 11) * 0x1.0p-53);
            const Vec3 brick_color{clamp01(brick_base.x * tint), clamp01(brick_base.y * tint),
                                   clamp01(brick_base.z * tint)};

            const double grain = fbm(seed, u, v, 16, 3, 21);
            const Vec3 color = lerp(mortar_color, brick_color, brick_mask);
            maps.diffuse.at(y, x, 0) = clamp01(color.x * (0.9 + 0.2 * grain));
            maps.diffuse.at(y, x, 1) = clamp01(color.y * (0.9 + 0.2 * grain));
            maps.diffuse.at(y, x, 2) = clamp01(color.z * (0.9 + 0.2 * grain));

            // Mortar recedes and stays flat; bricks carry the surface grain.
            height[y * res + x] = brick_mask * (0.03 + 0.012 * grain);

            maps.roughness.at(y, x, 0) =
                clamp01(mortar_rough + (brick_rough - mortar_rough) * brick_mask +
                        0.05 * (grain - 0.5));
            const double spec = 0.03 + 0.02 * brick_mask;
            maps.specular.at(y, x, 0) = spec;
            maps.specular.at(y, x, 1) = spec;
            maps.specular.at(y, x, 2) = spec;
        }
    }
    normals_from_height(height, 1.0, maps);
}

void fill_perlin(std::uint64_t seed, MaterialMaps& maps) {
    const int res = maps.height();
    Rng rng(seed);
    const Vec3 color_a = palette_color(rng, 0.1, 0.5);
    const Vec3 color_b = palette_color(rng, 0.4, 0.9);
    const double rough_lo = rng.uniform(0.2, 0.45);
    const double rough_hi = rng.uniform(0.55, 0.95);
    const double spec_base = rng.uniform(0.03, 0.12);

    std::vector<double> height(static_cast<std::size_t>(res) * res);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            const double u = (x + 0.5) / res;
            const double v = (y + 0.5) / res;
            const double base = fbm(seed, u, v, 4, 5, 1);
            const double detail = fbm(seed, u, v, 16, 3, 2);

            const Vec3 color = lerp(color_a, color_b, base);
            maps.diffuse.at(y, x, 0) = color.x;
            maps.diffuse.at(y, x, 1) = color.y;
            maps.diffuse.at(y, x, 2) = color.z;

            height[y * res + x] = 0.05 * base + 0.012 * detail;
            maps.roughness.at(y, x, 0) =
                clamp01(rough_lo + (rough_hi - rough_lo) * fbm(seed, u, v, 8, 3, 3));
            const double spec = clamp01(spec_base + 0.05 * (detail - 0.5));
            maps.specular.at(y, x, 0) = spec;
            maps.specular.at(y, x, 1) = spec;
            maps.specular.at(y, x, 2) = spec;
        }
    }
    normals_from_height(height, 1.5, maps);
}

void fill_voronoi(std::uint64_t seed, MaterialMaps& maps) {
    const int res = maps.height();
    Rng rng(seed);
    const int cells = 4 + static_cast<int>(rng.uniform_int(5));
    const Vec3 base = palette_color(rng, 0.25, 0.7);
    const double gap_rough = rng.uniform(0.7, 0.95);
    const double cell_rough = rng.uniform(0.25, 0.55);

    std::vector<double> height(static_cast<std::size_t>(res) * res);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            const double u = (x + 0.5) / res;
            const double v = (y + 0.5) / res;
            const CellResult cell = voronoi_cell(seed, u, v, cells);

            // Edge factor from the distance to the cell boundary.
            const double border = clamp01((cell.f2 - cell.f1) * 4.0);
            const double cell_luma = 0.6 + 0.8 * (static_cast<double>(cell.cell >> 11) * 0x1.0p-53);
            maps.diffuse.at(y, x, 0) = clamp01(base.x * cell_luma * (0.4 + 0.6 * border));
            maps.diffuse.at(y, x, 1) = clamp01(base.y * cell_luma * (0.4 + 0.6 * border));
            maps.diffuse.at(y, x, 2) = clamp01(base.z * cell_luma * (0.4 + 0.6 * border));

            height[y * res + x] = 0.04 * border + 0.008 * fbm(seed, u, v, 16, 2, 4);
            maps.roughness.at(y, x, 0) = clamp01(gap_rough + (cell_rough - gap_rough) * border);
            const double spec = 0.03 + 0.05 * border;
            maps.specular.at(y, x, 0) = spec;
            maps.specular.at(y, x, 1) = spec;
            maps.specular.at(y, x, 2) = spec;
        }
    }
    normals_from_height(height, 1.0, maps);
}

void fill_stripes(std::uint64_t seed, MaterialMaps& maps) {
    const int res = maps.height();
    Rng rng(seed);
    const int bands = 3 + static_cast<int>(rng.uniform_int(6));
    const bool horizontal = rng.uniform() < 0.5;
    const Vec3 color_a = palette_color(rng, 0.2, 0.6);
    const Vec3 color_b = palette_color(rng, 0.3, 0.85);
    const double rough_a = rng.uniform(0.3, 0.5);
    const double rough_b = rng.uniform(0.55, 0.9);
    const double wobble = rng.uniform(0.0, 0.08);

    std::vector<double> height(static_cast<std::size_t>(res) * res);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            const double u = (x + 0.5) / res;
            const double v = (y + 0.5) / res;
            const double axis = horizontal ? v : u;
            const double offset = wobble * (fbm(seed, u, v, 4, 3, 6) - 0.5);
            const double phase = (axis + offset) * bands;
            // Smooth square wave: 0 on one band, 1 on the next.
            const double t = phase - std::floor(phase);
            const double band = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t);
            const int parity = static_cast<int>(std::floor(phase)) & 1;
            const double mix = parity ? band : 1.0 - band;

            const Vec3 color = lerp(color_a, color_b, mix);
            maps.diffuse.at(y, x, 0) = color.x;
            maps.diffuse.at(y, x, 1) = color.y;
            maps.diffuse.at(y, x, 2) = color.z;

            height[y * res + x] = 0.02 * mix + 0.006 * fbm(seed, u, v, 32, 2, 7);
            maps.roughness.at(y, x, 0) = clamp01(rough_a + (rough_b - rough_a) * mix);
            const double spec = 0.04 + 0.04 * (1.0 - mix);
            maps.specular.at(y, x, 0) = spec;
            maps.specular.at(y, x, 1) = spec;
            maps.specular.at(y, x, 2) = spec;
        }
    }
    normals_from_height(height, 1.3, maps);
}

} // namespace

const char* to_string(Pattern pattern) {
    switch (pattern) {
    case Pattern::Checker: return "checker";
    case Pattern::Bricks: return "bricks";
    case Pattern::Perlin: return "perlin";
    case Pattern::Voronoi: return "voronoi";
    case Pattern::Stripes: return "stripes";
    }
    return "?";
}

Pattern pattern_from_string(const std::string& name) {
    for (Pattern pattern : kAllPatterns) {
        if (name == to_string(pattern)) return pattern;
    }
    throw ConfigError("unknown pattern \"" + name +
                      "\" (expected checker|bricks|perlin|voronoi|stripes)");
}

MaterialMaps generate_procedural(std::uint64_t seed, Pattern pattern, int resolution) {
    if (resolution < 32 || (resolution & (resolution - 1)) != 0) {
        throw ConfigError("procedural resolution must be a power of two >= 32, got " +
                          std::to_string(resolution));
    }
    MaterialMaps maps(resolution, resolution);
    switch (pattern) {
    case Pattern::Checker: fill_checker(seed, maps); break;
    case Pattern::Bricks: fill_bricks(seed, maps); break;
    case Pattern::Perlin: fill_perlin(seed, maps); break;
    case Pattern::Voronoi: fill_voronoi(seed, maps); break;
    case Pattern::Stripes: fill_stripes(seed, maps); break;
    }
    return maps;
}

} // namespace surfacenet
