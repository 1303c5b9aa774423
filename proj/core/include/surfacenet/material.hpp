#pragma once

#include <array>
#include <string>
#include <vector>

#include "surfacenet/image.hpp"
#include "surfacenet/vec3.hpp"

namespace surfacenet {

/// The four reflectance maps estimated by the model.
enum class MapKind { Diffuse, Normal, Roughness, Specular };

inline constexpr std::array<MapKind, 4> kMapKinds = {MapKind::Diffuse, MapKind::Normal,
                                                     MapKind::Roughness, MapKind::Specular};

int channel_count(MapKind kind);
const char* to_string(MapKind kind);
MapKind map_kind_from_string(const std::string& name);

/// A set of SVBRDF maps over a common H×W grid. All stored channel
/// values live in [0,1]; normals are kept in their encoded form and
/// decoded on demand.
struct MaterialMaps {
    Image diffuse;   // H×W×3 linear albedo
    Image normal;    // H×W×3 encoded tangent-space normals
    Image roughness; // H×W×1
    Image specular;  // H×W×3 Fresnel reflectance at normal incidence

    MaterialMaps() = default;
    MaterialMaps(int height, int width);

    int height() const { return diffuse.height(); }
    int width() const { return diffuse.width(); }

    Image& map(MapKind kind);
    const Image& map(MapKind kind) const;
};

/// Maps a unit tangent-space normal with positive z into [0,1]^3 as (n+1)/2.
/// Throws ValidationError for non-unit input or z <= 0.
Vec3 encode_normal(const Vec3& n);

struct NormalDecodeStats {
    long degenerate = 0; // inputs that decoded to the zero vector
};

/// Inverse of encode_normal: 2e-1, z clamped to >= 1e-3, renormalized.
/// A degenerate (zero) vector decodes to the flat normal (0,0,1) and
/// bumps the counter in `stats` when one is supplied.
Vec3 decode_normal(const Vec3& e, NormalDecodeStats* stats = nullptr);

struct ValidationIssue {
    MapKind kind;
    int y = 0;
    int x = 0;
    int channel = 0;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    long issue_count = 0;
    std::vector<ValidationIssue> issues; // capped at a handful for readability

    std::string summary() const;
};

/// Checks shapes, [0,1] ranges, and decoded-normal unit length.
/// Reports rather than throws.
ValidationReport validate_maps(const MaterialMaps& maps);

} // namespace surfacenet
