#include "surfacenet/material.hpp"

#include <cmath>
#include <sstream>

#include "surfacenet/error.hpp"

namespace surfacenet {

namespace {
constexpr double kUnitTolerance = 1e-5;
constexpr double kZClamp = 1e-3;
constexpr std::size_t kMaxReportedIssues = 8;
} // namespace

int channel_count(MapKind kind) {
    switch (kind) {
    case MapKind::Diffuse: return 3;
    case MapKind::Normal: return 3;
    case MapKind::Roughness: return 1;
    case MapKind::Specular: return 3;
    }
    return 0;
}

const char* to_string(MapKind kind) {
    switch (kind) {
    case MapKind::Diffuse: return "diffuse";
    case MapKind::Normal: return "normal";
    case MapKind::Roughness: return "roughness";
    case MapKind::Specular: return "specular";
    }
    return "?";
}

MapKind map_kind_from_string(const std::string& name) {
    for (MapKind kind : kMapKinds) {
        if (name == to_string(kind)) return kind;
    }
    throw ValidationError("unknown map kind: " + name);
}

MaterialMaps::MaterialMaps(int height, int width)
    : diffuse(height, width, 3), normal(height, width, 3), roughness(height, width, 1),
      specular(height, width, 3) {
    // Default normal map is flat: encoded (0.5, 0.5, 1.0).
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            normal.at(y, x, 0) = 0.5;
            normal.at(y, x, 1) = 0.5;
            normal.at(y, x, 2) = 1.0;
        }
    }
}

Image& MaterialMaps::map(MapKind kind) {
    switch (kind) {
    case MapKind::Diffuse: return diffuse;
    case MapKind::Normal: return normal;
    case MapKind::Roughness: return roughness;
    case MapKind::Specular: return specular;
    }
    return diffuse;
}

const Image& MaterialMaps::map(MapKind kind) const {
    return const_cast<MaterialMaps*>(this)->map(kind);
}

Vec3 encode_normal(const Vec3& n) {
    const double len = length(n);
    if (std::abs(len - 1.0) > kUnitTolerance) {
        std::ostringstream msg;
        msg << "encode_normal: input norm " << len << " deviates from 1 by more than "
            << kUnitTolerance;
        throw ValidationError(msg.str());
    }
    if (n.z <= 0.0) {
        throw ValidationError("encode_normal: normal must have positive z component");
    }
    return {(n.x + 1.0) * 0.5, (n.y + 1.0) * 0.5, (n.z + 1.0) * 0.5};
}

Vec3 decode_normal(const Vec3& e, NormalDecodeStats* stats) {
    Vec3 n{2.0 * e.x - 1.0, 2.0 * e.y - 1.0, 2.0 * e.z - 1.0};
    if (length(n) < 1e-9) {
        if (stats) ++stats->degenerate;
        return {0.0, 0.0, 1.0};
    }
    if (n.z < kZClamp) n.z = kZClamp;
    return normalized(n);
}

std::string ValidationReport::summary() const {
    std::ostringstream out;
    out << (ok ? "pass" : "fail") << " (" << issue_count << " issues)";
    for (const auto& issue : issues) {
        out << "\n  [" << to_string(issue.kind) << "] (" << issue.y << "," << issue.x << ","
            << issue.channel << "): " << issue.message;
    }
    if (static_cast<std::size_t>(issue_count) > issues.size()) {
        out << "\n  ... " << (issue_count - static_cast<long>(issues.size())) << " more";
    }
    return out.str();
}

namespace {

void add_issue(ValidationReport& report, MapKind kind, int y, int x, int c, std::string message) {
    report.ok = false;
    ++report.issue_count;
    if (report.issues.size() < kMaxReportedIssues) {
        report.issues.push_back({kind, y, x, c, std::move(message)});
    }
}

} // namespace

ValidationReport validate_maps(const MaterialMaps& maps) {
    ValidationReport report;
    const int h = maps.height();
    const int w = maps.width();

    for (MapKind kind : kMapKinds) {
        const Image& img = maps.map(kind);
        if (img.height() != h || img.width() != w) {
            std::ostringstream msg;
            msg << "resolution " << img.height() << "x" << img.width() << " does not match "
                << h << "x" << w;
            add_issue(report, kind, 0, 0, 0, msg.str());
            continue;
        }
        if (img.channels() != channel_count(kind)) {
            std::ostringstream msg;
            msg << "expected " << channel_count(kind) << " channels, found " << img.channels();
            add_issue(report, kind, 0, 0, 0, msg.str());
            continue;
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < img.channels(); ++c) {
                    const double v = img.at(y, x, c);
                    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                        std::ostringstream msg;
                        msg << "value " << v << " outside [0,1]";
                        add_issue(report, kind, y, x, c, msg.str());
                    }
                }
            }
        }
    }

    // Decoded normals must renormalize cleanly; the decode itself clamps,
    // so only a badly skewed encoding trips this.
    if (maps.normal.height() == h && maps.normal.width() == w && maps.normal.channels() == 3) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Vec3 n = decode_normal(
                    {maps.normal.at(y, x, 0), maps.normal.at(y, x, 1), maps.normal.at(y, x, 2)});
                if (std::abs(length(n) - 1.0) > kUnitTolerance || n.z <= 0.0) {
                    add_issue(report, MapKind::Normal, y, x, 0, "decoded normal is not unit");
                }
            }
        }
    }
    return report;
}

} // namespace surfacenet
