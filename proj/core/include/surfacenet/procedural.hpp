#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surfacenet/material.hpp"

namespace surfacenet {

/// Procedural material families. Each produces correlated diffuse,
/// normal, roughness, and specular maps from a single seed.
enum class Pattern { Checker, Bricks, Perlin, Voronoi, Stripes };

inline constexpr std::array<Pattern, 5> kAllPatterns = {
    Pattern::Checker, Pattern::Bricks, Pattern::Perlin, Pattern::Voronoi, Pattern::Stripes};

const char* to_string(Pattern pattern);
Pattern pattern_from_string(const std::string& name); // throws ConfigError on unknown names

/// Deterministic in (seed, pattern, resolution); the noise lattice is
/// integer-hashed, so outputs are identical across platforms.
/// Resolution must be a power of two >= 32.
MaterialMaps generate_procedural(std::uint64_t seed, Pattern pattern, int resolution);

} // namespace surfacenet
