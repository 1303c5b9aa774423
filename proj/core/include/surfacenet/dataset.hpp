#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "surfacenet/material.hpp"
#include "surfacenet/renderer.hpp"

namespace surfacenet {

/// One synthetic training sample: a flash-lit rendering plus its
/// ground-truth maps, stored on disk as a five-tile strip image.
struct SvbrdfRecord {
    RenderedImage render;
    MaterialMaps maps;
    std::string id;
};

/// One unannotated photograph for the unsupervised stream.
struct RealImageRecord {
    Image image; // H×W×3 linear values in [0,1]
    std::string category;
    std::string id;
};

struct DatasetSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 0;
};

/// Strip tile order and storage transforms, recorded in the dataset
/// manifest. The render and diffuse tiles are gamma-encoded on disk;
/// normal, roughness and specular tiles are linear.
struct StripLayout {
    std::vector<std::string> tile_order = {"render", "normal", "diffuse", "roughness", "specular"};
    double gamma = 2.2;
};

struct DatasetManifest {
    StripLayout layout;
    int resolution = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> ids;
};

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes the record as an 8-bit strip (width = 5 × height).
void save_strip(const SvbrdfRecord& record, const std::filesystem::path& path,
                const StripLayout& layout = {});

/// Parses a strip file back into a record. Throws IoError when the width
/// is not exactly five times the height.
SvbrdfRecord load_strip(const std::filesystem::path& path, const StripLayout& layout = {});

/// Renders the training input with the centered flash and packs it with
/// the maps. The seed parameter is reserved for light jitter and unused
/// in the centered-flash setup.
SvbrdfRecord make_training_record(const MaterialMaps& maps, std::uint64_t light_sampler_seed,
                                  std::string id);

/// The flash setup used to render all training inputs: centered at
/// z = 1 with intensity pi, so a Lambertian albedo d maps to pixel
/// value d at the image center.
LightSetup training_flash();

struct RealLoadResult {
    std::vector<RealImageRecord> records;
    int skipped = 0; // unreadable files
};

/// Loads <root>/<category>/<name>.<ext> photos, linearizes them
/// (inverse gamma 2.2), resizes the shortest side to `target_resolution`
/// and center-crops. Unreadable files are skipped with a count.
RealLoadResult load_real_images(const std::filesystem::path& root, int target_resolution);

/// Per-category stratified split, deterministic in seed.
DatasetSplit split_dataset(const std::vector<RealImageRecord>& records, double train_fraction,
                           std::uint64_t seed);

struct SyntheticDataset {
    DatasetManifest manifest;
    std::vector<SvbrdfRecord> records;
};

/// Reads manifest.json plus one strip per listed id.
SyntheticDataset load_synthetic_dataset(const std::filesystem::path& dir);

/// 8-bit PNG helpers. Values are stored as given (no gamma applied here).
void write_image8(const std::filesystem::path& path, const Image& image);
Image read_image8(const std::filesystem::path& path);

} // namespace surfacenet
