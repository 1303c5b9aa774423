#include "surfacenet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <nlohmann/json.hpp>

#include "surfacenet/error.hpp"
#include "surfacenet/rng.hpp"

namespace surfacenet {

namespace {

using nlohmann::json;

std::uint8_t quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

cv::Mat image_to_mat8(const Image& image) {
    cv::Mat mat(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width(); ++x) {
            // OpenCV stores BGR.
            row[x][2] = quantize8(image.at(y, x, 0));
            row[x][1] = quantize8(image.at(y, x, image.channels() > 1 ? 1 : 0));
            row[x][0] = quantize8(image.at(y, x, image.channels() > 1 ? 2 : 0));
        }
    }
    return mat;
}

Image mat8_to_image(const cv::Mat& mat) {
    Image image(mat.rows, mat.cols, 3);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < mat.cols; ++x) {
            image.at(y, x, 0) = row[x][2] / 255.0;
            image.at(y, x, 1) = row[x][1] / 255.0;
            image.at(y, x, 2) = row[x][0] / 255.0;
        }
    }
    return image;
}

Image gamma_encode(const Image& linear, double gamma) {
    Image out(linear.height(), linear.width(), linear.channels());
    for (std::size_t i = 0; i < linear.size(); ++i) {
        out.data()[i] = std::pow(std::clamp(linear.data()[i], 0.0, 1.0), 1.0 / gamma);
    }
    return out;
}

Image gamma_decode(const Image& encoded, double gamma) {
    Image out(encoded.height(), encoded.width(), encoded.channels());
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        out.data()[i] = std::pow(std::clamp(encoded.data()[i], 0.0, 1.0), gamma);
    }
    return out;
}

Image replicate_channels(const Image& single) {
    Image out(single.height(), single.width(), 3);
    for (int y = 0; y < single.height(); ++y) {
        for (int x = 0; x < single.width(); ++x) {
            const double v = single.at(y, x, 0);
            out.at(y, x, 0) = v;
            out.at(y, x, 1) = v;
            out.at(y, x, 2) = v;
        }
    }
    return out;
}

Image first_channel(const Image& rgb) {
    Image out(rgb.height(), rgb.width(), 1);
    for (int y = 0; y < rgb.height(); ++y) {
        for (int x = 0; x < rgb.width(); ++x) {
            out.at(y, x, 0) = rgb.at(y, x, 0);
        }
    }
    return out;
}

/// The tile written to disk for a given name, in stored (file) space.
Image tile_for(const SvbrdfRecord& record, const std::string& name, const StripLayout& layout) {
    if (name == "render") return record.render.tone_mapped; // already gamma space
    if (name == "normal") return record.maps.normal;
    if (name == "diffuse") return gamma_encode(record.maps.diffuse, layout.gamma);
    if (name == "roughness") return replicate_channels(record.maps.roughness);
    if (name == "specular") return record.maps.specular;
    throw IoError("unknown strip tile name: " + name);
}

std::uint64_t hash_string(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace

void write_image8(const std::filesystem::path& path, const Image& image) {
    if (image.empty()) throw IoError("write_image8: empty image");
    if (!cv::imwrite(path.string(), image_to_mat8(image))) {
        throw IoError("failed to write image: " + path.string());
    }
}

Image read_image8(const std::filesystem::path& path) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty()) throw IoError("failed to read image: " + path.string());
    return mat8_to_image(mat);
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json j;
    j["format"] = "surfacenet-dataset-v1";
    j["tile_order"] = manifest.layout.tile_order;
    j["gamma"] = manifest.layout.gamma;
    j["gamma_tiles"] = {"render", "diffuse"};
    j["resolution"] = manifest.resolution;
    j["seed"] = manifest.seed;
    j["ids"] = manifest.ids;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    DatasetManifest manifest;
    try {
        manifest.layout.tile_order = j.at("tile_order").get<std::vector<std::string>>();
        manifest.layout.gamma = j.at("gamma").get<double>();
        manifest.resolution = j.at("resolution").get<int>();
        manifest.seed = j.at("seed").get<std::uint64_t>();
        manifest.ids = j.at("ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw IoError("manifest " + path.string() + " is missing fields: " + e.what());
    }
    std::set<std::string> unique(manifest.ids.begin(), manifest.ids.end());
    if (unique.size() != manifest.ids.size()) {
        throw IoError("manifest " + path.string() + " lists duplicate record ids");
    }
    return manifest;
}

void save_strip(const SvbrdfRecord& record, const std::filesystem::path& path,
                const StripLayout& layout) {
    const int h = record.maps.height();
    const int w = record.maps.width();
    if (record.render.tone_mapped.height() != h || record.render.tone_mapped.width() != w) {
        throw ValidationError("strip: render and maps must share a resolution");
    }
    Image strip(h, w * static_cast<int>(layout.tile_order.size()), 3);
    int offset = 0;
    for (const auto& name : layout.tile_order) {
        const Image tile = tile_for(record, name, layout);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    strip.at(y, offset + x, c) = tile.at(y, x, std::min(c, tile.channels() - 1));
                }
            }
        }
        offset += w;
    }
    write_image8(path, strip);
}

SvbrdfRecord load_strip(const std::filesystem::path& path, const StripLayout& layout) {
    const Image strip = read_image8(path);
    const int tiles = static_cast<int>(layout.tile_order.size());
    const int h = strip.height();
    if (strip.width() != tiles * h) {
        throw IoError("strip format error: " + path.string() + " is " + std::to_string(h) + "x" +
                      std::to_string(strip.width()) + ", expected width = " +
                      std::to_string(tiles) + " x height");
    }

    SvbrdfRecord record;
    record.id = path.stem().string();
    record.maps = MaterialMaps(h, h);
    int offset = 0;
    for (const auto& name : layout.tile_order) {
        Image tile(h, h, 3);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < h; ++x) {
                for (int c = 0; c < 3; ++c) tile.at(y, x, c) = strip.at(y, offset + x, c);
            }
        }
        if (name == "render") {
            record.render.tone_mapped = tile;
            record.render.pixels = gamma_decode(tile, layout.gamma);
        } else if (name == "normal") {
            record.maps.normal = tile;
        } else if (name == "diffuse") {
            record.maps.diffuse = gamma_decode(tile, layout.gamma);
        } else if (name == "roughness") {
            record.maps.roughness = first_channel(tile);
        } else if (name == "specular") {
            record.maps.specular = tile;
        } else {
            throw IoError("unknown strip tile name in layout: " + name);
        }
        offset += h;
    }
    return record;
}

LightSetup training_flash() {
    return LightSetup::flash({0.0, 0.0, 1.0}, std::numbers::pi);
}

SvbrdfRecord make_training_record(const MaterialMaps& maps, std::uint64_t /*light_sampler_seed*/,
                                  std::string id) {
    SvbrdfRecord record;
    record.maps = maps;
    record.render = render_flash(maps, training_flash());
    record.id = std::move(id);
    return record;
}

RealLoadResult load_real_images(const std::filesystem::path& root, int target_resolution) {
    if (!std::filesystem::is_directory(root)) {
        throw IoError("real-image root is not a directory: " + root.string());
    }
    RealLoadResult result;

    std::vector<std::filesystem::path> categories;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory()) categories.push_back(entry.path());
    }
    std::sort(categories.begin(), categories.end());

    for (const auto& category_dir : categories) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(category_dir)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            cv::Mat mat = cv::imread(file.string(), cv::IMREAD_COLOR);
            if (mat.empty()) {
                ++result.skipped;
                continue;
            }
            // Shortest side to target, then center crop.
            const double scale =
                static_cast<double>(target_resolution) / std::min(mat.rows, mat.cols);
            cv::Mat resized;
            cv::resize(mat, resized, cv::Size(), scale, scale,
                       scale < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);
            const int y0 = (resized.rows - target_resolution) / 2;
            const int x0 = (resized.cols - target_resolution) / 2;
            cv::Mat cropped = resized(cv::Rect(x0, y0, target_resolution, target_resolution));

            RealImageRecord record;
            record.image = gamma_decode(mat8_to_image(cropped), 2.2);
            record.category = category_dir.filename().string();
            record.id = record.category + "/" + file.stem().string();
            result.records.push_back(std::move(record));
        }
    }
    if (result.records.empty()) {
        throw IoError("no readable images under " + root.string());
    }
    return result;
}

DatasetSplit split_dataset(const std::vector<RealImageRecord>& records, double train_fraction,
                           std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    std::map<std::string, std::vector<std::string>> by_category;
    for (const auto& record : records) by_category[record.category].push_back(record.id);

    DatasetSplit split;
    split.seed = seed;
    for (auto& [category, ids] : by_category) {
        if (ids.size() < 2) {
            throw ValidationError("category \"" + category +
                                  "\" has fewer than 2 records; cannot split");
        }
        std::sort(ids.begin(), ids.end());
        Rng rng(hash_combine(seed, hash_string(category)));
        rng.shuffle(ids);

        const auto n = static_cast<long>(ids.size());
        long n_train = std::lround(train_fraction * static_cast<double>(n));
        n_train = std::clamp(n_train, 1L, n - 1);
        for (long i = 0; i < n; ++i) {
            (i < n_train ? split.train_ids : split.test_ids).push_back(ids[i]);
        }
    }
    return split;
}

SyntheticDataset load_synthetic_dataset(const std::filesystem::path& dir) {
    SyntheticDataset dataset;
    dataset.manifest = load_manifest(dir / "manifest.json");
    dataset.records.reserve(dataset.manifest.ids.size());
    for (const auto& id : dataset.manifest.ids) {
        dataset.records.push_back(load_strip(dir / (id + ".png"), dataset.manifest.layout));
        if (dataset.records.back().maps.height() != dataset.manifest.resolution) {
            throw IoError("record " + id + " resolution disagrees with the manifest");
        }
    }
    if (dataset.records.empty()) throw IoError("dataset at " + dir.string() + " lists no records");
    return dataset;
}

} // namespace surfacenet
