#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "surfacenet/nn.hpp"

namespace surfacenet {

/// Single-file archive of named double tensors plus a JSON manifest.
/// Values are stored as raw little-endian doubles, so a round trip is
/// bit-exact. Loading validates the whole file before returning.
class Archive {
public:
    void set_manifest(std::string manifest_json) { manifest_ = std::move(manifest_json); }
    const std::string& manifest() const { return manifest_; }

    void put(const std::string& name, std::vector<double> data);
    const std::vector<double>* find(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }

    void save(const std::filesystem::path& path) const;
    static Archive load(const std::filesystem::path& path);

private:
    std::string manifest_;
    std::vector<std::string> order_;
    std::map<std::string, std::vector<double>> tensors_;
};

/// Stores every parameter under "<prefix>.<param name>".
void put_params(Archive& archive, const std::string& prefix,
                const std::vector<nn::ParamRef>& params);

/// Restores parameters, failing loudly (naming the first offending
/// tensor) on any missing name or size mismatch.
void load_params(const Archive& archive, const std::string& prefix,
                 const std::vector<nn::ParamRef>& params);

} // namespace surfacenet
