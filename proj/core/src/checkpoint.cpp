#include "surfacenet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "surfacenet/error.hpp"

namespace surfacenet {

namespace {

constexpr char kMagic[8] = {'S', 'N', 'E', 'T', 'A', 'R', 'C', '1'};

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError("archive truncated");
    return value;
}

} // namespace

void Archive::put(const std::string& name, std::vector<double> data) {
    if (tensors_.find(name) == tensors_.end()) order_.push_back(name);
    tensors_[name] = std::move(data);
}

const std::vector<double>* Archive::find(const std::string& name) const {
    const auto it = tensors_.find(name);
    return it == tensors_.end() ? nullptr : &it->second;
}

void Archive::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write archive: " + path.string());

    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint64_t>(out, manifest_.size());
    out.write(manifest_.data(), static_cast<std::streamsize>(manifest_.size()));
    write_pod<std::uint64_t>(out, order_.size());
    for (const auto& name : order_) {
        const auto& data = tensors_.at(name);
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint64_t>(out, data.size());
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!out) throw IoError("failed while writing archive: " + path.string());
}

Archive Archive::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open archive: " + path.string());

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a surfacenet archive: " + path.string());
    }

    Archive archive;
    const auto manifest_size = read_pod<std::uint64_t>(in);
    archive.manifest_.resize(manifest_size);
    in.read(archive.manifest_.data(), static_cast<std::streamsize>(manifest_size));
    if (!in) throw IoError("archive truncated: " + path.string());

    const auto count = read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_size = read_pod<std::uint32_t>(in);
        std::string name(name_size, '\0');
        in.read(name.data(), name_size);
        const auto value_count = read_pod<std::uint64_t>(in);
        std::vector<double> data(value_count);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(value_count * sizeof(double)));
        if (!in) throw IoError("archive truncated: " + path.string());
        archive.put(name, std::move(data));
    }
    return archive;
}

void put_params(Archive& archive, const std::string& prefix,
                const std::vector<nn::ParamRef>& params) {
    for (const auto& p : params) archive.put(prefix + "." + p.name, *p.value);
}

void load_params(const Archive& archive, const std::string& prefix,
                 const std::vector<nn::ParamRef>& params) {
    for (const auto& p : params) {
        const std::string name = prefix + "." + p.name;
        const auto* data = archive.find(name);
        if (!data) {
            throw IoError("checkpoint is missing tensor \"" + name + "\"");
        }
        if (data->size() != p.value->size()) {
            throw IoError("checkpoint tensor \"" + name + "\" has " +
                          std::to_string(data->size()) + " values, expected " +
                          std::to_string(p.value->size()));
        }
        *p.value = *data;
    }
}

} // namespace surfacenet
