#include "surfacenet/config_io.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "surfacenet/error.hpp"

namespace surfacenet {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("config section \"" + section + "\" must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (allowed.find(key) == allowed.end()) {
            throw ConfigError("unknown config key \"" + section + "." + key + "\"");
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key \"" + section + "." + key + "\" has the wrong type");
    }
}

json generator_to_json(const GeneratorConfig& g) {
    json j;
    j["scale"] = g.scale;
    j["stem_channels"] = g.stem_channels;
    j["encoder_block_counts"] = g.encoder_block_counts;
    j["encoder_channels"] = g.encoder_channels;
    j["aspp_dilations"] = g.aspp_dilations;
    j["aspp_channels"] = g.aspp_channels;
    j["decoder_channels"] = g.decoder_channels;
    j["trunk_channels"] = g.trunk_channels;
    j["head_hidden"] = g.head_hidden;
    j["input_multiple"] = g.input_multiple;
    j["learned_upsampling"] = g.learned_upsampling;
    j["input_skips"] = g.input_skips;
    return j;
}

GeneratorConfig generator_from_json(const json& j) {
    GeneratorConfig g;
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        if (preset == "desk") {
            g = GeneratorConfig::desk();
        } else if (preset == "paper") {
            g = GeneratorConfig::paper();
        } else if (preset == "tiny") {
            g = GeneratorConfig::tiny();
        } else {
            throw ConfigError("unknown generator preset \"" + preset + "\"");
        }
    }
    check_keys(j, "generator",
               {"preset", "scale", "stem_channels", "encoder_block_counts", "encoder_channels",
                "aspp_dilations", "aspp_channels", "decoder_channels", "trunk_channels",
                "head_hidden", "input_multiple", "learned_upsampling", "input_skips"});
    read_field(j, "scale", g.scale, "generator");
    read_field(j, "stem_channels", g.stem_channels, "generator");
    read_field(j, "encoder_block_counts", g.encoder_block_counts, "generator");
    read_field(j, "encoder_channels", g.encoder_channels, "generator");
    read_field(j, "aspp_dilations", g.aspp_dilations, "generator");
    read_field(j, "aspp_channels", g.aspp_channels, "generator");
    read_field(j, "decoder_channels", g.decoder_channels, "generator");
    read_field(j, "trunk_channels", g.trunk_channels, "generator");
    read_field(j, "head_hidden", g.head_hidden, "generator");
    read_field(j, "input_multiple", g.input_multiple, "generator");
    read_field(j, "learned_upsampling", g.learned_upsampling, "generator");
    read_field(j, "input_skips", g.input_skips, "generator");
    g.validate();
    return g;
}

json discriminator_to_json(const DiscriminatorConfig& d) {
    json j;
    j["input_channels"] = d.input_channels;
    j["patch"] = d.patch;
    json layers = json::array();
    for (const auto& layer : d.layers) {
        layers.push_back({layer.out_channels, layer.kernel, layer.stride, layer.pad});
    }
    j["layers"] = layers;
    return j;
}

DiscriminatorConfig discriminator_from_json(const json& j) {
    DiscriminatorConfig d;
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        if (preset == "desk") {
            d = DiscriminatorConfig::desk();
        } else if (preset == "paper") {
            d = DiscriminatorConfig::paper();
        } else if (preset == "tiny") {
            d = DiscriminatorConfig::tiny();
        } else {
            throw ConfigError("unknown discriminator preset \"" + preset + "\"");
        }
    }
    check_keys(j, "discriminator", {"preset", "input_channels", "patch", "layers"});
    read_field(j, "input_channels", d.input_channels, "discriminator");
    read_field(j, "patch", d.patch, "discriminator");
    if (j.contains("layers")) {
        d.layers.clear();
        for (const auto& layer : j.at("layers")) {
            if (!layer.is_array() || layer.size() != 4) {
                throw ConfigError(
                    "discriminator.layers entries must be [out_channels, kernel, stride, pad]");
            }
            d.layers.push_back({layer[0].get<int>(), layer[1].get<int>(), layer[2].get<int>(),
                                layer[3].get<int>()});
        }
    }
    d.validate();
    return d;
}

json weights_to_json(const LossWeights& w) {
    json j;
    j["alpha"] = w.alpha;
    j["beta"] = w.beta;
    j["use_l1"] = w.use_l1;
    j["use_msssim"] = w.use_msssim;
    j["use_adversarial"] = w.use_adversarial;
    return j;
}

LossWeights weights_from_json(const json& j) {
    LossWeights w;
    check_keys(j, "loss", {"alpha", "beta", "use_l1", "use_msssim", "use_adversarial"});
    read_field(j, "alpha", w.alpha, "loss");
    read_field(j, "beta", w.beta, "loss");
    read_field(j, "use_l1", w.use_l1, "loss");
    read_field(j, "use_msssim", w.use_msssim, "loss");
    read_field(j, "use_adversarial", w.use_adversarial, "loss");
    w.validate();
    return w;
}

} // namespace

json train_config_to_json(const TrainConfig& config) {
    json j;
    j["train"] = {{"learning_rate", config.learning_rate},
                  {"batch_size", config.batch_size},
                  {"max_iterations", config.max_iterations},
                  {"real_stream_ratio", config.real_stream_ratio},
                  {"seed", config.seed},
                  {"checkpoint_interval", config.checkpoint_interval},
                  {"d_steps_per_batch", config.d_steps_per_batch}};
    j["loss"] = weights_to_json(config.weights);
    j["generator"] = generator_to_json(config.generator);
    j["discriminator"] = discriminator_to_json(config.discriminator);
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    check_keys(j, "<root>", {"train", "loss", "generator", "discriminator", "data"});
    TrainConfig config = TrainConfig::desk();
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train",
                   {"learning_rate", "batch_size", "max_iterations", "real_stream_ratio", "seed",
                    "checkpoint_interval", "d_steps_per_batch"});
        read_field(t, "learning_rate", config.learning_rate, "train");
        read_field(t, "batch_size", config.batch_size, "train");
        read_field(t, "max_iterations", config.max_iterations, "train");
        read_field(t, "real_stream_ratio", config.real_stream_ratio, "train");
        read_field(t, "seed", config.seed, "train");
        read_field(t, "checkpoint_interval", config.checkpoint_interval, "train");
        read_field(t, "d_steps_per_batch", config.d_steps_per_batch, "train");
    }
    if (j.contains("loss")) config.weights = weights_from_json(j.at("loss"));
    if (j.contains("generator")) config.generator = generator_from_json(j.at("generator"));
    if (j.contains("discriminator")) {
        config.discriminator = discriminator_from_json(j.at("discriminator"));
    }
    config.validate();
    return config;
}

RunConfig run_config_from_json(const json& j) {
    RunConfig config;
    config.train = train_config_from_json(j);
    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, "data", {"synthetic_dir", "real_dir", "out_dir"});
        read_field(d, "synthetic_dir", config.data.synthetic_dir, "data");
        read_field(d, "real_dir", config.data.real_dir, "data");
        read_field(d, "out_dir", config.data.out_dir, "data");
    }
    return config;
}

json run_config_to_json(const RunConfig& config) {
    json j = train_config_to_json(config.train);
    j["data"] = {{"synthetic_dir", config.data.synthetic_dir},
                 {"real_dir", config.data.real_dir},
                 {"out_dir", config.data.out_dir}};
    return j;
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override must look like section.key=value, got \"" + assignment +
                          "\"");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("override path has an empty segment: " + path);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    for (const auto& assignment : overrides) apply_override(j, assignment);
    return run_config_from_json(j);
}

RunConfig default_run_config(const std::vector<std::string>& overrides) {
    json j = json::object();
    for (const auto& assignment : overrides) apply_override(j, assignment);
    return run_config_from_json(j);
}

} // namespace surfacenet
