#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "surfacenet/config_io.hpp"
#include "surfacenet/dataset.hpp"
#include "surfacenet/error.hpp"
#include "surfacenet/evaluation.hpp"
#include "surfacenet/procedural.hpp"
#include "surfacenet/trainer.hpp"

namespace surfacenet::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

/// Resolves a dataset path against SURFACENET_DATA_DIR: empty paths use
/// the root itself, relative paths nest under it.
fs::path resolve_data_dir(const std::string& configured, const char* what) {
    const char* env = std::getenv("SURFACENET_DATA_DIR");
    if (configured.empty()) {
        if (!env || !*env) {
            throw ConfigError(std::string(what) +
                              " not set and SURFACENET_DATA_DIR is undefined");
        }
        return fs::path(env);
    }
    fs::path p(configured);
    if (p.is_relative() && env && *env) return fs::path(env) / p;
    return p;
}

Image gamma_decode_image(const Image& encoded, double gamma = 2.2) {
    Image out(encoded.height(), encoded.width(), encoded.channels());
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        out.data()[i] = std::pow(std::clamp(encoded.data()[i], 0.0, 1.0), gamma);
    }
    return out;
}

Image gamma_encode_image(const Image& linear, double gamma = 2.2) {
    Image out(linear.height(), linear.width(), linear.channels());
    for (std::size_t i = 0; i < linear.size(); ++i) {
        out.data()[i] = std::pow(std::clamp(linear.data()[i], 0.0, 1.0), 1.0 / gamma);
    }
    return out;
}

/// Reflect-101 padding on the bottom/right edges up to a multiple.
Image reflect_pad_to_multiple(const Image& image, int multiple) {
    const auto round_up = [multiple](int v) { return ((v + multiple - 1) / multiple) * multiple; };
    const int th = round_up(image.height());
    const int tw = round_up(image.width());
    if (th == image.height() && tw == image.width()) return image;
    if (th - image.height() >= image.height() || tw - image.width() >= image.width()) {
        throw ValidationError("image too small to reflect-pad to a multiple of " +
                              std::to_string(multiple));
    }
    Image out(th, tw, image.channels());
    for (int y = 0; y < th; ++y) {
        const int sy = y < image.height() ? y : 2 * image.height() - 2 - y;
        for (int x = 0; x < tw; ++x) {
            const int sx = x < image.width() ? x : 2 * image.width() - 2 - x;
            for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = image.at(sy, sx, c);
        }
    }
    return out;
}

Image crop(const Image& image, int h, int w) {
    Image out(h, w, image.channels());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = image.at(y, x, c);
        }
    }
    return out;
}

MaterialMaps crop_maps(const MaterialMaps& maps, int h, int w) {
    MaterialMaps out(h, w);
    for (MapKind kind : kMapKinds) {
        Image& dst = out.map(kind);
        const Image& src = maps.map(kind);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < dst.channels(); ++c) dst.at(y, x, c) = src.at(y, x, c);
            }
        }
    }
    return out;
}

/// Loads a map set either from a strip file or from a directory holding
/// diffuse/normal/roughness/specular PNGs.
MaterialMaps load_maps_argument(const fs::path& path) {
    if (fs::is_directory(path)) {
        const Image diffuse = read_image8(path / "diffuse.png");
        MaterialMaps maps(diffuse.height(), diffuse.width());
        maps.diffuse = gamma_decode_image(diffuse);
        maps.normal = read_image8(path / "normal.png");
        const Image rough = read_image8(path / "roughness.png");
        for (int y = 0; y < rough.height(); ++y) {
            for (int x = 0; x < rough.width(); ++x) {
                maps.roughness.at(y, x, 0) = rough.at(y, x, 0);
            }
        }
        maps.specular = read_image8(path / "specular.png");
        return maps;
    }
    return load_strip(path).maps;
}

void write_maps(const MaterialMaps& maps, const fs::path& dir, const std::string& stem) {
    fs::create_directories(dir);
    write_image8(dir / (stem + "_diffuse.png"), gamma_encode_image(maps.diffuse));
    write_image8(dir / (stem + "_normal.png"), maps.normal);
    write_image8(dir / (stem + "_roughness.png"), maps.roughness);
    write_image8(dir / (stem + "_specular.png"), maps.specular);
}

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

RunConfig load_config(const CommonOptions& common) {
    RunConfig config = common.config_path.empty()
                           ? default_run_config(common.overrides)
                           : load_run_config(common.config_path, common.overrides);
    if (common.seed) config.train.seed = *common.seed;
    config.train.validate();
    return config;
}

int cmd_gen_data(int n, const std::vector<std::string>& pattern_names, int resolution,
                 std::uint64_t seed, const std::string& out, bool force) {
    if (n <= 0) throw ConfigError("gen-data: need a positive record count");
    std::vector<Pattern> patterns;
    for (const auto& name : pattern_names) patterns.push_back(pattern_from_string(name));
    if (patterns.empty()) {
        patterns.assign(kAllPatterns.begin(), kAllPatterns.end());
    }
    // Validate the resolution before touching the output directory.
    generate_procedural(seed, patterns.front(), resolution);

    const fs::path out_dir(out);
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force) {
        throw ConfigError("gen-data: " + out_dir.string() +
                          " exists and is not empty (use --force to overwrite)");
    }
    fs::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.resolution = resolution;
    manifest.seed = seed;
    for (int i = 0; i < n; ++i) {
        const Pattern pattern = patterns[i % patterns.size()];
        std::ostringstream id;
        id << to_string(pattern) << "_" << std::setw(4) << std::setfill('0') << i;
        const MaterialMaps maps =
            generate_procedural(hash_combine(seed, static_cast<std::uint64_t>(i)), pattern,
                                resolution);
        const SvbrdfRecord record = make_training_record(maps, seed, id.str());
        save_strip(record, out_dir / (record.id + ".png"), manifest.layout);
        manifest.ids.push_back(record.id);
    }
    save_manifest(manifest, out_dir / "manifest.json");
    std::cout << "wrote " << n << " records at " << resolution << "x" << resolution << " to "
              << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_train(const CommonOptions& common, const std::string& out_override, bool resume) {
    const RunConfig config = load_config(common);
    const fs::path out_dir = out_override.empty() ? fs::path(config.data.out_dir)
                                                  : fs::path(out_override);

    const fs::path synth_dir = resolve_data_dir(config.data.synthetic_dir, "data.synthetic_dir");
    const SyntheticDataset synthetic = load_synthetic_dataset(synth_dir);

    std::optional<std::vector<RealImageRecord>> real;
    if (!config.data.real_dir.empty()) {
        const fs::path real_dir = resolve_data_dir(config.data.real_dir, "data.real_dir");
        real = load_real_images(real_dir, synthetic.manifest.resolution).records;
    }

    std::optional<Trainer> trainer;
    if (resume) {
        trainer = Trainer::try_resume(out_dir);
        if (trainer && common.verbose) {
            std::cout << "resuming from iteration " << trainer->iteration() << "\n";
        }
    }
    if (!trainer) trainer.emplace(config.train);

    std::cout << "generator parameters:     " << trainer->generator().parameter_count() << "\n";
    std::cout << "discriminator parameters: " << trainer->discriminator().parameter_count()
              << "\n";

    fs::create_directories(out_dir);
    {
        std::ofstream cfg(out_dir / "config.json");
        cfg << run_config_to_json(config).dump(2) << "\n";
    }

    const bool verbose = common.verbose;
    const auto sink = [verbose](const StepReport& step, const std::string& line) {
        if (verbose || (step.iteration % 50 == 0)) std::cout << line << "\n";
    };
    const TrainResult result =
        trainer->train(synthetic, real ? &*real : nullptr, out_dir, sink);
    std::cout << "finished " << result.iterations << " iterations; supervised loss "
              << result.initial_supervised << " -> " << result.final_supervised
              << " (running average)\n";
    std::cout << "final checkpoint: " << result.final_checkpoint.string() << "\n";
    return kExitOk;
}

int cmd_infer(const std::string& checkpoint, const std::vector<std::string>& inputs,
              const std::string& out, bool pad) {
    Trainer trainer = Trainer::load_checkpoint(checkpoint);
    GeneratorNetwork& net = trainer.generator();

    std::vector<fs::path> files;
    for (const auto& input : inputs) {
        const fs::path p(input);
        if (fs::is_directory(p)) {
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file()) files.push_back(entry.path());
            }
        } else {
            files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("infer: no input images");

    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    for (const auto& file : files) {
        const Image photo = gamma_decode_image(read_image8(file));
        const int multiple = net.config().input_multiple;
        Image network_input = photo;
        if (photo.height() % multiple != 0 || photo.width() % multiple != 0) {
            if (!pad) {
                throw ValidationError("infer: " + file.string() + " is " +
                                      std::to_string(photo.height()) + "x" +
                                      std::to_string(photo.width()) +
                                      "; resolution must be a multiple of " +
                                      std::to_string(multiple) + " (or pass --pad)");
            }
            network_input = reflect_pad_to_multiple(photo, multiple);
        }
        MaterialMaps maps = net.forward_maps(network_input);
        if (maps.height() != photo.height() || maps.width() != photo.width()) {
            maps = crop_maps(maps, photo.height(), photo.width());
        }

        const std::string stem = file.stem().string();
        write_maps(maps, out_dir, stem);
        SvbrdfRecord record;
        record.maps = maps;
        record.render = render_flash(maps, training_flash());
        record.id = stem;
        save_strip(record, out_dir / (stem + "_strip.png"));
        std::cout << stem << ": wrote " << (out_dir / (stem + "_{diffuse,normal,roughness,specular,strip}.png")).string()
                  << "\n";
    }
    return kExitOk;
}

int cmd_render(const std::string& maps_path, const std::string& flash_spec,
               const std::string& env_file, bool five_lights, const std::string& out) {
    const MaterialMaps maps = load_maps_argument(maps_path);

    if (five_lights) {
        const fs::path out_dir(out);
        fs::create_directories(out_dir);
        const char* names[5] = {"top-left", "top-right", "bottom-left", "bottom-right", "center"};
        const auto positions = evaluation_flash_positions();
        for (int i = 0; i < 5; ++i) {
            const auto setup = LightSetup::flash(positions[i], training_flash().flash_intensity);
            write_image8(out_dir / ("render_" + std::string(names[i]) + ".png"),
                         render_flash(maps, setup).tone_mapped);
        }
        std::cout << "wrote 5 renders to " << out_dir.string() << "\n";
        return kExitOk;
    }

    RenderedImage rendered;
    if (!env_file.empty()) {
        rendered = render_environment(maps, load_environment_samples(env_file));
    } else {
        LightSetup setup = training_flash();
        if (!flash_spec.empty()) {
            std::istringstream fields(flash_spec);
            double x, y, z, intensity;
            char comma;
            if (!(fields >> x >> comma >> y >> comma >> z >> comma >> intensity)) {
                throw ConfigError("render: --flash expects \"x,y,z,intensity\"");
            }
            setup = LightSetup::flash({x, y, z}, intensity);
        }
        rendered = render_flash(maps, setup);
    }
    write_image8(out, rendered.tone_mapped);
    std::cout << "wrote " << out << "\n";
    return kExitOk;
}

int cmd_eval(const CommonOptions& common, const std::string& checkpoint,
             const std::string& dataset_dir, const std::string& out) {
    (void)common;
    Trainer trainer = Trainer::load_checkpoint(checkpoint);
    const SyntheticDataset dataset =
        load_synthetic_dataset(resolve_data_dir(dataset_dir, "dataset"));

    const MetricsReport report = evaluate_dataset(trainer.generator(), dataset.records);
    const std::vector<MetricsReport> rows{report};
    const std::string table = format_report_table(rows);
    std::cout << table;

    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    std::ofstream txt(out_dir / "report.txt");
    txt << table;
    write_reports_csv(rows, out_dir / "report.csv");
    return kExitOk;
}

int cmd_ablate(const CommonOptions& common, const std::string& plan_path,
               const std::string& builtin, const std::string& train_dir,
               const std::string& eval_dir, const std::string& real_dir,
               const std::string& out) {
    const RunConfig config = load_config(common);

    AblationPlan plan;
    if (!plan_path.empty()) {
        plan = load_ablation_plan(plan_path);
    } else if (builtin == "architecture") {
        plan = architecture_ablation_plan(config.train.generator, config.train.discriminator,
                                          config.train.weights);
    } else if (builtin == "loss") {
        plan = loss_ablation_plan(config.train.generator, config.train.discriminator,
                                  config.train.weights);
    } else {
        throw ConfigError("ablate: pass --plan FILE or --builtin architecture|loss");
    }

    const SyntheticDataset train_data =
        load_synthetic_dataset(resolve_data_dir(train_dir, "train dataset"));
    const SyntheticDataset eval_data =
        load_synthetic_dataset(resolve_data_dir(eval_dir, "eval dataset"));

    std::optional<std::vector<RealImageRecord>> real;
    if (!real_dir.empty()) {
        real = load_real_images(resolve_data_dir(real_dir, "real dataset"),
                                train_data.manifest.resolution)
                   .records;
    }

    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    const auto reports = run_ablation(plan, config.train, train_data, eval_data.records,
                                      real ? &*real : nullptr, out_dir);
    const std::string table = format_report_table(reports);
    std::cout << table;
    std::ofstream txt(out_dir / "ablation.txt");
    txt << table;
    write_reports_csv(reports, out_dir / "ablation.csv");
    return kExitOk;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"SurfaceNet: adversarial SVBRDF estimation from a single image"};
    app.require_subcommand(1);

    CommonOptions common;
    app.add_option("--config", common.config_path, "JSON config file");
    app.add_option("--set", common.overrides, "dotted-key override, e.g. train.batch_size=4");
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "override train.seed");
    app.add_flag("--verbose", common.verbose, "chatty output");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a procedural SVBRDF dataset");
    int gen_n = 8;
    std::vector<std::string> gen_patterns;
    int gen_resolution = 64;
    std::uint64_t gen_seed = 1;
    std::string gen_out = "data/synthetic";
    bool gen_force = false;
    gen->add_option("--n", gen_n, "number of records");
    gen->add_option("--patterns", gen_patterns,
                    "pattern subset (checker bricks perlin voronoi stripes)");
    gen->add_option("--resolution", gen_resolution, "map resolution (power of two >= 32)");
    gen->add_option("--gen-seed", gen_seed, "dataset seed");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_flag("--force", gen_force, "overwrite a non-empty output directory");

    // train
    auto* train = app.add_subcommand("train", "train generator and discriminator");
    std::string train_out;
    bool train_resume = false;
    train->add_option("--out", train_out, "output directory (default from config data.out_dir)");
    train->add_flag("--resume", train_resume, "resume from the latest checkpoint in --out");

    // infer
    auto* infer = app.add_subcommand("infer", "estimate maps from photographs");
    std::string infer_checkpoint;
    std::vector<std::string> infer_inputs;
    std::string infer_out = "out/maps";
    bool infer_pad = false;
    infer->add_option("--checkpoint", infer_checkpoint, "trained checkpoint")->required();
    infer->add_option("--input", infer_inputs, "image file(s) or directory")->required();
    infer->add_option("--out", infer_out, "output directory");
    infer->add_flag("--pad", infer_pad, "reflect-pad to the next valid resolution");

    // render
    auto* render = app.add_subcommand("render", "render a map set");
    std::string render_maps;
    std::string render_flash_spec;
    std::string render_env;
    bool render_five = false;
    std::string render_out = "render.png";
    render->add_option("--maps", render_maps, "strip file or directory of map images")
        ->required();
    render->add_option("--flash", render_flash_spec, "flash light \"x,y,z,intensity\"");
    render->add_option("--env", render_env, "environment sample file (dx dy dz r g b per line)");
    render->add_flag("--five-lights", render_five, "render the five evaluation flash positions");
    render->add_option("--out", render_out, "output image (or directory with --five-lights)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_checkpoint;
    std::string eval_dataset;
    std::string eval_out = "out/eval";
    eval->add_option("--checkpoint", eval_checkpoint, "trained checkpoint")->required();
    eval->add_option("--dataset", eval_dataset, "dataset directory")->required();
    eval->add_option("--out", eval_out, "report directory");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train and compare ablation rows");
    std::string ablate_plan;
    std::string ablate_builtin;
    std::string ablate_train_dir;
    std::string ablate_eval_dir;
    std::string ablate_real_dir;
    std::string ablate_out = "out/ablation";
    ablate->add_option("--plan", ablate_plan, "JSON plan file");
    ablate->add_option("--builtin", ablate_builtin, "builtin plan: architecture | loss");
    ablate->add_option("--train-dataset", ablate_train_dir, "training dataset directory")
        ->required();
    ablate->add_option("--eval-dataset", ablate_eval_dir, "held-out dataset directory")
        ->required();
    ablate->add_option("--real", ablate_real_dir, "optional real-image directory");
    ablate->add_option("--out", ablate_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    if (seed_opt->count() > 0) common.seed = seed_value;

    try {
        if (gen->parsed()) {
            return cmd_gen_data(gen_n, gen_patterns, gen_resolution, gen_seed, gen_out,
                                gen_force);
        }
        if (train->parsed()) return cmd_train(common, train_out, train_resume);
        if (infer->parsed()) return cmd_infer(infer_checkpoint, infer_inputs, infer_out, infer_pad);
        if (render->parsed()) {
            return cmd_render(render_maps, render_flash_spec, render_env, render_five,
                              render_out);
        }
        if (eval->parsed()) return cmd_eval(common, eval_checkpoint, eval_dataset, eval_out);
        if (ablate->parsed()) {
            return cmd_ablate(common, ablate_plan, ablate_builtin, ablate_train_dir,
                              ablate_eval_dir, ablate_real_dir, ablate_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

} // namespace surfacenet::cli
