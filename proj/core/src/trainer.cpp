#include "surfacenet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "surfacenet/checkpoint.hpp"
#include "surfacenet/config_io.hpp"
#include "surfacenet/error.hpp"

namespace surfacenet {

namespace {

constexpr std::uint64_t kSyntheticSalt = 0x53594e54ull;
constexpr std::uint64_t kRealSalt = 0x5245414cull;
constexpr double kRunningDecay = 0.98;

std::string checkpoint_name(std::int64_t iteration) {
    std::ostringstream out;
    out << "checkpoint_" << std::setw(7) << std::setfill('0') << iteration << ".snar";
    return out.str();
}

} // namespace

TrainConfig TrainConfig::desk() {
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_iterations = 2000;
    cfg.checkpoint_interval = 500;
    return cfg;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (real_stream_ratio < 0.0 || real_stream_ratio > 1.0) {
        throw ConfigError("real_stream_ratio must lie in [0,1]");
    }
    if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be at least 1");
    if (d_steps_per_batch < 1) throw ConfigError("d_steps_per_batch must be at least 1");
    weights.validate();
    generator.validate();
    discriminator.validate();
}

BatchSampler::BatchSampler(std::uint64_t seed, std::uint64_t stream_salt, int dataset_size)
    : seed_(seed), salt_(stream_salt), n_(dataset_size) {}

std::vector<int> BatchSampler::batch(std::int64_t step, int batch_size) const {
    std::vector<int> indices;
    indices.reserve(batch_size);
    for (int j = 0; j < batch_size; ++j) {
        const std::int64_t k = step * batch_size + j;
        const std::int64_t epoch = k / n_;
        if (epoch != cached_epoch_) {
            cached_perm_.resize(n_);
            for (int i = 0; i < n_; ++i) cached_perm_[i] = i;
            Rng rng(hash_combine(hash_combine(seed_, salt_), static_cast<std::uint64_t>(epoch)));
            rng.shuffle(cached_perm_);
            cached_epoch_ = epoch;
        }
        indices.push_back(cached_perm_[k % n_]);
    }
    return indices;
}

bool is_real_step(std::int64_t iteration, double ratio, double phase) {
    if (ratio <= 0.0) return false;
    if (ratio >= 1.0) return true;
    const auto steps_before = static_cast<std::int64_t>(
        std::floor(static_cast<double>(iteration) * ratio + phase));
    const auto steps_after = static_cast<std::int64_t>(
        std::floor(static_cast<double>(iteration + 1) * ratio + phase));
    return steps_after > steps_before;
}

Trainer::Trainer(const TrainConfig& config)
    : config_(config),
      generator_((config.validate(), config.generator), hash_combine(config.seed, 0x47454eull)),
      discriminator_(config.discriminator, hash_combine(config.seed, 0x44495343ull)),
      adam_g_(generator_.params()), adam_d_(discriminator_.params()),
      rng_(hash_combine(config.seed, 0x54524eull)) {
    scheduler_phase_ =
        static_cast<double>(splitmix64(config.seed ^ 0x5c4edull) >> 11) * 0x1.0p-53;
}

Tensor Trainer::record_input(const SvbrdfRecord& record) {
    Tensor t = image_to_tensor(record.render.pixels);
    for (double& v : t.v) v = std::clamp(v, 0.0, 1.0);
    return t;
}

Tensor Trainer::real_input(const RealImageRecord& record) {
    Tensor t = image_to_tensor(record.image);
    for (double& v : t.v) v = std::clamp(v, 0.0, 1.0);
    return t;
}

void Trainer::check_finite(const LossReport& report,
                           const std::vector<std::string>& batch_ids) const {
    const auto bad = [](double v) { return !std::isfinite(v); };
    if (bad(report.total) || bad(report.supervised) || bad(report.adv_g) ||
        bad(report.adv_d_real) || bad(report.adv_d_fake)) {
        std::ostringstream msg;
        msg << "non-finite loss at iteration " << iteration_ << "; offending batch ids:";
        for (const auto& id : batch_ids) msg << " " << id;
        throw Error(msg.str());
    }
}

void Trainer::update_running(const LossReport& report) {
    if (!running_init_) {
        running_supervised_ = report.supervised;
        running_total_ = report.total;
        running_init_ = true;
        return;
    }
    if (report.has_supervised) {
        running_supervised_ =
            kRunningDecay * running_supervised_ + (1.0 - kRunningDecay) * report.supervised;
    }
    running_total_ = kRunningDecay * running_total_ + (1.0 - kRunningDecay) * report.total;
}

void Trainer::update_discriminator(const std::vector<Tensor>& real_inputs,
                                   const std::vector<Tensor>& fake_inputs, LossReport& report) {
    const auto batch = static_cast<double>(real_inputs.size());
    for (int rep = 0; rep < config_.d_steps_per_batch; ++rep) {
        adam_d_.zero_grads(discriminator_.params());
        double sum_real = 0.0, sum_fake = 0.0, sum_loss = 0.0;
        for (std::size_t i = 0; i < real_inputs.size(); ++i) {
            Tensor scores = discriminator_.forward(real_inputs[i]);
            const double d_real = mean_score(scores);
            Tensor grad(scores.c, scores.h, scores.w);
            const double g_real = discriminator_loss_grad_real(d_real) /
                                  (static_cast<double>(scores.size()) * batch);
            grad.fill(g_real);
            discriminator_.backward(grad);

            scores = discriminator_.forward(fake_inputs[i]);
            const double d_fake = mean_score(scores);
            const double g_fake = discriminator_loss_grad_fake(d_fake) /
                                  (static_cast<double>(scores.size()) * batch);
            grad = Tensor(scores.c, scores.h, scores.w);
            grad.fill(g_fake);
            discriminator_.backward(grad);

            sum_real += d_real;
            sum_fake += d_fake;
            sum_loss += discriminator_loss(d_real, d_fake);
        }
        adam_d_.step(discriminator_.params(), config_.learning_rate);
        adam_d_.zero_grads(discriminator_.params());
        report.adv_d_real = sum_real / batch;
        report.adv_d_fake = sum_fake / batch;
        report.disc_loss = sum_loss / batch;
    }
}

StepReport Trainer::train_step_synthetic(const std::vector<const SvbrdfRecord*>& batch) {
    if (batch.empty()) throw ValidationError("synthetic step: empty batch");
    const auto batch_size = static_cast<double>(batch.size());
    std::vector<std::string> ids;
    for (const auto* record : batch) ids.push_back(record->id);

    LossReport report;
    report.has_supervised = true;
    report.has_adversarial = config_.weights.use_adversarial;

    std::vector<Tensor> inputs;
    std::vector<std::array<Tensor, 4>> gt;
    for (const auto* record : batch) {
        inputs.push_back(record_input(*record));
        std::array<Tensor, 4> maps;
        for (MapKind kind : kMapKinds) {
            maps[static_cast<std::size_t>(kind)] = image_to_tensor(record->maps.map(kind));
        }
        gt.push_back(std::move(maps));
    }

    // Discriminator update first: ground-truth maps real, G outputs fake.
    if (config_.weights.use_adversarial) {
        std::vector<Tensor> real_inputs, fake_inputs;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            real_inputs.push_back(discriminator_input(gt[i]));
            fake_inputs.push_back(
                discriminator_input(generator_.forward(inputs[i], /*cache=*/false)));
        }
        update_discriminator(real_inputs, fake_inputs, report);
    }

    // Generator update against the (just updated) discriminator.
    adam_g_.zero_grads(generator_.params());
    double sum_sup = 0.0, sum_adv = 0.0;
    std::array<double, 4> sum_l1{}, sum_msssim{};
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto pred = generator_.forward(inputs[i]);
        std::array<Tensor, 4> grads;
        for (MapKind kind : kMapKinds) {
            const auto k = static_cast<std::size_t>(kind);
            grads[k] = Tensor(pred[k].c, pred[k].h, pred[k].w);
        }
        const SupervisedLoss sup =
            supervised_loss(pred, gt[i], config_.weights, &grads, 1.0 / batch_size);
        sum_sup += sup.value;
        for (std::size_t k = 0; k < 4; ++k) {
            sum_l1[k] += sup.l1[k];
            sum_msssim[k] += sup.msssim[k];
        }

        if (config_.weights.use_adversarial) {
            Tensor scores = discriminator_.forward(discriminator_input(pred));
            const double d_fake = mean_score(scores);
            sum_adv += generator_adv_loss(d_fake);
            Tensor score_grad(scores.c, scores.h, scores.w);
            score_grad.fill(config_.weights.alpha * generator_adv_loss_grad(d_fake) /
                            (static_cast<double>(scores.size()) * batch_size));
            // Frozen D: route the gradient through without touching its
            // parameter accumulators.
            const Tensor d_input_grad = discriminator_.backward(score_grad, /*accumulate=*/false);
            const auto head_grads = split_discriminator_grad(d_input_grad);
            for (std::size_t k = 0; k < 4; ++k) {
                for (std::size_t j = 0; j < grads[k].size(); ++j) {
                    grads[k].v[j] += head_grads[k].v[j];
                }
            }
        }
        generator_.backward(grads);
    }
    adam_g_.step(generator_.params(), config_.learning_rate);
    adam_g_.zero_grads(generator_.params());

    report.supervised = sum_sup / batch_size;
    report.adv_g = sum_adv / batch_size;
    for (std::size_t k = 0; k < 4; ++k) {
        report.l1[k] = sum_l1[k] / batch_size;
        report.msssim[k] = sum_msssim[k] / batch_size;
    }
    report.total = total_generator_loss(report.supervised, report.adv_g, config_.weights);
    check_finite(report, ids);

    update_running(report);
    StepReport step{report, iteration_, false};
    ++iteration_;
    return step;
}

StepReport Trainer::train_step_real(const std::vector<const RealImageRecord*>& batch,
                                    const std::vector<const MaterialMaps*>& reservoir) {
    if (batch.empty()) throw ValidationError("real step: empty batch");
    if (reservoir.empty()) {
        throw ValidationError("real step: empty reservoir of ground-truth map sets");
    }
    if (!config_.weights.use_adversarial) {
        throw ConfigError("real stream requires the adversarial term");
    }
    const auto batch_size = static_cast<double>(batch.size());
    std::vector<std::string> ids;
    for (const auto* record : batch) ids.push_back(record->id);

    LossReport report;
    report.has_supervised = false;
    report.has_adversarial = true;

    std::vector<Tensor> inputs;
    for (const auto* record : batch) inputs.push_back(real_input(*record));

    // The discriminator's real examples come from the synthetic reservoir;
    // the photos themselves carry no maps.
    std::vector<Tensor> real_inputs, fake_inputs;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::size_t idx = static_cast<std::size_t>(
            (static_cast<std::uint64_t>(iteration_) * batch.size() + i) % reservoir.size());
        real_inputs.push_back(discriminator_input(*reservoir[idx]));
        fake_inputs.push_back(discriminator_input(generator_.forward(inputs[i], /*cache=*/false)));
    }
    update_discriminator(real_inputs, fake_inputs, report);

    // Generator update: adversarial term only, no supervised gradients.
    adam_g_.zero_grads(generator_.params());
    double sum_adv = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto pred = generator_.forward(inputs[i]);
        Tensor scores = discriminator_.forward(discriminator_input(pred));
        const double d_fake = mean_score(scores);
        sum_adv += generator_adv_loss(d_fake);
        Tensor score_grad(scores.c, scores.h, scores.w);
        score_grad.fill(config_.weights.alpha * generator_adv_loss_grad(d_fake) /
                        (static_cast<double>(scores.size()) * batch_size));
        const Tensor d_input_grad = discriminator_.backward(score_grad, /*accumulate=*/false);
        generator_.backward(split_discriminator_grad(d_input_grad));
    }
    adam_g_.step(generator_.params(), config_.learning_rate);
    adam_g_.zero_grads(generator_.params());

    report.adv_g = sum_adv / batch_size;
    report.total = config_.weights.alpha * report.adv_g;
    check_finite(report, ids);

    update_running(report);
    StepReport step{report, iteration_, true};
    ++iteration_;
    return step;
}

TrainResult Trainer::train(const SyntheticDataset& synthetic,
                           const std::vector<RealImageRecord>* real,
                           const std::filesystem::path& out_dir, const LogSink& sink) {
    if (synthetic.records.empty()) throw ConfigError("training requires a synthetic dataset");
    const int resolution = synthetic.records.front().maps.height();
    for (const auto& record : synthetic.records) {
        if (record.maps.height() != resolution || record.maps.width() != resolution) {
            throw ValidationError("record " + record.id + " resolution differs from the dataset");
        }
        const ValidationReport check = validate_maps(record.maps);
        if (!check.ok) {
            throw ValidationError("record " + record.id + " failed validation: " +
                                  check.summary());
        }
    }
    if (resolution % 8 != 0 || resolution < 16) {
        throw ConfigError("training resolution must be a multiple of 8 and at least 16");
    }

    std::filesystem::create_directories(out_dir);
    std::ofstream log(out_dir / "train_log.txt", std::ios::app);
    if (!log) throw IoError("cannot open training log under " + out_dir.string());

    const auto emit = [&](const StepReport& step) {
        const std::string line =
            step.losses.log_line(step.iteration, step.real_stream ? "real" : "synthetic");
        log << line << "\n";
        if (sink) sink(step, line);
    };

    double ratio = config_.real_stream_ratio;
    const bool have_real = real && !real->empty();
    if (!have_real && ratio > 0.0) {
        log << "# notice: no real dataset supplied; real_stream_ratio forced to 0\n";
        ratio = 0.0;
    }
    if (!config_.weights.use_adversarial && ratio > 0.0) {
        log << "# notice: adversarial term disabled; real_stream_ratio forced to 0\n";
        ratio = 0.0;
    }
    if (have_real) {
        for (const auto& record : *real) {
            if (record.image.height() != resolution || record.image.width() != resolution) {
                throw ValidationError("real record " + record.id +
                                      " resolution differs from the synthetic dataset");
            }
        }
    }

    std::vector<const MaterialMaps*> reservoir;
    for (const auto& record : synthetic.records) reservoir.push_back(&record.maps);

    const BatchSampler synth_sampler(config_.seed, kSyntheticSalt,
                                     static_cast<int>(synthetic.records.size()));
    const BatchSampler real_sampler(config_.seed, kRealSalt,
                                    have_real ? static_cast<int>(real->size()) : 1);

    TrainResult result;
    bool first_synthetic = true;

    // Stream step counters are recovered from the iteration index so a
    // resumed run replays the identical schedule and data order.
    std::int64_t synth_steps = 0;
    std::int64_t real_steps = 0;
    for (std::int64_t it = 0; it < iteration_; ++it) {
        if (is_real_step(it, ratio, scheduler_phase_)) {
            ++real_steps;
        } else {
            ++synth_steps;
        }
    }

    while (iteration_ < config_.max_iterations) {
        StepReport step;
        if (is_real_step(iteration_, ratio, scheduler_phase_)) {
            const auto indices = real_sampler.batch(real_steps, config_.batch_size);
            std::vector<const RealImageRecord*> batch;
            for (int idx : indices) batch.push_back(&(*real)[idx]);
            step = train_step_real(batch, reservoir);
            ++real_steps;
        } else {
            const auto indices = synth_sampler.batch(synth_steps, config_.batch_size);
            std::vector<const SvbrdfRecord*> batch;
            for (int idx : indices) batch.push_back(&synthetic.records[idx]);
            step = train_step_synthetic(batch);
            ++synth_steps;
            if (first_synthetic) {
                result.initial_supervised = step.losses.supervised;
                first_synthetic = false;
            }
        }
        emit(step);

        if (iteration_ % config_.checkpoint_interval == 0 ||
            iteration_ == config_.max_iterations) {
            const auto path = out_dir / checkpoint_name(iteration_);
            save_checkpoint(path);
            save_checkpoint(out_dir / "checkpoint_latest.snar");
            result.final_checkpoint = path;
        }
    }
    if (result.final_checkpoint.empty()) {
        result.final_checkpoint = out_dir / checkpoint_name(iteration_);
        save_checkpoint(result.final_checkpoint);
        save_checkpoint(out_dir / "checkpoint_latest.snar");
    }

    result.iterations = iteration_;
    result.final_supervised = running_supervised_;
    return result;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    Archive archive;

    nlohmann::json manifest;
    manifest["format"] = "surfacenet-checkpoint";
    manifest["version"] = 1;
    manifest["iteration"] = iteration_;
    manifest["rng_state"] = rng_.state();
    manifest["adam_g_steps"] = adam_g_.step_count();
    manifest["adam_d_steps"] = adam_d_.step_count();
    manifest["running_supervised"] = running_supervised_;
    manifest["running_total"] = running_total_;
    manifest["running_init"] = running_init_;
    manifest["config"] = train_config_to_json(config_);
    archive.set_manifest(manifest.dump(2));

    put_params(archive, "g", generator_.params());
    put_params(archive, "d", discriminator_.params());
    auto& self = const_cast<Trainer&>(*this);
    for (std::size_t i = 0; i < generator_.params().size(); ++i) {
        archive.put("adam_g.m." + generator_.params()[i].name, self.adam_g_.moment1(i));
        archive.put("adam_g.v." + generator_.params()[i].name, self.adam_g_.moment2(i));
    }
    for (std::size_t i = 0; i < discriminator_.params().size(); ++i) {
        archive.put("adam_d.m." + discriminator_.params()[i].name, self.adam_d_.moment1(i));
        archive.put("adam_d.v." + discriminator_.params()[i].name, self.adam_d_.moment2(i));
    }
    archive.save(path);
}

Trainer Trainer::load_checkpoint(const std::filesystem::path& path) {
    const Archive archive = Archive::load(path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(archive.manifest());
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "surfacenet-checkpoint" ||
        manifest.value("version", 0) != 1) {
        throw IoError("unsupported checkpoint format in " + path.string());
    }

    Trainer trainer(train_config_from_json(manifest.at("config")));
    load_params(archive, "g", trainer.generator_.params());
    load_params(archive, "d", trainer.discriminator_.params());

    const auto load_moments = [&](const std::string& prefix, nn::AdamOptimizer& adam,
                                  const std::vector<nn::ParamRef>& params) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto* m = archive.find(prefix + ".m." + params[i].name);
            const auto* v = archive.find(prefix + ".v." + params[i].name);
            if (!m || !v || m->size() != params[i].value->size() ||
                v->size() != params[i].value->size()) {
                throw IoError("checkpoint optimizer state mismatch for \"" + params[i].name +
                              "\"");
            }
            adam.moment1(i) = *m;
            adam.moment2(i) = *v;
        }
    };
    load_moments("adam_g", trainer.adam_g_, trainer.generator_.params());
    load_moments("adam_d", trainer.adam_d_, trainer.discriminator_.params());

    trainer.iteration_ = manifest.at("iteration").get<std::int64_t>();
    trainer.rng_.set_state(manifest.at("rng_state").get<std::uint64_t>());
    trainer.adam_g_.set_step_count(manifest.at("adam_g_steps").get<std::int64_t>());
    trainer.adam_d_.set_step_count(manifest.at("adam_d_steps").get<std::int64_t>());
    trainer.running_supervised_ = manifest.at("running_supervised").get<double>();
    trainer.running_total_ = manifest.at("running_total").get<double>();
    trainer.running_init_ = manifest.at("running_init").get<bool>();
    return trainer;
}

std::optional<Trainer> Trainer::try_resume(const std::filesystem::path& out_dir) {
    const auto latest = out_dir / "checkpoint_latest.snar";
    if (!std::filesystem::exists(latest)) return std::nullopt;
    return load_checkpoint(latest);
}

} // namespace surfacenet
