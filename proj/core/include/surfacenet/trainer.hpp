#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "surfacenet/dataset.hpp"
#include "surfacenet/discriminator.hpp"
#include "surfacenet/generator.hpp"
#include "surfacenet/losses.hpp"

namespace surfacenet {

struct TrainConfig {
    double learning_rate = 4e-5;
    int batch_size = 6;
    std::int64_t max_iterations = 250000;
    /// Fraction of steps that consume a real batch; applied only when
    /// real data is present and the adversarial term is enabled.
    double real_stream_ratio = 0.5;
    std::uint64_t seed = 0;
    std::int64_t checkpoint_interval = 1000;
    int d_steps_per_batch = 1;
    LossWeights weights;
    GeneratorConfig generator = GeneratorConfig::desk();
    DiscriminatorConfig discriminator = DiscriminatorConfig::desk();

    static TrainConfig desk();
    void validate() const; // throws ConfigError
};

/// Deterministic epoch-shuffled batch source; batch composition is a
/// pure function of the step index, so checkpoint resume replays the
/// exact data order.
class BatchSampler {
public:
    BatchSampler() = default;
    BatchSampler(std::uint64_t seed, std::uint64_t stream_salt, int dataset_size);
    std::vector<int> batch(std::int64_t step, int batch_size) const;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t salt_ = 0;
    int n_ = 0;
    mutable std::int64_t cached_epoch_ = -1;
    mutable std::vector<int> cached_perm_;
};

/// True when step `iteration` consumes a real batch. Error-diffusion on
/// the ratio keeps realized counts within one step of exact.
bool is_real_step(std::int64_t iteration, double ratio, double phase);

struct StepReport {
    LossReport losses;
    std::int64_t iteration = 0;
    bool real_stream = false;
};

struct TrainResult {
    std::int64_t iterations = 0;
    double final_supervised = 0.0;
    double initial_supervised = 0.0;
    std::filesystem::path final_checkpoint;
};

/// Owns both networks, their optimizers, the iteration counter and the
/// RNG; in other words, everything a checkpoint round-trips.
class Trainer {
public:
    explicit Trainer(const TrainConfig& config);

    /// One supervised step: D on (ground-truth maps vs G(render)), then G
    /// on the reconstruction loss plus the weighted adversarial term.
    StepReport train_step_synthetic(const std::vector<const SvbrdfRecord*>& batch);

    /// One unsupervised step: D on (reservoir maps vs G(photo)), then G on
    /// the adversarial term alone.
    StepReport train_step_real(const std::vector<const RealImageRecord*>& batch,
                               const std::vector<const MaterialMaps*>& reservoir);

    using LogSink = std::function<void(const StepReport&, const std::string& line)>;

    /// Full loop over both streams with checkpointing and per-step logs.
    TrainResult train(const SyntheticDataset& synthetic,
                      const std::vector<RealImageRecord>* real,
                      const std::filesystem::path& out_dir, const LogSink& sink = nullptr);

    void save_checkpoint(const std::filesystem::path& path) const;
    static Trainer load_checkpoint(const std::filesystem::path& path);
    /// Resumes from <dir>/checkpoint_latest.snar if present.
    static std::optional<Trainer> try_resume(const std::filesystem::path& out_dir);

    std::int64_t iteration() const { return iteration_; }
    GeneratorNetwork& generator() { return generator_; }
    DiscriminatorNetwork& discriminator() { return discriminator_; }
    const TrainConfig& config() const { return config_; }
    double scheduler_phase() const { return scheduler_phase_; }

    /// Network input for a synthetic record: the flash render clamped to
    /// [0,1] in linear space.
    static Tensor record_input(const SvbrdfRecord& record);
    static Tensor real_input(const RealImageRecord& record);

private:
    TrainConfig config_;
    GeneratorNetwork generator_;
    DiscriminatorNetwork discriminator_;
    nn::AdamOptimizer adam_g_, adam_d_;
    Rng rng_;
    std::int64_t iteration_ = 0;
    double scheduler_phase_ = 0.0;
    double running_supervised_ = 0.0;
    double running_total_ = 0.0;
    bool running_init_ = false;

    void update_running(const LossReport& report);
    void check_finite(const LossReport& report, const std::vector<std::string>& batch_ids) const;
    void update_discriminator(const std::vector<Tensor>& real_inputs,
                              const std::vector<Tensor>& fake_inputs, LossReport& report);
};

} // namespace surfacenet
