#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surfacenet/dataset.hpp"
#include "surfacenet/trainer.hpp"

namespace surfacenet {

/// Per-map and rendering RMSE for one model/dataset pairing, matching the
/// Diff./Nrm./Rgh./Spec./Rend. table layout.
struct MetricsReport {
    std::string label;
    std::array<double, 4> rmse{}; // kMapKinds order
    double rmse_render = 0.0;
    int sample_count = 0;
    int skipped = 0;
    bool render_valid = true;
    std::string error; // non-empty when the row failed outright

    double mean_map_rmse() const;
};

/// Per-kind RMSE over all pixels and channels, in stored [0,1] space
/// (normals compare in their encoded form).
std::array<double, 4> rmse_maps(const MaterialMaps& pred, const MaterialMaps& gt);

/// Renders both map sets under the five evaluation flash positions and
/// averages the per-position RMSE in tone-mapped space.
double rmse_renderings(const MaterialMaps& pred, const MaterialMaps& gt);

/// Pixel means: (roughness scalar, specular RGB), used by the
/// natural-illumination comparison protocol.
std::pair<double, Vec3> scalar_reduce(const MaterialMaps& maps);

/// Runs the generator over every record and averages rmse_maps and
/// rmse_renderings. Failing records are skipped and counted; an all-skip
/// run raises.
MetricsReport evaluate_dataset(GeneratorNetwork& net, const std::vector<SvbrdfRecord>& records,
                               const std::string& label = "eval");

struct AblationRow {
    std::string label;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    LossWeights weights;
    bool use_real = false;
};

struct AblationPlan {
    std::vector<AblationRow> rows;
    void validate() const; // unique labels, non-empty
};

/// Architecture rows: base (interpolated upsampling, no skips, no
/// adversarial), +decoder, +skip, +image discriminator, +patch
/// discriminator.
AblationPlan architecture_ablation_plan(const GeneratorConfig& generator,
                                        const DiscriminatorConfig& discriminator,
                                        const LossWeights& weights);

/// Loss rows: l1, l_sup, l_unsup, full (synthetic only), full (with real).
AblationPlan loss_ablation_plan(const GeneratorConfig& generator,
                                const DiscriminatorConfig& discriminator,
                                const LossWeights& weights);

AblationPlan ablation_plan_from_json(const nlohmann::json& j);
AblationPlan load_ablation_plan(const std::filesystem::path& path);

/// Trains one model per row under identical seeds and budgets, then
/// evaluates each on the held-out records. Row failures are recorded and
/// the remaining rows continue.
std::vector<MetricsReport> run_ablation(const AblationPlan& plan, const TrainConfig& base,
                                        const SyntheticDataset& train_data,
                                        const std::vector<SvbrdfRecord>& eval_records,
                                        const std::vector<RealImageRecord>* real,
                                        const std::filesystem::path& out_dir);

std::string format_report_table(const std::vector<MetricsReport>& reports);
void write_reports_csv(const std::vector<MetricsReport>& reports,
                       const std::filesystem::path& path);

} // namespace surfacenet
