#include "surfacenet/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "surfacenet/config_io.hpp"
#include "surfacenet/error.hpp"

namespace surfacenet {

double MetricsReport::mean_map_rmse() const {
    return (rmse[0] + rmse[1] + rmse[2] + rmse[3]) / 4.0;
}

std::array<double, 4> rmse_maps(const MaterialMaps& pred, const MaterialMaps& gt) {
    std::array<double, 4> out{};
    for (MapKind kind : kMapKinds) {
        const Image& p = pred.map(kind);
        const Image& g = gt.map(kind);
        if (!p.same_shape(g)) {
            throw ValidationError(std::string("rmse: ") + to_string(kind) + " shapes differ");
        }
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double d = p.data()[i] - g.data()[i];
            s += d * d;
        }
        out[static_cast<std::size_t>(kind)] = std::sqrt(s / static_cast<double>(p.size()));
    }
    return out;
}

double rmse_renderings(const MaterialMaps& pred, const MaterialMaps& gt) {
    const double intensity = training_flash().flash_intensity;
    double total = 0.0;
    for (const Vec3& position : evaluation_flash_positions()) {
        const LightSetup setup = LightSetup::flash(position, intensity);
        const Image a = render_flash(pred, setup).tone_mapped;
        const Image b = render_flash(gt, setup).tone_mapped;
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a.data()[i] - b.data()[i];
            s += d * d;
        }
        total += std::sqrt(s / static_cast<double>(a.size()));
    }
    return total / 5.0;
}

std::pair<double, Vec3> scalar_reduce(const MaterialMaps& maps) {
    double rough = 0.0;
    for (double v : maps.roughness.data()) rough += v;
    rough /= static_cast<double>(maps.roughness.size());

    Vec3 spec{0.0, 0.0, 0.0};
    const auto pixels = static_cast<double>(maps.specular.height()) * maps.specular.width();
    for (int y = 0; y < maps.specular.height(); ++y) {
        for (int x = 0; x < maps.specular.width(); ++x) {
            spec.x += maps.specular.at(y, x, 0);
            spec.y += maps.specular.at(y, x, 1);
            spec.z += maps.specular.at(y, x, 2);
        }
    }
    return {rough, spec / pixels};
}

MetricsReport evaluate_dataset(GeneratorNetwork& net, const std::vector<SvbrdfRecord>& records,
                               const std::string& label) {
    if (records.empty()) throw ValidationError("evaluate_dataset: no records");
    MetricsReport report;
    report.label = label;

    for (const auto& record : records) {
        try {
            const Tensor input = Trainer::record_input(record);
            const auto heads = net.forward(input, /*cache=*/false);
            MaterialMaps pred(record.maps.height(), record.maps.width());
            for (MapKind kind : kMapKinds) {
                pred.map(kind) = tensor_to_image(heads[static_cast<std::size_t>(kind)]);
            }
            const auto per_map = rmse_maps(pred, record.maps);
            const double render = rmse_renderings(pred, record.maps);
            for (std::size_t k = 0; k < 4; ++k) report.rmse[k] += per_map[k];
            report.rmse_render += render;
            ++report.sample_count;
        } catch (const Error&) {
            ++report.skipped;
        }
    }
    if (report.sample_count == 0) {
        throw Error("evaluate_dataset: every record failed (" + std::to_string(report.skipped) +
                    " skipped)");
    }
    for (std::size_t k = 0; k < 4; ++k) report.rmse[k] /= report.sample_count;
    report.rmse_render /= report.sample_count;
    return report;
}

void AblationPlan::validate() const {
    if (rows.empty()) throw ConfigError("ablation plan has no rows");
    std::set<std::string> labels;
    for (const auto& row : rows) {
        if (!labels.insert(row.label).second) {
            throw ConfigError("ablation plan labels must be unique; \"" + row.label +
                              "\" repeats");
        }
    }
}

AblationPlan architecture_ablation_plan(const GeneratorConfig& generator,
                                        const DiscriminatorConfig& discriminator,
                                        const LossWeights& weights) {
    AblationPlan plan;

    AblationRow base{"base", generator, discriminator, weights, false};
    base.generator.learned_upsampling = false;
    base.generator.input_skips = false;
    base.weights.use_adversarial = false;
    plan.rows.push_back(base);

    AblationRow decoder{"+decoder", generator, discriminator, weights, false};
    decoder.generator.learned_upsampling = true;
    decoder.generator.input_skips = false;
    decoder.weights.use_adversarial = false;
    plan.rows.push_back(decoder);

    AblationRow skip{"+skip", generator, discriminator, weights, false};
    skip.weights.use_adversarial = false;
    plan.rows.push_back(skip);

    AblationRow image{"+image-disc", generator, discriminator, weights, false};
    image.discriminator.patch = false;
    plan.rows.push_back(image);

    plan.rows.push_back({"+patch-disc", generator, discriminator, weights, false});
    plan.validate();
    return plan;
}

AblationPlan loss_ablation_plan(const GeneratorConfig& generator,
                                const DiscriminatorConfig& discriminator,
                                const LossWeights& weights) {
    AblationPlan plan;

    AblationRow l1{"l1", generator, discriminator, weights, false};
    l1.weights.use_l1 = true;
    l1.weights.use_msssim = false;
    l1.weights.use_adversarial = false;
    plan.rows.push_back(l1);

    AblationRow sup{"l_sup", generator, discriminator, weights, false};
    sup.weights.use_l1 = true;
    sup.weights.use_msssim = true;
    sup.weights.use_adversarial = false;
    plan.rows.push_back(sup);

    AblationRow unsup{"l_unsup", generator, discriminator, weights, false};
    unsup.weights.use_l1 = false;
    unsup.weights.use_msssim = false;
    unsup.weights.use_adversarial = true;
    plan.rows.push_back(unsup);

    plan.rows.push_back({"full_synth", generator, discriminator, weights, false});
    plan.rows.push_back({"full_real", generator, discriminator, weights, true});
    plan.validate();
    return plan;
}

AblationPlan ablation_plan_from_json(const nlohmann::json& j) {
    // Rows inherit the desk defaults; per-row sections use the same schema
    // as the training config.
    AblationPlan plan;
    if (!j.contains("rows") || !j.at("rows").is_array()) {
        throw ConfigError("ablation plan needs a \"rows\" array");
    }
    for (const auto& row_json : j.at("rows")) {
        nlohmann::json merged;
        if (row_json.contains("generator")) merged["generator"] = row_json.at("generator");
        if (row_json.contains("discriminator")) {
            merged["discriminator"] = row_json.at("discriminator");
        }
        if (row_json.contains("loss")) merged["loss"] = row_json.at("loss");
        const TrainConfig cfg = train_config_from_json(merged);

        AblationRow row;
        if (!row_json.contains("label")) throw ConfigError("ablation row is missing a label");
        row.label = row_json.at("label").get<std::string>();
        row.generator = cfg.generator;
        row.discriminator = cfg.discriminator;
        row.weights = cfg.weights;
        row.use_real = row_json.value("use_real", false);
        plan.rows.push_back(std::move(row));
    }
    plan.validate();
    return plan;
}

AblationPlan load_ablation_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open ablation plan: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("ablation plan is not valid JSON: " + std::string(e.what()));
    }
    return ablation_plan_from_json(j);
}

std::vector<MetricsReport> run_ablation(const AblationPlan& plan, const TrainConfig& base,
                                        const SyntheticDataset& train_data,
                                        const std::vector<SvbrdfRecord>& eval_records,
                                        const std::vector<RealImageRecord>* real,
                                        const std::filesystem::path& out_dir) {
    plan.validate();
    std::vector<MetricsReport> reports;
    for (const auto& row : plan.rows) {
        TrainConfig config = base;
        config.generator = row.generator;
        config.discriminator = row.discriminator;
        config.weights = row.weights;
        try {
            Trainer trainer(config); // identical seed for every row
            trainer.train(train_data, row.use_real ? real : nullptr, out_dir / row.label);
            reports.push_back(evaluate_dataset(trainer.generator(), eval_records, row.label));
        } catch (const Error& e) {
            MetricsReport failed;
            failed.label = row.label;
            failed.error = e.what();
            failed.render_valid = false;
            reports.push_back(std::move(failed));
        }
    }
    return reports;
}

std::string format_report_table(const std::vector<MetricsReport>& reports) {
    std::ostringstream out;
    out << std::left << std::setw(16) << "config" << std::right << std::setw(9) << "Diff."
        << std::setw(9) << "Nrm." << std::setw(9) << "Rgh." << std::setw(9) << "Spec."
        << std::setw(9) << "Rend." << std::setw(9) << "n" << "\n";
    for (const auto& r : reports) {
        out << std::left << std::setw(16) << r.label;
        if (!r.error.empty()) {
            out << "  FAILED: " << r.error << "\n";
            continue;
        }
        out << std::right << std::fixed << std::setprecision(4);
        for (std::size_t k = 0; k < 4; ++k) out << std::setw(9) << r.rmse[k];
        out << std::setw(9) << r.rmse_render << std::setw(9) << r.sample_count << "\n";
        out.unsetf(std::ios::fixed);
    }
    return out.str();
}

void write_reports_csv(const std::vector<MetricsReport>& reports,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report csv: " + path.string());
    out << "label,diffuse,normal,roughness,specular,render,samples,skipped,error\n";
    for (const auto& r : reports) {
        out << r.label << ',';
        for (std::size_t k = 0; k < 4; ++k) out << r.rmse[k] << ',';
        out << r.rmse_render << ',' << r.sample_count << ',' << r.skipped << ',' << r.error
            << "\n";
    }
}

} // namespace surfacenet
