#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "letterdec/analysis.hpp"
#include "letterdec/config.hpp"
#include "letterdec/dataio.hpp"
#include "letterdec/harness.hpp"
#include "letterdec/report.hpp"
#include "letterdec/synth.hpp"

using namespace letterdec;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config_path;
    std::string out_dir;
    int jobs = -1;
    long long seed = -1;
};

RunConfig resolve_config(const Overrides& ov) {
    RunConfig cfg = load_config(ov.config_path);
    if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
    if (ov.jobs >= 0) cfg.jobs = ov.jobs;
    if (ov.seed >= 0) cfg.seed = static_cast<uint64_t>(ov.seed);
    return cfg;
}

void write_provenance(const RunConfig& cfg, const std::string& command) {
    fs::create_directories(cfg.out_dir);
    const fs::path path = fs::path(cfg.out_dir) / ("provenance_" + command + ".json");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write provenance: " + path.string());
    f << config_to_json(cfg, command) << "\n";
}

int effective_jobs(const RunConfig& cfg) {
    if (cfg.jobs > 0) return cfg.jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string window_tag(const TimeWindow& w) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "w%g-%g", w.start_ms, w.end_ms);
    return buf;
}

std::string band_tag(const BandSpec& b) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "b%g-%g", b.low_hz, b.high_hz);
    return buf;
}

bool window_in_axis(const TimeWindow& w, const EpochAxis& axis) {
    int first = 0, last = 0;
    window_to_sample_range(w, axis, first, last);
    return first >= 0 && first < last && last <= axis.n_samples;
}

int cmd_synth(const RunConfig& cfg) {
    EpochAxis axis;
    axis.sampling_rate_hz = 250.0;
    if (cfg.synth.shape == "raw") {
        axis.start_ms = -200.0;
        axis.n_samples = 801;
    } else {
        axis.start_ms = 0.0;
        axis.n_samples = 400;
    }
    const ChannelLayout layout = default_layout_24();
    auto templates = make_templates(layout.n_channels(), axis.n_samples, kNumClasses, cfg.synth.smoothness_hz,
                                    cfg.synth.template_seed, axis.sampling_rate_hz);
    Dataset ds = synthesize_dataset(templates, cfg.synth.spec, axis, layout, cfg.subject_id);
    const std::string target = (fs::path(cfg.out_dir) / "dataset").string();
    save_dataset(ds, target);
    write_provenance(cfg, "synth");
    std::cout << "synth: wrote " << ds.epochs.size() << " epochs (" << layout.n_channels() << "x" << axis.n_samples
              << ") to " << target << "\n";
    return 0;
}

int cmd_validate(const RunConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("config has no dataset path");
    Dataset ds = load_dataset(cfg.dataset);
    auto report = validate_dataset(ds);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream f(fs::path(cfg.out_dir) / "validation_report.json", std::ios::trunc);
        f << report.to_json() << "\n";
    }
    write_provenance(cfg, "validate");
    std::cout << "validate: " << (report.pass ? "pass" : "FAIL") << ", " << ds.epochs.size() << " epochs, "
              << report.warnings.size() << " warnings\n";
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& f : report.failures) std::cerr << "failure: " << f << "\n";
    return report.pass ? 0 : 2;
}

int cmd_import(const RunConfig& cfg) {
    if (cfg.import.dir.empty()) throw ConfigError("config import.dir is required");
    ChannelLayout layout;
    if (cfg.import.channels.empty()) {
        layout = default_layout_24();
    } else {
        layout.labels = cfg.import.channels;
    }
    EpochAxis axis;
    axis.sampling_rate_hz = cfg.import.sampling_rate_hz;
    axis.start_ms = cfg.import.start_ms;
    axis.n_samples = cfg.import.n_samples;
    Dataset ds = import_csv(cfg.import.dir, layout, axis);
    ds.subject_id = cfg.subject_id;
    const std::string target = (fs::path(cfg.out_dir) / "dataset").string();
    save_dataset(ds, target);
    write_provenance(cfg, "import");
    std::cout << "import: " << ds.epochs.size() << " epochs -> " << target << "\n";
    return 0;
}

int cmd_preprocess(const RunConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("config has no dataset path");
    Dataset ds = load_dataset(cfg.dataset);
    if (cfg.preprocess.ica != "skip")
        std::cerr << "warning: ica stage is a pass-through; artifact removal is not applied\n";
    PipelineSpec spec;
    if (cfg.preprocess.apply_band) spec.band = cfg.preprocess.band;
    if (cfg.preprocess.apply_baseline) spec.baseline = cfg.preprocess.baseline;
    if (cfg.preprocess.apply_crop) spec.crop = cfg.preprocess.crop;
    spec.zscore = cfg.preprocess.zscore;
    Dataset out = preprocess_dataset(ds, spec);
    const std::string target = (fs::path(cfg.out_dir) / "preprocessed").string();
    save_dataset(out, target);
    write_provenance(cfg, "preprocess");
    std::cout << "preprocess: " << out.epochs.size() << " epochs, shape " << out.layout.n_channels() << "x"
              << out.axis.n_samples << " -> " << target << "\n";
    return 0;
}

int cmd_similarity(const RunConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("config has no dataset path");
    Dataset ds = load_dataset(cfg.dataset);
    fs::create_directories(cfg.out_dir);

    std::vector<std::pair<std::string, std::pair<TimeWindow, BandSpec>>> jobs;
    jobs.push_back({"main", {cfg.similarity.main_window, cfg.similarity.main_band}});
    for (const auto& w : cfg.similarity.windows)
        for (const auto& b : cfg.similarity.bands)
            jobs.push_back({window_tag(w) + "_" + band_tag(b), {w, b}});

    SimilarityOptions opts;
    opts.apply_pipeline = cfg.similarity.apply_pipeline;
    opts.zscore = cfg.preprocess.zscore;
    if (cfg.preprocess.apply_baseline && window_in_axis(cfg.preprocess.baseline, ds.axis)) {
        opts.baseline = cfg.preprocess.baseline;
    } else if (cfg.preprocess.apply_baseline) {
        std::cerr << "note: baseline window outside the dataset axis; skipping baseline in similarity pipeline\n";
    }

    std::ofstream summary(fs::path(cfg.out_dir) / "similarity_summary.csv", std::ios::trunc);
    summary << "tag,window_start_ms,window_end_ms,band_low_hz,band_high_hz,contrast,p_value,n_permutations,"
               "zero_variance_channels\n";

    int index = 0;
    for (const auto& [tag, pair] : jobs) {
        const auto& [window, band] = pair;
        auto m = similarity_matrix(ds, band, window, cfg.seed, opts);
        auto dc = diagonal_contrast(m, cfg.similarity.permutations, mix_seed(cfg.seed, index));
        write_similarity_csv(m, (fs::path(cfg.out_dir) / ("similarity_" + tag + ".csv")).string());
        render_heatmap(m, (fs::path(cfg.out_dir) / ("similarity_" + tag + ".pgm")).string(),
                       cfg.similarity.heatmap_lo, cfg.similarity.heatmap_hi);
        summary << tag << "," << format_double(window.start_ms) << "," << format_double(window.end_ms) << ","
                << format_double(band.low_hz) << "," << format_double(band.high_hz) << ","
                << format_double(dc.contrast) << "," << format_double(dc.p_value) << "," << dc.n_permutations << ","
                << m.zero_variance_channels << "\n";
        std::cout << "similarity " << tag << ": contrast " << format_double(dc.contrast) << ", p "
                  << format_double(dc.p_value) << "\n";
        ++index;
    }

    if (cfg.similarity.full52) {
        auto full = similarity_matrix_full52(ds, cfg.similarity.main_band, cfg.similarity.main_window, cfg.seed, opts);
        std::vector<std::string> labels;
        for (int h = 0; h < 2; ++h)
            for (int i = 0; i < kNumClasses; ++i)
                labels.push_back(std::string(1, index_to_letter(i)) + (h == 0 ? "_A" : "_B"));
        write_matrix_csv(full, labels, labels, (fs::path(cfg.out_dir) / "similarity_full52.csv").string());
    }
    write_provenance(cfg, "similarity");
    return 0;
}

// The dataset feeding PCA/snapshots; similarity options do not apply here, the
// data is used as stored.
Dataset load_for_patterns(const RunConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("config has no dataset path");
    return load_dataset(cfg.dataset);
}

int cmd_pca(const RunConfig& cfg) {
    Dataset ds = load_for_patterns(cfg);
    fs::create_directories(cfg.out_dir);
    std::ofstream var_csv(fs::path(cfg.out_dir) / "pca_variance.csv", std::ios::trunc);
    var_csv << "letter,half,component,explained_variance,total_variance,ratio\n";
    for (char letter : cfg.pca.letters) {
        auto [a, b] = split_half_average(ds, letter_to_index(letter), cfg.seed);
        for (const auto* pattern : {&a, &b}) {
            auto r = temporal_pca(*pattern, cfg.pca.components);
            const std::string tag = std::string(1, letter) + "_" + pattern->half;
            std::ofstream f(fs::path(cfg.out_dir) / ("pca_" + tag + ".csv"), std::ios::trunc);
            f << "time_ms";
            for (int k = 0; k < cfg.pca.components; ++k) f << ",pc" << (k + 1);
            f << "\n";
            for (int t = 0; t < pattern->n_samples; ++t) {
                f << format_double(ds.axis.time_ms(t));
                for (int k = 0; k < cfg.pca.components; ++k) f << "," << format_double(r.scores[k][t]);
                f << "\n";
            }
            for (int k = 0; k < cfg.pca.components; ++k)
                var_csv << letter << "," << pattern->half << "," << (k + 1) << ","
                        << format_double(r.explained_variance[k]) << "," << format_double(r.total_variance) << ","
                        << format_double(r.explained_variance[k] / r.total_variance) << "\n";
        }
    }
    write_provenance(cfg, "pca");
    std::cout << "pca: wrote score series for " << cfg.pca.letters.size() << " letters x 2 halves\n";
    return 0;
}

int cmd_snapshot(const RunConfig& cfg) {
    Dataset ds = load_for_patterns(cfg);
    fs::create_directories(cfg.out_dir);
    for (char letter : cfg.pca.letters) {
        auto [a, b] = split_half_average(ds, letter_to_index(letter), cfg.seed);
        for (const auto* pattern : {&a, &b}) {
            auto snap = scalp_snapshot(*pattern, cfg.pca.snapshot_times_ms, ds.axis, ds.layout);
            const std::string tag = std::string(1, letter) + "_" + pattern->half;
            std::ofstream f(fs::path(cfg.out_dir) / ("snapshot_" + tag + ".csv"), std::ios::trunc);
            f << "time_ms";
            for (const auto& label : snap.channel_labels) f << "," << label;
            f << "\n";
            for (size_t i = 0; i < snap.times_ms.size(); ++i) {
                f << format_double(snap.times_ms[i]);
                for (double v : snap.values[i]) f << "," << format_double(v);
                f << "\n";
            }
        }
    }
    write_provenance(cfg, "snapshot");
    std::cout << "snapshot: wrote " << cfg.pca.letters.size() * 2 << " tables\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("config has no dataset path");
    Dataset ds = load_dataset(cfg.dataset);
    fs::create_directories(cfg.out_dir);

    for (const auto& mc : cfg.models) {
        if (mc.n_channels != ds.layout.n_channels() || mc.n_timepoints != ds.axis.n_samples)
            throw DataError("model " + arch_name(mc.arch) + " expects " + std::to_string(mc.n_channels) + "x" +
                            std::to_string(mc.n_timepoints) + " but dataset is " +
                            std::to_string(ds.layout.n_channels()) + "x" + std::to_string(ds.axis.n_samples));
        auto model = build_model<float>(mc, cfg.seed);
        std::ofstream f(fs::path(cfg.out_dir) / ("model_summary_" + arch_name(mc.arch) + ".json"), std::ios::trunc);
        f << model->summary().to_json() << "\n";
    }

    TrainConfig tc = cfg.training;
    tc.checkpoint_dir = cfg.out_dir;
    RunReport report = run_training(cfg.models, ds, tc, cfg.seed, effective_jobs(cfg));
    write_run_report_files(report, cfg.out_dir);
    write_provenance(cfg, "train");

    int dead_models = 0;
    for (const auto& m : report.models) {
        std::cout << m.model << ": max " << format_double(m.stats.max) << "%, mean " << format_double(m.stats.mean)
                  << "% over " << report.k << " folds";
        if (m.n_failed > 0) std::cout << " (" << m.n_failed << " failed)";
        std::cout << "\n";
        if (m.n_failed == static_cast<int>(m.folds.size())) ++dead_models;
    }
    if (report.anova)
        std::cout << "anova: F " << format_double(report.anova->f) << ", p " << format_double(report.anova->p) << "\n";
    if (dead_models > 0) {
        std::cerr << "error: " << dead_models << " model(s) failed on every fold\n";
        return 3;
    }
    return 0;
}

int cmd_report(const RunConfig& cfg, const std::string& input) {
    std::ifstream f(input);
    if (!f) throw DataError("run report not found: " + input);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    RunReport report = run_report_from_json(text);
    write_run_report_files(report, cfg.out_dir);
    std::cout << "report: rewrote tables for " << report.models.size() << " models -> " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"letterdec: imagined-handwriting EEG letter decoding pipeline"};
    app.require_subcommand(1);

    Overrides ov;
    std::string report_input;

    auto add_common = [&](CLI::App* sub, bool config_required = true) {
        auto* opt = sub->add_option("--config", ov.config_path, "JSON config file");
        if (config_required) opt->required();
        sub->add_option("--out", ov.out_dir, "output directory (overrides config)");
        sub->add_option("--jobs", ov.jobs, "worker cap, 0 = hardware (overrides config)");
        sub->add_option("--seed", ov.seed, "run seed (overrides config)");
    };

    add_common(app.add_subcommand("synth", "generate a synthetic dataset in canonical format"));
    add_common(app.add_subcommand("validate", "validate a canonical dataset"));
    add_common(app.add_subcommand("import", "import CSV epochs into canonical format"));
    add_common(app.add_subcommand("preprocess", "filter, baseline, crop, z-score"));
    add_common(app.add_subcommand("similarity", "split-half similarity matrices and heatmaps"));
    add_common(app.add_subcommand("pca", "temporal PCA score series per letter half"));
    add_common(app.add_subcommand("snapshot", "scalp values at fixed times per letter half"));
    add_common(app.add_subcommand("train", "10-fold cross-validated training with statistics"));
    auto* report_cmd = app.add_subcommand("report", "re-emit tables from a run report JSON");
    add_common(report_cmd);
    report_cmd->add_option("--input", report_input, "run_report.json path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve_config(ov);
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "synth") return cmd_synth(cfg);
        if (sub == "validate") return cmd_validate(cfg);
        if (sub == "import") return cmd_import(cfg);
        if (sub == "preprocess") return cmd_preprocess(cfg);
        if (sub == "similarity") return cmd_similarity(cfg);
        if (sub == "pca") return cmd_pca(cfg);
        if (sub == "snapshot") return cmd_snapshot(cfg);
        if (sub == "train") return cmd_train(cfg);
        if (sub == "report") return cmd_report(cfg, report_input);
        std::cerr << "unknown subcommand\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
