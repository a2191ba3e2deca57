#include "letterdec/report.hpp"

#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

using json = nlohmann::json;

namespace letterdec {

namespace {

// JSON has no inf/nan literals; an unbounded F statistic (zero within-group
// variance) round-trips through null.
nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double number_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

unsigned char heatmap_pixel(double value, double lo, double hi) {
    double u = (value - lo) / (hi - lo);
    u = std::min(1.0, std::max(0.0, u));
    const double scaled = std::floor(u * 255.0 + 0.5);  // round half up
    return static_cast<unsigned char>(scaled);
}

void render_heatmap(const SimilarityMatrix& m, const std::string& path, double lo, double hi, int scale) {
    if (!(hi > lo)) throw ConfigError("heatmap range must have hi > lo");
    if (scale < 1) throw ConfigError("heatmap scale must be positive");
    const int side = kNumClasses * scale;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write heatmap: " + path);
    f << "P5\n" << side << " " << side << "\n255\n";
    std::vector<unsigned char> row(side);
    for (int i = 0; i < kNumClasses; ++i) {
        for (int j = 0; j < kNumClasses; ++j) {
            const unsigned char px = heatmap_pixel(m.values[i][j], lo, hi);
            std::fill(row.begin() + j * scale, row.begin() + (j + 1) * scale, px);
        }
        for (int r = 0; r < scale; ++r)
            f.write(reinterpret_cast<const char*>(row.data()), side);
    }
    if (!f) throw DataError("write failed for heatmap: " + path);
}

void write_similarity_csv(const SimilarityMatrix& m, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write csv: " + path);
    f << "letter";
    for (int j = 0; j < kNumClasses; ++j) f << "," << index_to_letter(j);
    f << "\n";
    for (int i = 0; i < kNumClasses; ++i) {
        f << index_to_letter(i);
        for (int j = 0; j < kNumClasses; ++j) f << "," << format_double(m.values[i][j]);
        f << "\n";
    }
}

void write_matrix_csv(const std::vector<std::vector<double>>& m, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write csv: " + path);
    f << "row";
    for (const auto& c : col_labels) f << "," << c;
    f << "\n";
    for (size_t i = 0; i < m.size(); ++i) {
        f << row_labels[i];
        for (double v : m[i]) f << "," << format_double(v);
        f << "\n";
    }
}

namespace {

json fold_to_json(const FoldResult& fr) {
    json j;
    j["fold_index"] = fr.fold_index;
    j["best_val_accuracy"] = fr.best_val_accuracy;
    j["epoch_of_best"] = fr.epoch_of_best;
    j["n_evaluations"] = fr.n_evaluations;
    j["n_val"] = fr.n_val;
    j["failed"] = fr.failed;
    if (fr.failed) j["error"] = fr.error;
    j["train_loss_curve"] = fr.train_loss_curve;
    j["val_accuracy_curve"] = fr.val_accuracy_curve;
    return j;
}

FoldResult fold_from_json(const json& j) {
    FoldResult fr;
    fr.fold_index = j.at("fold_index").get<int>();
    fr.best_val_accuracy = j.at("best_val_accuracy").get<double>();
    fr.epoch_of_best = j.at("epoch_of_best").get<int>();
    fr.n_evaluations = j.at("n_evaluations").get<int>();
    fr.n_val = j.at("n_val").get<int>();
    fr.failed = j.at("failed").get<bool>();
    if (j.contains("error")) fr.error = j.at("error").get<std::string>();
    fr.train_loss_curve = j.at("train_loss_curve").get<std::vector<double>>();
    fr.val_accuracy_curve = j.at("val_accuracy_curve").get<std::vector<double>>();
    return fr;
}

}  // namespace

std::string run_report_to_json(const RunReport& report) {
    json j;
    j["subject_id"] = report.subject_id;
    j["seed"] = report.seed;
    j["k"] = report.k;
    j["chance_level_percent"] = report.chance_level_percent;
    json models = json::array();
    for (const auto& m : report.models) {
        json mj;
        mj["model"] = m.model;
        mj["n_failed"] = m.n_failed;
        mj["stats"] = {{"max", m.stats.max},
                       {"mean", m.stats.mean},
                       {"q1", m.stats.q1},
                       {"median", m.stats.median},
                       {"q3", m.stats.q3}};
        json folds = json::array();
        for (const auto& fr : m.folds) folds.push_back(fold_to_json(fr));
        mj["folds"] = folds;
        models.push_back(mj);
    }
    j["models"] = models;
    if (report.anova) {
        j["anova"] = {{"f", json_number(report.anova->f)},
                      {"p", report.anova->p},
                      {"df_between", report.anova->df_between},
                      {"df_within", report.anova->df_within}};
    }
    json pw = json::array();
    for (const auto& t : report.pairwise) pw.push_back({{"a", t.a}, {"b", t.b}, {"t", t.t}, {"p", t.p}});
    j["pairwise_one_tailed"] = pw;
    return j.dump(2);
}

RunReport run_report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError("run report is not valid JSON: " + std::string(e.what()));
    }
    RunReport report;
    try {
        report.subject_id = j.at("subject_id").get<std::string>();
        report.seed = j.at("seed").get<uint64_t>();
        report.k = j.at("k").get<int>();
        report.chance_level_percent = j.at("chance_level_percent").get<double>();
        for (const auto& mj : j.at("models")) {
            ModelRun m;
            m.model = mj.at("model").get<std::string>();
            m.n_failed = mj.at("n_failed").get<int>();
            m.stats.max = mj.at("stats").at("max").get<double>();
            m.stats.mean = mj.at("stats").at("mean").get<double>();
            m.stats.q1 = mj.at("stats").at("q1").get<double>();
            m.stats.median = mj.at("stats").at("median").get<double>();
            m.stats.q3 = mj.at("stats").at("q3").get<double>();
            for (const auto& fj : mj.at("folds")) m.folds.push_back(fold_from_json(fj));
            report.models.push_back(std::move(m));
        }
        if (j.contains("anova")) {
            AnovaResult a;
            a.f = number_from_json(j.at("anova").at("f"));
            a.p = j.at("anova").at("p").get<double>();
            a.df_between = j.at("anova").at("df_between").get<double>();
            a.df_within = j.at("anova").at("df_within").get<double>();
            report.anova = a;
        }
        for (const auto& pj : j.at("pairwise_one_tailed")) {
            PairwiseTest t;
            t.a = pj.at("a").get<std::string>();
            t.b = pj.at("b").get<std::string>();
            t.t = pj.at("t").get<double>();
            t.p = pj.at("p").get<double>();
            report.pairwise.push_back(t);
        }
    } catch (const json::exception& e) {
        throw DataError("run report missing fields: " + std::string(e.what()));
    }
    return report;
}

void write_run_report_files(const RunReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream f(fs::path(out_dir) / "run_report.json", std::ios::trunc);
        if (!f) throw DataError("cannot write run report");
        f << run_report_to_json(report) << "\n";
    }
    {
        // Table-1-style: per model, the maximum of the k best validation accuracies.
        std::ofstream f(fs::path(out_dir) / "table1_max_accuracy.csv", std::ios::trunc);
        f << "model," << report.subject_id << "\n";
        for (const auto& m : report.models) f << m.model << "," << format_double(m.stats.max) << "\n";
    }
    {
        std::ofstream f(fs::path(out_dir) / "fold_accuracies.csv", std::ios::trunc);
        f << "model,fold,best_val_accuracy,epoch_of_best,n_evaluations,n_val,failed\n";
        for (const auto& m : report.models)
            for (const auto& fr : m.folds)
                f << m.model << "," << fr.fold_index << "," << format_double(fr.best_val_accuracy) << ","
                  << fr.epoch_of_best << "," << fr.n_evaluations << "," << fr.n_val << "," << (fr.failed ? 1 : 0)
                  << "\n";
    }
    {
        std::ofstream f(fs::path(out_dir) / "statistics.csv", std::ios::trunc);
        f << "test,a,b,statistic,p\n";
        f << "chance_level_percent,,," << format_double(report.chance_level_percent) << ",\n";
        if (report.anova)
            f << "anova_oneway,,," << format_double(report.anova->f) << "," << format_double(report.anova->p) << "\n";
        for (const auto& t : report.pairwise)
            f << "ttest_one_tailed_paired," << t.a << "," << t.b << "," << format_double(t.t) << ","
              << format_double(t.p) << "\n";
    }
}

}  // namespace letterdec
