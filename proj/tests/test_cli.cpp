#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "letterdec/report.hpp"

using namespace letterdec;
namespace fs = std::filesystem;

#ifndef LETTERDEC_BIN
#error "LETTERDEC_BIN must point at the CLI binary"
#endif

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LETTERDEC_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("letterdec_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    f << text;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Tiny but complete config: 26x4 model-shaped synth, one small model.
std::string tiny_config(const fs::path& dataset, const fs::path& out, int jobs = 1) {
    std::ostringstream ss;
    ss << R"({
  "dataset": ")" << dataset.string() << R"(",
  "out_dir": ")" << out.string() << R"(",
  "seed": 77,
  "jobs": )" << jobs << R"(,
  "synth": {"snr": 0.0, "noise_free": true, "n_per_class": 4, "shape": "model", "seed": 9},
  "models": [
    {"arch": "EEGNet", "filters": [2, 2, 4], "kernels": [6, 16], "pools": [4, 8], "dropout_rate": 0.25}
  ],
  "training": {"batch_size": 32, "patience": 1, "max_epochs": 2, "k_folds": 4}
})";
    return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("heatmap pixel mapping: endpoints, midpoint, clamping") {
    CHECK(heatmap_pixel(1.0, 0.0, 1.0) == 255);
    CHECK(heatmap_pixel(0.0, 0.0, 1.0) == 0);
    CHECK(heatmap_pixel(0.5, 0.0, 1.0) == 128);  // round half up
    CHECK(heatmap_pixel(-0.2, 0.0, 1.0) == 0);
    CHECK(heatmap_pixel(1.7, 0.0, 1.0) == 255);
}

TEST_CASE("heatmap PGM bytes for the identity matrix") {
    SimilarityMatrix m;
    for (int i = 0; i < kNumClasses; ++i)
        for (int j = 0; j < kNumClasses; ++j) m.values[i][j] = (i == j) ? 1.0 : 0.0;
    const auto dir = fresh_dir("pgm");
    const auto path = dir / "id.pgm";
    render_heatmap(m, path.string(), 0.0, 1.0, 2);
    const std::string bytes = slurp(path);
    const std::string header = "P5\n52 52\n255\n";
    REQUIRE(bytes.substr(0, header.size()) == header);
    const size_t off = header.size();
    // pixel (0,0) block is 255, (0,2) is 0
    CHECK(static_cast<unsigned char>(bytes[off]) == 255);
    CHECK(static_cast<unsigned char>(bytes[off + 1]) == 255);
    CHECK(static_cast<unsigned char>(bytes[off + 2]) == 0);
    CHECK(bytes.size() == off + 52 * 52);
    fs::remove_all(dir);
}

TEST_CASE("synth, validate, preprocess pipeline on a raw-shaped dataset") {
    const auto dir = fresh_dir("pipeline");
    const auto cfg_path = dir / "cfg.json";
    write_file(cfg_path, R"({
  "dataset": ")" + (dir / "out" / "dataset").string() + R"(",
  "out_dir": ")" + (dir / "out").string() + R"(",
  "seed": 5,
  "synth": {"snr": 1.0, "n_per_class": 2, "shape": "raw", "seed": 6}
})");
    CHECK(run_cli("synth --config " + cfg_path.string()) == 0);
    CHECK(fs::exists(dir / "out" / "dataset" / "manifest.json"));
    CHECK(run_cli("validate --config " + cfg_path.string()) == 0);
    CHECK(fs::exists(dir / "out" / "validation_report.json"));
    const std::string input_manifest = slurp(dir / "out" / "dataset" / "manifest.json");
    const std::string input_blob = slurp(dir / "out" / "dataset" / "blob_000.eeg");
    CHECK(run_cli("preprocess --config " + cfg_path.string()) == 0);
    const std::string manifest = slurp(dir / "out" / "preprocessed" / "manifest.json");
    CHECK(manifest.find("\"n_samples\": 400") != std::string::npos);
    // the input dataset directory is never mutated
    CHECK(slurp(dir / "out" / "dataset" / "manifest.json") == input_manifest);
    CHECK(slurp(dir / "out" / "dataset" / "blob_000.eeg") == input_blob);
    fs::remove_all(dir);
}

TEST_CASE("preprocess replays bit-identically from its provenance") {
    const auto dir = fresh_dir("replay");
    const auto cfg_path = dir / "cfg.json";
    write_file(cfg_path, R"({
  "dataset": ")" + (dir / "out" / "dataset").string() + R"(",
  "out_dir": ")" + (dir / "out").string() + R"(",
  "seed": 15,
  "synth": {"snr": 0.7, "n_per_class": 2, "shape": "raw", "seed": 16}
})");
    REQUIRE(run_cli("synth --config " + cfg_path.string()) == 0);
    REQUIRE(run_cli("preprocess --config " + cfg_path.string()) == 0);
    const std::string first = slurp(dir / "out" / "preprocessed" / "blob_000.eeg");
    const std::string manifest_first = slurp(dir / "out" / "preprocessed" / "manifest.json");

    // Replay from the provenance file into a second directory.
    const auto replay_out = dir / "replay";
    REQUIRE(run_cli("preprocess --config " + (dir / "out" / "provenance_preprocess.json").string() + " --out " +
                    replay_out.string()) == 0);
    CHECK(slurp(replay_out / "preprocessed" / "blob_000.eeg") == first);
    CHECK(slurp(replay_out / "preprocessed" / "manifest.json") == manifest_first);
    fs::remove_all(dir);
}

TEST_CASE("similarity emits 13 matrices plus heatmaps and a summary") {
    const auto dir = fresh_dir("similarity");
    const auto cfg_path = dir / "cfg.json";
    write_file(cfg_path, R"({
  "dataset": ")" + (dir / "out" / "dataset").string() + R"(",
  "out_dir": ")" + (dir / "out").string() + R"(",
  "seed": 25,
  "synth": {"snr": 1.5, "n_per_class": 8, "shape": "model", "seed": 26},
  "similarity": {"permutations": 2000, "full52": true}
})");
    REQUIRE(run_cli("synth --config " + cfg_path.string()) == 0);
    REQUIRE(run_cli("similarity --config " + cfg_path.string()) == 0);
    int csv_count = 0, pgm_count = 0;
    for (const auto& entry : fs::directory_iterator(dir / "out")) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("similarity_", 0) == 0 && entry.path().extension() == ".csv" &&
            name != "similarity_summary.csv" && name != "similarity_full52.csv")
            ++csv_count;
        if (entry.path().extension() == ".pgm") ++pgm_count;
    }
    CHECK(csv_count == 13);
    CHECK(pgm_count == 13);
    const std::string summary = slurp(dir / "out" / "similarity_summary.csv");
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 14);  // header + 13 rows
    CHECK(summary.find("main,") != std::string::npos);
    // high-SNR synth: every matrix in the sweep carries a positive contrast
    std::istringstream lines(summary);
    std::string line;
    std::getline(lines, line);  // header
    int positive = 0, rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        int col = 0;
        size_t pos = 0;
        while (col < 5 && pos != std::string::npos) {
            pos = line.find(',', pos) + 1;
            ++col;
        }
        if (std::stod(line.substr(pos)) > 0.0) ++positive;
    }
    CHECK(rows == 13);
    CHECK(positive == 13);
    // the 52x52 half-by-half matrix behind the flag
    const std::string full52 = slurp(dir / "out" / "similarity_full52.csv");
    CHECK(std::count(full52.begin(), full52.end(), '\n') == 53);
    fs::remove_all(dir);
}

TEST_CASE("pca and snapshot emit per-letter tables") {
    const auto dir = fresh_dir("pca");
    const auto cfg_path = dir / "cfg.json";
    write_file(cfg_path, R"({
  "dataset": ")" + (dir / "out" / "dataset").string() + R"(",
  "out_dir": ")" + (dir / "out").string() + R"(",
  "seed": 35,
  "synth": {"snr": 1.0, "n_per_class": 4, "shape": "model", "seed": 36}
})");
    REQUIRE(run_cli("synth --config " + cfg_path.string()) == 0);
    REQUIRE(run_cli("pca --config " + cfg_path.string()) == 0);
    REQUIRE(run_cli("snapshot --config " + cfg_path.string()) == 0);
    for (const std::string tag : {"G_A", "G_B", "I_A", "I_B"}) {
        CHECK(fs::exists(dir / "out" / ("pca_" + tag + ".csv")));
        CHECK(fs::exists(dir / "out" / ("snapshot_" + tag + ".csv")));
    }
    // pca score files: header + 400 time rows; 12 score series total over 4 patterns
    const std::string pca_csv = slurp(dir / "out" / "pca_G_A.csv");
    CHECK(std::count(pca_csv.begin(), pca_csv.end(), '\n') == 401);
    CHECK(pca_csv.rfind("time_ms,pc1,pc2,pc3", 0) == 0);
    // snapshot: header + 6 time rows, 24 channel columns
    const std::string snap_csv = slurp(dir / "out" / "snapshot_I_B.csv");
    CHECK(std::count(snap_csv.begin(), snap_csv.end(), '\n') == 7);
    const std::string header = snap_csv.substr(0, snap_csv.find('\n'));
    CHECK(std::count(header.begin(), header.end(), ',') == 24);
    fs::remove_all(dir);
}

TEST_CASE("train writes reports and reruns byte-identically across job counts") {
    const auto dir = fresh_dir("train");
    const auto cfg_path = dir / "cfg.json";
    write_file(cfg_path, tiny_config(dir / "out" / "dataset", dir / "out"));
    REQUIRE(run_cli("synth --config " + cfg_path.string()) == 0);
    REQUIRE(run_cli("train --config " + cfg_path.string()) == 0);
    const std::string report = slurp(dir / "out" / "run_report.json");
    CHECK(fs::exists(dir / "out" / "table1_max_accuracy.csv"));
    CHECK(fs::exists(dir / "out" / "fold_accuracies.csv"));
    CHECK(fs::exists(dir / "out" / "statistics.csv"));
    CHECK(fs::exists(dir / "out" / "model_summary_EEGNet.json"));
    CHECK(fs::exists(dir / "out" / "checkpoint_EEGNet_fold0.bin"));
    CHECK(report.find("chance_level_percent") != std::string::npos);
    CHECK(report.find("3.8461538") != std::string::npos);

    // rerun in place: identical bytes
    REQUIRE(run_cli("train --config " + cfg_path.string()) == 0);
    CHECK(slurp(dir / "out" / "run_report.json") == report);

    // different worker count: identical bytes
    const auto out8 = dir / "out8";
    write_file(cfg_path, tiny_config(dir / "out" / "dataset", out8, 8));
    REQUIRE(run_cli("train --config " + cfg_path.string()) == 0);
    CHECK(slurp(out8 / "run_report.json") == report);

    // report command re-emits tables from the JSON
    const auto rep_out = dir / "rep";
    REQUIRE(run_cli("report --config " + cfg_path.string() + " --out " + rep_out.string() + " --input " +
                    (out8 / "run_report.json").string()) == 0);
    CHECK(slurp(rep_out / "run_report.json") == report);
    CHECK(slurp(rep_out / "fold_accuracies.csv") == slurp(dir / "out" / "fold_accuracies.csv"));
    fs::remove_all(dir);
}

TEST_CASE("import command round-trips CSV epochs exactly") {
    const auto dir = fresh_dir("import");
    const auto csv_dir = dir / "csv";
    fs::create_directories(csv_dir);
    {
        std::ofstream f(csv_dir / "Q_s02_t007.csv");
        for (int c = 0; c < 24; ++c) {
            for (int t = 0; t < 5; ++t) f << (c * 10 + t) * 0.5 << (t == 4 ? "" : ",");
            f << "\n";
        }
    }
    const auto cfg_path = dir / "cfg.json";
    write_file(cfg_path, R"({
  "out_dir": ")" + (dir / "out").string() + R"(",
  "import": {"dir": ")" + csv_dir.string() + R"(", "n_samples": 5, "start_ms": 0}
})");
    REQUIRE(run_cli("import --config " + cfg_path.string()) == 0);
    const auto loaded = load_dataset((dir / "out" / "dataset").string());
    REQUIRE(loaded.epochs.size() == 1);
    CHECK(loaded.epochs[0].label == 16);  // Q
    CHECK(loaded.epochs[0].session_id == 2);
    CHECK(loaded.epochs[0].trial_id == 7);
    CHECK(loaded.epochs[0].at(3, 2) == 16.0);
    fs::remove_all(dir);
}

TEST_CASE("exit codes: 1 for config trouble, 2 for data trouble") {
    const auto dir = fresh_dir("exitcodes");
    // missing dataset path in an otherwise valid config
    const auto cfg1 = dir / "no_dataset.json";
    write_file(cfg1, R"({"out_dir": ")" + (dir / "o1").string() + R"("})");
    CHECK(run_cli("validate --config " + cfg1.string()) == 1);
    // unknown key
    const auto cfg2 = dir / "unknown_key.json";
    write_file(cfg2, R"({"out_dir": "x", "no_such_key": 1})");
    CHECK(run_cli("validate --config " + cfg2.string()) == 1);
    // config file absent
    CHECK(run_cli("validate --config " + (dir / "missing.json").string()) == 1);
    // dataset directory absent -> data error
    const auto cfg3 = dir / "no_data.json";
    write_file(cfg3, R"({"dataset": ")" + (dir / "nowhere").string() + R"(", "out_dir": ")" + (dir / "o3").string() +
                         R"("})");
    CHECK(run_cli("validate --config " + cfg3.string()) == 2);
    fs::remove_all(dir);
}

TEST_CASE("train exits 3 when every fold of a model diverges") {
    const auto dir = fresh_dir("diverge");
    const auto cfg_path = dir / "cfg.json";
    write_file(cfg_path, R"({
  "dataset": ")" + (dir / "out" / "dataset").string() + R"(",
  "out_dir": ")" + (dir / "out").string() + R"(",
  "seed": 87,
  "synth": {"snr": 0.5, "n_per_class": 4, "shape": "model", "seed": 88},
  "models": [
    {"arch": "EEGNet", "filters": [2, 2, 4], "kernels": [6, 16], "pools": [4, 8], "dropout_rate": 0.25}
  ],
  "training": {"lr": 1e18, "batch_size": 32, "patience": 1, "max_epochs": 2, "k_folds": 4}
})");
    REQUIRE(run_cli("synth --config " + cfg_path.string()) == 0);
    CHECK(run_cli("train --config " + cfg_path.string()) == 3);
    fs::remove_all(dir);
}

TEST_CASE("validate exits 2 on a dataset that fails validation") {
    const auto dir = fresh_dir("valfail");
    const auto cfg_path = dir / "cfg.json";
    write_file(cfg_path, R"({
  "dataset": ")" + (dir / "out" / "dataset").string() + R"(",
  "out_dir": ")" + (dir / "out").string() + R"(",
  "synth": {"snr": 0.5, "n_per_class": 1, "shape": "model", "seed": 46}
})");
    REQUIRE(run_cli("synth --config " + cfg_path.string()) == 0);
    // corrupt one blob value to NaN: overwrite 4 bytes inside the payload
    const auto blob = dir / "out" / "dataset" / "blob_000.eeg";
    {
        std::fstream f(blob, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(16 + 40);
        const uint32_t nan_bits = 0x7FC00000u;
        f.write(reinterpret_cast<const char*>(&nan_bits), 4);
    }
    // checksum now fails -> data error (2)
    CHECK(run_cli("validate --config " + cfg_path.string()) == 2);
    fs::remove_all(dir);
}

}  // TEST_SUITE
