#pragma once

#include <optional>
#include <string>
#include <vector>

#include "letterdec/dsp.hpp"
#include "letterdec/harness.hpp"
#include "letterdec/synth.hpp"

namespace letterdec {

// Sections map onto the CLI subcommands; every ledger default is explicit so a
// bare config reproduces the default protocol. Unknown keys are rejected.
struct RunConfig {
    std::string dataset;
    std::string out_dir = "out";
    uint64_t seed = 42;
    int jobs = 1;
    std::string subject_id = "synth01";

    struct Preprocess {
        BandSpec band{0.1, 45.0, 4};
        bool apply_band = true;
        TimeWindow baseline{-200.0, 0.0};
        bool apply_baseline = true;
        TimeWindow crop{0.0, 1600.0};
        bool apply_crop = true;
        bool zscore = true;
        std::string ica = "none";  // pass-through slot, warns when not "none"
    } preprocess;

    struct Similarity {
        std::vector<TimeWindow> windows{{0, 1000}, {100, 1200}, {200, 1400}, {300, 1600}};
        std::vector<BandSpec> bands{{1, 10, 4}, {5, 20, 4}, {9, 30, 4}};
        TimeWindow main_window{0, 1600};
        BandSpec main_band{0.1, 45, 4};
        int permutations = 10000;
        bool apply_pipeline = true;
        bool full52 = false;
        double heatmap_lo = 0.0;
        double heatmap_hi = 1.0;
    } similarity;

    struct Pca {
        std::vector<char> letters{'G', 'I'};
        int components = 3;
        std::vector<double> snapshot_times_ms{300, 500, 700, 900, 1100, 1300};
    } pca;

    std::vector<ModelConfig> models;  // defaults to all four architectures

    TrainConfig training;

    struct Synth {
        SynthSpec spec;
        std::string shape = "model";  // "model" (24x400 at 0 ms) or "raw" (24x801 at -200 ms)
        double smoothness_hz = 8.0;
        uint64_t template_seed = 7;
    } synth;

    struct Import {
        std::string dir;
        double sampling_rate_hz = 250.0;
        double start_ms = -200.0;
        int n_samples = 801;
        std::vector<std::string> channels;  // empty = default 24-channel layout
    } import;
};

RunConfig default_config();
RunConfig load_config(const std::string& path);
// Fully-resolved config as JSON; "command" records the provenance.
std::string config_to_json(const RunConfig& cfg, const std::string& command);

}  // namespace letterdec
