#include "letterdec/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

using json = nlohmann::json;

namespace letterdec {

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + " must be a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError("unknown config key: " + path + "." + key);
}

BandSpec parse_band(const json& j, const std::string& path) {
    check_keys(j, {"low_hz", "high_hz", "order"}, path);
    BandSpec b;
    b.low_hz = j.value("low_hz", b.low_hz);
    b.high_hz = j.value("high_hz", b.high_hz);
    b.order = j.value("order", b.order);
    return b;
}

BandSpec parse_band_pair(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(path + " must be [low_hz, high_hz]");
    return BandSpec{j.at(0).get<double>(), j.at(1).get<double>(), 4};
}

TimeWindow parse_window(const json& j, const std::string& path) {
    if (j.is_array()) {
        if (j.size() != 2) throw ConfigError(path + " must be [start_ms, end_ms]");
        return TimeWindow{j.at(0).get<double>(), j.at(1).get<double>()};
    }
    check_keys(j, {"start_ms", "end_ms"}, path);
    return TimeWindow{j.at("start_ms").get<double>(), j.at("end_ms").get<double>()};
}

ModelConfig parse_model(const json& j, const std::string& path) {
    check_keys(j, {"arch", "n_channels", "n_timepoints", "n_classes", "filters", "kernels", "pools", "dropout_rate",
                   "attention_depth"},
               path);
    if (!j.contains("arch")) throw ConfigError(path + ".arch is required");
    ModelConfig cfg = default_model_config(arch_from_name(j.at("arch").get<std::string>()));
    cfg.n_channels = j.value("n_channels", cfg.n_channels);
    cfg.n_timepoints = j.value("n_timepoints", cfg.n_timepoints);
    cfg.n_classes = j.value("n_classes", cfg.n_classes);
    if (j.contains("filters")) cfg.filters = j.at("filters").get<std::vector<int>>();
    if (j.contains("kernels")) cfg.kernels = j.at("kernels").get<std::vector<int>>();
    if (j.contains("pools")) cfg.pools = j.at("pools").get<std::vector<int>>();
    cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
    cfg.attention_depth = j.value("attention_depth", cfg.attention_depth);
    cfg.validate();
    return cfg;
}

}  // namespace

RunConfig default_config() {
    RunConfig cfg;
    cfg.models = {default_model_config(Arch::DeepConvNet), default_model_config(Arch::EEGNet),
                  default_model_config(Arch::EEGInception), default_model_config(Arch::LMDA)};
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config file not found: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }

    check_keys(j, {"command", "dataset", "out_dir", "seed", "jobs", "subject_id", "preprocess", "similarity", "pca",
                   "models", "training", "synth", "import"},
               "config");

    RunConfig cfg = default_config();
    cfg.dataset = j.value("dataset", cfg.dataset);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.subject_id = j.value("subject_id", cfg.subject_id);
    if (cfg.jobs < 0) throw ConfigError("jobs must be >= 0");

    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        check_keys(p, {"band", "apply_band", "baseline", "apply_baseline", "crop", "apply_crop", "zscore", "ica"},
                   "preprocess");
        if (p.contains("band")) cfg.preprocess.band = parse_band(p.at("band"), "preprocess.band");
        cfg.preprocess.apply_band = p.value("apply_band", cfg.preprocess.apply_band);
        if (p.contains("baseline")) cfg.preprocess.baseline = parse_window(p.at("baseline"), "preprocess.baseline");
        cfg.preprocess.apply_baseline = p.value("apply_baseline", cfg.preprocess.apply_baseline);
        if (p.contains("crop")) cfg.preprocess.crop = parse_window(p.at("crop"), "preprocess.crop");
        cfg.preprocess.apply_crop = p.value("apply_crop", cfg.preprocess.apply_crop);
        cfg.preprocess.zscore = p.value("zscore", cfg.preprocess.zscore);
        cfg.preprocess.ica = p.value("ica", cfg.preprocess.ica);
        if (cfg.preprocess.ica != "none" && cfg.preprocess.ica != "skip")
            throw ConfigError("preprocess.ica supports only \"none\" or \"skip\" (artifact removal is external)");
    }

    if (j.contains("similarity")) {
        const auto& s = j.at("similarity");
        check_keys(s, {"windows_ms", "bands_hz", "main_window_ms", "main_band_hz", "permutations", "apply_pipeline",
                       "full52", "heatmap_lo", "heatmap_hi"},
                   "similarity");
        if (s.contains("windows_ms")) {
            cfg.similarity.windows.clear();
            for (const auto& w : s.at("windows_ms"))
                cfg.similarity.windows.push_back(parse_window(w, "similarity.windows_ms"));
        }
        if (s.contains("bands_hz")) {
            cfg.similarity.bands.clear();
            for (const auto& b : s.at("bands_hz"))
                cfg.similarity.bands.push_back(parse_band_pair(b, "similarity.bands_hz"));
        }
        if (s.contains("main_window_ms"))
            cfg.similarity.main_window = parse_window(s.at("main_window_ms"), "similarity.main_window_ms");
        if (s.contains("main_band_hz"))
            cfg.similarity.main_band = parse_band_pair(s.at("main_band_hz"), "similarity.main_band_hz");
        cfg.similarity.permutations = s.value("permutations", cfg.similarity.permutations);
        cfg.similarity.apply_pipeline = s.value("apply_pipeline", cfg.similarity.apply_pipeline);
        cfg.similarity.full52 = s.value("full52", cfg.similarity.full52);
        cfg.similarity.heatmap_lo = s.value("heatmap_lo", cfg.similarity.heatmap_lo);
        cfg.similarity.heatmap_hi = s.value("heatmap_hi", cfg.similarity.heatmap_hi);
        if (cfg.similarity.permutations < 1) throw ConfigError("similarity.permutations must be positive");
        if (!(cfg.similarity.heatmap_hi > cfg.similarity.heatmap_lo))
            throw ConfigError("heatmap range must have hi > lo");
    }

    if (j.contains("pca")) {
        const auto& p = j.at("pca");
        check_keys(p, {"letters", "components", "snapshot_times_ms"}, "pca");
        if (p.contains("letters")) {
            cfg.pca.letters.clear();
            for (const auto& l : p.at("letters")) {
                const std::string s = l.get<std::string>();
                if (s.size() != 1 || s[0] < 'A' || s[0] > 'Z')
                    throw ConfigError("pca.letters entries must be single uppercase letters");
                cfg.pca.letters.push_back(s[0]);
            }
        }
        cfg.pca.components = p.value("components", cfg.pca.components);
        if (p.contains("snapshot_times_ms"))
            cfg.pca.snapshot_times_ms = p.at("snapshot_times_ms").get<std::vector<double>>();
        if (cfg.pca.components < 1) throw ConfigError("pca.components must be positive");
    }

    if (j.contains("models")) {
        cfg.models.clear();
        int mi = 0;
        for (const auto& m : j.at("models")) cfg.models.push_back(parse_model(m, "models[" + std::to_string(mi++) + "]"));
        if (cfg.models.empty()) throw ConfigError("models must not be empty");
    }

    if (j.contains("training")) {
        const auto& t = j.at("training");
        check_keys(t, {"lr", "beta1", "beta2", "adam_eps", "batch_size", "patience", "max_epochs", "k_folds"},
                   "training");
        cfg.training.lr = t.value("lr", cfg.training.lr);
        cfg.training.beta1 = t.value("beta1", cfg.training.beta1);
        cfg.training.beta2 = t.value("beta2", cfg.training.beta2);
        cfg.training.adam_eps = t.value("adam_eps", cfg.training.adam_eps);
        cfg.training.batch_size = t.value("batch_size", cfg.training.batch_size);
        cfg.training.patience = t.value("patience", cfg.training.patience);
        cfg.training.max_epochs = t.value("max_epochs", cfg.training.max_epochs);
        cfg.training.k_folds = t.value("k_folds", cfg.training.k_folds);
        if (cfg.training.lr <= 0.0 || cfg.training.batch_size < 2 || cfg.training.patience < 1 ||
            cfg.training.max_epochs < 1 || cfg.training.k_folds < 2)
            throw ConfigError("invalid training parameters");
    }

    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        check_keys(s, {"snr", "noise_free", "n_per_class", "trial_jitter_ms", "session_drift", "n_sessions", "seed",
                       "shape", "smoothness_hz", "template_seed"},
                   "synth");
        cfg.synth.spec.snr = s.value("snr", cfg.synth.spec.snr);
        cfg.synth.spec.noise_free = s.value("noise_free", cfg.synth.spec.noise_free);
        cfg.synth.spec.n_per_class = s.value("n_per_class", cfg.synth.spec.n_per_class);
        cfg.synth.spec.trial_jitter_ms = s.value("trial_jitter_ms", cfg.synth.spec.trial_jitter_ms);
        cfg.synth.spec.session_drift = s.value("session_drift", cfg.synth.spec.session_drift);
        cfg.synth.spec.n_sessions = s.value("n_sessions", cfg.synth.spec.n_sessions);
        cfg.synth.spec.seed = s.value("seed", cfg.seed);
        cfg.synth.shape = s.value("shape", cfg.synth.shape);
        cfg.synth.smoothness_hz = s.value("smoothness_hz", cfg.synth.smoothness_hz);
        cfg.synth.template_seed = s.value("template_seed", cfg.synth.template_seed);
        if (cfg.synth.shape != "model" && cfg.synth.shape != "raw")
            throw ConfigError("synth.shape must be \"model\" or \"raw\"");
    } else {
        cfg.synth.spec.seed = cfg.seed;
    }

    if (j.contains("import")) {
        const auto& im = j.at("import");
        check_keys(im, {"dir", "sampling_rate_hz", "start_ms", "n_samples", "channels"}, "import");
        cfg.import.dir = im.value("dir", cfg.import.dir);
        cfg.import.sampling_rate_hz = im.value("sampling_rate_hz", cfg.import.sampling_rate_hz);
        cfg.import.start_ms = im.value("start_ms", cfg.import.start_ms);
        cfg.import.n_samples = im.value("n_samples", cfg.import.n_samples);
        if (im.contains("channels")) cfg.import.channels = im.at("channels").get<std::vector<std::string>>();
    }

    return cfg;
}

std::string config_to_json(const RunConfig& cfg, const std::string& command) {
    json j;
    if (!command.empty()) j["command"] = command;
    j["dataset"] = cfg.dataset;
    j["out_dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["subject_id"] = cfg.subject_id;

    j["preprocess"]["band"] = {{"low_hz", cfg.preprocess.band.low_hz},
                               {"high_hz", cfg.preprocess.band.high_hz},
                               {"order", cfg.preprocess.band.order}};
    j["preprocess"]["apply_band"] = cfg.preprocess.apply_band;
    j["preprocess"]["baseline"] = {cfg.preprocess.baseline.start_ms, cfg.preprocess.baseline.end_ms};
    j["preprocess"]["apply_baseline"] = cfg.preprocess.apply_baseline;
    j["preprocess"]["crop"] = {cfg.preprocess.crop.start_ms, cfg.preprocess.crop.end_ms};
    j["preprocess"]["apply_crop"] = cfg.preprocess.apply_crop;
    j["preprocess"]["zscore"] = cfg.preprocess.zscore;
    j["preprocess"]["ica"] = cfg.preprocess.ica;

    json windows = json::array();
    for (const auto& w : cfg.similarity.windows) windows.push_back({w.start_ms, w.end_ms});
    json bands = json::array();
    for (const auto& b : cfg.similarity.bands) bands.push_back({b.low_hz, b.high_hz});
    j["similarity"] = {{"windows_ms", windows},
                       {"bands_hz", bands},
                       {"main_window_ms", {cfg.similarity.main_window.start_ms, cfg.similarity.main_window.end_ms}},
                       {"main_band_hz", {cfg.similarity.main_band.low_hz, cfg.similarity.main_band.high_hz}},
                       {"permutations", cfg.similarity.permutations},
                       {"apply_pipeline", cfg.similarity.apply_pipeline},
                       {"full52", cfg.similarity.full52},
                       {"heatmap_lo", cfg.similarity.heatmap_lo},
                       {"heatmap_hi", cfg.similarity.heatmap_hi}};

    json letters = json::array();
    for (char c : cfg.pca.letters) letters.push_back(std::string(1, c));
    j["pca"] = {{"letters", letters},
                {"components", cfg.pca.components},
                {"snapshot_times_ms", cfg.pca.snapshot_times_ms}};

    json models = json::array();
    for (const auto& m : cfg.models) {
        json mj;
        mj["arch"] = arch_name(m.arch);
        mj["n_channels"] = m.n_channels;
        mj["n_timepoints"] = m.n_timepoints;
        mj["n_classes"] = m.n_classes;
        mj["filters"] = m.filters;
        mj["kernels"] = m.kernels;
        mj["pools"] = m.pools;
        mj["dropout_rate"] = m.dropout_rate;
        if (m.arch == Arch::LMDA) mj["attention_depth"] = m.attention_depth;
        models.push_back(mj);
    }
    j["models"] = models;

    j["training"] = {{"lr", cfg.training.lr},
                     {"beta1", cfg.training.beta1},
                     {"beta2", cfg.training.beta2},
                     {"adam_eps", cfg.training.adam_eps},
                     {"batch_size", cfg.training.batch_size},
                     {"patience", cfg.training.patience},
                     {"max_epochs", cfg.training.max_epochs},
                     {"k_folds", cfg.training.k_folds}};

    j["synth"] = {{"snr", cfg.synth.spec.snr},
                  {"noise_free", cfg.synth.spec.noise_free},
                  {"n_per_class", cfg.synth.spec.n_per_class},
                  {"trial_jitter_ms", cfg.synth.spec.trial_jitter_ms},
                  {"session_drift", cfg.synth.spec.session_drift},
                  {"n_sessions", cfg.synth.spec.n_sessions},
                  {"seed", cfg.synth.spec.seed},
                  {"shape", cfg.synth.shape},
                  {"smoothness_hz", cfg.synth.smoothness_hz},
                  {"template_seed", cfg.synth.template_seed}};

    if (!cfg.import.dir.empty()) {
        j["import"] = {{"dir", cfg.import.dir},
                       {"sampling_rate_hz", cfg.import.sampling_rate_hz},
                       {"start_ms", cfg.import.start_ms},
                       {"n_samples", cfg.import.n_samples},
                       {"channels", cfg.import.channels}};
    }
    return j.dump(2);
}

}  // namespace letterdec
