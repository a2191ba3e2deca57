#include "letterdec/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace letterdec {

void ChannelLayout::validate() const {
    if (labels.empty()) throw DataError("channel layout has no labels");
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw DataError("channel labels are not unique");
    if (!positions.empty() && positions.size() != labels.size())
        throw DataError("channel positions count does not match label count");
}

void EpochAxis::validate() const {
    if (sampling_rate_hz <= 0.0) throw DataError("sampling_rate_hz must be positive");
    if (n_samples <= 0) throw DataError("n_samples must be positive");
}

std::vector<int> Dataset::class_counts() const {
    std::vector<int> counts(kNumClasses, 0);
    for (const auto& e : epochs)
        if (e.label >= 0 && e.label < kNumClasses) counts[e.label]++;
    return counts;
}

int letter_to_index(char letter) {
    if (letter < 'A' || letter > 'Z') throw DataError(std::string("not an uppercase letter: ") + letter);
    return letter - 'A';
}

char index_to_letter(int index) {
    if (index < 0 || index >= kNumClasses) throw DataError("letter index out of range: " + std::to_string(index));
    return static_cast<char>('A' + index);
}

ChannelLayout default_layout_24() {
    // 10-20-ish 24-channel montage; positions are schematic (x right, y front).
    ChannelLayout layout;
    layout.labels = {"Fp1", "Fp2", "F7",  "F3",  "Fz",  "F4",  "F8",  "FC5",
                     "FC1", "FC2", "FC6", "T7",  "C3",  "Cz",  "C4",  "T8",
                     "CP5", "CP1", "CP2", "CP6", "P7",  "P3",  "Pz",  "P4"};
    layout.positions = {
        {-0.31, 0.95}, {0.31, 0.95}, {-0.81, 0.59}, {-0.40, 0.58}, {0.0, 0.58}, {0.40, 0.58},
        {0.81, 0.59},  {-0.59, 0.31}, {-0.20, 0.30}, {0.20, 0.30}, {0.59, 0.31}, {-1.0, 0.0},
        {-0.50, 0.0},  {0.0, 0.0},   {0.50, 0.0},   {1.0, 0.0},   {-0.59, -0.31}, {-0.20, -0.30},
        {0.20, -0.30}, {0.59, -0.31}, {-0.81, -0.59}, {-0.40, -0.58}, {0.0, -0.58}, {0.40, -0.58}};
    return layout;
}

namespace {

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

constexpr uint32_t kBlobMagic = 0x44474545u;  // "EEGD" little-endian

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void check_epoch_shapes(const Dataset& ds) {
    const int c = ds.layout.n_channels();
    const int t = ds.axis.n_samples;
    for (size_t i = 0; i < ds.epochs.size(); ++i) {
        const Epoch& e = ds.epochs[i];
        if (e.n_channels != c || e.n_samples != t)
            throw DataError("epoch " + std::to_string(i) + " shape " + std::to_string(e.n_channels) + "x" +
                            std::to_string(e.n_samples) + " does not match dataset shape " + std::to_string(c) +
                            "x" + std::to_string(t));
        if (e.data.size() != static_cast<size_t>(c) * t)
            throw DataError("epoch " + std::to_string(i) + " buffer length mismatch");
        if (e.label < 0 || e.label >= kNumClasses)
            throw DataError("epoch " + std::to_string(i) + " label out of range: " + std::to_string(e.label));
        for (double v : e.data)
            if (!std::isfinite(v))
                throw DataError("epoch " + std::to_string(i) + " contains a non-finite value");
    }
}

struct SessionRun {
    int session_id = 0;
    size_t begin = 0;
    size_t end = 0;  // half-open epoch index range
};

std::vector<SessionRun> session_runs(const Dataset& ds) {
    std::vector<SessionRun> runs;
    for (size_t i = 0; i < ds.epochs.size(); ++i) {
        if (runs.empty() || runs.back().session_id != ds.epochs[i].session_id) {
            runs.push_back({ds.epochs[i].session_id, i, i + 1});
        } else {
            runs.back().end = i + 1;
        }
    }
    return runs;
}

}  // namespace

uint32_t crc32(const void* data, size_t len, uint32_t seed) {
    static const auto table = make_crc_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    ds.layout.validate();
    ds.axis.validate();
    check_epoch_shapes(ds);

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw DataError("cannot create dataset directory: " + dir);

    const int c = ds.layout.n_channels();
    const int t = ds.axis.n_samples;
    const auto runs = session_runs(ds);

    json manifest;
    manifest["format_version"] = 1;
    manifest["subject_id"] = ds.subject_id;
    manifest["sampling_rate_hz"] = ds.axis.sampling_rate_hz;
    manifest["start_ms"] = ds.axis.start_ms;
    manifest["n_samples"] = t;
    manifest["n_channels"] = c;
    manifest["channel_labels"] = ds.layout.labels;
    if (!ds.layout.positions.empty()) {
        json pos = json::array();
        for (const auto& p : ds.layout.positions) pos.push_back({p[0], p[1]});
        manifest["channel_positions"] = pos;
    }
    manifest["class_counts"] = ds.class_counts();

    json sessions = json::array();
    for (size_t r = 0; r < runs.size(); ++r) {
        const auto& run = runs[r];
        const uint32_t n_epochs = static_cast<uint32_t>(run.end - run.begin);
        char name[32];
        std::snprintf(name, sizeof(name), "blob_%03zu.eeg", r);

        std::string blob;
        blob.reserve(16 + static_cast<size_t>(n_epochs) * c * t * 4);
        put_u32(blob, kBlobMagic);
        put_u32(blob, n_epochs);
        put_u32(blob, static_cast<uint32_t>(c));
        put_u32(blob, static_cast<uint32_t>(t));
        for (size_t i = run.begin; i < run.end; ++i) {
            const auto& e = ds.epochs[i];
            static_assert(sizeof(float) == 4);
            const size_t off = blob.size();
            blob.resize(off + e.data.size() * 4);
            std::vector<float> f32(e.data.begin(), e.data.end());
            std::memcpy(blob.data() + off, f32.data(), f32.size() * 4);
        }

        const fs::path blob_path = fs::path(dir) / name;
        {
            std::ofstream f(blob_path, std::ios::binary | std::ios::trunc);
            if (!f) throw DataError("cannot write blob file: " + blob_path.string());
            f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
            if (!f) throw DataError("write failed for blob file: " + blob_path.string());
        }

        json rec;
        rec["file"] = name;
        rec["session_id"] = run.session_id;
        rec["crc32"] = crc32(blob.data(), blob.size());
        json labels = json::array(), trials = json::array();
        for (size_t i = run.begin; i < run.end; ++i) {
            labels.push_back(ds.epochs[i].label);
            trials.push_back(ds.epochs[i].trial_id);
        }
        rec["labels"] = labels;
        rec["trial_ids"] = trials;
        sessions.push_back(rec);
    }
    manifest["sessions"] = sessions;

    const fs::path mpath = fs::path(dir) / "manifest.json";
    std::ofstream f(mpath, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write manifest: " + mpath.string());
    f << manifest.dump(2) << "\n";
    if (!f) throw DataError("write failed for manifest: " + mpath.string());
}

Dataset load_dataset(const std::string& dir) {
    const fs::path mpath = fs::path(dir) / "manifest.json";
    std::ifstream mf(mpath, std::ios::binary);
    if (!mf) throw DataError("manifest not found: " + mpath.string());

    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw DataError("corrupt manifest " + mpath.string() + ": " + e.what());
    }

    Dataset ds;
    try {
        if (manifest.at("format_version").get<int>() != 1)
            throw DataError("unsupported format_version in " + mpath.string());
        ds.subject_id = manifest.at("subject_id").get<std::string>();
        ds.axis.sampling_rate_hz = manifest.at("sampling_rate_hz").get<double>();
        ds.axis.start_ms = manifest.at("start_ms").get<double>();
        ds.axis.n_samples = manifest.at("n_samples").get<int>();
        ds.layout.labels = manifest.at("channel_labels").get<std::vector<std::string>>();
        if (manifest.contains("channel_positions")) {
            for (const auto& p : manifest.at("channel_positions"))
                ds.layout.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        const int c = manifest.at("n_channels").get<int>();
        if (c != ds.layout.n_channels())
            throw DataError("manifest n_channels field disagrees with channel_labels length");
        const int t = ds.axis.n_samples;

        for (const auto& rec : manifest.at("sessions")) {
            const std::string name = rec.at("file").get<std::string>();
            const int session_id = rec.at("session_id").get<int>();
            const auto labels = rec.at("labels").get<std::vector<int>>();
            const auto trial_ids = rec.at("trial_ids").get<std::vector<int>>();
            const uint32_t want_crc = rec.at("crc32").get<uint32_t>();
            if (labels.size() != trial_ids.size())
                throw DataError("manifest session " + name + ": labels/trial_ids length mismatch");

            const fs::path bpath = fs::path(dir) / name;
            std::ifstream bf(bpath, std::ios::binary);
            if (!bf) throw DataError("blob file missing: " + bpath.string());
            std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

            if (crc32(blob.data(), blob.size()) != want_crc)
                throw DataError("checksum mismatch for blob " + name);
            if (blob.size() < 16) throw DataError("blob too short: " + name);
            const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
            if (get_u32(p) != kBlobMagic) throw DataError("bad magic in blob " + name);
            const uint32_t n_epochs = get_u32(p + 4);
            const uint32_t bc = get_u32(p + 8);
            const uint32_t bt = get_u32(p + 12);
            if (bc != static_cast<uint32_t>(c) || bt != static_cast<uint32_t>(t))
                throw DataError("blob " + name + " shape " + std::to_string(bc) + "x" + std::to_string(bt) +
                                " does not match manifest shape " + std::to_string(c) + "x" + std::to_string(t));
            if (n_epochs != labels.size())
                throw DataError("blob " + name + " epoch count disagrees with manifest labels");
            const size_t want_bytes = 16 + static_cast<size_t>(n_epochs) * c * t * 4;
            if (blob.size() != want_bytes)
                throw DataError("blob " + name + " has " + std::to_string(blob.size()) + " bytes, expected " +
                                std::to_string(want_bytes));

            const char* cursor = blob.data() + 16;
            for (uint32_t i = 0; i < n_epochs; ++i) {
                Epoch e;
                e.n_channels = c;
                e.n_samples = t;
                e.label = labels[i];
                e.session_id = session_id;
                e.trial_id = trial_ids[i];
                const size_t n = static_cast<size_t>(c) * t;
                std::vector<float> f32(n);
                std::memcpy(f32.data(), cursor, n * 4);
                cursor += n * 4;
                e.data.assign(f32.begin(), f32.end());
                ds.epochs.push_back(std::move(e));
            }
        }

        const auto declared = manifest.at("class_counts").get<std::vector<int>>();
        const auto actual = ds.class_counts();
        if (declared != actual) throw DataError("manifest class_counts disagree with loaded epochs");
    } catch (const json::exception& e) {
        throw DataError("corrupt manifest " + mpath.string() + ": field error: " + e.what());
    }

    ds.layout.validate();
    ds.axis.validate();
    check_epoch_shapes(ds);
    return ds;
}

Dataset import_csv(const std::string& dir, const ChannelLayout& layout, const EpochAxis& axis) {
    layout.validate();
    axis.validate();
    if (!fs::is_directory(dir)) throw DataError("import directory not found: " + dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .csv files in " + dir);

    Dataset ds;
    ds.layout = layout;
    ds.axis = axis;
    ds.subject_id = "imported";

    const int c = layout.n_channels();
    const int t = axis.n_samples;

    for (const auto& path : files) {
        // <LETTER>_s<session>_t<trial>.csv
        const std::string stem = path.stem().string();
        int label = -1, session = -1, trial = -1;
        if (stem.size() >= 6 && stem[1] == '_' && stem[2] == 's') {
            label = (stem[0] >= 'A' && stem[0] <= 'Z') ? stem[0] - 'A' : -1;
            const size_t tpos = stem.find("_t", 3);
            if (label >= 0 && tpos != std::string::npos) {
                auto parse_int = [](const std::string& s, int& out) {
                    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
                    return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
                };
                if (!parse_int(stem.substr(3, tpos - 3), session)) session = -1;
                if (!parse_int(stem.substr(tpos + 2), trial)) trial = -1;
            }
        }
        if (label < 0 || session < 0 || trial < 0)
            throw DataError("filename does not match <LETTER>_s<session>_t<trial>.csv: " + path.filename().string());

        std::ifstream f(path);
        if (!f) throw DataError("cannot open " + path.string());

        Epoch e;
        e.n_channels = c;
        e.n_samples = t;
        e.label = label;
        e.session_id = session;
        e.trial_id = trial;
        e.data.resize(static_cast<size_t>(c) * t);

        std::string line;
        int row = 0;
        while (std::getline(f, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() && row == c) break;  // trailing newline
            if (row >= c)
                throw DataError(path.filename().string() + ": more than " + std::to_string(c) + " rows");
            int col = 0;
            size_t pos = 0;
            while (pos <= line.size()) {
                size_t comma = line.find(',', pos);
                if (comma == std::string::npos) comma = line.size();
                if (col >= t)
                    throw DataError(path.filename().string() + " row " + std::to_string(row + 1) + ": more than " +
                                    std::to_string(t) + " columns");
                const char* b = line.data() + pos;
                const char* end = line.data() + comma;
                while (b < end && (*b == ' ' || *b == '\t')) ++b;
                const char* e2 = end;
                while (e2 > b && (e2[-1] == ' ' || e2[-1] == '\t')) --e2;
                float value = 0.0f;
                auto [ptr, ec] = std::from_chars(b, e2, value);
                if (ec != std::errc() || ptr != e2 || b == e2)
                    throw DataError(path.filename().string() + " row " + std::to_string(row + 1) + " column " +
                                    std::to_string(col + 1) + ": unparseable cell \"" + std::string(b, e2) + "\"");
                e.at(row, col) = value;
                ++col;
                pos = comma + 1;
            }
            if (col != t)
                throw DataError(path.filename().string() + " row " + std::to_string(row + 1) + ": " +
                                std::to_string(col) + " columns, expected " + std::to_string(t));
            ++row;
        }
        if (row != c)
            throw DataError(path.filename().string() + ": " + std::to_string(row) + " rows, expected " +
                            std::to_string(c));
        ds.epochs.push_back(std::move(e));
    }
    return ds;
}

ValidationReport validate_dataset(const Dataset& ds) {
    ValidationReport report;
    report.class_counts.assign(kNumClasses, 0);
    report.min_amplitude = std::numeric_limits<double>::infinity();
    report.max_amplitude = -std::numeric_limits<double>::infinity();

    const int c = ds.layout.n_channels();
    const int t = ds.axis.n_samples;
    if (c == 0) report.failures.push_back("channel layout is empty");

    for (size_t i = 0; i < ds.epochs.size(); ++i) {
        const Epoch& e = ds.epochs[i];
        if (e.label >= 0 && e.label < kNumClasses) report.class_counts[e.label]++;
        else report.failures.push_back("epoch " + std::to_string(i) + " label out of range");
        if (e.n_channels != c || e.n_samples != t || e.data.size() != static_cast<size_t>(c) * t) {
            report.failures.push_back("epoch " + std::to_string(i) + " shape inconsistent with dataset");
            continue;
        }
        bool bad = false;
        for (double v : e.data) {
            if (!std::isfinite(v)) {
                report.nonfinite_count++;
                bad = true;
            } else {
                report.min_amplitude = std::min(report.min_amplitude, static_cast<double>(v));
                report.max_amplitude = std::max(report.max_amplitude, static_cast<double>(v));
            }
        }
        if (bad) report.failures.push_back("epoch " + std::to_string(i) + " contains non-finite values");
    }
    if (ds.epochs.empty()) {
        report.min_amplitude = 0.0;
        report.max_amplitude = 0.0;
        report.warnings.push_back("dataset has no epochs");
    }
    for (int k = 0; k < kNumClasses; ++k) {
        if (report.class_counts[k] != report.class_counts[0])
            report.warnings.push_back("class counts are imbalanced");
    }
    for (int k = 0; k < kNumClasses; ++k)
        if (report.class_counts[k] == 0 && !ds.epochs.empty())
            report.warnings.push_back("class " + std::to_string(k) + " count 0");
    // imbalance is a warning; only non-finite values or shape issues fail
    std::sort(report.warnings.begin(), report.warnings.end());
    report.warnings.erase(std::unique(report.warnings.begin(), report.warnings.end()), report.warnings.end());
    report.pass = report.failures.empty();
    return report;
}

std::string ValidationReport::to_json() const {
    json j;
    j["class_counts"] = class_counts;
    j["min_amplitude"] = min_amplitude;
    j["max_amplitude"] = max_amplitude;
    j["nonfinite_count"] = nonfinite_count;
    j["pass"] = pass;
    j["warnings"] = warnings;
    j["failures"] = failures;
    return j.dump(2);
}

}  // namespace letterdec
