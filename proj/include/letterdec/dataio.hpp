#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "letterdec/common.hpp"

namespace letterdec {

constexpr int kNumClasses = 26;

struct ChannelLayout {
    std::vector<std::string> labels;
    std::vector<std::array<double, 2>> positions;  // optional head-schematic xy, empty if absent

    int n_channels() const { return static_cast<int>(labels.size()); }
    void validate() const;
};

// time of sample i = start_ms + 1000*i/sampling_rate_hz
struct EpochAxis {
    double sampling_rate_hz = 250.0;
    double start_ms = -200.0;
    int n_samples = 801;

    double time_ms(int i) const { return start_ms + 1000.0 * i / sampling_rate_hz; }
    double end_ms() const { return time_ms(n_samples); }
    void validate() const;
};

// One trial: row-major C x T, data[c*T + t]. Held in double; the canonical
// on-disk blobs are float32, quantized on save.
struct Epoch {
    int n_channels = 0;
    int n_samples = 0;
    std::vector<double> data;
    int label = 0;  // 'A'=0 .. 'Z'=25
    int session_id = 0;
    int trial_id = 0;

    double& at(int c, int t) { return data[static_cast<size_t>(c) * n_samples + t]; }
    double at(int c, int t) const { return data[static_cast<size_t>(c) * n_samples + t]; }
};

struct Dataset {
    std::vector<Epoch> epochs;
    ChannelLayout layout;
    EpochAxis axis;
    std::string subject_id;

    std::vector<int> class_counts() const;
};

struct ValidationReport {
    std::vector<int> class_counts;
    double min_amplitude = 0.0;
    double max_amplitude = 0.0;
    long long nonfinite_count = 0;
    bool pass = true;
    std::vector<std::string> warnings;
    std::vector<std::string> failures;

    std::string to_json() const;
};

// 24 channels of the recording cap, with schematic positions for snapshot output.
ChannelLayout default_layout_24();

uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

// Canonical on-disk format: <dir>/manifest.json + one float32-LE blob per run of
// consecutive epochs sharing a session_id. Blob header is 16 bytes:
// magic "EEGD", u32 n_epochs, u32 C, u32 T (all little-endian), then
// n_epochs * C * T float32 values in epoch order, channels-major.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Bridge for external exports: one CSV per epoch named <LETTER>_s<session>_t<trial>.csv,
// rows = channels, columns = time points.
Dataset import_csv(const std::string& dir, const ChannelLayout& layout, const EpochAxis& axis);

ValidationReport validate_dataset(const Dataset& ds);

// Letter <-> index map, fixed 'A'=0 .. 'Z'=25.
int letter_to_index(char letter);
char index_to_letter(int index);

}  // namespace letterdec
