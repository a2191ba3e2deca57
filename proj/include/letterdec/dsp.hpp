#pragma once

#include <optional>
#include <vector>

#include "letterdec/dataio.hpp"

namespace letterdec {

struct BandSpec {
    double low_hz = 0.1;
    double high_hz = 45.0;
    int order = 4;  // analog prototype order; the bandpass has 2*order poles

    void validate(double sampling_rate_hz) const;
};

struct TimeWindow {
    double start_ms = 0.0;
    double end_ms = 0.0;
};

// One second-order section, direct form II transposed. a0 is normalized to 1.
struct Biquad {
    double b0 = 0, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

// Butterworth bandpass as a biquad cascade, magnitude 1 at the band center.
std::vector<Biquad> design_butter_bandpass(const BandSpec& band, double sampling_rate_hz);

// Cascade response power |H(f)|^2 of a single pass (filtfilt applies it twice).
double cascade_power_response(const std::vector<Biquad>& sections, double freq_hz, double sampling_rate_hz);

// Zero-phase (forward-backward) filtering of one channel, in place.
// Pads by odd reflection (pad_len samples each side), trims after.
void filtfilt(const std::vector<Biquad>& sections, std::vector<double>& x, int pad_len);

Epoch bandpass_filter(const Epoch& epoch, const BandSpec& band, const EpochAxis& axis);
Epoch baseline_correct(const Epoch& epoch, const TimeWindow& window, const EpochAxis& axis);
Epoch crop_epoch(const Epoch& epoch, const TimeWindow& window, const EpochAxis& axis, EpochAxis& out_axis);
Epoch zscore_normalize(const Epoch& epoch);

// Half-open sample range [first, last) for a window on an axis.
// first = round((start_ms - axis.start_ms) * fs / 1000), last likewise from end_ms.
void window_to_sample_range(const TimeWindow& window, const EpochAxis& axis, int& first, int& last);

// Fixed order: bandpass -> baseline -> crop -> zscore, each stage optional.
struct PipelineSpec {
    std::optional<BandSpec> band;
    std::optional<TimeWindow> baseline;
    std::optional<TimeWindow> crop;
    bool zscore = true;
};

Epoch preprocess_epoch(const Epoch& epoch, const PipelineSpec& spec, const EpochAxis& axis, EpochAxis& out_axis);
Dataset preprocess_dataset(const Dataset& ds, const PipelineSpec& spec);

}  // namespace letterdec
