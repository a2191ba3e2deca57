#pragma once

#include <vector>

#include "letterdec/dataio.hpp"

namespace letterdec {

struct TemplateSet {
    int n_channels = 0;
    int n_samples = 0;
    std::vector<std::vector<double>> templates;  // one C*T row-major buffer per class, unit Frobenius norm
    uint64_t seed = 0;
    double sampling_rate_hz = 250.0;
};

struct SynthSpec {
    double snr = 1.0;            // Frobenius amplitude ratio signal/noise per trial
    bool noise_free = false;     // snr -> infinity mode: trials are pure (jittered) templates
    int n_per_class = 100;
    double trial_jitter_ms = 0.0;  // max circular shift, uniform in [-j, +j]
    double session_drift = 0.0;    // per-session per-channel DC offset scale
    int n_sessions = 1;
    uint64_t seed = 0;
};

// Smooth random spatiotemporal patterns: per channel, a sum of sinusoids with
// amplitudes decaying as exp(-f/smoothness_hz), band-limited below 40 Hz.
TemplateSet make_templates(int n_channels, int n_samples, int n_classes, double smoothness_hz, uint64_t seed,
                           double sampling_rate_hz = 250.0);

// trial = snr * template(label, jittered) + unit-norm Gaussian noise + session drift.
// Generated values are float32-representable so the canonical format round-trips
// bit-exactly. The axis is caller-supplied (raw 24x801 or model-ready 24x400).
Dataset synthesize_dataset(const TemplateSet& ts, const SynthSpec& spec, const EpochAxis& axis,
                           const ChannelLayout& layout, const std::string& subject_id = "synth");

// Convenience: model-ready dataset, 24x400 axis starting at 0 ms.
Dataset synthesize_model_shaped(const SynthSpec& spec, double smoothness_hz = 8.0, uint64_t template_seed = 7);

}  // namespace letterdec
