#include "letterdec/synth.hpp"

#include <cmath>
#include <numbers>

namespace letterdec {

namespace {

double frobenius_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double normalized_inner(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;  // inputs are unit-norm
}

}  // namespace

TemplateSet make_templates(int n_channels, int n_samples, int n_classes, double smoothness_hz, uint64_t seed,
                           double sampling_rate_hz) {
    if (n_channels < 1 || n_samples < 4 || n_classes < 1) throw ConfigError("degenerate template dimensions");
    if (!(smoothness_hz > 0.0)) throw ConfigError("smoothness_hz must be positive");

    TemplateSet ts;
    ts.n_channels = n_channels;
    ts.n_samples = n_samples;
    ts.seed = seed;
    ts.sampling_rate_hz = sampling_rate_hz;

    const double duration_s = n_samples / sampling_rate_hz;
    const double f_step = 1.0 / duration_s;  // template harmonics, band-limited
    const double f_max = std::min(40.0, sampling_rate_hz / 2.0 * 0.8);

    for (int k = 0; k < n_classes; ++k) {
        std::vector<double> tmpl;
        for (int attempt = 0;; ++attempt) {
            Rng rng(mix_seed(seed, static_cast<uint64_t>(k), static_cast<uint64_t>(attempt)));
            tmpl.assign(static_cast<size_t>(n_channels) * n_samples, 0.0);
            for (int c = 0; c < n_channels; ++c) {
                for (double f = f_step; f <= f_max; f += f_step) {
                    const double amp = rng.normal() * std::exp(-f / smoothness_hz);
                    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                    for (int t = 0; t < n_samples; ++t) {
                        const double time_s = t / sampling_rate_hz;
                        tmpl[static_cast<size_t>(c) * n_samples + t] +=
                            amp * std::cos(2.0 * std::numbers::pi * f * time_s + phase);
                    }
                }
            }
            const double norm = frobenius_norm(tmpl);
            if (!(norm > 0.0)) continue;
            for (double& v : tmpl) v /= norm;
            bool distinct = true;
            for (const auto& other : ts.templates)
                if (std::fabs(normalized_inner(tmpl, other)) >= 0.99) distinct = false;
            if (distinct) break;
            if (attempt > 50) throw NumericError("could not generate distinct templates");
        }
        ts.templates.push_back(std::move(tmpl));
    }
    return ts;
}

Dataset synthesize_dataset(const TemplateSet& ts, const SynthSpec& spec, const EpochAxis& axis,
                           const ChannelLayout& layout, const std::string& subject_id) {
    if (spec.snr < 0.0) throw ConfigError("snr must be non-negative");
    if (spec.n_per_class < 1) throw ConfigError("n_per_class must be positive");
    if (spec.n_sessions < 1) throw ConfigError("n_sessions must be positive");
    if (axis.n_samples != ts.n_samples || layout.n_channels() != ts.n_channels)
        throw ConfigError("axis/layout shape does not match the template set");

    const int c = ts.n_channels;
    const int t = ts.n_samples;
    const int n_classes = static_cast<int>(ts.templates.size());
    const int n_total = n_classes * spec.n_per_class;
    const int per_session = (n_total + spec.n_sessions - 1) / spec.n_sessions;
    const int jitter_max = static_cast<int>(std::lround(spec.trial_jitter_ms * axis.sampling_rate_hz / 1000.0));

    Dataset ds;
    ds.layout = layout;
    ds.axis = axis;
    ds.subject_id = subject_id;
    ds.epochs.reserve(n_total);

    // Per-session per-channel DC offsets.
    std::vector<std::vector<double>> drift(spec.n_sessions, std::vector<double>(c, 0.0));
    if (spec.session_drift > 0.0) {
        for (int s = 0; s < spec.n_sessions; ++s) {
            Rng rng(mix_seed(spec.seed, 0x64726966ULL, static_cast<uint64_t>(s)));
            for (int ch = 0; ch < c; ++ch) drift[s][ch] = spec.session_drift * rng.normal();
        }
    }

    for (int trial = 0; trial < n_total; ++trial) {
        const int label = trial % n_classes;  // interleaved, balanced
        const int session = trial / per_session;
        Rng rng(mix_seed(spec.seed, 0x747269616cULL, static_cast<uint64_t>(trial)));

        int shift = 0;
        if (jitter_max > 0) shift = static_cast<int>(rng.bounded(2 * jitter_max + 1)) - jitter_max;

        Epoch e;
        e.n_channels = c;
        e.n_samples = t;
        e.label = label;
        e.session_id = session;
        e.trial_id = trial;
        e.data.assign(static_cast<size_t>(c) * t, 0.0);

        const auto& tmpl = ts.templates[label];
        const double signal_scale = spec.noise_free ? 1.0 : spec.snr;
        if (signal_scale > 0.0) {
            for (int ch = 0; ch < c; ++ch) {
                for (int i = 0; i < t; ++i) {
                    const int src = ((i - shift) % t + t) % t;  // circular shift preserves the norm
                    e.data[static_cast<size_t>(ch) * t + i] = signal_scale * tmpl[static_cast<size_t>(ch) * t + src];
                }
            }
        }

        if (!spec.noise_free) {
            std::vector<double> noise(e.data.size());
            for (double& v : noise) v = rng.normal();
            const double norm = frobenius_norm(noise);
            for (size_t i = 0; i < noise.size(); ++i) e.data[i] += noise[i] / norm;
        }

        const auto& d = drift[session];
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < t; ++i) e.data[static_cast<size_t>(ch) * t + i] += d[ch];

        // Keep values float32-representable so the canonical format round-trips.
        for (double& v : e.data) v = static_cast<double>(static_cast<float>(v));
        ds.epochs.push_back(std::move(e));
    }
    return ds;
}

Dataset synthesize_model_shaped(const SynthSpec& spec, double smoothness_hz, uint64_t template_seed) {
    EpochAxis axis;
    axis.sampling_rate_hz = 250.0;
    axis.start_ms = 0.0;
    axis.n_samples = 400;
    const ChannelLayout layout = default_layout_24();
    const TemplateSet ts = make_templates(layout.n_channels(), axis.n_samples, kNumClasses, smoothness_hz,
                                          template_seed, axis.sampling_rate_hz);
    return synthesize_dataset(ts, spec, axis, layout);
}

}  // namespace letterdec
