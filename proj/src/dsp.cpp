#include "letterdec/dsp.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace letterdec {

namespace {
constexpr double kPi = std::numbers::pi;
using cd = std::complex<double>;
}  // namespace

void BandSpec::validate(double sampling_rate_hz) const {
    if (!(low_hz > 0.0)) throw ConfigError("band low_hz must be positive for a bandpass");
    if (!(high_hz > low_hz)) throw ConfigError("band high_hz must exceed low_hz");
    if (!(high_hz < sampling_rate_hz / 2.0))
        throw ConfigError("band high_hz " + std::to_string(high_hz) + " exceeds Nyquist for fs " +
                          std::to_string(sampling_rate_hz));
    if (order <= 0 || order % 2 != 0) throw ConfigError("filter order must be a positive even integer");
}

std::vector<Biquad> design_butter_bandpass(const BandSpec& band, double fs) {
    band.validate(fs);
    const int n = band.order;

    // Pre-warped analog edges for the bilinear transform s = 2*fs*(z-1)/(z+1).
    const double fs2 = 2.0 * fs;
    const double wl = fs2 * std::tan(kPi * band.low_hz / fs);
    const double wh = fs2 * std::tan(kPi * band.high_hz / fs);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    // Lowpass prototype poles on the unit circle, upper half plane only
    // (conjugates are implied; n is even so no real pole exists).
    std::vector<cd> z_poles;
    for (int k = 0; k < n / 2; ++k) {
        const double theta = kPi * (2.0 * k + n + 1.0) / (2.0 * n);
        const cd p(std::cos(theta), std::sin(theta));
        // Lowpass-to-bandpass: each pole splits into two.
        const cd q = p * (bw / 2.0);
        const cd root = std::sqrt(q * q - cd(w0 * w0, 0.0));
        for (const cd s : {q + root, q - root}) {
            z_poles.push_back((cd(fs2, 0.0) + s) / (cd(fs2, 0.0) - s));
        }
    }

    // Each section takes a z pole together with its conjugate; numerator is
    // (z-1)(z+1), covering the n zeros at z=1 (from s=0) and n at z=-1.
    std::vector<Biquad> sections;
    sections.reserve(z_poles.size());
    for (const cd zp : z_poles) {
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        s.a1 = -2.0 * zp.real();
        s.a2 = std::norm(zp);
        sections.push_back(s);
    }

    // Normalize so the cascade has unit magnitude at the band center.
    const double f_center = fs / kPi * std::atan(w0 / fs2);
    const double power = cascade_power_response(sections, f_center, fs);
    if (!(power > 0.0)) throw NumericError("filter design produced a degenerate response");
    const double gain_per_section = std::pow(1.0 / std::sqrt(power), 1.0 / sections.size());
    for (auto& s : sections) {
        s.b0 *= gain_per_section;
        s.b1 *= gain_per_section;
        s.b2 *= gain_per_section;
    }
    return sections;
}

double cascade_power_response(const std::vector<Biquad>& sections, double freq_hz, double fs) {
    const cd z = std::exp(cd(0.0, 2.0 * kPi * freq_hz / fs));
    const cd z2 = z * z;
    cd h(1.0, 0.0);
    for (const auto& s : sections)
        h *= (s.b0 * z2 + s.b1 * z + s.b2) / (z2 + s.a1 * z + s.a2);
    return std::norm(h);
}

namespace {

// Steady-state DF2T state for a unit constant input, as in filtfilt practice:
// scaling by the first sample removes the step transient at the boundary.
void section_zi(const Biquad& s, double& z1, double& z2) {
    const double denom = 1.0 + s.a1 + s.a2;
    const double h = denom != 0.0 ? (s.b0 + s.b1 + s.b2) / denom : 0.0;
    z2 = s.b2 - s.a2 * h;
    z1 = s.b1 + s.b2 - (s.a1 + s.a2) * h;
}

void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& x) {
    for (const auto& s : sections) {
        double z1, z2;
        section_zi(s, z1, z2);
        z1 *= x[0];
        z2 *= x[0];
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
}

}  // namespace

void filtfilt(const std::vector<Biquad>& sections, std::vector<double>& x, int pad_len) {
    const int n = static_cast<int>(x.size());
    if (n <= pad_len)
        throw DataError("signal of " + std::to_string(n) + " samples is too short for edge padding of " +
                        std::to_string(pad_len));

    // Odd reflection about the endpoints.
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad_len);
    for (int i = pad_len; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (int i = n - 2; i >= n - 1 - pad_len; --i) ext.push_back(2.0 * x[n - 1] - x[i]);

    run_cascade(sections, ext);
    std::reverse(ext.begin(), ext.end());
    run_cascade(sections, ext);
    std::reverse(ext.begin(), ext.end());

    std::copy(ext.begin() + pad_len, ext.begin() + pad_len + n, x.begin());
}

Epoch bandpass_filter(const Epoch& epoch, const BandSpec& band, const EpochAxis& axis) {
    const auto sections = design_butter_bandpass(band, axis.sampling_rate_hz);
    const int pad_len = 3 * band.order;
    Epoch out = epoch;
    std::vector<double> channel(epoch.n_samples);
    for (int c = 0; c < epoch.n_channels; ++c) {
        for (int t = 0; t < epoch.n_samples; ++t) channel[t] = epoch.at(c, t);
        filtfilt(sections, channel, pad_len);
        for (int t = 0; t < epoch.n_samples; ++t) out.at(c, t) = channel[t];
    }
    return out;
}

void window_to_sample_range(const TimeWindow& window, const EpochAxis& axis, int& first, int& last) {
    const double fs = axis.sampling_rate_hz;
    first = static_cast<int>(std::lround((window.start_ms - axis.start_ms) * fs / 1000.0));
    last = static_cast<int>(std::lround((window.end_ms - axis.start_ms) * fs / 1000.0));
}

Epoch baseline_correct(const Epoch& epoch, const TimeWindow& window, const EpochAxis& axis) {
    int first = 0, last = 0;
    window_to_sample_range(window, axis, first, last);
    if (first < 0 || last > epoch.n_samples || first >= last)
        throw DataError("baseline window " + std::to_string(window.start_ms) + ".." + std::to_string(window.end_ms) +
                        " ms is outside the epoch axis");
    Epoch out = epoch;
    for (int c = 0; c < epoch.n_channels; ++c) {
        double mean = 0.0;
        for (int t = first; t < last; ++t) mean += epoch.at(c, t);
        mean /= (last - first);
        for (int t = 0; t < epoch.n_samples; ++t) out.at(c, t) = epoch.at(c, t) - mean;
    }
    return out;
}

Epoch crop_epoch(const Epoch& epoch, const TimeWindow& window, const EpochAxis& axis, EpochAxis& out_axis) {
    int first = 0, last = 0;
    window_to_sample_range(window, axis, first, last);
    if (first == last) throw DataError("empty window: " + std::to_string(window.start_ms) + ".." +
                                       std::to_string(window.end_ms) + " ms");
    if (first < 0 || last > epoch.n_samples || first > last)
        throw DataError("crop window " + std::to_string(window.start_ms) + ".." + std::to_string(window.end_ms) +
                        " ms is not contained in the epoch axis");
    Epoch out;
    out.n_channels = epoch.n_channels;
    out.n_samples = last - first;
    out.label = epoch.label;
    out.session_id = epoch.session_id;
    out.trial_id = epoch.trial_id;
    out.data.resize(static_cast<size_t>(out.n_channels) * out.n_samples);
    for (int c = 0; c < epoch.n_channels; ++c)
        for (int t = first; t < last; ++t) out.at(c, t - first) = epoch.at(c, t);
    out_axis.sampling_rate_hz = axis.sampling_rate_hz;
    out_axis.start_ms = axis.start_ms + 1000.0 * first / axis.sampling_rate_hz;
    out_axis.n_samples = out.n_samples;
    return out;
}

Epoch zscore_normalize(const Epoch& epoch) {
    const size_t n = epoch.data.size();
    if (n == 0) throw DataError("empty epoch");
    double mean = 0.0;
    for (double v : epoch.data) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : epoch.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);  // population
    if (!(var > 0.0)) throw NumericError("degenerate epoch: zero variance, cannot z-score");
    const double inv_std = 1.0 / std::sqrt(var);
    Epoch out = epoch;
    for (double& v : out.data) v = (v - mean) * inv_std;
    return out;
}

Epoch preprocess_epoch(const Epoch& epoch, const PipelineSpec& spec, const EpochAxis& axis, EpochAxis& out_axis) {
    Epoch e = epoch;
    out_axis = axis;
    if (spec.band) e = bandpass_filter(e, *spec.band, axis);
    if (spec.baseline) e = baseline_correct(e, *spec.baseline, axis);
    if (spec.crop) e = crop_epoch(e, *spec.crop, axis, out_axis);
    if (spec.zscore) e = zscore_normalize(e);
    return e;
}

Dataset preprocess_dataset(const Dataset& ds, const PipelineSpec& spec) {
    Dataset out;
    out.layout = ds.layout;
    out.subject_id = ds.subject_id;
    out.axis = ds.axis;
    out.epochs.reserve(ds.epochs.size());
    EpochAxis out_axis = ds.axis;
    for (const auto& e : ds.epochs) out.epochs.push_back(preprocess_epoch(e, spec, ds.axis, out_axis));
    out.axis = out_axis;
    return out;
}

}  // namespace letterdec
