#include <doctest.h>

#include <cmath>

#include "letterdec/analysis.hpp"
#include "letterdec/synth.hpp"
#include "oracles.hpp"

using namespace letterdec;

TEST_SUITE("synth") {

TEST_CASE("templates are unit norm and deterministic") {
    auto ts = make_templates(24, 400, 26, 8.0, 5);
    REQUIRE(ts.templates.size() == 26);
    for (const auto& t : ts.templates) {
        double norm = 0.0;
        for (double v : t) norm += v * v;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));
    }
    auto ts2 = make_templates(24, 400, 26, 8.0, 5);
    CHECK(ts.templates[13] == ts2.templates[13]);
    auto ts3 = make_templates(24, 400, 26, 8.0, 6);
    CHECK(ts.templates[0] != ts3.templates[0]);
}

TEST_CASE("templates are pairwise distinct") {
    auto ts = make_templates(24, 400, 26, 8.0, 11);
    for (size_t i = 0; i < ts.templates.size(); ++i)
        for (size_t j = i + 1; j < ts.templates.size(); ++j) {
            double dot = 0.0;
            for (size_t k = 0; k < ts.templates[i].size(); ++k) dot += ts.templates[i][k] * ts.templates[j][k];
            CHECK(std::fabs(dot) < 0.99);
        }
}

TEST_CASE("template spectral energy above 45 Hz is under 1%") {
    auto ts = make_templates(4, 400, 3, 8.0, 21);
    for (const auto& tmpl : ts.templates) {
        for (int c = 0; c < 4; ++c) {
            std::vector<double> ch(tmpl.begin() + c * 400, tmpl.begin() + (c + 1) * 400);
            double total = 0.0, high = 0.0;
            // DFT bins at multiples of fs/N = 0.625 Hz
            for (int k = 1; k <= 200; ++k) {
                const double f = 250.0 * k / 400.0;
                const double amp = oracles::tone_amplitude(ch, f, 250.0);
                total += amp * amp;
                if (f > 45.0) high += amp * amp;
            }
            CHECK(high / total < 0.01);
        }
    }
}

TEST_CASE("snr is realized exactly as the amplitude ratio") {
    auto ts = make_templates(8, 100, 26, 8.0, 31);
    SynthSpec spec;
    spec.snr = 2.0;
    spec.n_per_class = 2;
    spec.seed = 32;
    EpochAxis axis;
    axis.start_ms = 0.0;
    axis.n_samples = 100;
    ChannelLayout layout;
    for (int i = 0; i < 8; ++i) layout.labels.push_back("C" + std::to_string(i));
    Dataset ds = synthesize_dataset(ts, spec, axis, layout);
    // signal = snr * unit template, noise = unit norm: check the residual norm.
    for (const auto& e : ds.epochs) {
        double resid = 0.0;
        for (size_t i = 0; i < e.data.size(); ++i) {
            const double s = spec.snr * ts.templates[e.label][i];
            resid += (e.data[i] - s) * (e.data[i] - s);
        }
        CHECK(std::sqrt(resid) == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("noise-free trials equal the template up to jitter") {
    auto ts = make_templates(4, 64, 26, 8.0, 41);
    SynthSpec spec;
    spec.noise_free = true;
    spec.n_per_class = 3;
    spec.trial_jitter_ms = 0.0;
    spec.seed = 42;
    EpochAxis axis;
    axis.start_ms = 0.0;
    axis.n_samples = 64;
    ChannelLayout layout;
    for (int i = 0; i < 4; ++i) layout.labels.push_back("C" + std::to_string(i));
    Dataset ds = synthesize_dataset(ts, spec, axis, layout);
    for (const auto& e : ds.epochs)
        for (size_t i = 0; i < e.data.size(); ++i)
            CHECK(e.data[i] == doctest::Approx(static_cast<double>(static_cast<float>(ts.templates[e.label][i])))
                                   .epsilon(1e-12));
}

TEST_CASE("jitter circularly shifts, preserving the norm") {
    auto ts = make_templates(4, 64, 26, 8.0, 51);
    SynthSpec spec;
    spec.noise_free = true;
    spec.n_per_class = 4;
    spec.trial_jitter_ms = 40.0;  // 10 samples at 250 Hz
    spec.seed = 52;
    EpochAxis axis;
    axis.start_ms = 0.0;
    axis.n_samples = 64;
    ChannelLayout layout;
    for (int i = 0; i < 4; ++i) layout.labels.push_back("C" + std::to_string(i));
    Dataset ds = synthesize_dataset(ts, spec, axis, layout);
    for (const auto& e : ds.epochs) {
        double norm = 0.0;
        for (double v : e.data) norm += v * v;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("generation is deterministic and balanced") {
    SynthSpec spec;
    spec.snr = 0.7;
    spec.n_per_class = 5;
    spec.seed = 61;
    Dataset a = synthesize_model_shaped(spec);
    Dataset b = synthesize_model_shaped(spec);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (size_t i = 0; i < a.epochs.size(); ++i) CHECK(a.epochs[i].data == b.epochs[i].data);
    for (int count : a.class_counts()) CHECK(count == 5);
}

TEST_CASE("generated dataset passes validation") {
    SynthSpec spec;
    spec.snr = 1.0;
    spec.n_per_class = 4;
    spec.seed = 71;
    spec.session_drift = 0.01;
    spec.n_sessions = 2;
    Dataset ds = synthesize_model_shaped(spec);
    auto report = validate_dataset(ds);
    CHECK(report.pass);
}

TEST_CASE("diagonal contrast is monotone in snr") {
    const std::vector<double> snrs = {0.0, 0.25, 0.5, 1.0};
    std::vector<double> mean_contrast(snrs.size(), 0.0);
    for (int seed = 0; seed < 5; ++seed) {
        for (size_t si = 0; si < snrs.size(); ++si) {
            SynthSpec spec;
            spec.snr = snrs[si];
            spec.n_per_class = 16;
            spec.seed = 100 + seed;
            Dataset ds = synthesize_model_shaped(spec, 8.0, 7 + seed);
            SimilarityOptions opts;
            opts.apply_pipeline = false;
            auto m = similarity_matrix(ds, BandSpec{}, TimeWindow{0.0, 1600.0}, 55, opts);
            mean_contrast[si] += matrix_diagonal_contrast(m.values) / 5.0;
        }
    }
    int inversions = 0;
    for (size_t i = 1; i < snrs.size(); ++i)
        if (mean_contrast[i] + 0.01 < mean_contrast[i - 1]) ++inversions;
    CHECK(inversions == 0);
    CHECK(mean_contrast.back() > mean_contrast.front());
}

TEST_CASE("snr 1.0 gives significant diagonal contrast") {
    SynthSpec spec;
    spec.snr = 1.0;
    spec.n_per_class = 100;
    spec.seed = 81;
    Dataset ds = synthesize_model_shaped(spec);
    SimilarityOptions opts;
    opts.apply_pipeline = false;
    auto m = similarity_matrix(ds, BandSpec{}, TimeWindow{0.0, 1600.0}, 10, opts);
    auto r = diagonal_contrast(m, 10000, 11);
    CHECK(r.contrast > 0.0);
    CHECK(r.p_value < 0.001);
}

}  // TEST_SUITE
