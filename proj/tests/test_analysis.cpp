#include <doctest.h>

#include <cmath>

#include "letterdec/analysis.hpp"
#include "letterdec/synth.hpp"
#include "oracles.hpp"

using namespace letterdec;

namespace {

Dataset identical_epoch_dataset(int n_per_class, double value) {
    Dataset ds;
    ds.layout.labels = {"C1", "C2"};
    ds.axis.sampling_rate_hz = 250.0;
    ds.axis.start_ms = 0.0;
    ds.axis.n_samples = 16;
    for (int label = 0; label < kNumClasses; ++label) {
        for (int i = 0; i < n_per_class; ++i) {
            Epoch e;
            e.n_channels = 2;
            e.n_samples = 16;
            e.data.assign(32, value);
            e.label = label;
            e.trial_id = i;
            ds.epochs.push_back(std::move(e));
        }
    }
    return ds;
}

AveragePattern random_pattern(int c, int t, uint64_t seed) {
    AveragePattern p;
    p.n_channels = c;
    p.n_samples = t;
    p.n_trials = 1;
    p.data.resize(static_cast<size_t>(c) * t);
    Rng rng(seed);
    for (double& v : p.data) v = rng.normal();
    return p;
}

// Noiseless dataset: each letter's trials all equal its template.
Dataset template_dataset(const TemplateSet& ts, int n_per_class) {
    SynthSpec spec;
    spec.noise_free = true;
    spec.n_per_class = n_per_class;
    spec.trial_jitter_ms = 0.0;
    spec.seed = 99;
    EpochAxis axis;
    axis.start_ms = 0.0;
    axis.n_samples = ts.n_samples;
    axis.sampling_rate_hz = ts.sampling_rate_hz;
    ChannelLayout layout;
    for (int i = 0; i < ts.n_channels; ++i) layout.labels.push_back("C" + std::to_string(i));
    return synthesize_dataset(ts, spec, axis, layout);
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("split-half of identical epochs averages to the common value") {
    Dataset ds = identical_epoch_dataset(10, 3.25);
    auto [a, b] = split_half_average(ds, 4, 7);
    CHECK(a.n_trials == 5);
    CHECK(b.n_trials == 5);
    for (double v : a.data) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));
    for (double v : b.data) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("split-half is deterministic given the seed") {
    SynthSpec spec;
    spec.n_per_class = 8;
    spec.seed = 5;
    Dataset ds = synthesize_model_shaped(spec);
    auto [a1, b1] = split_half_average(ds, 3, 123);
    auto [a2, b2] = split_half_average(ds, 3, 123);
    CHECK(a1.data == a2.data);
    CHECK(b1.data == b2.data);
    auto [a3, b3] = split_half_average(ds, 3, 124);
    CHECK(a1.data != a3.data);
}

TEST_CASE("split-half averages match a direct mean oracle") {
    SynthSpec spec;
    spec.n_per_class = 12;
    spec.seed = 17;
    Dataset ds = synthesize_model_shaped(spec);
    auto [a, b] = split_half_average(ds, 0, 9);
    // Oracle: average every epoch of the letter and compare A/B weighted mean.
    std::vector<double> total(a.data.size(), 0.0);
    int n = 0;
    for (const auto& e : ds.epochs)
        if (e.label == 0) {
            for (size_t i = 0; i < e.data.size(); ++i) total[i] += e.data[i];
            ++n;
        }
    CHECK(n == a.n_trials + b.n_trials);
    for (size_t i = 0; i < total.size(); ++i) {
        const double combined = (a.data[i] * a.n_trials + b.data[i] * b.n_trials) / n;
        CHECK(std::fabs(combined - total[i] / n) < 1e-10);
    }
}

TEST_CASE("split-half needs at least 2 epochs") {
    Dataset ds = identical_epoch_dataset(1, 1.0);
    CHECK_THROWS_AS(split_half_average(ds, 0, 1), DataError);
}

TEST_CASE("pattern similarity of a pattern with itself is 1") {
    auto p = random_pattern(4, 100, 1);
    CHECK(pattern_similarity(p, p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pattern similarity with the negated pattern is -1") {
    auto p = random_pattern(4, 100, 2);
    auto q = p;
    for (double& v : q.data) v = -v;
    CHECK(pattern_similarity(p, q) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pattern similarity matches the per-channel Pearson oracle") {
    auto a = random_pattern(6, 64, 3);
    auto b = random_pattern(6, 64, 4);
    double expect = 0.0;
    for (int c = 0; c < 6; ++c) {
        std::vector<double> va(a.data.begin() + c * 64, a.data.begin() + (c + 1) * 64);
        std::vector<double> vb(b.data.begin() + c * 64, b.data.begin() + (c + 1) * 64);
        expect += oracles::pearson(va, vb);
    }
    expect /= 6.0;
    CHECK(pattern_similarity(a, b) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("pattern similarity is symmetric and affine-invariant") {
    auto a = random_pattern(5, 80, 11);
    auto b = random_pattern(5, 80, 12);
    CHECK(pattern_similarity(a, b) == doctest::Approx(pattern_similarity(b, a)).epsilon(1e-12));
    auto scaled = a;
    for (int c = 0; c < 5; ++c)
        for (int t = 0; t < 80; ++t) scaled.at(c, t) = (2.0 + c) * a.at(c, t) + (c - 1.5);
    CHECK(pattern_similarity(scaled, b) == doctest::Approx(pattern_similarity(a, b)).epsilon(1e-9));
}

TEST_CASE("zero-variance channel contributes r = 0 with a warning count") {
    auto a = random_pattern(2, 50, 13);
    auto b = random_pattern(2, 50, 14);
    for (int t = 0; t < 50; ++t) a.at(1, t) = 7.0;  // constant channel
    int warnings = 0;
    std::vector<double> a0(a.data.begin(), a.data.begin() + 50);
    std::vector<double> b0(b.data.begin(), b.data.begin() + 50);
    const double expect = oracles::pearson(a0, b0) / 2.0;
    CHECK(pattern_similarity(a, b, &warnings) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(warnings == 1);
}

TEST_CASE("similarity matrix of noiseless templates: unit diagonal, oracle off-diagonal") {
    auto ts = make_templates(4, 64, kNumClasses, 8.0, 21);
    Dataset ds = template_dataset(ts, 4);
    SimilarityOptions opts;
    opts.apply_pipeline = false;
    auto m = similarity_matrix(ds, BandSpec{}, TimeWindow{0.0, 256.0}, 1, opts);
    for (int i = 0; i < kNumClasses; ++i) CHECK(m.values[i][i] == doctest::Approx(1.0).epsilon(1e-9));
    // Off-diagonal equals the template cross-correlation (mean per-channel Pearson).
    for (int i = 0; i < kNumClasses; i += 7) {
        for (int j = 0; j < kNumClasses; j += 5) {
            if (i == j) continue;
            double expect = 0.0;
            for (int c = 0; c < 4; ++c) {
                std::vector<double> vi(ts.templates[i].begin() + c * 64, ts.templates[i].begin() + (c + 1) * 64);
                std::vector<double> vj(ts.templates[j].begin() + c * 64, ts.templates[j].begin() + (c + 1) * 64);
                expect += oracles::pearson(vi, vj);
            }
            expect /= 4.0;
            CHECK(m.values[i][j] == doctest::Approx(expect).epsilon(1e-6));
        }
    }
}

TEST_CASE("similarity matrix of pure noise is near zero") {
    SynthSpec spec;
    spec.snr = 0.0;
    spec.n_per_class = 20;
    spec.seed = 31;
    Dataset ds = synthesize_model_shaped(spec);
    SimilarityOptions opts;
    opts.apply_pipeline = false;
    auto m = similarity_matrix(ds, BandSpec{}, TimeWindow{0.0, 1600.0}, 2, opts);
    double mean = 0.0;
    for (int i = 0; i < kNumClasses; ++i)
        for (int j = 0; j < kNumClasses; ++j) mean += m.values[i][j];
    mean /= kNumClasses * kNumClasses;
    CHECK(std::fabs(mean) < 0.05);
}

TEST_CASE("identical templates for all letters: diagonal indistinguishable") {
    auto ts = make_templates(3, 32, 1, 8.0, 50);
    ts.templates.assign(kNumClasses, ts.templates[0]);
    ts.n_channels = 3;
    Dataset ds = template_dataset(ts, 4);
    SimilarityOptions opts;
    opts.apply_pipeline = false;
    auto m = similarity_matrix(ds, BandSpec{}, TimeWindow{0.0, 128.0}, 3, opts);
    CHECK(std::fabs(matrix_diagonal_contrast(m.values)) < 1e-9);
}

TEST_CASE("swapped halves give the transposed matrix") {
    // With the same seed, (B rows, A cols) of the matrix equals the transpose.
    SynthSpec spec;
    spec.snr = 1.0;
    spec.n_per_class = 6;
    spec.seed = 41;
    Dataset ds = synthesize_model_shaped(spec);
    SimilarityOptions opts;
    opts.apply_pipeline = false;
    auto m = similarity_matrix(ds, BandSpec{}, TimeWindow{0.0, 1600.0}, 4, opts);
    std::vector<std::pair<AveragePattern, AveragePattern>> halves;
    for (int letter = 0; letter < kNumClasses; ++letter) halves.push_back(split_half_average(ds, letter, 4));
    for (int i = 0; i < kNumClasses; i += 9)
        for (int j = 0; j < kNumClasses; j += 9) {
            const double swapped = pattern_similarity(halves[i].second, halves[j].first);
            CHECK(swapped == doctest::Approx(m.values[j][i]).epsilon(1e-12));
        }
}

TEST_CASE("diagonal contrast of the identity-like matrix") {
    SimilarityMatrix m;
    for (int i = 0; i < kNumClasses; ++i)
        for (int j = 0; j < kNumClasses; ++j) m.values[i][j] = (i == j) ? 1.0 : 0.0;
    auto r = diagonal_contrast(m, 10000, 5);
    CHECK(r.contrast == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.p_value <= 1.0 / 10001 + 1e-12);
}

TEST_CASE("diagonal contrast of a constant matrix") {
    SimilarityMatrix m;
    for (auto& row : m.values) row.fill(0.42);
    auto r = diagonal_contrast(m, 2000, 6);
    CHECK(r.contrast == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.p_value > 0.99);
}

TEST_CASE("label-permuted contrast is centered on zero") {
    SynthSpec spec;
    spec.snr = 1.0;
    spec.n_per_class = 8;
    spec.seed = 61;
    Dataset ds = synthesize_model_shaped(spec);
    SimilarityOptions opts;
    opts.apply_pipeline = false;
    auto m = similarity_matrix(ds, BandSpec{}, TimeWindow{0.0, 1600.0}, 7, opts);
    // Permute row labels 100 times; the mean permuted contrast should be ~0.
    Rng rng(4242);
    std::vector<int> perm(kNumClasses);
    for (int i = 0; i < kNumClasses; ++i) perm[i] = i;
    double mean_contrast = 0.0;
    for (int s = 0; s < 100; ++s) {
        rng.shuffle(perm);
        SimilarityMatrix pm;
        for (int i = 0; i < kNumClasses; ++i)
            for (int j = 0; j < kNumClasses; ++j) pm.values[i][j] = m.values[perm[i]][j];
        mean_contrast += matrix_diagonal_contrast(pm.values);
    }
    mean_contrast /= 100.0;
    CHECK(std::fabs(mean_contrast) < 0.02);
}

TEST_CASE("high-SNR synthetic subject has positive contrast with small p") {
    SynthSpec spec;
    spec.snr = 1.0;
    spec.n_per_class = 40;
    spec.seed = 71;
    Dataset ds = synthesize_model_shaped(spec);
    SimilarityOptions opts;
    opts.apply_pipeline = false;
    auto m = similarity_matrix(ds, BandSpec{}, TimeWindow{0.0, 1600.0}, 8, opts);
    auto r = diagonal_contrast(m, 10000, 9);
    CHECK(r.contrast > 0.0);
    CHECK(r.p_value < 0.001);
}

TEST_CASE("temporal PCA recovers a rank-1 factorization") {
    AveragePattern p;
    p.n_channels = 5;
    p.n_samples = 60;
    p.data.resize(5 * 60);
    std::vector<double> w = {0.1, -0.4, 0.8, 0.3, -0.2};
    for (int c = 0; c < 5; ++c)
        for (int t = 0; t < 60; ++t) p.at(c, t) = w[c] * std::sin(0.21 * t);
    auto r = temporal_pca(p, 5);
    CHECK(r.explained_variance[0] / r.total_variance > 0.999);
    // Component parallel to w (normalized, sign fixed to largest coef positive).
    double wn = 0.0;
    for (double v : w) wn += v * v;
    wn = std::sqrt(wn);
    for (int c = 0; c < 5; ++c) CHECK(std::fabs(r.components[0][c] - w[c] / wn) < 1e-8);
}

TEST_CASE("PCA reconstruction from all components matches centered data") {
    auto p = random_pattern(6, 48, 91);
    auto r = temporal_pca(p, 6);
    std::vector<double> channel_mean(6, 0.0);
    for (int c = 0; c < 6; ++c) {
        for (int t = 0; t < 48; ++t) channel_mean[c] += p.at(c, t);
        channel_mean[c] /= 48.0;
    }
    for (int c = 0; c < 6; ++c)
        for (int t = 0; t < 48; ++t) {
            double rec = 0.0;
            for (int k = 0; k < 6; ++k) rec += r.components[k][c] * r.scores[k][t];
            CHECK(std::fabs(rec - (p.at(c, t) - channel_mean[c])) < 1e-8);
        }
}

TEST_CASE("PCA components are orthonormal with descending variance") {
    auto p = random_pattern(8, 100, 92);
    auto r = temporal_pca(p, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double dot = 0.0;
            for (int c = 0; c < 8; ++c) dot += r.components[i][c] * r.components[j][c];
            CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-8);
        }
    for (int i = 1; i < 8; ++i) CHECK(r.explained_variance[i] <= r.explained_variance[i - 1] + 1e-12);
}

TEST_CASE("PCA explained variance sums to the total centered variance") {
    auto p = random_pattern(7, 90, 93);
    auto r = temporal_pca(p, 7);
    double sum = 0.0;
    for (double v : r.explained_variance) sum += v;
    CHECK(std::fabs(sum - r.total_variance) / r.total_variance < 1e-8);
}

TEST_CASE("PCA rejects k > C") {
    auto p = random_pattern(3, 30, 94);
    CHECK_THROWS_AS(temporal_pca(p, 4), DataError);
}

TEST_CASE("scalp snapshot: constant pattern returns the constant at all times") {
    AveragePattern p;
    p.n_channels = 24;
    p.n_samples = 400;
    p.data.assign(24 * 400, 2.5);
    EpochAxis axis;
    axis.start_ms = 0.0;
    axis.n_samples = 400;
    auto snap = scalp_snapshot(p, {300, 500, 700, 900, 1100, 1300}, axis, default_layout_24());
    const std::vector<int> expect_idx = {75, 125, 175, 225, 275, 325};
    CHECK(snap.sample_indices == expect_idx);
    for (const auto& row : snap.values)
        for (double v : row) CHECK(v == 2.5);
}

TEST_CASE("scalp snapshot rejects a time outside the axis") {
    AveragePattern p;
    p.n_channels = 24;
    p.n_samples = 400;
    p.data.assign(24 * 400, 0.0);
    EpochAxis axis;
    axis.start_ms = 0.0;
    axis.n_samples = 400;
    CHECK_THROWS_AS(scalp_snapshot(p, {2000.0}, axis, default_layout_24()), DataError);
}

}  // TEST_SUITE
