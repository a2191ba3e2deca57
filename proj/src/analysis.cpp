#include "letterdec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace letterdec {

std::pair<AveragePattern, AveragePattern> split_half_average(const Dataset& ds, int letter, uint64_t seed) {
    if (letter < 0 || letter >= kNumClasses) throw DataError("letter index out of range");
    std::vector<size_t> idx;
    for (size_t i = 0; i < ds.epochs.size(); ++i)
        if (ds.epochs[i].label == letter) idx.push_back(i);
    if (idx.size() < 2)
        throw DataError("split-half needs at least 2 epochs of letter " + std::string(1, index_to_letter(letter)));

    // Per-letter derived stream so the split is identical no matter which
    // letters are processed, or in what order.
    Rng rng(mix_seed(seed, static_cast<uint64_t>(letter)));
    rng.shuffle(idx);

    const int c = ds.epochs[idx[0]].n_channels;
    const int t = ds.epochs[idx[0]].n_samples;
    const size_t half = idx.size() / 2;

    auto average = [&](size_t begin, size_t end, char half_tag) {
        AveragePattern p;
        p.n_channels = c;
        p.n_samples = t;
        p.letter = letter;
        p.half = half_tag;
        p.n_trials = static_cast<int>(end - begin);
        p.data.assign(static_cast<size_t>(c) * t, 0.0);
        for (size_t i = begin; i < end; ++i) {
            const Epoch& e = ds.epochs[idx[i]];
            for (size_t j = 0; j < p.data.size(); ++j) p.data[j] += e.data[j];
        }
        for (double& v : p.data) v /= p.n_trials;
        return p;
    };
    return {average(0, half, 'A'), average(half, idx.size(), 'B')};
}

double pattern_similarity(const AveragePattern& a, const AveragePattern& b, int* zero_variance_channels) {
    if (a.n_channels != b.n_channels || a.n_samples != b.n_samples)
        throw DataError("pattern shape mismatch in similarity");
    const int c = a.n_channels;
    const int t = a.n_samples;
    int zero_var = 0;
    double sum_r = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        double ma = 0.0, mb = 0.0;
        for (int i = 0; i < t; ++i) {
            ma += a.at(ch, i);
            mb += b.at(ch, i);
        }
        ma /= t;
        mb /= t;
        double saa = 0.0, sbb = 0.0, sab = 0.0;
        for (int i = 0; i < t; ++i) {
            const double da = a.at(ch, i) - ma;
            const double db = b.at(ch, i) - mb;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
        }
        if (saa <= 0.0 || sbb <= 0.0) {
            ++zero_var;  // contributes r = 0
            continue;
        }
        sum_r += sab / std::sqrt(saa * sbb);
    }
    if (zero_variance_channels) *zero_variance_channels += zero_var;
    return sum_r / c;
}

namespace {

std::vector<std::pair<AveragePattern, AveragePattern>> half_patterns(const Dataset& ds, const BandSpec& band,
                                                                     const TimeWindow& window, uint64_t seed,
                                                                     const SimilarityOptions& opts) {
    const Dataset* src = &ds;
    Dataset processed;
    if (opts.apply_pipeline) {
        PipelineSpec spec;
        spec.band = band;
        spec.baseline = opts.baseline;
        spec.crop = window;
        spec.zscore = opts.zscore;
        processed = preprocess_dataset(ds, spec);
        src = &processed;
    }
    std::vector<std::pair<AveragePattern, AveragePattern>> halves;
    halves.reserve(kNumClasses);
    for (int letter = 0; letter < kNumClasses; ++letter) halves.push_back(split_half_average(*src, letter, seed));
    return halves;
}

}  // namespace

SimilarityMatrix similarity_matrix(const Dataset& ds, const BandSpec& band, const TimeWindow& window, uint64_t seed,
                                   const SimilarityOptions& opts) {
    const auto halves = half_patterns(ds, band, window, seed, opts);
    SimilarityMatrix m;
    m.band = band;
    m.window = window;
    for (int i = 0; i < kNumClasses; ++i)
        for (int j = 0; j < kNumClasses; ++j)
            m.values[i][j] = pattern_similarity(halves[i].first, halves[j].second, &m.zero_variance_channels);
    return m;
}

std::vector<std::vector<double>> similarity_matrix_full52(const Dataset& ds, const BandSpec& band,
                                                          const TimeWindow& window, uint64_t seed,
                                                          const SimilarityOptions& opts) {
    const auto halves = half_patterns(ds, band, window, seed, opts);
    std::vector<const AveragePattern*> patterns;
    for (const auto& h : halves) patterns.push_back(&h.first);
    for (const auto& h : halves) patterns.push_back(&h.second);
    std::vector<std::vector<double>> m(52, std::vector<double>(52, 0.0));
    for (int i = 0; i < 52; ++i)
        for (int j = 0; j < 52; ++j) m[i][j] = pattern_similarity(*patterns[i], *patterns[j]);
    return m;
}

double matrix_diagonal_contrast(const std::array<std::array<double, kNumClasses>, kNumClasses>& values) {
    double diag = 0.0, off = 0.0;
    for (int i = 0; i < kNumClasses; ++i)
        for (int j = 0; j < kNumClasses; ++j) (i == j ? diag : off) += values[i][j];
    return diag / kNumClasses - off / (kNumClasses * (kNumClasses - 1));
}

DiagonalContrast diagonal_contrast(const SimilarityMatrix& m, int n_permutations, uint64_t seed) {
    DiagonalContrast result;
    result.n_permutations = n_permutations;
    result.contrast = matrix_diagonal_contrast(m.values);

    double total = 0.0;
    for (int i = 0; i < kNumClasses; ++i)
        for (int j = 0; j < kNumClasses; ++j) total += m.values[i][j];

    Rng rng(mix_seed(seed, 0x7065726dULL));
    std::vector<int> perm(kNumClasses);
    std::iota(perm.begin(), perm.end(), 0);
    auto permuted_contrast = [&](const std::vector<int>& p) {
        double diag = 0.0;
        for (int i = 0; i < kNumClasses; ++i) diag += m.values[p[i]][i];
        return diag / kNumClasses - (total - diag) / (kNumClasses * (kNumClasses - 1));
    };
    // Observed statistic through the identity permutation's code path, so that
    // exact ties (e.g. a constant matrix) compare as ties.
    const double observed = permuted_contrast(perm);
    int n_ge = 0;
    for (int p = 0; p < n_permutations; ++p) {
        rng.shuffle(perm);
        if (permuted_contrast(perm) >= observed - 1e-12) ++n_ge;
    }
    result.p_value = (1.0 + n_ge) / (1.0 + n_permutations);
    return result;
}

void symmetric_eigen(std::vector<std::vector<double>> a, std::vector<double>& values,
                     std::vector<std::vector<double>>& vectors) {
    const size_t n = a.size();
    vectors.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) vectors[i][i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (size_t k = 0; k < n; ++k) {
                    const double vkp = vectors[p][k], vkq = vectors[q][k];
                    vectors[p][k] = c * vkp - s * vkq;
                    vectors[q][k] = s * vkp + c * vkq;
                }
            }
        }
    }

    values.resize(n);
    for (size_t i = 0; i < n; ++i) values[i] = a[i][i];
    // Sort descending, rows of `vectors` follow.
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) { return values[x] > values[y]; });
    std::vector<double> sv(n);
    std::vector<std::vector<double>> svec(n);
    for (size_t i = 0; i < n; ++i) {
        sv[i] = values[order[i]];
        svec[i] = vectors[order[i]];
    }
    values = std::move(sv);
    vectors = std::move(svec);
}

PcaResult temporal_pca(const AveragePattern& avg, int k) {
    const int c = avg.n_channels;
    const int t = avg.n_samples;
    if (k > c) throw DataError("requested " + std::to_string(k) + " components from " + std::to_string(c) +
                               " channels");
    if (k < 1) throw DataError("need at least 1 component");

    // T time points as observations of C-dim scalp vectors; center over time.
    std::vector<double> channel_mean(c, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < t; ++i) channel_mean[ch] += avg.at(ch, i);
        channel_mean[ch] /= t;
    }
    std::vector<std::vector<double>> cov(c, std::vector<double>(c, 0.0));
    for (int p = 0; p < c; ++p) {
        for (int q = p; q < c; ++q) {
            double s = 0.0;
            for (int i = 0; i < t; ++i) s += (avg.at(p, i) - channel_mean[p]) * (avg.at(q, i) - channel_mean[q]);
            cov[p][q] = cov[q][p] = s / t;
        }
    }
    double total = 0.0;
    for (int p = 0; p < c; ++p) total += cov[p][p];
    if (!(total > 0.0)) throw NumericError("degenerate pattern: zero variance, PCA undefined");

    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> eigenvectors;
    symmetric_eigen(cov, eigenvalues, eigenvectors);

    PcaResult r;
    r.total_variance = total;
    for (int i = 0; i < k; ++i) {
        std::vector<double> comp = eigenvectors[i];
        // Sign convention: largest-magnitude coefficient positive.
        double best = 0.0;
        for (double v : comp)
            if (std::fabs(v) > std::fabs(best)) best = v;
        if (best < 0.0)
            for (double& v : comp) v = -v;
        std::vector<double> score(t, 0.0);
        for (int i2 = 0; i2 < t; ++i2) {
            double s = 0.0;
            for (int ch = 0; ch < c; ++ch) s += comp[ch] * (avg.at(ch, i2) - channel_mean[ch]);
            score[i2] = s;
        }
        r.components.push_back(std::move(comp));
        r.scores.push_back(std::move(score));
        r.explained_variance.push_back(std::max(0.0, eigenvalues[i]));
    }
    return r;
}

ScalpSnapshot scalp_snapshot(const AveragePattern& avg, const std::vector<double>& times_ms, const EpochAxis& axis,
                             const ChannelLayout& layout) {
    if (layout.n_channels() != avg.n_channels) throw DataError("layout does not match pattern channel count");
    ScalpSnapshot snap;
    snap.channel_labels = layout.labels;
    for (double time : times_ms) {
        const int idx = static_cast<int>(std::lround((time - axis.start_ms) * axis.sampling_rate_hz / 1000.0));
        if (idx < 0 || idx >= avg.n_samples)
            throw DataError("snapshot time " + std::to_string(time) + " ms is outside the epoch axis");
        snap.times_ms.push_back(time);
        snap.sample_indices.push_back(idx);
        std::vector<double> row(avg.n_channels);
        for (int ch = 0; ch < avg.n_channels; ++ch) row[ch] = avg.at(ch, idx);
        snap.values.push_back(std::move(row));
    }
    return snap;
}

}  // namespace letterdec
