#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "letterdec/dataio.hpp"
#include "letterdec/dsp.hpp"

namespace letterdec {

struct AveragePattern {
    int n_channels = 0;
    int n_samples = 0;
    std::vector<double> data;  // row-major C x T mean over trials
    int letter = 0;
    char half = 'A';
    int n_trials = 0;

    double& at(int c, int t) { return data[static_cast<size_t>(c) * n_samples + t]; }
    double at(int c, int t) const { return data[static_cast<size_t>(c) * n_samples + t]; }
};

// Cross-half Pearson matrix: row = half-A letter, column = half-B letter.
struct SimilarityMatrix {
    std::array<std::array<double, kNumClasses>, kNumClasses> values{};
    BandSpec band;
    TimeWindow window;
    int zero_variance_channels = 0;  // accumulated warnings from pattern_similarity
};

struct PcaResult {
    std::vector<std::vector<double>> components;  // k unit vectors of length C
    std::vector<std::vector<double>> scores;      // k time series of length T
    std::vector<double> explained_variance;       // descending
    double total_variance = 0.0;
};

// Shuffles the letter's epochs with a per-letter seed stream, averages each half.
std::pair<AveragePattern, AveragePattern> split_half_average(const Dataset& ds, int letter, uint64_t seed);

// Mean over channels of the per-channel Pearson r between the two patterns.
// Channels where either side has zero variance contribute r = 0; the count of
// such channels is reported through *zero_variance_channels when non-null.
double pattern_similarity(const AveragePattern& a, const AveragePattern& b,
                          int* zero_variance_channels = nullptr);

struct SimilarityOptions {
    bool apply_pipeline = true;  // filter/crop the raw data with band/window first
    std::optional<TimeWindow> baseline;
    bool zscore = true;
};

SimilarityMatrix similarity_matrix(const Dataset& ds, const BandSpec& band, const TimeWindow& window,
                                   uint64_t seed, const SimilarityOptions& opts = {});

// Full 52x52 cross matrix over the half-A and half-B patterns of all letters,
// ordered A-half 0..25 then B-half 0..25.
std::vector<std::vector<double>> similarity_matrix_full52(const Dataset& ds, const BandSpec& band,
                                                          const TimeWindow& window, uint64_t seed,
                                                          const SimilarityOptions& opts = {});

struct DiagonalContrast {
    double contrast = 0.0;  // mean(diagonal) - mean(off-diagonal)
    double p_value = 1.0;
    int n_permutations = 0;
};

// Permutation test: the row-to-column letter alignment is broken by permuting
// row labels (permuting rows and columns by one shared permutation leaves the
// diagonal multiset unchanged, so it cannot serve as a null).
DiagonalContrast diagonal_contrast(const SimilarityMatrix& m, int n_permutations = 10000, uint64_t seed = 0);

double matrix_diagonal_contrast(const std::array<std::array<double, kNumClasses>, kNumClasses>& values);

PcaResult temporal_pca(const AveragePattern& avg, int k);

// Channel values at the nearest sample to each requested time, keyed by label.
struct ScalpSnapshot {
    std::vector<double> times_ms;
    std::vector<int> sample_indices;
    std::vector<std::string> channel_labels;
    std::vector<std::vector<double>> values;  // [time][channel]
};

ScalpSnapshot scalp_snapshot(const AveragePattern& avg, const std::vector<double>& times_ms, const EpochAxis& axis,
                             const ChannelLayout& layout);

// Symmetric eigendecomposition by cyclic Jacobi; eigenvalues descending,
// eigenvectors as rows of `vectors`.
void symmetric_eigen(std::vector<std::vector<double>> matrix, std::vector<double>& values,
                     std::vector<std::vector<double>>& vectors);

}  // namespace letterdec
