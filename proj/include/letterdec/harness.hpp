#pragma once

#include <optional>
#include <string>
#include <vector>

#include "letterdec/dataio.hpp"
#include "letterdec/models.hpp"
#include "letterdec/stats.hpp"

namespace letterdec {

struct FoldPlan {
    int k = 10;
    uint64_t seed = 0;
    std::vector<int> bin_of;  // per epoch index
    std::vector<std::string> warnings;
};

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 64;
    int patience = 20;    // epochs without validation improvement
    int max_epochs = 300;
    int k_folds = 10;
    std::string checkpoint_dir;  // when set, each fold's final weights are saved here
};

struct FoldResult {
    int fold_index = 0;
    double best_val_accuracy = 0.0;  // percent
    int epoch_of_best = -1;
    std::vector<double> train_loss_curve;
    std::vector<double> val_accuracy_curve;  // one entry per evaluation (per epoch)
    int n_evaluations = 0;
    int n_val = 0;
    bool failed = false;
    std::string error;
};

struct ModelRunStats {
    double max = 0.0;
    double mean = 0.0;
    double q1 = 0.0, median = 0.0, q3 = 0.0;
};

struct ModelRun {
    std::string model;
    ModelConfig config;
    std::vector<FoldResult> folds;
    ModelRunStats stats;
    int n_failed = 0;
};

struct PairwiseTest {
    std::string a, b;  // H1: mean(a) > mean(b)
    double t = 0.0, p = 0.5;
};

struct RunReport {
    std::string subject_id;
    uint64_t seed = 0;
    int k = 10;
    double chance_level_percent = 100.0 / 26.0;
    std::vector<ModelRun> models;
    std::optional<AnovaResult> anova;
    std::vector<PairwiseTest> pairwise;  // paired one-tailed t-tests across folds
};

// Per-class shuffle with a seed-derived stream, then contiguous slicing into k
// bins; bins differ by at most one when a class count is not divisible by k.
FoldPlan make_folds(const Dataset& ds, int k, uint64_t seed);

FoldResult train_one_fold(const ModelConfig& cfg, const Dataset& ds, const FoldPlan& plan, int fold,
                          const TrainConfig& tc, uint64_t run_seed);

std::vector<FoldResult> cross_validate(const ModelConfig& cfg, const Dataset& ds, const FoldPlan& plan,
                                       const TrainConfig& tc, uint64_t run_seed, int jobs = 1);

// Trains every configured model over the shared fold plan ((model, fold) units
// may run on a worker pool; results are identical for any jobs >= 1) and runs
// the cross-model statistics.
RunReport run_training(const std::vector<ModelConfig>& model_cfgs, const Dataset& ds, const TrainConfig& tc,
                       uint64_t seed, int jobs = 1);

// Aggregates per-model fold results into the cross-model report.
RunReport summarize_run(const std::vector<ModelRun>& runs, const std::string& subject_id, uint64_t seed, int k);

}  // namespace letterdec
