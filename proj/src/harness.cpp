#include "letterdec/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace letterdec {

FoldPlan make_folds(const Dataset& ds, int k, uint64_t seed) {
    if (k < 2) throw ConfigError("k-fold needs k >= 2");
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.bin_of.assign(ds.epochs.size(), -1);

    for (int cls = 0; cls < kNumClasses; ++cls) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < ds.epochs.size(); ++i)
            if (ds.epochs[i].label == cls) idx.push_back(i);
        if (idx.size() < static_cast<size_t>(k))
            throw DataError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                            " epochs, fewer than k = " + std::to_string(k));
        if (idx.size() % k != 0)
            plan.warnings.push_back("class " + std::to_string(cls) + " count " + std::to_string(idx.size()) +
                                    " not divisible by k; bins differ by one");
        Rng rng(mix_seed(seed, 0x666f6c64ULL, static_cast<uint64_t>(cls)));
        rng.shuffle(idx);
        const size_t base = idx.size() / k;
        const size_t extra = idx.size() % k;
        size_t cursor = 0;
        for (int bin = 0; bin < k; ++bin) {
            const size_t len = base + (static_cast<size_t>(bin) < extra ? 1 : 0);
            for (size_t j = 0; j < len; ++j) plan.bin_of[idx[cursor++]] = bin;
        }
    }
    return plan;
}

namespace {

// Read-only float32 view of the dataset for batch assembly.
struct TrainMatrix {
    int n = 0, c = 0, t = 0;
    std::vector<float> data;  // [epoch][c*t]
    std::vector<int> labels;

    explicit TrainMatrix(const Dataset& ds) {
        n = static_cast<int>(ds.epochs.size());
        if (n == 0) throw DataError("cannot train on an empty dataset");
        c = ds.epochs[0].n_channels;
        t = ds.epochs[0].n_samples;
        data.resize(static_cast<size_t>(n) * c * t);
        labels.resize(n);
        for (int i = 0; i < n; ++i) {
            const auto& e = ds.epochs[i];
            labels[i] = e.label;
            float* dst = data.data() + static_cast<size_t>(i) * c * t;
            for (size_t j = 0; j < e.data.size(); ++j) dst[j] = static_cast<float>(e.data[j]);
        }
    }

    const float* epoch(int i) const { return data.data() + static_cast<size_t>(i) * c * t; }
};

template <typename S>
nn::Tensor<S> assemble_batch(const TrainMatrix& m, const std::vector<size_t>& order, size_t begin, size_t end,
                             std::vector<int>& labels_out) {
    const int nb = static_cast<int>(end - begin);
    auto x = nn::make_tensor<S>({nb, 1, m.c, m.t});
    labels_out.resize(nb);
    for (int b = 0; b < nb; ++b) {
        const int idx = static_cast<int>(order[begin + b]);
        const float* src = m.epoch(idx);
        S* dst = x->value.data() + static_cast<size_t>(b) * m.c * m.t;
        for (int j = 0; j < m.c * m.t; ++j) dst[j] = static_cast<S>(src[j]);
        labels_out[b] = m.labels[idx];
    }
    return x;
}

double evaluate_accuracy(nn::Model<float>& model, const TrainMatrix& m, const std::vector<size_t>& val_idx,
                         int batch_size) {
    int correct = 0;
    nn::ForwardCtx<float> ctx;
    ctx.training = false;
    for (size_t begin = 0; begin < val_idx.size(); begin += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(val_idx.size(), begin + static_cast<size_t>(batch_size));
        std::vector<int> labels;
        auto x = assemble_batch<float>(m, val_idx, begin, end, labels);
        auto logits = model.forward(x, ctx);
        const int ncls = logits->dim(1);
        for (int b = 0; b < logits->dim(0); ++b) {
            const float* row = logits->value.data() + static_cast<size_t>(b) * ncls;
            int arg = 0;
            for (int k = 1; k < ncls; ++k)
                if (row[k] > row[arg]) arg = k;
            if (arg == labels[b]) ++correct;
        }
    }
    return 100.0 * correct / static_cast<double>(val_idx.size());
}

FoldResult train_fold_on_matrix(const ModelConfig& cfg, const TrainMatrix& matrix, const FoldPlan& plan, int fold,
                                const TrainConfig& tc, uint64_t run_seed) {
    FoldResult result;
    result.fold_index = fold;

    std::vector<size_t> train_idx, val_idx;
    for (size_t i = 0; i < plan.bin_of.size(); ++i)
        (plan.bin_of[i] == fold ? val_idx : train_idx).push_back(i);
    result.n_val = static_cast<int>(val_idx.size());
    if (train_idx.empty() || val_idx.empty()) {
        result.failed = true;
        result.error = "empty train or validation split";
        return result;
    }

    const uint64_t model_hash = hash_string(arch_name(cfg.arch));
    auto model = build_model<float>(cfg, mix_seed(run_seed, model_hash, static_cast<uint64_t>(fold), 0x696e6974ULL));
    auto params = model->parameters();
    nn::AdamState<float> opt;
    opt.lr = tc.lr;
    opt.beta1 = tc.beta1;
    opt.beta2 = tc.beta2;
    opt.eps = tc.adam_eps;
    nn::adam_init(opt, params);

    Rng fold_rng(mix_seed(run_seed, model_hash, static_cast<uint64_t>(fold), 0x7472ULL));
    nn::ForwardCtx<float> train_ctx;
    train_ctx.training = true;
    train_ctx.rng = &fold_rng;

    try {
        int epochs_since_best = 0;
        for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
            fold_rng.shuffle(train_idx);
            double loss_sum = 0.0;
            int n_batches = 0;
            for (size_t begin = 0; begin < train_idx.size(); begin += static_cast<size_t>(tc.batch_size)) {
                const size_t end = std::min(train_idx.size(), begin + static_cast<size_t>(tc.batch_size));
                if (end - begin < 2) continue;  // batch norm needs batch >= 2
                std::vector<int> labels;
                auto x = assemble_batch<float>(matrix, train_idx, begin, end, labels);
                auto logits = model->forward(x, train_ctx);
                auto loss = nn::softmax_cross_entropy(logits, labels);
                if (!std::isfinite(static_cast<double>(loss->value[0])))
                    throw NumericError("divergence: non-finite training loss");
                nn::backward(loss);
                nn::adam_step(opt, params);
                loss_sum += static_cast<double>(loss->value[0]);
                ++n_batches;
            }
            result.train_loss_curve.push_back(n_batches > 0 ? loss_sum / n_batches : 0.0);

            const double acc = evaluate_accuracy(*model, matrix, val_idx, tc.batch_size);
            result.val_accuracy_curve.push_back(acc);
            result.n_evaluations = static_cast<int>(result.val_accuracy_curve.size());
            if (acc > result.best_val_accuracy || result.epoch_of_best < 0) {
                result.best_val_accuracy = acc;
                result.epoch_of_best = epoch;
                epochs_since_best = 0;
            } else {
                ++epochs_since_best;
            }
            if (epochs_since_best >= tc.patience) break;
        }
    } catch (const NumericError& e) {
        result.failed = true;
        result.error = e.what();
    }
    if (!tc.checkpoint_dir.empty() && !result.failed) {
        const std::string path =
            tc.checkpoint_dir + "/checkpoint_" + arch_name(cfg.arch) + "_fold" + std::to_string(fold) + ".bin";
        save_checkpoint(*model, path);
    }
    return result;
}

ModelRunStats stats_of(const std::vector<FoldResult>& folds) {
    ModelRunStats s;
    std::vector<double> acc;
    for (const auto& f : folds)
        if (!f.failed) acc.push_back(f.best_val_accuracy);
    if (acc.empty()) return s;
    s.max = *std::max_element(acc.begin(), acc.end());
    s.mean = mean(acc);
    s.q1 = quantile(acc, 0.25);
    s.median = quantile(acc, 0.5);
    s.q3 = quantile(acc, 0.75);
    return s;
}

}  // namespace

FoldResult train_one_fold(const ModelConfig& cfg, const Dataset& ds, const FoldPlan& plan, int fold,
                          const TrainConfig& tc, uint64_t run_seed) {
    if (fold < 0 || fold >= plan.k) throw ConfigError("fold index out of range");
    TrainMatrix matrix(ds);
    return train_fold_on_matrix(cfg, matrix, plan, fold, tc, run_seed);
}

std::vector<FoldResult> cross_validate(const ModelConfig& cfg, const Dataset& ds, const FoldPlan& plan,
                                       const TrainConfig& tc, uint64_t run_seed, int jobs) {
    TrainMatrix matrix(ds);
    std::vector<FoldResult> results(plan.k);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int fold = next.fetch_add(1);
            if (fold >= plan.k) return;
            results[fold] = train_fold_on_matrix(cfg, matrix, plan, fold, tc, run_seed);
        }
    };
    const int n_threads = std::max(1, std::min(jobs, plan.k));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

RunReport summarize_run(const std::vector<ModelRun>& runs, const std::string& subject_id, uint64_t seed, int k) {
    RunReport report;
    report.subject_id = subject_id;
    report.seed = seed;
    report.k = k;
    report.models = runs;
    for (auto& m : report.models) {
        m.stats = stats_of(m.folds);
        m.n_failed = 0;
        for (const auto& f : m.folds)
            if (f.failed) ++m.n_failed;
    }

    std::vector<std::vector<double>> groups;
    std::vector<const ModelRun*> usable;
    for (const auto& m : report.models) {
        std::vector<double> acc;
        for (const auto& f : m.folds)
            if (!f.failed) acc.push_back(f.best_val_accuracy);
        if (acc.size() >= 2) {
            groups.push_back(std::move(acc));
            usable.push_back(&m);
        }
    }
    if (groups.size() >= 2) {
        try {
            report.anova = anova_oneway(groups);
        } catch (const NumericError&) {
            report.anova.reset();  // undefined F (all accuracies identical)
        }
        for (size_t i = 0; i < groups.size(); ++i)
            for (size_t j = 0; j < groups.size(); ++j) {
                if (i == j) continue;
                PairwiseTest pt;
                pt.a = usable[i]->model;
                pt.b = usable[j]->model;
                try {
                    const bool paired = groups[i].size() == groups[j].size();
                    auto r = ttest_one_tailed(groups[i], groups[j], paired ? TTestMode::paired : TTestMode::welch);
                    pt.t = r.t;
                    pt.p = r.p;
                } catch (const NumericError&) {
                    pt.t = 0.0;
                    pt.p = 0.5;
                }
                report.pairwise.push_back(pt);
            }
    }
    return report;
}

RunReport run_training(const std::vector<ModelConfig>& model_cfgs, const Dataset& ds, const TrainConfig& tc,
                       uint64_t seed, int jobs) {
    if (model_cfgs.empty()) throw ConfigError("no models configured");
    const FoldPlan plan = make_folds(ds, tc.k_folds, seed);
    TrainMatrix matrix(ds);

    struct Task {
        int model = 0, fold = 0;
    };
    std::vector<Task> tasks;
    for (size_t mi = 0; mi < model_cfgs.size(); ++mi)
        for (int fold = 0; fold < tc.k_folds; ++fold) tasks.push_back({static_cast<int>(mi), fold});

    std::vector<ModelRun> runs(model_cfgs.size());
    for (size_t mi = 0; mi < model_cfgs.size(); ++mi) {
        runs[mi].model = arch_name(model_cfgs[mi].arch);
        runs[mi].config = model_cfgs[mi];
        runs[mi].folds.resize(tc.k_folds);
    }

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t ti = next.fetch_add(1);
            if (ti >= tasks.size()) return;
            const Task& task = tasks[ti];
            runs[task.model].folds[task.fold] =
                train_fold_on_matrix(model_cfgs[task.model], matrix, plan, task.fold, tc, seed);
        }
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return summarize_run(runs, ds.subject_id, seed, tc.k_folds);
}

}  // namespace letterdec
