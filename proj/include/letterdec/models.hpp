#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "letterdec/tensor.hpp"

namespace letterdec {

enum class Arch { DeepConvNet, EEGNet, EEGInception, LMDA };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);

// Tunables for the four architectures. `filters`, `kernels` and `pools` are
// per-stage with arch-specific meaning (see default_model_config).
struct ModelConfig {
    Arch arch = Arch::DeepConvNet;
    int n_channels = 24;
    int n_timepoints = 400;
    int n_classes = 26;
    std::vector<int> filters;
    std::vector<int> kernels;
    std::vector<int> pools;
    double dropout_rate = 0.5;
    int attention_depth = 9;  // LMDA channel-attention depth

    void validate() const;
};

ModelConfig default_model_config(Arch arch);

struct LayerInfo {
    std::string name;
    std::vector<int> output_shape;  // for batch size 1
    long long n_params = 0;
};

struct ModelSummary {
    std::string arch;
    std::vector<LayerInfo> layers;
    long long total_params = 0;

    std::string to_json() const;
};

namespace nn {

template <typename S>
struct ForwardCtx {
    bool training = false;
    Rng* rng = nullptr;  // consumed by dropout in train mode
};

template <typename S>
struct Layer {
    virtual ~Layer() = default;
    virtual Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>& ctx) = 0;
    virtual std::string name() const = 0;
    virtual std::vector<std::pair<std::string, Tensor<S>>> parameters() { return {}; }
};

template <typename S>
class Model {
public:
    Model(std::string name, ModelConfig cfg) : name_(std::move(name)), cfg_(std::move(cfg)) {}

    void add(std::unique_ptr<Layer<S>> layer) { layers_.push_back(std::move(layer)); }

    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>& ctx) {
        Tensor<S> h = x;
        for (auto& l : layers_) h = l->forward(h, ctx);
        return h;
    }

    std::vector<Tensor<S>> parameters() {
        std::vector<Tensor<S>> out;
        for (auto& l : layers_)
            for (auto& [pname, p] : l->parameters()) out.push_back(p);
        return out;
    }

    std::vector<std::pair<std::string, Tensor<S>>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<S>>> out;
        for (size_t i = 0; i < layers_.size(); ++i)
            for (auto& [pname, p] : layers_[i]->parameters())
                out.push_back({layers_[i]->name() + "." + pname, p});
        return out;
    }

    const std::string& name() const { return name_; }
    const ModelConfig& config() const { return cfg_; }
    const std::vector<std::unique_ptr<Layer<S>>>& layers() const { return layers_; }

    ModelSummary summary() {
        ModelSummary s;
        s.arch = name_;
        auto probe = make_tensor<S>({1, 1, cfg_.n_channels, cfg_.n_timepoints});
        ForwardCtx<S> ctx;
        ctx.training = false;
        Tensor<S> h = probe;
        for (auto& l : layers_) {
            h = l->forward(h, ctx);
            LayerInfo info;
            info.name = l->name();
            info.output_shape = h->shape;
            for (auto& [pname, p] : l->parameters()) info.n_params += static_cast<long long>(p->numel());
            s.total_params += info.n_params;
            s.layers.push_back(std::move(info));
        }
        return s;
    }

private:
    std::string name_;
    ModelConfig cfg_;
    std::vector<std::unique_ptr<Layer<S>>> layers_;
};

// He-style fan-in scaled uniform init.
template <typename S>
void init_uniform(Tensor<S>& t, int fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / std::max(1, fan_in));
    for (auto& v : t->value) v = static_cast<S>(rng.uniform(-limit, limit));
}

template <typename S>
class Conv2dLayer : public Layer<S> {
public:
    Conv2dLayer(std::string name, int d_in, int d_out, int kc, int kt, int groups, Padding padding, bool bias,
                Rng& rng)
        : name_(std::move(name)), groups_(groups), padding_(padding) {
        w_ = make_leaf<S>({d_out, d_in / groups, kc, kt});
        init_uniform(w_, (d_in / groups) * kc * kt, rng);
        if (bias) {
            b_ = make_leaf<S>({d_out});
        }
    }

    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>&) override {
        auto y = conv2d(x, w_, groups_, padding_);
        return b_ ? add_bias_depth(y, b_) : y;
    }

    std::string name() const override { return name_; }
    std::vector<std::pair<std::string, Tensor<S>>> parameters() override {
        std::vector<std::pair<std::string, Tensor<S>>> out = {{"weight", w_}};
        if (b_) out.push_back({"bias", b_});
        return out;
    }

private:
    std::string name_;
    Tensor<S> w_, b_;
    int groups_;
    Padding padding_;
};

template <typename S>
class BatchNormLayer : public Layer<S> {
public:
    BatchNormLayer(std::string name, int depth, double momentum = 0.1, double eps = 1e-5)
        : name_(std::move(name)), momentum_(momentum), eps_(eps), running_mean_(depth, 0.0), running_var_(depth, 1.0) {
        gamma_ = make_leaf<S>({depth});
        beta_ = make_leaf<S>({depth});
        for (auto& v : gamma_->value) v = S(1);
    }

    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>& ctx) override {
        return batch_norm(x, gamma_, beta_, running_mean_, running_var_, momentum_, eps_, ctx.training);
    }

    std::string name() const override { return name_; }
    std::vector<std::pair<std::string, Tensor<S>>> parameters() override {
        return {{"gamma", gamma_}, {"beta", beta_}};
    }

    std::vector<double>& running_mean() { return running_mean_; }
    std::vector<double>& running_var() { return running_var_; }

private:
    std::string name_;
    Tensor<S> gamma_, beta_;
    double momentum_, eps_;
    std::vector<double> running_mean_, running_var_;
};

template <typename S>
class EluLayer : public Layer<S> {
public:
    explicit EluLayer(std::string name, double alpha = 1.0) : name_(std::move(name)), alpha_(alpha) {}
    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>&) override { return elu(x, alpha_); }
    std::string name() const override { return name_; }

private:
    std::string name_;
    double alpha_;
};

template <typename S>
class AvgPoolLayer : public Layer<S> {
public:
    AvgPoolLayer(std::string name, int kernel_t, int stride_t)
        : name_(std::move(name)), kernel_(kernel_t), stride_(stride_t) {}
    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>&) override { return avg_pool_time(x, kernel_, stride_); }
    std::string name() const override { return name_; }

private:
    std::string name_;
    int kernel_, stride_;
};

template <typename S>
class DropoutLayer : public Layer<S> {
public:
    DropoutLayer(std::string name, double rate) : name_(std::move(name)), rate_(rate) {}
    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>& ctx) override {
        if (ctx.training && rate_ > 0.0 && !ctx.rng) throw NumericError("dropout in train mode needs an rng");
        static Rng null_rng(0);
        return dropout(x, rate_, ctx.training, ctx.rng ? *ctx.rng : null_rng);
    }
    std::string name() const override { return name_; }

private:
    std::string name_;
    double rate_;
};

template <typename S>
class FlattenLayer : public Layer<S> {
public:
    explicit FlattenLayer(std::string name) : name_(std::move(name)) {}
    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>&) override { return flatten(x); }
    std::string name() const override { return name_; }

private:
    std::string name_;
};

template <typename S>
class DenseLayer : public Layer<S> {
public:
    // The classification head uses a damped init (scale 0.1) so untrained
    // logits start near zero and the initial loss sits at ln(n_classes).
    DenseLayer(std::string name, int in_features, int out_features, Rng& rng, double init_scale = 1.0)
        : name_(std::move(name)) {
        w_ = make_leaf<S>({in_features, out_features});
        init_uniform(w_, in_features, rng);
        for (auto& v : w_->value) v = static_cast<S>(v * init_scale);
        b_ = make_leaf<S>({out_features});
    }
    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>&) override { return dense(x, w_, b_); }
    std::string name() const override { return name_; }
    std::vector<std::pair<std::string, Tensor<S>>> parameters() override {
        return {{"weight", w_}, {"bias", b_}};
    }

private:
    std::string name_;
    Tensor<S> w_, b_;
};

// LMDA front end: learned depth-by-channel weights expand the depth-1 input.
template <typename S>
class ChannelAttentionLayer : public Layer<S> {
public:
    ChannelAttentionLayer(std::string name, int depth, int channels, Rng& rng) : name_(std::move(name)) {
        w_ = make_leaf<S>({depth, channels});
        // Near-uniform expansion at init, broken by small noise.
        for (auto& v : w_->value) v = static_cast<S>(1.0 + 0.1 * rng.normal());
    }
    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>&) override { return channel_expand(x, w_); }
    std::string name() const override { return name_; }
    std::vector<std::pair<std::string, Tensor<S>>> parameters() override { return {{"weight", w_}}; }

private:
    std::string name_;
    Tensor<S> w_;
};

// Softmax-normalized per-depth reweighting from globally pooled features.
template <typename S>
class DepthAttentionLayer : public Layer<S> {
public:
    DepthAttentionLayer(std::string name, int depth, Rng& rng) : name_(std::move(name)) {
        w_ = make_leaf<S>({depth, depth});
        init_uniform(w_, depth, rng);
        b_ = make_leaf<S>({depth});
    }

    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>&) override {
        auto pooled = global_mean_ct(x);
        auto scores = dense(pooled, w_, b_);
        auto weights = softmax_rows(scores);
        last_weights_ = weights;
        return scale_depth(x, weights);
    }

    std::string name() const override { return name_; }
    std::vector<std::pair<std::string, Tensor<S>>> parameters() override {
        return {{"weight", w_}, {"bias", b_}};
    }

    // (batch, depth) softmax weights from the most recent forward; rows sum to 1.
    Tensor<S> last_attention_weights() const { return last_weights_; }

private:
    std::string name_;
    Tensor<S> w_, b_;
    Tensor<S> last_weights_;
};

// One Inception module: parallel temporal conv branches (+BN +ELU +dropout),
// concatenated along depth.
template <typename S>
class InceptionLayer : public Layer<S> {
public:
    InceptionLayer(std::string name, int d_in, int branch_filters, const std::vector<int>& branch_kernels,
                   double dropout_rate, Rng& rng)
        : name_(std::move(name)), dropout_rate_(dropout_rate) {
        for (size_t i = 0; i < branch_kernels.size(); ++i) {
            Branch br;
            br.w = make_leaf<S>({branch_filters, d_in, 1, branch_kernels[i]});
            init_uniform(br.w, d_in * branch_kernels[i], rng);
            br.gamma = make_leaf<S>({branch_filters});
            for (auto& v : br.gamma->value) v = S(1);
            br.beta = make_leaf<S>({branch_filters});
            br.running_mean.assign(branch_filters, 0.0);
            br.running_var.assign(branch_filters, 1.0);
            br.kernel = branch_kernels[i];
            branches_.push_back(std::move(br));
        }
    }

    Tensor<S> forward(const Tensor<S>& x, ForwardCtx<S>& ctx) override {
        static Rng null_rng(0);
        std::vector<Tensor<S>> outs;
        for (auto& br : branches_) {
            auto h = conv2d(x, br.w, 1, Padding::same);
            h = batch_norm(h, br.gamma, br.beta, br.running_mean, br.running_var, 0.1, 1e-5, ctx.training);
            h = elu(h, 1.0);
            h = dropout(h, dropout_rate_, ctx.training, ctx.rng ? *ctx.rng : null_rng);
            outs.push_back(h);
        }
        return concat_depth(outs);
    }

    std::string name() const override { return name_; }
    std::vector<std::pair<std::string, Tensor<S>>> parameters() override {
        std::vector<std::pair<std::string, Tensor<S>>> out;
        for (size_t i = 0; i < branches_.size(); ++i) {
            const std::string tag = "branch" + std::to_string(i) + "_k" + std::to_string(branches_[i].kernel);
            out.push_back({tag + ".weight", branches_[i].w});
            out.push_back({tag + ".gamma", branches_[i].gamma});
            out.push_back({tag + ".beta", branches_[i].beta});
        }
        return out;
    }

    std::vector<int> branch_kernels() const {
        std::vector<int> ks;
        for (const auto& br : branches_) ks.push_back(br.kernel);
        return ks;
    }

private:
    struct Branch {
        Tensor<S> w, gamma, beta;
        std::vector<double> running_mean, running_var;
        int kernel = 0;
    };
    std::string name_;
    double dropout_rate_;
    std::vector<Branch> branches_;
};

}  // namespace nn

// Builders. The seed fixes the weight init stream.
template <typename S>
std::unique_ptr<nn::Model<S>> build_model(const ModelConfig& cfg, uint64_t seed);

// Eval-mode logits with a finiteness check.
template <typename S>
nn::Tensor<S> forward_logits(nn::Model<S>& model, const nn::Tensor<S>& batch) {
    nn::ForwardCtx<S> ctx;
    ctx.training = false;
    auto logits = model.forward(batch, ctx);
    for (S v : logits->value)
        if (!std::isfinite(static_cast<double>(v))) throw NumericError("divergence: non-finite logits");
    return logits;
}

// Binary checkpoint: magic "EEGW", u32 n_tensors, then per tensor
// u32 name_len + name + u32 ndim + u32 dims[] + float32 data.
template <typename S>
void save_checkpoint(nn::Model<S>& model, const std::string& path);
template <typename S>
void load_checkpoint(nn::Model<S>& model, const std::string& path);

extern template std::unique_ptr<nn::Model<float>> build_model<float>(const ModelConfig&, uint64_t);
extern template std::unique_ptr<nn::Model<double>> build_model<double>(const ModelConfig&, uint64_t);
extern template void save_checkpoint<float>(nn::Model<float>&, const std::string&);
extern template void save_checkpoint<double>(nn::Model<double>&, const std::string&);
extern template void load_checkpoint<float>(nn::Model<float>&, const std::string&);
extern template void load_checkpoint<double>(nn::Model<double>&, const std::string&);

}  // namespace letterdec
