#include "letterdec/models.hpp"

#include <fstream>

#include <json.hpp>

using json = nlohmann::json;

namespace letterdec {

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::DeepConvNet: return "DeepConvNet";
        case Arch::EEGNet: return "EEGNet";
        case Arch::EEGInception: return "EEGInception";
        case Arch::LMDA: return "LMDA";
    }
    throw ConfigError("unknown architecture enum");
}

Arch arch_from_name(const std::string& name) {
    if (name == "DeepConvNet") return Arch::DeepConvNet;
    if (name == "EEGNet") return Arch::EEGNet;
    if (name == "EEGInception") return Arch::EEGInception;
    if (name == "LMDA") return Arch::LMDA;
    throw ConfigError("unknown architecture: " + name);
}

ModelConfig default_model_config(Arch arch) {
    ModelConfig cfg;
    cfg.arch = arch;
    switch (arch) {
        case Arch::DeepConvNet:
            // temporal, spatial, block1, block2 filters; temporal/block kernels
            cfg.filters = {25, 25, 50, 50};
            cfg.kernels = {10, 10, 10};
            cfg.pools = {4, 4, 4};
            break;
        case Arch::EEGNet:
            // F1, depth multiplier D, F2; temporal kernel 6 (24 ms at 250 Hz), separable kernel
            cfg.filters = {8, 2, 16};
            cfg.kernels = {6, 16};
            cfg.pools = {4, 8};
            break;
        case Arch::EEGInception:
            // per-branch filters, block1 (spatial) filters, block2 filters;
            // branch kernels 25/12/6 (100/50/25 ms), then the block-2 kernel
            cfg.filters = {8, 16, 16};
            cfg.kernels = {25, 12, 6, 8};
            cfg.pools = {4, 2, 2, 2};
            break;
        case Arch::LMDA:
            cfg.filters = {24, 24};
            cfg.kernels = {10};
            cfg.pools = {4, 4};
            cfg.attention_depth = 9;
            break;
    }
    return cfg;
}

void ModelConfig::validate() const {
    if (n_classes != 26) throw ConfigError("n_classes must be 26");
    if (n_channels < 1 || n_timepoints < 1) throw ConfigError("invalid input shape");
    for (int k : kernels)
        if (k < 1 || k > n_timepoints) throw ConfigError("kernel length " + std::to_string(k) + " out of range");
    for (int f : filters)
        if (f < 1) throw ConfigError("filter count must be positive");
    for (int p : pools)
        if (p < 1) throw ConfigError("pool size must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
    const size_t want_f = arch == Arch::DeepConvNet ? 4 : (arch == Arch::EEGNet ? 3 : (arch == Arch::EEGInception ? 3 : 2));
    const size_t want_k = arch == Arch::DeepConvNet ? 3 : (arch == Arch::EEGNet ? 2 : (arch == Arch::EEGInception ? 4 : 1));
    const size_t want_p = arch == Arch::DeepConvNet ? 3 : (arch == Arch::EEGNet ? 2 : (arch == Arch::EEGInception ? 4 : 2));
    if (filters.size() != want_f)
        throw ConfigError(arch_name(arch) + " expects " + std::to_string(want_f) + " filter entries");
    if (kernels.size() != want_k)
        throw ConfigError(arch_name(arch) + " expects " + std::to_string(want_k) + " kernel entries");
    if (pools.size() != want_p)
        throw ConfigError(arch_name(arch) + " expects " + std::to_string(want_p) + " pool entries");
    if (arch == Arch::LMDA && attention_depth < 1) throw ConfigError("attention depth must be positive");
}

std::string ModelSummary::to_json() const {
    json j;
    j["arch"] = arch;
    j["total_params"] = total_params;
    json layers_json = json::array();
    for (const auto& l : layers) {
        json lj;
        lj["name"] = l.name;
        lj["output_shape"] = l.output_shape;
        lj["n_params"] = l.n_params;
        layers_json.push_back(lj);
    }
    j["layers"] = layers_json;
    return j.dump(2);
}

namespace {

int pool_out(int t, int k) { return (t - k) / k + 1; }

}  // namespace

template <typename S>
std::unique_ptr<nn::Model<S>> build_model(const ModelConfig& cfg, uint64_t seed) {
    using namespace nn;
    cfg.validate();
    Rng rng(mix_seed(seed, hash_string(arch_name(cfg.arch))));
    auto model = std::make_unique<Model<S>>(arch_name(cfg.arch), cfg);
    const int C = cfg.n_channels;
    const double dr = cfg.dropout_rate;

    switch (cfg.arch) {
        case Arch::DeepConvNet: {
            const int ft = cfg.filters[0], fs = cfg.filters[1], f1 = cfg.filters[2], f2 = cfg.filters[3];
            model->add(std::make_unique<Conv2dLayer<S>>("temporal_conv", 1, ft, 1, cfg.kernels[0], 1, Padding::same,
                                                        true, rng));
            model->add(std::make_unique<Conv2dLayer<S>>("spatial_conv", ft, fs, C, 1, 1, Padding::valid, false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("stem_norm", fs));
            model->add(std::make_unique<EluLayer<S>>("stem_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("stem_pool", cfg.pools[0], cfg.pools[0]));
            model->add(std::make_unique<DropoutLayer<S>>("stem_drop", dr));
            int t = pool_out(cfg.n_timepoints, cfg.pools[0]);

            model->add(std::make_unique<Conv2dLayer<S>>("block1_conv", fs, f1, 1, cfg.kernels[1], 1, Padding::same,
                                                        false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("block1_norm", f1));
            model->add(std::make_unique<EluLayer<S>>("block1_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("block1_pool", cfg.pools[1], cfg.pools[1]));
            model->add(std::make_unique<DropoutLayer<S>>("block1_drop", dr));
            t = pool_out(t, cfg.pools[1]);

            model->add(std::make_unique<Conv2dLayer<S>>("block2_conv", f1, f2, 1, cfg.kernels[2], 1, Padding::same,
                                                        false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("block2_norm", f2));
            model->add(std::make_unique<EluLayer<S>>("block2_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("block2_pool", cfg.pools[2], cfg.pools[2]));
            model->add(std::make_unique<DropoutLayer<S>>("block2_drop", dr));
            t = pool_out(t, cfg.pools[2]);

            model->add(std::make_unique<FlattenLayer<S>>("flatten"));
            model->add(std::make_unique<DenseLayer<S>>("head", f2 * t, cfg.n_classes, rng, 0.1));
            break;
        }
        case Arch::EEGNet: {
            const int f1 = cfg.filters[0], depth_mult = cfg.filters[1], f2 = cfg.filters[2];
            const int fd = f1 * depth_mult;
            model->add(std::make_unique<Conv2dLayer<S>>("temporal_conv", 1, f1, 1, cfg.kernels[0], 1, Padding::same,
                                                        false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("temporal_norm", f1));
            model->add(std::make_unique<Conv2dLayer<S>>("depthwise_spatial_conv", f1, fd, C, 1, f1, Padding::valid,
                                                        false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("spatial_norm", fd));
            model->add(std::make_unique<EluLayer<S>>("spatial_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("pool1", cfg.pools[0], cfg.pools[0]));
            model->add(std::make_unique<DropoutLayer<S>>("drop1", dr));
            int t = pool_out(cfg.n_timepoints, cfg.pools[0]);

            model->add(std::make_unique<Conv2dLayer<S>>("separable_depthwise_conv", fd, fd, 1, cfg.kernels[1], fd,
                                                        Padding::same, false, rng));
            model->add(std::make_unique<Conv2dLayer<S>>("separable_pointwise_conv", fd, f2, 1, 1, 1, Padding::valid,
                                                        false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("separable_norm", f2));
            model->add(std::make_unique<EluLayer<S>>("separable_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("pool2", cfg.pools[1], cfg.pools[1]));
            model->add(std::make_unique<DropoutLayer<S>>("drop2", dr));
            t = pool_out(t, cfg.pools[1]);

            model->add(std::make_unique<FlattenLayer<S>>("flatten"));
            model->add(std::make_unique<DenseLayer<S>>("head", f2 * t, cfg.n_classes, rng, 0.1));
            break;
        }
        case Arch::EEGInception: {
            const int fb = cfg.filters[0], f1 = cfg.filters[1], f2 = cfg.filters[2];
            const std::vector<int> branch_kernels = {cfg.kernels[0], cfg.kernels[1], cfg.kernels[2]};
            const int concat_depth = fb * static_cast<int>(branch_kernels.size());

            model->add(std::make_unique<InceptionLayer<S>>("inception1", 1, fb, branch_kernels, dr, rng));
            model->add(std::make_unique<AvgPoolLayer<S>>("pool1", cfg.pools[0], cfg.pools[0]));
            int t = pool_out(cfg.n_timepoints, cfg.pools[0]);

            model->add(std::make_unique<InceptionLayer<S>>("inception2", concat_depth, fb, branch_kernels, dr, rng));
            model->add(std::make_unique<AvgPoolLayer<S>>("pool2", cfg.pools[1], cfg.pools[1]));
            t = pool_out(t, cfg.pools[1]);

            model->add(std::make_unique<Conv2dLayer<S>>("block1_conv", concat_depth, f1, C, 1, 1, Padding::valid,
                                                        false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("block1_norm", f1));
            model->add(std::make_unique<EluLayer<S>>("block1_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("block1_pool", cfg.pools[2], cfg.pools[2]));
            model->add(std::make_unique<DropoutLayer<S>>("block1_drop", dr));
            t = pool_out(t, cfg.pools[2]);

            model->add(std::make_unique<Conv2dLayer<S>>("block2_conv", f1, f2, 1, cfg.kernels[3], 1, Padding::same,
                                                        false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("block2_norm", f2));
            model->add(std::make_unique<EluLayer<S>>("block2_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("block2_pool", cfg.pools[3], cfg.pools[3]));
            model->add(std::make_unique<DropoutLayer<S>>("block2_drop", dr));
            t = pool_out(t, cfg.pools[3]);

            model->add(std::make_unique<FlattenLayer<S>>("flatten"));
            model->add(std::make_unique<DenseLayer<S>>("head", f2 * t, cfg.n_classes, rng, 0.1));
            break;
        }
        case Arch::LMDA: {
            const int ft = cfg.filters[0], fs = cfg.filters[1];
            model->add(std::make_unique<ChannelAttentionLayer<S>>("channel_attention", cfg.attention_depth, C, rng));
            model->add(std::make_unique<Conv2dLayer<S>>("temporal_conv", cfg.attention_depth, ft, 1, cfg.kernels[0],
                                                        1, Padding::same, false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("temporal_norm", ft));
            model->add(std::make_unique<EluLayer<S>>("temporal_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("temporal_pool", cfg.pools[0], cfg.pools[0]));
            model->add(std::make_unique<DropoutLayer<S>>("temporal_drop", dr));
            int t = pool_out(cfg.n_timepoints, cfg.pools[0]);

            model->add(std::make_unique<DepthAttentionLayer<S>>("depth_attention", ft, rng));

            model->add(std::make_unique<Conv2dLayer<S>>("spatial_conv", ft, fs, C, 1, 1, Padding::valid, false, rng));
            model->add(std::make_unique<BatchNormLayer<S>>("spatial_norm", fs));
            model->add(std::make_unique<EluLayer<S>>("spatial_act"));
            model->add(std::make_unique<AvgPoolLayer<S>>("spatial_pool", cfg.pools[1], cfg.pools[1]));
            model->add(std::make_unique<DropoutLayer<S>>("spatial_drop", dr));
            t = pool_out(t, cfg.pools[1]);

            model->add(std::make_unique<FlattenLayer<S>>("flatten"));
            model->add(std::make_unique<DenseLayer<S>>("head", fs * t, cfg.n_classes, rng, 0.1));
            break;
        }
    }
    return model;
}

namespace {

void put_u32(std::ofstream& f, uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>((v >> 8) & 0xFF),
                                    static_cast<unsigned char>((v >> 16) & 0xFF),
                                    static_cast<unsigned char>((v >> 24) & 0xFF)};
    f.write(reinterpret_cast<const char*>(bytes), 4);
}

uint32_t read_u32(std::ifstream& f) {
    unsigned char bytes[4];
    f.read(reinterpret_cast<char*>(bytes), 4);
    if (!f) throw DataError("checkpoint truncated");
    return static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
           (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
}

constexpr uint32_t kCheckpointMagic = 0x57474545u;  // "EEGW"

}  // namespace

template <typename S>
void save_checkpoint(nn::Model<S>& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    auto params = model.named_parameters();
    put_u32(f, kCheckpointMagic);
    put_u32(f, static_cast<uint32_t>(params.size()));
    for (auto& [name, p] : params) {
        put_u32(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(f, static_cast<uint32_t>(p->shape.size()));
        for (int d : p->shape) put_u32(f, static_cast<uint32_t>(d));
        std::vector<float> buf(p->value.begin(), p->value.end());
        f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    }
    if (!f) throw DataError("write failed for checkpoint: " + path);
}

template <typename S>
void load_checkpoint(nn::Model<S>& model, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint not found: " + path);
    if (read_u32(f) != kCheckpointMagic) throw DataError("bad checkpoint magic in " + path);
    auto params = model.named_parameters();
    const uint32_t count = read_u32(f);
    if (count != params.size())
        throw DataError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                        std::to_string(params.size()));
    for (auto& [name, p] : params) {
        const uint32_t name_len = read_u32(f);
        std::string got(name_len, '\0');
        f.read(got.data(), name_len);
        if (got != name) throw DataError("checkpoint tensor \"" + got + "\" does not match model tensor \"" + name + "\"");
        const uint32_t ndim = read_u32(f);
        if (ndim != p->shape.size()) throw DataError("checkpoint rank mismatch for " + name);
        for (int d : p->shape)
            if (read_u32(f) != static_cast<uint32_t>(d)) throw DataError("checkpoint shape mismatch for " + name);
        std::vector<float> buf(p->numel());
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
        if (!f) throw DataError("checkpoint truncated in " + name);
        p->value.assign(buf.begin(), buf.end());
    }
}

template std::unique_ptr<nn::Model<float>> build_model<float>(const ModelConfig&, uint64_t);
template std::unique_ptr<nn::Model<double>> build_model<double>(const ModelConfig&, uint64_t);
template void save_checkpoint<float>(nn::Model<float>&, const std::string&);
template void save_checkpoint<double>(nn::Model<double>&, const std::string&);
template void load_checkpoint<float>(nn::Model<float>&, const std::string&);
template void load_checkpoint<double>(nn::Model<double>&, const std::string&);

}  // namespace letterdec
