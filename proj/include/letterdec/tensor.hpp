#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "letterdec/common.hpp"

// Reverse-mode autodiff over dense n-d tensors, templated on the scalar so
// training runs in float32 and gradient checks in float64. Activations use the
// (batch, depth, channels, time) layout with time innermost.
namespace letterdec::nn {

template <typename S>
struct TensorNode;

template <typename S>
using Tensor = std::shared_ptr<TensorNode<S>>;

template <typename S>
struct TensorNode {
    std::vector<int> shape;
    std::vector<S> value;
    std::vector<S> grad;  // allocated on demand during backward
    bool requires_grad = false;
    std::vector<Tensor<S>> parents;
    std::function<void()> backward_fn;

    size_t numel() const { return value.size(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

template <typename S>
Tensor<S> make_tensor(std::vector<int> shape, bool requires_grad = false) {
    auto t = std::make_shared<TensorNode<S>>();
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw NumericError("tensor dimensions must be positive");
        n *= static_cast<size_t>(d);
    }
    t->shape = std::move(shape);
    t->value.assign(n, S(0));
    t->requires_grad = requires_grad;
    return t;
}

template <typename S>
Tensor<S> make_leaf(std::vector<int> shape) {
    return make_tensor<S>(std::move(shape), true);
}

// Reverse topological traversal from the root; every reachable node's grad is
// reset, so one backward() per graph gives fresh leaf gradients.
template <typename S>
void backward(const Tensor<S>& root) {
    if (root->numel() != 1) throw NumericError("backward requires a scalar root");
    std::vector<TensorNode<S>*> order;
    std::unordered_set<TensorNode<S>*> seen;
    std::vector<std::pair<TensorNode<S>*, size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode<S>* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (TensorNode<S>* n : order) n->grad.assign(n->value.size(), S(0));
    root->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

enum class Padding { valid, same };

// Grouped 2-D cross-correlation. x: (b, d_in, c, t); w: (d_out, d_in/groups, kc, kt).
// "same" pads only as needed per axis, left pad (k-1)/2; "valid" does not pad.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, int groups, Padding padding) {
    if (x->shape.size() != 4 || w->shape.size() != 4) throw NumericError("conv2d expects 4-d tensors");
    const int nb = x->dim(0), d_in = x->dim(1), nc = x->dim(2), nt = x->dim(3);
    const int d_out = w->dim(0), kd = w->dim(1), kc = w->dim(2), kt = w->dim(3);
    if (groups < 1 || d_in % groups != 0 || d_out % groups != 0)
        throw NumericError("conv2d: depth not divisible by groups");
    if (kd != d_in / groups) throw NumericError("conv2d: kernel depth does not match d_in/groups");
    const int pc0 = padding == Padding::same ? (kc - 1) / 2 : 0;
    const int pt0 = padding == Padding::same ? (kt - 1) / 2 : 0;
    const int oc = padding == Padding::same ? nc : nc - kc + 1;
    const int ot = padding == Padding::same ? nt : nt - kt + 1;
    if (oc <= 0 || ot <= 0) throw NumericError("conv2d: kernel larger than input under valid padding");
    const int in_per_group = d_in / groups;
    const int out_per_group = d_out / groups;

    auto out = make_tensor<S>({nb, d_out, oc, ot});
    const S* xv = x->value.data();
    const S* wv = w->value.data();
    S* ov = out->value.data();

    auto x_row = [=](const S* base, int b, int d, int c) {
        return base + ((static_cast<size_t>(b) * d_in + d) * nc + c) * nt;
    };
    auto o_row = [=](S* base, int b, int d, int c) {
        return base + ((static_cast<size_t>(b) * d_out + d) * oc + c) * ot;
    };
    auto w_at = [=](const S* base, int od, int id, int ic, int it) {
        return base[((static_cast<size_t>(od) * kd + id) * kc + ic) * kt + it];
    };

    for (int b = 0; b < nb; ++b) {
        for (int od = 0; od < d_out; ++od) {
            const int g = od / out_per_group;
            for (int id = 0; id < kd; ++id) {
                const int sd = g * in_per_group + id;
                for (int ic = 0; ic < kc; ++ic) {
                    const int co_lo = std::max(0, pc0 - ic);
                    const int co_hi = std::min(oc, nc + pc0 - ic);
                    for (int co = co_lo; co < co_hi; ++co) {
                        const S* xr = x_row(xv, b, sd, co + ic - pc0);
                        S* orow = o_row(ov, b, od, co);
                        for (int it = 0; it < kt; ++it) {
                            const S wval = w_at(wv, od, id, ic, it);
                            const int t_lo = std::max(0, pt0 - it);
                            const int t_hi = std::min(ot, nt + pt0 - it);
                            const S* xs = xr + it - pt0;
                            for (int t = t_lo; t < t_hi; ++t) orow[t] += wval * xs[t];
                        }
                    }
                }
            }
        }
    }

    if (x->requires_grad || w->requires_grad) {
        out->requires_grad = true;
        out->parents = {x, w};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* wo = w.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            const S* gy = oo->grad.data();
            if (xo->requires_grad) {
                xo->ensure_grad();
                S* gx = xo->grad.data();
                const S* wptr = wo->value.data();
                for (int b = 0; b < nb; ++b)
                    for (int od = 0; od < d_out; ++od) {
                        const int g = od / out_per_group;
                        for (int id = 0; id < kd; ++id) {
                            const int sd = g * in_per_group + id;
                            for (int ic = 0; ic < kc; ++ic) {
                                const int co_lo = std::max(0, pc0 - ic);
                                const int co_hi = std::min(oc, nc + pc0 - ic);
                                for (int co = co_lo; co < co_hi; ++co) {
                                    S* gxr = gx + ((static_cast<size_t>(b) * d_in + sd) * nc + co + ic - pc0) * nt;
                                    const S* gyr = gy + ((static_cast<size_t>(b) * d_out + od) * oc + co) * ot;
                                    for (int it = 0; it < kt; ++it) {
                                        const S wval = w_at(wptr, od, id, ic, it);
                                        const int t_lo = std::max(0, pt0 - it);
                                        const int t_hi = std::min(ot, nt + pt0 - it);
                                        S* gxs = gxr + it - pt0;
                                        for (int t = t_lo; t < t_hi; ++t) gxs[t] += wval * gyr[t];
                                    }
                                }
                            }
                        }
                    }
            }
            if (wo->requires_grad) {
                wo->ensure_grad();
                S* gw = wo->grad.data();
                const S* xptr = xo->value.data();
                for (int b = 0; b < nb; ++b)
                    for (int od = 0; od < d_out; ++od) {
                        const int g = od / out_per_group;
                        for (int id = 0; id < kd; ++id) {
                            const int sd = g * in_per_group + id;
                            for (int ic = 0; ic < kc; ++ic) {
                                const int co_lo = std::max(0, pc0 - ic);
                                const int co_hi = std::min(oc, nc + pc0 - ic);
                                for (int co = co_lo; co < co_hi; ++co) {
                                    const S* xr =
                                        xptr + ((static_cast<size_t>(b) * d_in + sd) * nc + co + ic - pc0) * nt;
                                    const S* gyr = gy + ((static_cast<size_t>(b) * d_out + od) * oc + co) * ot;
                                    for (int it = 0; it < kt; ++it) {
                                        const int t_lo = std::max(0, pt0 - it);
                                        const int t_hi = std::min(ot, nt + pt0 - it);
                                        const S* xs = xr + it - pt0;
                                        S acc = S(0);
                                        for (int t = t_lo; t < t_hi; ++t) acc += xs[t] * gyr[t];
                                        gw[((static_cast<size_t>(od) * kd + id) * kc + ic) * kt + it] += acc;
                                    }
                                }
                            }
                        }
                    }
            }
        };
    }
    return out;
}

// Per-depth bias over a (b, d, c, t) activation.
template <typename S>
Tensor<S> add_bias_depth(const Tensor<S>& x, const Tensor<S>& bias) {
    if (x->shape.size() != 4 || bias->shape.size() != 1 || bias->dim(0) != x->dim(1))
        throw NumericError("add_bias_depth shape mismatch");
    const int nb = x->dim(0), nd = x->dim(1);
    const size_t plane = static_cast<size_t>(x->dim(2)) * x->dim(3);
    auto out = make_tensor<S>(x->shape);
    for (int b = 0; b < nb; ++b)
        for (int d = 0; d < nd; ++d) {
            const S* xr = x->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
            S* orow = out->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
            const S bv = bias->value[d];
            for (size_t i = 0; i < plane; ++i) orow[i] = xr[i] + bv;
        }
    if (x->requires_grad || bias->requires_grad) {
        out->requires_grad = true;
        out->parents = {x, bias};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* bo = bias.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            const S* gy = oo->grad.data();
            if (xo->requires_grad) {
                xo->ensure_grad();
                for (size_t i = 0; i < xo->grad.size(); ++i) xo->grad[i] += gy[i];
            }
            if (bo->requires_grad) {
                bo->ensure_grad();
                for (int b = 0; b < nb; ++b)
                    for (int d = 0; d < nd; ++d) {
                        const S* gr = gy + (static_cast<size_t>(b) * nd + d) * plane;
                        S acc = S(0);
                        for (size_t i = 0; i < plane; ++i) acc += gr[i];
                        bo->grad[d] += acc;
                    }
            }
        };
    }
    return out;
}

// Per-depth batch normalization over (batch, channels, time). Running stats
// live outside the graph and are updated in train mode.
template <typename S>
Tensor<S> batch_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     std::vector<double>& running_mean, std::vector<double>& running_var, double momentum,
                     double eps, bool training) {
    if (x->shape.size() != 4) throw NumericError("batch_norm expects a 4-d activation");
    const int nb = x->dim(0), nd = x->dim(1), nc = x->dim(2), nt = x->dim(3);
    if (gamma->dim(0) != nd || beta->dim(0) != nd) throw NumericError("batch_norm parameter shape mismatch");
    if (running_mean.size() != static_cast<size_t>(nd) || running_var.size() != static_cast<size_t>(nd))
        throw NumericError("batch_norm running stats shape mismatch");
    if (training && nb < 2) throw NumericError("batch_norm requires batch >= 2 in train mode");

    const size_t plane = static_cast<size_t>(nc) * nt;
    const double count = static_cast<double>(nb) * plane;

    auto mean_d = std::make_shared<std::vector<double>>(nd, 0.0);
    auto inv_std_d = std::make_shared<std::vector<double>>(nd, 0.0);
    if (training) {
        for (int d = 0; d < nd; ++d) {
            double m = 0.0;
            for (int b = 0; b < nb; ++b) {
                const S* xr = x->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
                for (size_t i = 0; i < plane; ++i) m += static_cast<double>(xr[i]);
            }
            m /= count;
            double v = 0.0;
            for (int b = 0; b < nb; ++b) {
                const S* xr = x->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
                for (size_t i = 0; i < plane; ++i) {
                    const double dv = static_cast<double>(xr[i]) - m;
                    v += dv * dv;
                }
            }
            v /= count;
            (*mean_d)[d] = m;
            (*inv_std_d)[d] = 1.0 / std::sqrt(v + eps);
            running_mean[d] = (1.0 - momentum) * running_mean[d] + momentum * m;
            running_var[d] = (1.0 - momentum) * running_var[d] + momentum * v;
        }
    } else {
        for (int d = 0; d < nd; ++d) {
            (*mean_d)[d] = running_mean[d];
            (*inv_std_d)[d] = 1.0 / std::sqrt(running_var[d] + eps);
        }
    }

    auto xhat = std::make_shared<std::vector<S>>(x->numel());
    auto out = make_tensor<S>(x->shape);
    for (int b = 0; b < nb; ++b)
        for (int d = 0; d < nd; ++d) {
            const S* xr = x->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
            S* hr = xhat->data() + (static_cast<size_t>(b) * nd + d) * plane;
            S* orow = out->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
            const S m = static_cast<S>((*mean_d)[d]);
            const S is = static_cast<S>((*inv_std_d)[d]);
            const S g = gamma->value[d];
            const S bt = beta->value[d];
            for (size_t i = 0; i < plane; ++i) {
                hr[i] = (xr[i] - m) * is;
                orow[i] = g * hr[i] + bt;
            }
        }

    if (x->requires_grad || gamma->requires_grad || beta->requires_grad) {
        out->requires_grad = true;
        out->parents = {x, gamma, beta};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* go = gamma.get();
        TensorNode<S>* bo = beta.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            const S* gy = oo->grad.data();
            const S* h = xhat->data();
            for (int d = 0; d < nd; ++d) {
                double sum_gy = 0.0, sum_gyh = 0.0;
                for (int b = 0; b < nb; ++b) {
                    const S* gr = gy + (static_cast<size_t>(b) * nd + d) * plane;
                    const S* hr = h + (static_cast<size_t>(b) * nd + d) * plane;
                    for (size_t i = 0; i < plane; ++i) {
                        sum_gy += static_cast<double>(gr[i]);
                        sum_gyh += static_cast<double>(gr[i]) * hr[i];
                    }
                }
                if (go->requires_grad) {
                    go->ensure_grad();
                    go->grad[d] += static_cast<S>(sum_gyh);
                }
                if (bo->requires_grad) {
                    bo->ensure_grad();
                    bo->grad[d] += static_cast<S>(sum_gy);
                }
                if (xo->requires_grad) {
                    xo->ensure_grad();
                    const double g = static_cast<double>(go->value[d]);
                    const double is = (*inv_std_d)[d];
                    if (training) {
                        const double mean_gy = sum_gy / count;
                        const double mean_gyh = sum_gyh / count;
                        for (int b = 0; b < nb; ++b) {
                            S* gxr = xo->grad.data() + (static_cast<size_t>(b) * nd + d) * plane;
                            const S* gr = gy + (static_cast<size_t>(b) * nd + d) * plane;
                            const S* hr = h + (static_cast<size_t>(b) * nd + d) * plane;
                            for (size_t i = 0; i < plane; ++i)
                                gxr[i] += static_cast<S>(g * is * (gr[i] - mean_gy - hr[i] * mean_gyh));
                        }
                    } else {
                        for (int b = 0; b < nb; ++b) {
                            S* gxr = xo->grad.data() + (static_cast<size_t>(b) * nd + d) * plane;
                            const S* gr = gy + (static_cast<size_t>(b) * nd + d) * plane;
                            for (size_t i = 0; i < plane; ++i) gxr[i] += static_cast<S>(g * is * gr[i]);
                        }
                    }
                }
            }
        };
    }
    return out;
}

template <typename S>
Tensor<S> elu(const Tensor<S>& x, double alpha = 1.0) {
    auto out = make_tensor<S>(x->shape);
    const S a = static_cast<S>(alpha);
    for (size_t i = 0; i < x->numel(); ++i) {
        const S v = x->value[i];
        out->value[i] = v > S(0) ? v : a * (std::exp(v) - S(1));
    }
    if (x->requires_grad) {
        out->requires_grad = true;
        out->parents = {x};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            xo->ensure_grad();
            for (size_t i = 0; i < xo->grad.size(); ++i) {
                const S v = xo->value[i];
                const S slope = v > S(0) ? S(1) : oo->value[i] + a;  // a*exp(v) = y + a below 0
                xo->grad[i] += oo->grad[i] * slope;
            }
        };
    }
    return out;
}

// Average pooling along time; backward spreads the gradient uniformly.
template <typename S>
Tensor<S> avg_pool_time(const Tensor<S>& x, int kernel_t, int stride_t) {
    if (x->shape.size() != 4) throw NumericError("avg_pool_time expects a 4-d activation");
    const int nb = x->dim(0), nd = x->dim(1), nc = x->dim(2), nt = x->dim(3);
    if (kernel_t < 1 || stride_t < 1) throw NumericError("pool kernel/stride must be positive");
    if (kernel_t > nt) throw NumericError("pool kernel exceeds the time length");
    const int ot = (nt - kernel_t) / stride_t + 1;
    auto out = make_tensor<S>({nb, nd, nc, ot});
    const S inv = S(1) / static_cast<S>(kernel_t);
    const size_t rows = static_cast<size_t>(nb) * nd * nc;
    for (size_t r = 0; r < rows; ++r) {
        const S* xr = x->value.data() + r * nt;
        S* orow = out->value.data() + r * ot;
        for (int t = 0; t < ot; ++t) {
            S acc = S(0);
            const S* win = xr + static_cast<size_t>(t) * stride_t;
            for (int k = 0; k < kernel_t; ++k) acc += win[k];
            orow[t] = acc * inv;
        }
    }
    if (x->requires_grad) {
        out->requires_grad = true;
        out->parents = {x};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            xo->ensure_grad();
            for (size_t r = 0; r < rows; ++r) {
                S* gxr = xo->grad.data() + r * nt;
                const S* gr = oo->grad.data() + r * ot;
                for (int t = 0; t < ot; ++t) {
                    const S gv = gr[t] * inv;
                    S* win = gxr + static_cast<size_t>(t) * stride_t;
                    for (int k = 0; k < kernel_t; ++k) win[k] += gv;
                }
            }
        };
    }
    return out;
}

// Inverted dropout: survivors scaled by 1/(1-rate). Identity when not training.
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw NumericError("dropout rate must be in [0, 1)");
    if (!training || rate == 0.0) {
        auto out = make_tensor<S>(x->shape);
        out->value = x->value;
        if (x->requires_grad) {
            out->requires_grad = true;
            out->parents = {x};
            TensorNode<S>* xo = x.get();
            TensorNode<S>* oo = out.get();
            out->backward_fn = [=]() {
                xo->ensure_grad();
                for (size_t i = 0; i < xo->grad.size(); ++i) xo->grad[i] += oo->grad[i];
            };
        }
        return out;
    }
    auto mask = std::make_shared<std::vector<S>>(x->numel());
    const S scale = static_cast<S>(1.0 / (1.0 - rate));
    for (size_t i = 0; i < x->numel(); ++i) (*mask)[i] = rng.uniform01() < rate ? S(0) : scale;
    auto out = make_tensor<S>(x->shape);
    for (size_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] * (*mask)[i];
    if (x->requires_grad) {
        out->requires_grad = true;
        out->parents = {x};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            xo->ensure_grad();
            for (size_t i = 0; i < xo->grad.size(); ++i) xo->grad[i] += oo->grad[i] * (*mask)[i];
        };
    }
    return out;
}

template <typename S>
Tensor<S> flatten(const Tensor<S>& x) {
    const int nb = x->dim(0);
    const int f = static_cast<int>(x->numel()) / nb;
    auto out = make_tensor<S>({nb, f});
    out->value = x->value;
    if (x->requires_grad) {
        out->requires_grad = true;
        out->parents = {x};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            xo->ensure_grad();
            for (size_t i = 0; i < xo->grad.size(); ++i) xo->grad[i] += oo->grad[i];
        };
    }
    return out;
}

// y = x * w + bias; x: (b, f), w: (f, o), bias: (o) or null.
template <typename S>
Tensor<S> dense(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias) {
    if (x->shape.size() != 2 || w->shape.size() != 2 || x->dim(1) != w->dim(0))
        throw NumericError("dense shape mismatch");
    const int nb = x->dim(0), nf = x->dim(1), no = w->dim(1);
    if (bias && bias->dim(0) != no) throw NumericError("dense bias shape mismatch");
    auto out = make_tensor<S>({nb, no});
    for (int b = 0; b < nb; ++b) {
        S* orow = out->value.data() + static_cast<size_t>(b) * no;
        if (bias)
            std::memcpy(orow, bias->value.data(), sizeof(S) * no);
        const S* xr = x->value.data() + static_cast<size_t>(b) * nf;
        for (int f = 0; f < nf; ++f) {
            const S xv = xr[f];
            const S* wr = w->value.data() + static_cast<size_t>(f) * no;
            for (int o = 0; o < no; ++o) orow[o] += xv * wr[o];
        }
    }
    const bool need = x->requires_grad || w->requires_grad || (bias && bias->requires_grad);
    if (need) {
        out->requires_grad = true;
        out->parents = bias ? std::vector<Tensor<S>>{x, w, bias} : std::vector<Tensor<S>>{x, w};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* wo = w.get();
        TensorNode<S>* bo = bias ? bias.get() : nullptr;
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            const S* gy = oo->grad.data();
            if (xo->requires_grad) {
                xo->ensure_grad();
                for (int b = 0; b < nb; ++b) {
                    S* gxr = xo->grad.data() + static_cast<size_t>(b) * nf;
                    const S* gr = gy + static_cast<size_t>(b) * no;
                    for (int f = 0; f < nf; ++f) {
                        const S* wr = wo->value.data() + static_cast<size_t>(f) * no;
                        S acc = S(0);
                        for (int o = 0; o < no; ++o) acc += gr[o] * wr[o];
                        gxr[f] += acc;
                    }
                }
            }
            if (wo->requires_grad) {
                wo->ensure_grad();
                for (int b = 0; b < nb; ++b) {
                    const S* xr = xo->value.data() + static_cast<size_t>(b) * nf;
                    const S* gr = gy + static_cast<size_t>(b) * no;
                    for (int f = 0; f < nf; ++f) {
                        S* gwr = wo->grad.data() + static_cast<size_t>(f) * no;
                        const S xv = xr[f];
                        for (int o = 0; o < no; ++o) gwr[o] += xv * gr[o];
                    }
                }
            }
            if (bo && bo->requires_grad) {
                bo->ensure_grad();
                for (int b = 0; b < nb; ++b) {
                    const S* gr = gy + static_cast<size_t>(b) * no;
                    for (int o = 0; o < no; ++o) bo->grad[o] += gr[o];
                }
            }
        };
    }
    return out;
}

template <typename S>
Tensor<S> concat_depth(const std::vector<Tensor<S>>& xs) {
    if (xs.empty()) throw NumericError("concat of nothing");
    const int nb = xs[0]->dim(0), nc = xs[0]->dim(2), nt = xs[0]->dim(3);
    int total_d = 0;
    bool need = false;
    for (const auto& x : xs) {
        if (x->shape.size() != 4 || x->dim(0) != nb || x->dim(2) != nc || x->dim(3) != nt)
            throw NumericError("concat_depth shape mismatch");
        total_d += x->dim(1);
        need = need || x->requires_grad;
    }
    auto out = make_tensor<S>({nb, total_d, nc, nt});
    const size_t plane = static_cast<size_t>(nc) * nt;
    for (int b = 0; b < nb; ++b) {
        int d0 = 0;
        for (const auto& x : xs) {
            const int nd = x->dim(1);
            std::memcpy(out->value.data() + (static_cast<size_t>(b) * total_d + d0) * plane,
                        x->value.data() + static_cast<size_t>(b) * nd * plane, sizeof(S) * nd * plane);
            d0 += nd;
        }
    }
    if (need) {
        out->requires_grad = true;
        out->parents = xs;
        TensorNode<S>* oo = out.get();
        std::vector<TensorNode<S>*> raw;
        for (const auto& x : xs) raw.push_back(x.get());
        out->backward_fn = [=]() {
            for (int b = 0; b < nb; ++b) {
                int d0 = 0;
                for (TensorNode<S>* x : raw) {
                    const int nd = x->dim(1);
                    if (x->requires_grad) {
                        x->ensure_grad();
                        const S* src = oo->grad.data() + (static_cast<size_t>(b) * total_d + d0) * plane;
                        S* dst = x->grad.data() + static_cast<size_t>(b) * nd * plane;
                        for (size_t i = 0; i < static_cast<size_t>(nd) * plane; ++i) dst[i] += src[i];
                    }
                    d0 += nd;
                }
            }
        };
    }
    return out;
}

// Depth expansion by per-channel weights: out[b,d,c,t] = x[b,0,c,t] * w[d,c].
template <typename S>
Tensor<S> channel_expand(const Tensor<S>& x, const Tensor<S>& w) {
    if (x->shape.size() != 4 || x->dim(1) != 1) throw NumericError("channel_expand expects depth-1 input");
    if (w->shape.size() != 2 || w->dim(1) != x->dim(2)) throw NumericError("channel_expand weight shape mismatch");
    const int nb = x->dim(0), nc = x->dim(2), nt = x->dim(3), nd = w->dim(0);
    auto out = make_tensor<S>({nb, nd, nc, nt});
    for (int b = 0; b < nb; ++b)
        for (int d = 0; d < nd; ++d)
            for (int c = 0; c < nc; ++c) {
                const S wv = w->value[static_cast<size_t>(d) * nc + c];
                const S* xr = x->value.data() + (static_cast<size_t>(b) * nc + c) * nt;
                S* orow = out->value.data() + ((static_cast<size_t>(b) * nd + d) * nc + c) * nt;
                for (int t = 0; t < nt; ++t) orow[t] = wv * xr[t];
            }
    if (x->requires_grad || w->requires_grad) {
        out->requires_grad = true;
        out->parents = {x, w};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* wo = w.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            const S* gy = oo->grad.data();
            if (xo->requires_grad) xo->ensure_grad();
            if (wo->requires_grad) wo->ensure_grad();
            for (int b = 0; b < nb; ++b)
                for (int d = 0; d < nd; ++d)
                    for (int c = 0; c < nc; ++c) {
                        const S wv = wo->value[static_cast<size_t>(d) * nc + c];
                        const S* gr = gy + ((static_cast<size_t>(b) * nd + d) * nc + c) * nt;
                        const S* xr = xo->value.data() + (static_cast<size_t>(b) * nc + c) * nt;
                        if (xo->requires_grad) {
                            S* gxr = xo->grad.data() + (static_cast<size_t>(b) * nc + c) * nt;
                            for (int t = 0; t < nt; ++t) gxr[t] += wv * gr[t];
                        }
                        if (wo->requires_grad) {
                            S acc = S(0);
                            for (int t = 0; t < nt; ++t) acc += gr[t] * xr[t];
                            wo->grad[static_cast<size_t>(d) * nc + c] += acc;
                        }
                    }
        };
    }
    return out;
}

// Mean over (channels, time) per (batch, depth).
template <typename S>
Tensor<S> global_mean_ct(const Tensor<S>& x) {
    if (x->shape.size() != 4) throw NumericError("global_mean_ct expects a 4-d activation");
    const int nb = x->dim(0), nd = x->dim(1);
    const size_t plane = static_cast<size_t>(x->dim(2)) * x->dim(3);
    auto out = make_tensor<S>({nb, nd});
    const S inv = S(1) / static_cast<S>(plane);
    for (int b = 0; b < nb; ++b)
        for (int d = 0; d < nd; ++d) {
            const S* xr = x->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
            S acc = S(0);
            for (size_t i = 0; i < plane; ++i) acc += xr[i];
            out->value[static_cast<size_t>(b) * nd + d] = acc * inv;
        }
    if (x->requires_grad) {
        out->requires_grad = true;
        out->parents = {x};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            xo->ensure_grad();
            for (int b = 0; b < nb; ++b)
                for (int d = 0; d < nd; ++d) {
                    const S gv = oo->grad[static_cast<size_t>(b) * nd + d] * inv;
                    S* gxr = xo->grad.data() + (static_cast<size_t>(b) * nd + d) * plane;
                    for (size_t i = 0; i < plane; ++i) gxr[i] += gv;
                }
        };
    }
    return out;
}

// Row-wise softmax on a (b, d) tensor.
template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
    if (x->shape.size() != 2) throw NumericError("softmax_rows expects a 2-d tensor");
    const int nb = x->dim(0), nd = x->dim(1);
    auto out = make_tensor<S>(x->shape);
    for (int b = 0; b < nb; ++b) {
        const S* xr = x->value.data() + static_cast<size_t>(b) * nd;
        S* orow = out->value.data() + static_cast<size_t>(b) * nd;
        S mx = xr[0];
        for (int d = 1; d < nd; ++d) mx = std::max(mx, xr[d]);
        S sum = S(0);
        for (int d = 0; d < nd; ++d) {
            orow[d] = std::exp(xr[d] - mx);
            sum += orow[d];
        }
        for (int d = 0; d < nd; ++d) orow[d] /= sum;
    }
    if (x->requires_grad) {
        out->requires_grad = true;
        out->parents = {x};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            xo->ensure_grad();
            for (int b = 0; b < nb; ++b) {
                const S* y = oo->value.data() + static_cast<size_t>(b) * nd;
                const S* gy = oo->grad.data() + static_cast<size_t>(b) * nd;
                S dot = S(0);
                for (int d = 0; d < nd; ++d) dot += y[d] * gy[d];
                S* gx = xo->grad.data() + static_cast<size_t>(b) * nd;
                for (int d = 0; d < nd; ++d) gx[d] += y[d] * (gy[d] - dot);
            }
        };
    }
    return out;
}

// out[b,d,c,t] = x[b,d,c,t] * alpha[b,d]
template <typename S>
Tensor<S> scale_depth(const Tensor<S>& x, const Tensor<S>& alpha) {
    if (x->shape.size() != 4 || alpha->shape.size() != 2 || alpha->dim(0) != x->dim(0) ||
        alpha->dim(1) != x->dim(1))
        throw NumericError("scale_depth shape mismatch");
    const int nb = x->dim(0), nd = x->dim(1);
    const size_t plane = static_cast<size_t>(x->dim(2)) * x->dim(3);
    auto out = make_tensor<S>(x->shape);
    for (int b = 0; b < nb; ++b)
        for (int d = 0; d < nd; ++d) {
            const S a = alpha->value[static_cast<size_t>(b) * nd + d];
            const S* xr = x->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
            S* orow = out->value.data() + (static_cast<size_t>(b) * nd + d) * plane;
            for (size_t i = 0; i < plane; ++i) orow[i] = xr[i] * a;
        }
    if (x->requires_grad || alpha->requires_grad) {
        out->requires_grad = true;
        out->parents = {x, alpha};
        TensorNode<S>* xo = x.get();
        TensorNode<S>* ao = alpha.get();
        TensorNode<S>* oo = out.get();
        out->backward_fn = [=]() {
            const S* gy = oo->grad.data();
            if (xo->requires_grad) xo->ensure_grad();
            if (ao->requires_grad) ao->ensure_grad();
            for (int b = 0; b < nb; ++b)
                for (int d = 0; d < nd; ++d) {
                    const size_t off = (static_cast<size_t>(b) * nd + d) * plane;
                    const S a = ao->value[static_cast<size_t>(b) * nd + d];
                    if (xo->requires_grad) {
                        S* gxr = xo->grad.data() + off;
                        for (size_t i = 0; i < plane; ++i) gxr[i] += gy[off + i] * a;
                    }
                    if (ao->requires_grad) {
                        const S* xr = xo->value.data() + off;
                        S acc = S(0);
                        for (size_t i = 0; i < plane; ++i) acc += gy[off + i] * xr[i];
                        ao->grad[static_cast<size_t>(b) * nd + d] += acc;
                    }
                }
        };
    }
    return out;
}

// Mean cross-entropy over the batch with max-stabilized softmax; the root of
// every training graph. Gradient at the logits: (softmax - onehot) / batch.
template <typename S>
Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, const std::vector<int>& labels) {
    if (logits->shape.size() != 2) throw NumericError("softmax_cross_entropy expects (batch, classes) logits");
    const int nb = logits->dim(0), ncls = logits->dim(1);
    if (static_cast<int>(labels.size()) != nb) throw NumericError("label count does not match batch");
    for (int l : labels)
        if (l < 0 || l >= ncls) throw NumericError("label out of range: " + std::to_string(l));

    auto probs = std::make_shared<std::vector<S>>(logits->numel());
    double loss = 0.0;
    for (int b = 0; b < nb; ++b) {
        const S* lr = logits->value.data() + static_cast<size_t>(b) * ncls;
        S* pr = probs->data() + static_cast<size_t>(b) * ncls;
        S mx = lr[0];
        for (int k = 1; k < ncls; ++k) mx = std::max(mx, lr[k]);
        double sum = 0.0;
        for (int k = 0; k < ncls; ++k) sum += std::exp(static_cast<double>(lr[k] - mx));
        const double log_sum = std::log(sum);
        for (int k = 0; k < ncls; ++k)
            pr[k] = static_cast<S>(std::exp(static_cast<double>(lr[k] - mx) - log_sum));
        loss += -(static_cast<double>(lr[labels[b]] - mx) - log_sum);
    }
    loss /= nb;

    auto out = make_tensor<S>({1});
    out->value[0] = static_cast<S>(loss);
    if (logits->requires_grad) {
        out->requires_grad = true;
        out->parents = {logits};
        TensorNode<S>* lo = logits.get();
        TensorNode<S>* oo = out.get();
        const auto labels_copy = labels;
        out->backward_fn = [=]() {
            lo->ensure_grad();
            const S upstream = oo->grad[0];
            const S inv_b = S(1) / static_cast<S>(nb);
            for (int b = 0; b < nb; ++b) {
                const S* pr = probs->data() + static_cast<size_t>(b) * ncls;
                S* gr = lo->grad.data() + static_cast<size_t>(b) * ncls;
                for (int k = 0; k < ncls; ++k) {
                    const S onehot = (k == labels_copy[b]) ? S(1) : S(0);
                    gr[k] += upstream * (pr[k] - onehot) * inv_b;
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adam

template <typename S>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m, v;  // one slot per parameter
};

template <typename S>
void adam_init(AdamState<S>& state, const std::vector<Tensor<S>>& params) {
    state.step = 0;
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
        state.m.emplace_back(p->numel(), 0.0);
        state.v.emplace_back(p->numel(), 0.0);
    }
}

// One bias-corrected Adam update from the gradients stored on the parameters.
template <typename S>
void adam_step(AdamState<S>& state, const std::vector<Tensor<S>>& params) {
    if (state.m.size() != params.size()) throw NumericError("Adam state does not match parameter list");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        if (p.grad.size() != p.value.size()) p.grad.assign(p.value.size(), S(0));
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (size_t i = 0; i < p.value.size(); ++i) {
            const double g = static_cast<double>(p.grad[i]);
            if (!std::isfinite(g)) throw NumericError("divergence: non-finite gradient");
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] = static_cast<S>(static_cast<double>(p.value[i]) - state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

// forward_loss rebuilds the graph from the current leaf values and returns the
// scalar loss node. Central differences are probed on >= n_coords coordinates
// sampled across the leaves; relative error uses max(|analytic|, |numeric|, 1e-8).
template <typename S>
double gradient_check(const std::function<Tensor<S>()>& forward_loss, const std::vector<Tensor<S>>& leaves,
                      double eps, int n_coords, uint64_t seed) {
    auto loss = forward_loss();
    backward(loss);
    std::vector<std::vector<S>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& l : leaves) {
        if (l->grad.size() != l->value.size()) l->grad.assign(l->value.size(), S(0));
        analytic.push_back(l->grad);
    }

    size_t total = 0;
    for (const auto& l : leaves) total += l->numel();
    if (total == 0) throw NumericError("gradient check on empty leaves");

    Rng rng(mix_seed(seed, 0x67636865636bULL));
    double max_rel = 0.0;
    for (int probe = 0; probe < n_coords; ++probe) {
        size_t flat = rng.bounded(total);
        size_t li = 0;
        while (flat >= leaves[li]->numel()) {
            flat -= leaves[li]->numel();
            ++li;
        }
        auto& leaf = *leaves[li];
        const S saved = leaf.value[flat];
        leaf.value[flat] = saved + static_cast<S>(eps);
        const double lp = static_cast<double>(forward_loss()->value[0]);
        leaf.value[flat] = saved - static_cast<S>(eps);
        const double lm = static_cast<double>(forward_loss()->value[0]);
        leaf.value[flat] = saved;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double a = static_cast<double>(analytic[li][flat]);
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
    return max_rel;
}

}  // namespace letterdec::nn
