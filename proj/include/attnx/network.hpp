#pragma once

#include "attnx/ops.hpp"

#include <cstdio>

namespace attnx {

enum class layer_kind { conv, transpose_conv, upsample, residual };
enum class net_role { generator, attention, discriminator, custom };

struct layer_spec {
    layer_kind kind = layer_kind::conv;
    int kernel = 3;   // {7,4,3,1}
    int stride = 1;
    int filters = 0;  // unscaled; width multiplier applies at build time
    act activation = act::none;
    bool normalized = true;
    pad_mode pad = pad_mode::zero;
};

struct network_spec {
    std::vector<layer_spec> layers;
    double width_multiplier = 1.0;
    net_role role = net_role::custom;
    int input_channels = 3;

    int scaled_filters(const layer_spec& l) const {
        const double f = l.filters * width_multiplier;
        const int fi = static_cast<int>(std::lround(f));
        if (fi < 1 || std::abs(f - fi) > 1e-9)
            throw std::invalid_argument("width multiplier " + std::to_string(width_multiplier) +
                                        " does not yield an integer filter count for " +
                                        std::to_string(l.filters));
        return fi;
    }

    void validate() const {
        for (const auto& l : layers) {
            if (l.kind == layer_kind::upsample) continue;
            if (l.kernel != 7 && l.kernel != 4 && l.kernel != 3 && l.kernel != 1)
                throw std::invalid_argument("unsupported kernel size " + std::to_string(l.kernel));
            (void)scaled_filters(l);
        }
    }

    // sum of k*k*Cin*Cout + Cout over all parameterized convolutions
    std::size_t parameter_count() const {
        std::size_t total = 0;
        int c = input_channels;
        for (const auto& l : layers) {
            if (l.kind == layer_kind::upsample) continue;
            const int f = scaled_filters(l);
            if (l.kind == layer_kind::residual) {
                total += 2 * (static_cast<std::size_t>(l.kernel) * l.kernel * f * f + f);
            } else {
                total += static_cast<std::size_t>(l.kernel) * l.kernel * c * f + f;
                c = f;
            }
        }
        return total;
    }
};

inline int conv_padding(const layer_spec& l) {
    return l.kernel == 4 ? 1 : l.kernel / 2;  // "same"-style for odd kernels, PatchGAN pad for k4
}

template <class T>
struct network {
    network_spec spec;
    bool instance_norm_enabled = true;
    std::vector<tensor<T>> params;
    std::vector<std::string> param_names;

    tensor<T> forward(const tensor<T>& x) const;
    void set_requires_grad(bool f) {
        for (auto& p : params) const_cast<tensor<T>&>(p).set_requires_grad(f);
    }
};

namespace detail {

template <class T>
tensor<T> init_weight(shape_t shape, rng& r) {
    tensor<T> w(std::move(shape));
    for (auto& v : w.data()) v = static_cast<T>(r.truncated_normal(0.02));
    w.set_requires_grad(true);
    return w;
}

template <class T>
tensor<T> init_bias(int n) {
    tensor<T> b(shape_t{n}, T(0));
    b.set_requires_grad(true);
    return b;
}

}  // namespace detail

template <class T>
network<T> build_network(network_spec spec, rng& r, bool instance_norm_enabled = true) {
    spec.validate();
    network<T> net;
    net.spec = std::move(spec);
    net.instance_norm_enabled = instance_norm_enabled;
    int c = net.spec.input_channels;
    char name[64];
    for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
        const auto& l = net.spec.layers[i];
        if (l.kind == layer_kind::upsample) continue;
        const int f = net.spec.scaled_filters(l);
        auto push = [&](tensor<T> t, const char* suffix) {
            std::snprintf(name, sizeof(name), "L%zu.%s", i, suffix);
            net.params.push_back(std::move(t));
            net.param_names.emplace_back(name);
        };
        switch (l.kind) {
            case layer_kind::conv:
                push(detail::init_weight<T>({f, c, l.kernel, l.kernel}, r), "w");
                push(detail::init_bias<T>(f), "b");
                c = f;
                break;
            case layer_kind::transpose_conv:
                push(detail::init_weight<T>({c, f, l.kernel, l.kernel}, r), "w");
                push(detail::init_bias<T>(f), "b");
                c = f;
                break;
            case layer_kind::residual:
                if (f != c)
                    throw std::invalid_argument("residual block filter count must match input channels");
                push(detail::init_weight<T>({f, f, l.kernel, l.kernel}, r), "w1");
                push(detail::init_bias<T>(f), "b1");
                push(detail::init_weight<T>({f, f, l.kernel, l.kernel}, r), "w2");
                push(detail::init_bias<T>(f), "b2");
                break;
            default: break;
        }
    }
    return net;
}

template <class T>
tensor<T> network<T>::forward(const tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != spec.input_channels)
        throw std::invalid_argument("network expects " + std::to_string(spec.input_channels) +
                                    "-channel NCHW input, got " + shape_str(x.shape()));
    tensor<T> h = x;
    std::size_t pi = 0;
    for (const auto& l : spec.layers) {
        const bool norm = l.normalized && instance_norm_enabled;
        switch (l.kind) {
            case layer_kind::conv: {
                if (l.stride > 1 && (h.dim(2) % l.stride != 0 || h.dim(3) % l.stride != 0))
                    throw std::invalid_argument("spatial size " + shape_str(h.shape()) +
                                                " not divisible by stride");
                h = conv2d(h, params[pi], params[pi + 1], l.stride, conv_padding(l), l.pad);
                pi += 2;
                if (norm) h = instance_norm(h);
                h = activation(h, l.activation);
                break;
            }
            case layer_kind::transpose_conv: {
                h = transpose_conv2d(h, params[pi], params[pi + 1]);
                pi += 2;
                if (norm) h = instance_norm(h);
                h = activation(h, l.activation);
                break;
            }
            case layer_kind::upsample:
                h = nearest_upsample2x(h);
                break;
            case layer_kind::residual: {
                tensor<T> y = conv2d(h, params[pi], params[pi + 1], 1, conv_padding(l), l.pad);
                if (norm) y = instance_norm(y);
                y = activation(y, l.activation);
                y = conv2d(y, params[pi + 2], params[pi + 3], 1, conv_padding(l), l.pad);
                if (norm) y = instance_norm(y);
                pi += 4;
                h = add(h, y);  // no activation after the skip add
                break;
            }
        }
    }
    return h;
}

// Appendix-A generator: c7s1-32-R, c3s2-64-R, c3s2-128-R, n x r128, tc64s2,
// tc32s2, c3s1-3-T. Instance norm everywhere except the last layer.
inline network_spec generator_spec(double width_multiplier, int residual_blocks = 9) {
    network_spec s;
    s.role = net_role::generator;
    s.width_multiplier = width_multiplier;
    s.layers.push_back({layer_kind::conv, 7, 1, 32, act::relu, true, pad_mode::reflect});
    s.layers.push_back({layer_kind::conv, 3, 2, 64, act::relu, true, pad_mode::zero});
    s.layers.push_back({layer_kind::conv, 3, 2, 128, act::relu, true, pad_mode::zero});
    for (int i = 0; i < residual_blocks; ++i)
        s.layers.push_back({layer_kind::residual, 3, 1, 128, act::relu, true, pad_mode::reflect});
    s.layers.push_back({layer_kind::transpose_conv, 3, 2, 64, act::relu, true, pad_mode::zero});
    s.layers.push_back({layer_kind::transpose_conv, 3, 2, 32, act::relu, true, pad_mode::zero});
    // the RGB head always has 3 output channels regardless of width
    s.layers.push_back({layer_kind::conv, 3, 1, static_cast<int>(std::lround(3 / width_multiplier)),
                        act::tanh_h, false, pad_mode::reflect});
    return s;
}

// Attention network: c7s1-32-R, c3s2-64-R, r64, up2, c3s1-64-R, c3s1-32-R,
// c7s1-1-S. Nearest upsampling, sigmoid single-channel head. A single
// upsample mirrors the single stride-2 layer so the map matches the input
// resolution, which the blend requires.
inline network_spec attention_spec(double width_multiplier) {
    network_spec s;
    s.role = net_role::attention;
    s.width_multiplier = width_multiplier;
    s.layers.push_back({layer_kind::conv, 7, 1, 32, act::relu, true, pad_mode::reflect});
    s.layers.push_back({layer_kind::conv, 3, 2, 64, act::relu, true, pad_mode::zero});
    s.layers.push_back({layer_kind::residual, 3, 1, 64, act::relu, true, pad_mode::reflect});
    s.layers.push_back({layer_kind::upsample});
    s.layers.push_back({layer_kind::conv, 3, 1, 64, act::relu, true, pad_mode::reflect});
    s.layers.push_back({layer_kind::conv, 3, 1, 32, act::relu, true, pad_mode::reflect});
    s.layers.push_back({layer_kind::conv, 7, 1, static_cast<int>(std::lround(1 / width_multiplier)),
                        act::sigmoid, false, pad_mode::reflect});
    return s;
}

// Appendix-A discriminator: c4s2-64-LR, c4s2-128-LR, c4s2-256-LR, c4s1-512-LR,
// c4s1-1. PatchGAN-style spatial logit head, leaky slope 0.2.
inline network_spec discriminator_spec(double width_multiplier) {
    network_spec s;
    s.role = net_role::discriminator;
    s.width_multiplier = width_multiplier;
    s.layers.push_back({layer_kind::conv, 4, 2, 64, act::leaky_relu_02, true, pad_mode::zero});
    s.layers.push_back({layer_kind::conv, 4, 2, 128, act::leaky_relu_02, true, pad_mode::zero});
    s.layers.push_back({layer_kind::conv, 4, 2, 256, act::leaky_relu_02, true, pad_mode::zero});
    s.layers.push_back({layer_kind::conv, 4, 1, 512, act::leaky_relu_02, true, pad_mode::zero});
    s.layers.push_back({layer_kind::conv, 4, 1, static_cast<int>(std::lround(1 / width_multiplier)),
                        act::none, false, pad_mode::zero});
    return s;
}

template <class T>
network<T> build_generator(double width_multiplier, rng& r, int residual_blocks = 9) {
    return build_network<T>(generator_spec(width_multiplier, residual_blocks), r);
}

template <class T>
network<T> build_attention(double width_multiplier, rng& r) {
    return build_network<T>(attention_spec(width_multiplier), r);
}

template <class T>
network<T> build_discriminator(double width_multiplier, rng& r, bool instance_norm_enabled = true) {
    return build_network<T>(discriminator_spec(width_multiplier), r, instance_norm_enabled);
}

// Rebuild with instance normalization disabled; convolution weights are
// carried over bitwise (the stage-2 discriminator switch).
template <class T>
network<T> without_instance_norm(const network<T>& src) {
    network<T> out;
    out.spec = src.spec;
    out.instance_norm_enabled = false;
    out.params = src.params;  // same parameter storage: weights preserved bitwise
    out.param_names = src.param_names;
    return out;
}

// FNV-1a over the exact byte representation of all parameters.
template <class T>
std::uint64_t params_checksum(const std::vector<tensor<T>>& params) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : params)
        for (T v : p.data()) {
            const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
            for (std::size_t i = 0; i < sizeof(T); ++i) {
                h ^= bytes[i];
                h *= 1099511628211ull;
            }
        }
    return h;
}

}  // namespace attnx
