#pragma once

#include "attnx/network.hpp"
#include "attnx/translate.hpp"

namespace attnx {

// Fixed seeded convolutional feature extractor standing in for Inception at
// desk scale: four strided conv layers, global average pooling to d features.
struct feature_extractor {
    network<float> net;
    std::uint64_t seed = 0;
    int d = 128;

    static feature_extractor make(std::uint64_t seed, int d = 128) {
        if (d % 8 != 0 || d < 16) throw std::invalid_argument("feature dim must be >= 16, multiple of 8");
        network_spec spec;
        spec.role = net_role::custom;
        spec.layers.push_back({layer_kind::conv, 3, 2, d / 8, act::leaky_relu_02, false, pad_mode::zero});
        spec.layers.push_back({layer_kind::conv, 3, 2, d / 4, act::leaky_relu_02, false, pad_mode::zero});
        spec.layers.push_back({layer_kind::conv, 3, 2, d / 2, act::leaky_relu_02, false, pad_mode::zero});
        spec.layers.push_back({layer_kind::conv, 3, 2, d, act::leaky_relu_02, false, pad_mode::zero});
        rng r(seed ^ 0x5eedfea7u);
        feature_extractor fx;
        fx.net = build_network<float>(spec, r);
        fx.net.set_requires_grad(false);
        fx.seed = seed;
        fx.d = d;
        return fx;
    }
};

using feat_matrix = std::vector<std::vector<double>>;

// Row-per-image features; deterministic for a fixed extractor seed.
inline feat_matrix extract_features(const std::vector<tensor<float>>& images,
                                    const feature_extractor& fx) {
    if (images.empty()) throw std::invalid_argument("extract_features: no images");
    no_grad_guard ng;
    feat_matrix out;
    out.reserve(images.size());
    for (const auto& img : images) {
        tensor<float> h = fx.net.forward(img);
        const int C = h.dim(1);
        const std::size_t hw = static_cast<std::size_t>(h.dim(2)) * h.dim(3);
        std::vector<double> row(C, 0.0);
        for (int c = 0; c < C; ++c) {
            const float* p = h.data().data() + static_cast<std::size_t>(c) * hw;
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += p[i];
            row[c] = s / static_cast<double>(hw);
        }
        out.push_back(std::move(row));
    }
    return out;
}

// Cubic polynomial kernel k(a,b) = ((a.b)/d + 1)^3, the KID convention.
inline double poly3_kernel(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    const double z = dot / static_cast<double>(a.size()) + 1.0;
    return z * z * z;
}

using kernel_fn = std::function<double(const std::vector<double>&, const std::vector<double>&)>;

// Unbiased squared-MMD U-statistic.
inline double mmd2_unbiased(const feat_matrix& X, const feat_matrix& Y,
                            const kernel_fn& k = poly3_kernel) {
    const std::size_t n = X.size(), m = Y.size();
    if (n < 2 || m < 2) throw std::invalid_argument("mmd2_unbiased needs n, m >= 2");
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) kxx += k(X[i], X[j]);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j) kyy += k(Y[i], Y[j]);
    // summed in sorted order so the estimate is exactly symmetric in (X, Y)
    std::vector<double> cross;
    cross.reserve(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) cross.push_back(k(X[i], Y[j]));
    std::sort(cross.begin(), cross.end());
    for (double v : cross) kxy += v;
    return kxx / (static_cast<double>(n) * (n - 1)) + kyy / (static_cast<double>(m) * (m - 1)) -
           2.0 * kxy / (static_cast<double>(n) * m);
}

struct kid_report_t {
    double mean = 0.0;
    double std_dev = 0.0;
    int n_splits = 0;
    int split_size = 0;
    std::string kernel = "poly3((x.y)/d + 1)^3";
    bool clamped = false;  // split_size was reduced to fit the pools
};

// 10-splits-of-50 protocol; resamples without replacement per split per pool.
inline kid_report_t kid_report(const std::vector<tensor<float>>& real_images,
                               const std::vector<tensor<float>>& fake_images,
                               const feature_extractor& fx, int n_splits = 10,
                               int split_size = 50, std::uint64_t eval_seed = 0) {
    if (real_images.size() < 2 || fake_images.size() < 2)
        throw std::invalid_argument("kid_report needs pools of size >= 2");
    const feat_matrix real = extract_features(real_images, fx);
    const feat_matrix fake = extract_features(fake_images, fx);

    kid_report_t rep;
    rep.n_splits = n_splits;
    rep.split_size = split_size;
    const int max_split = static_cast<int>(std::min(real.size(), fake.size()));
    if (split_size > max_split) {
        rep.split_size = max_split;
        rep.clamped = true;
    }

    rng r(eval_seed ^ 0x6b1dull);
    std::vector<double> estimates;
    auto sample = [&](const feat_matrix& pool) {
        std::vector<int> idx(pool.size());
        std::iota(idx.begin(), idx.end(), 0);
        r.shuffle(idx);
        feat_matrix out;
        for (int i = 0; i < rep.split_size; ++i) out.push_back(pool[idx[i]]);
        return out;
    };
    for (int s = 0; s < n_splits; ++s)
        estimates.push_back(mmd2_unbiased(sample(real), sample(fake)));

    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= estimates.size();
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    rep.mean = mean;
    rep.std_dev = estimates.size() > 1 ? std::sqrt(var / estimates.size()) : 0.0;
    return rep;
}

// Ground-truth-mask diagnostics for the synthetic benchmark.
struct mask_metrics_t {
    double iou = 0.0;                 // thresholded attention vs ground truth
    double attention_contrast = 0.0;  // mean attention inside GT minus outside
    double background_l1 = 0.0;       // mean |composed - input| over GT background
};

inline mask_metrics_t mask_metrics(const translation_output<float>& out, const tensor<float>& input,
                                   const tensor<float>& gt_mask, float tau) {
    if (gt_mask.shape() != out.attention.shape())
        throw std::invalid_argument("mask_metrics: ground-truth mask shape mismatch");
    for (float v : gt_mask.data())
        if (v != 0.0f && v != 1.0f) throw std::invalid_argument("ground-truth mask must be binary");

    mask_metrics_t m;
    const tensor<float> hard = threshold_mask(out.attention, tau);
    double inter = 0.0, uni = 0.0, in_sum = 0.0, out_sum = 0.0;
    std::size_t in_n = 0, out_n = 0;
    for (std::size_t i = 0; i < gt_mask.numel(); ++i) {
        const bool gt = gt_mask.data()[i] > 0.5f;
        const bool pred = hard.data()[i] > 0.5f;
        if (gt && pred) inter += 1.0;
        if (gt || pred) uni += 1.0;
        if (gt) {
            in_sum += out.attention.data()[i];
            ++in_n;
        } else {
            out_sum += out.attention.data()[i];
            ++out_n;
        }
    }
    m.iou = uni > 0.0 ? inter / uni : 1.0;  // both empty: perfect agreement
    const double in_mean = in_n ? in_sum / in_n : 0.0;
    const double out_mean = out_n ? out_sum / out_n : 0.0;
    m.attention_contrast = in_mean - out_mean;

    const int C = input.dim(1);
    const std::size_t hw = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
    double l1 = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < hw; ++i) {
        if (gt_mask.data()[i] > 0.5f) continue;
        for (int c = 0; c < C; ++c) {
            const std::size_t idx = static_cast<std::size_t>(c) * hw + i;
            l1 += std::abs(out.composed.data()[idx] - input.data()[idx]);
            ++cnt;
        }
    }
    m.background_l1 = cnt ? l1 / cnt : 0.0;
    return m;
}

}  // namespace attnx
