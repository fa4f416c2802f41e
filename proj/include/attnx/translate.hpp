#pragma once

#include "attnx/network.hpp"

namespace attnx {

// One forward pass of the attention-guided composition
//   composed = attention * raw + (1 - attention) * input.
template <class T>
struct translation_output {
    tensor<T> input;
    tensor<T> raw;         // generator output F(s)
    tensor<T> attention;   // A(s), single channel in [0,1]
    tensor<T> foreground;  // attention * raw
    tensor<T> background;  // (1 - attention) * input
    tensor<T> composed;    // s'
};

struct ablation_flags {
    bool no_cycle = false;                 // Ours-cycle
    bool reuse_cycle_attention = false;    // Ours-cycleAtt
    bool disable_attention_s = false;      // drops A_S (keeps A_T only: Ours-At)
    bool disable_attention_t = false;      // drops A_T (keeps A_S only: Ours-As)
    bool whole_image_discriminator = false;  // Ours-D
    bool never_freeze_attention = false;     // with whole_image_discriminator: Ours-D-A
};

template <class T>
struct cycle_output {
    translation_output<T> forward;   // s -> s'
    translation_output<T> backward;  // s' -> s''
    tensor<T> reconstruction;        // s''
};

template <class T>
translation_output<T> compose(const tensor<T>& input, const tensor<T>& raw,
                              const tensor<T>& attention) {
    if (input.shape() != raw.shape())
        throw std::invalid_argument("compose: input " + shape_str(input.shape()) +
                                    " vs raw " + shape_str(raw.shape()));
    if (attention.rank() != 4 || attention.dim(1) != 1 || attention.dim(0) != input.dim(0) ||
        attention.dim(2) != input.dim(2) || attention.dim(3) != input.dim(3))
        throw std::invalid_argument("compose: attention must be a single-channel map matching " +
                                    shape_str(input.shape()) + ", got " + shape_str(attention.shape()));
    translation_output<T> out;
    out.input = input;
    out.raw = raw;
    out.attention = attention;
    out.foreground = mul(raw, attention);
    out.background = mul(input, affine(attention, T(-1), T(1)));
    out.composed = add(out.foreground, out.background);
    return out;
}

// Runs a network pair as one translation step; a disabled attention network
// degenerates to a constant all-ones map (plain CycleGAN on that side).
template <class T>
translation_output<T> translate_once(const network<T>& gen, const network<T>& att,
                                     const tensor<T>& x, bool attention_disabled = false) {
    tensor<T> raw = gen.forward(x);
    tensor<T> a = attention_disabled
                      ? tensor<T>(shape_t{x.dim(0), 1, x.dim(2), x.dim(3)}, T(1))
                      : att.forward(x);
    return compose(x, raw, a);
}

template <class T>
cycle_output<T> cycle(const tensor<T>& s, const network<T>& gen_fwd, const network<T>& att_fwd,
                      const network<T>& gen_bwd, const network<T>& att_bwd,
                      const ablation_flags& ab = {}, bool forward_att_disabled = false,
                      bool backward_att_disabled = false) {
    cycle_output<T> out;
    out.forward = translate_once(gen_fwd, att_fwd, s, forward_att_disabled);
    const tensor<T>& sp = out.forward.composed;
    tensor<T> raw_back = gen_bwd.forward(sp);
    tensor<T> a_back;
    if (ab.reuse_cycle_attention) {
        a_back = out.forward.attention;  // A_T(s') replaced by the forward map
    } else if (backward_att_disabled) {
        a_back = tensor<T>(shape_t{sp.dim(0), 1, sp.dim(2), sp.dim(3)}, T(1));
    } else {
        a_back = att_bwd.forward(sp);
    }
    out.backward = compose(sp, raw_back, a_back);
    out.reconstruction = out.backward.composed;
    return out;
}

template <class T>
tensor<T> cycle_loss(const tensor<T>& s, const tensor<T>& s2) {
    if (s.shape() != s2.shape())
        throw std::invalid_argument("cycle_loss shape mismatch");
    return l1_mean(sub(s, s2));
}

// LSGAN: adv_d = 1/2 mean((D(real)-1)^2) + 1/2 mean(D(fake)^2),
//        adv_g = mean((D(fake)-1)^2).
template <class T>
std::pair<tensor<T>, tensor<T>> adversarial_losses(const tensor<T>& d_real,
                                                   const tensor<T>& d_fake) {
    tensor<T> adv_d = add(affine(sq_mean(affine(d_real, T(1), T(-1))), T(0.5), T(0)),
                          affine(sq_mean(d_fake), T(0.5), T(0)));
    tensor<T> adv_g = sq_mean(affine(d_fake, T(1), T(-1)));
    return {adv_d, adv_g};
}

// Identical quadratic form applied to logits of masked inputs (stage 2).
template <class T>
std::pair<tensor<T>, tensor<T>> masked_adversarial_losses(const tensor<T>& d_real_masked,
                                                          const tensor<T>& d_fake_masked) {
    return adversarial_losses(d_real_masked, d_fake_masked);
}

// Hard binarization, strict comparison, stop-gradient: the result never joins
// the autodiff graph.
template <class T>
tensor<T> threshold_mask(const tensor<T>& attention, T tau) {
    if (!(tau >= T(0) && tau < T(1)))
        throw std::invalid_argument("tau must lie in [0,1)");
    no_grad_guard ng;
    tensor<T> out(attention.shape());
    const auto& a = attention.data();
    auto& o = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] > tau ? T(1) : T(0);
    return out;
}

// image * threshold_mask(attention, tau), broadcast over channels. Gradients
// flow through image only; the mask is a constant.
template <class T>
tensor<T> mask_for_discriminator(const tensor<T>& image, const tensor<T>& attention, T tau) {
    return mul(image, threshold_mask(attention, tau));
}

template <class T>
tensor<T> total_generator_loss(const tensor<T>& adv_g_s, const tensor<T>& adv_g_t,
                               const tensor<T>& cyc_s, const tensor<T>& cyc_t, T lambda_cyc) {
    if (lambda_cyc < T(0)) throw std::invalid_argument("lambda_cyc must be >= 0");
    return add(add(adv_g_s, adv_g_t), affine(add(cyc_s, cyc_t), lambda_cyc, T(0)));
}

struct loss_bundle {
    double adv_g = 0;
    double adv_d = 0;
    double cyc = 0;
    double total_g = 0;  // adv_g + lambda_cyc * cyc (per direction)
};

}  // namespace attnx
