// Acceptance suite: seven independent criteria, one PASS/FAIL line each.
// Exit code 0 iff all pass. Criterion 6 trains end-to-end on the synthetic
// benchmark and dominates the runtime (several minutes on one CPU core).
#include "attnx/eval.hpp"
#include "attnx/trainer.hpp"

#include <cstdio>
#include <cstdlib>
#include <functional>

using namespace attnx;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", idx, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

tensor<double> rand_t(shape_t shape, rng& r, double lo = -1.0, double hi = 1.0) {
    tensor<double> t(std::move(shape));
    for (auto& v : t.data()) v = r.uniform(lo, hi);
    return t;
}

// for |.|- and relu-style functionals: keep coordinates away from the kink
tensor<double> rand_t_off_zero(shape_t shape, rng& r) {
    tensor<double> t = rand_t(std::move(shape), r);
    for (auto& v : t.data())
        while (std::abs(v) < 5e-2) v = r.uniform(-1.0, 1.0);
    return t;
}

// Miniature double-precision pipeline small enough for finite differences.
// Smooth activations only: piecewise-linear units are checked individually
// (at inputs away from their kinks), but a deep composite perturbs thousands
// of coordinates and would inevitably step across some kink.
network<double> mini_gen(rng& r) {
    network_spec s;
    s.layers.push_back({layer_kind::conv, 3, 1, 4, act::tanh_h, true, pad_mode::reflect});
    s.layers.push_back({layer_kind::conv, 3, 1, 3, act::tanh_h, false, pad_mode::reflect});
    return build_network<double>(s, r);
}

network<double> mini_att(rng& r) {
    network_spec s;
    s.layers.push_back({layer_kind::conv, 3, 1, 4, act::tanh_h, true, pad_mode::reflect});
    s.layers.push_back({layer_kind::conv, 3, 1, 1, act::sigmoid, false, pad_mode::zero});
    return build_network<double>(s, r);
}

network<double> mini_disc(rng& r) {
    network_spec s;
    s.layers.push_back({layer_kind::conv, 4, 2, 4, act::tanh_h, true, pad_mode::zero});
    s.layers.push_back({layer_kind::conv, 1, 1, 1, act::none, false, pad_mode::zero});
    return build_network<double>(s, r);
}

// ---------------------------------------------------------------------------

void criterion_1_gradients() {
    double worst = 0.0;
    auto track = [&](double err) { worst = std::max(worst, err); };
    rng r(2024);

    // individual operators
    {
        std::vector<tensor<double>> p = {rand_t({1, 2, 5, 5}, r), rand_t({3, 2, 3, 3}, r),
                                         rand_t({3}, r)};
        for (pad_mode pm : {pad_mode::zero, pad_mode::reflect})
            track(grad_check<double>(
                [pm](std::vector<tensor<double>>& q) { return sq_mean(conv2d(q[0], q[1], q[2], 1, 1, pm)); },
                p, 1e-4));
    }
    {
        std::vector<tensor<double>> p = {rand_t({1, 2, 3, 3}, r), rand_t({2, 2, 3, 3}, r),
                                         rand_t({2}, r)};
        track(grad_check<double>(
            [](std::vector<tensor<double>>& q) { return sq_mean(transpose_conv2d(q[0], q[1], q[2])); },
            p, 1e-4));
    }
    {
        std::vector<tensor<double>> p = {rand_t({1, 2, 4, 4}, r)};
        track(grad_check<double>(
            [](std::vector<tensor<double>>& q) { return sq_mean(instance_norm(q[0])); }, p, 1e-5));
        track(grad_check<double>(
            [](std::vector<tensor<double>>& q) { return sq_mean(nearest_upsample2x(q[0])); }, p, 1e-5));
        std::vector<tensor<double>> pk = {rand_t_off_zero({1, 2, 4, 4}, r)};
        for (act a : {act::relu, act::leaky_relu_02, act::sigmoid, act::tanh_h})
            track(grad_check<double>(
                [a](std::vector<tensor<double>>& q) { return sq_mean(activation(q[0], a)); }, pk, 1e-5));
    }
    {
        std::vector<tensor<double>> p = {rand_t_off_zero({1, 3, 3, 3}, r),
                                         rand_t({1, 1, 3, 3}, r, 0.1, 0.9)};
        track(grad_check<double>(
            [](std::vector<tensor<double>>& q) { return l1_mean(mul(q[0], q[1])); }, p, 1e-5));
        track(grad_check<double>(
            [](std::vector<tensor<double>>& q) { return sq_mean(add(q[0], mul(q[0], q[1]))); }, p, 1e-5));
    }

    // full composed per-step objective: cycle both ways + LSGAN terms
    rng rn(7);
    auto g_st = mini_gen(rn), g_ts = mini_gen(rn);
    auto a_s = mini_att(rn), a_t = mini_att(rn);
    auto d_s = mini_disc(rn), d_t = mini_disc(rn);
    tensor<double> s0 = rand_t({2, 3, 8, 8}, r, -0.9, 0.9);
    tensor<double> t0 = rand_t({2, 3, 8, 8}, r, -0.9, 0.9);
    s0.set_requires_grad(true);
    t0.set_requires_grad(true);
    std::vector<tensor<double>> pts = {s0, t0, g_st.params[0], a_s.params[0], d_t.params[0]};
    auto full_loss = [&](std::vector<tensor<double>>& q) {
        const tensor<double>&s = q[0], &t = q[1];
        auto cs = cycle(s, g_st, a_s, g_ts, a_t);
        auto ct = cycle(t, g_ts, a_t, g_st, a_s);
        auto [adv_d_t, adv_g_s] = adversarial_losses(d_t.forward(t), d_t.forward(cs.forward.composed));
        auto [adv_d_s, adv_g_t] = adversarial_losses(d_s.forward(s), d_s.forward(ct.forward.composed));
        auto gen = total_generator_loss(adv_g_s, adv_g_t, cycle_loss(s, cs.reconstruction),
                                        cycle_loss(t, ct.reconstruction), 10.0);
        return add(gen, add(adv_d_s, adv_d_t));
    };
    track(grad_check<double>(full_loss, pts, 1e-4));

    report(1, "gradient correctness", worst < 1e-4,
           "worst relative error vs central differences = " + std::to_string(worst));
}

void criterion_2_blend_algebra() {
    rng r(31);
    bool ok = true;
    std::string detail;

    auto g_st = mini_gen(r), g_ts = mini_gen(r);
    auto s = rand_t({1, 3, 8, 8}, r);

    // attention == 1 reproduces the plain CycleGAN objective
    auto ones = tensor<double>(shape_t{1, 1, 8, 8}, 1.0);
    auto fwd = compose(s, g_st.forward(s), ones);
    auto bwd = compose(fwd.composed, g_ts.forward(fwd.composed), ones);
    const double ours = cycle_loss(s, bwd.composed).item();
    // reference: direct CycleGAN reconstruction without the blend machinery
    {
        no_grad_guard guard;
        auto ref_rec = g_ts.forward(g_st.forward(s));
        double acc = 0;
        for (std::size_t i = 0; i < s.numel(); ++i)
            acc += std::abs(s.data()[i] - ref_rec.data()[i]);
        const double ref = acc / static_cast<double>(s.numel());
        if (std::abs(ours - ref) > 1e-6) {
            ok = false;
            detail = "all-ones attention deviates from the CycleGAN reference by " +
                     std::to_string(std::abs(ours - ref));
        }
    }

    // attention == 0: composed bitwise equal to input, cycle loss exactly 0
    auto zeros = tensor<double>(shape_t{1, 1, 8, 8}, 0.0);
    auto f0 = compose(s, g_st.forward(s), zeros);
    auto b0 = compose(f0.composed, g_ts.forward(f0.composed), zeros);
    if (f0.composed.data() != s.data() || cycle_loss(s, b0.composed).item() != 0.0) {
        ok = false;
        detail = "all-zero attention failed the bitwise identity";
    }

    // random-mask composition identity: composed == att*raw + (1-att)*input
    auto att = rand_t({1, 1, 8, 8}, r, 0.0, 1.0);
    auto raw = g_st.forward(s);
    auto out = compose(s, raw, att);
    double max_dev = 0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 64; ++i) {
            const double a = att.data()[i];
            const double expect = a * raw.data()[c * 64 + i] + (1 - a) * s.data()[c * 64 + i];
            max_dev = std::max(max_dev, std::abs(out.composed.data()[c * 64 + i] - expect));
        }
    if (max_dev != 0.0) {
        ok = false;
        detail = "random-mask identity deviates by " + std::to_string(max_dev);
    }

    if (ok) detail = "all-ones matches CycleGAN to 1e-6; all-zeros and random-mask identities exact";
    report(2, "composition algebra", ok, detail);
}

void criterion_3_state_machine() {
    train_config cfg;
    cfg.epochs = 4;
    cfg.switch_epoch = 2;
    cfg.image_size = 32;
    cfg.width_multiplier = 0.25;
    cfg.residual_blocks = 1;
    cfg.seed = 5;

    synthetic_spec sp;
    sp.seed = 5;
    sp.count = 3;
    sp.test_count = 1;
    sp.image_size = 32;
    sp.radius_min = 5;
    sp.radius_max = 12;
    auto data = generate_synthetic(sp);

    // drive the epoch loop manually to checksum at every epoch boundary
    auto st = init_train_state(cfg);
    std::vector<std::uint64_t> att_sums;
    bool norm_absent_from_switch = true;
    for (int c = 0; c < 4; ++c) {
        st.epoch = c;
        apply_stage_transitions(st);
        for (std::size_t i = 0; i < data.train_s.size(); ++i)
            train_step(st, data.train_s.images[i], data.train_t.images[i]);
        st.epoch = c + 1;
        att_sums.push_back(params_checksum(st.a_s.params) ^ params_checksum(st.a_t.params));
        if (c >= 2 && st.d_s.instance_norm_enabled) norm_absent_from_switch = false;
    }
    // (a) attention checksums frozen from the switch onward
    const bool frozen = att_sums[1] != att_sums[0] && att_sums[2] == att_sums[1] &&
                        att_sums[3] == att_sums[1] && st.attention_frozen;
    // (c) the norm-removal transition preserves convolution weights bitwise:
    //     bracket apply_stage_transitions directly on a fresh state
    auto st2 = init_train_state(cfg);
    st2.epoch = 2;
    const auto disc_before = params_checksum(st2.d_s.params);
    apply_stage_transitions(st2);
    const auto disc_after = params_checksum(st2.d_s.params);
    const bool norm_removed = !st.d_s.instance_norm_enabled && !st.d_t.instance_norm_enabled &&
                              norm_absent_from_switch && !st2.d_s.instance_norm_enabled &&
                              disc_before == disc_after;

    // (b) masked discriminator inputs use the strict threshold
    tensor<float> att(shape_t{1, 1, 2, 2});
    att.data() = {0.05f, 0.1f, 0.11f, 0.9f};  // exactly tau must map to 0
    tensor<float> img(shape_t{1, 3, 2, 2}, 0.5f);
    auto masked = mask_for_discriminator(img, att, 0.1f);
    const bool strict = masked.at(0, 0, 0, 0) == 0.0f && masked.at(0, 0, 0, 1) == 0.0f &&
                        masked.at(0, 0, 1, 0) == 0.5f && masked.at(0, 0, 1, 1) == 0.5f &&
                        st.masked_stage_active();

    report(3, "two-stage state machine", frozen && norm_removed && strict,
           std::string("attention frozen from switch: ") + (frozen ? "yes" : "NO") +
               "; instance norm removed with weights preserved: " + (norm_removed ? "yes" : "NO") +
               "; strict threshold masking active: " + (strict ? "yes" : "NO"));
}

void criterion_4_kid() {
    rng r(404);
    bool ok = true;
    std::string detail;

    // brute-force oracle agreement
    auto kernel = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0;
        for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
        const double z = dot / static_cast<double>(a.size()) + 1.0;
        return z * z * z;
    };
    double worst = 0;
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = 2 + trial % 9, m = 2 + (trial * 3) % 9;
        feat_matrix X(n, std::vector<double>(5)), Y(m, std::vector<double>(5));
        for (auto& row : X)
            for (auto& v : row) v = r.normal();
        for (auto& row : Y)
            for (auto& v : row) v = r.normal();
        double xx = 0, yy = 0, xy = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) xx += kernel(X[i], X[j]);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j) yy += kernel(Y[i], Y[j]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) xy += kernel(X[i], Y[j]);
        const double oracle = xx / (double(n) * (n - 1)) + yy / (double(m) * (m - 1)) -
                              2 * xy / (double(n) * m);
        worst = std::max(worst, std::abs(mmd2_unbiased(X, Y) - oracle));
    }
    if (worst >= 1e-10) {
        ok = false;
        detail = "oracle deviation " + std::to_string(worst);
    }

    // 20-trial Monte-Carlo unbiasedness
    std::vector<double> est;
    for (int t = 0; t < 20; ++t) {
        feat_matrix X(12, std::vector<double>(4)), Y(12, std::vector<double>(4));
        for (auto& row : X)
            for (auto& v : row) v = r.normal();
        for (auto& row : Y)
            for (auto& v : row) v = r.normal();
        est.push_back(mmd2_unbiased(X, Y));
    }
    double mean = 0;
    for (double e : est) mean += e;
    mean /= est.size();
    double var = 0;
    for (double e : est) var += (e - mean) * (e - mean);
    const double se = std::sqrt(var / (est.size() - 1) / est.size());
    if (std::abs(mean) > 3 * se) {
        ok = false;
        detail += " unbiasedness violated: mean " + std::to_string(mean) + " vs 3se " +
                  std::to_string(3 * se);
    }

    // 10-splits-of-50 protocol engages exactly when pools permit
    auto fx = feature_extractor::make(1, 32);
    std::vector<tensor<float>> pool_a, pool_b;
    rng ri(7);
    for (int i = 0; i < 55; ++i) {
        tensor<float> t(shape_t{1, 3, 16, 16});
        for (auto& v : t.data()) v = static_cast<float>(ri.uniform(-1.0, 1.0));
        (i % 2 ? pool_a : pool_b).push_back(std::move(t));
    }
    while (pool_a.size() < 55) pool_a.push_back(pool_a.front());
    while (pool_b.size() < 55) pool_b.push_back(pool_b.front());
    auto rep = kid_report(pool_a, pool_b, fx);
    if (rep.n_splits != 10 || rep.split_size != 50 || rep.clamped) {
        ok = false;
        detail += " protocol mismatch";
    }

    if (ok)
        detail = "oracle deviation " + std::to_string(worst) + "; MC mean " +
                 std::to_string(mean) + " within 3se; 10x50 protocol intact";
    report(4, "KID estimator", ok, detail);
}

void criterion_5_determinism() {
    const auto dir = fs::temp_directory_path() / "attnx_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);

    train_config cfg;
    cfg.epochs = 2;
    cfg.switch_epoch = 1;
    cfg.image_size = 32;
    cfg.width_multiplier = 0.25;
    cfg.residual_blocks = 1;
    cfg.seed = 99;

    synthetic_spec sp;
    sp.seed = 40;
    sp.count = 4;
    sp.test_count = 1;
    sp.image_size = 32;
    sp.radius_min = 5;
    sp.radius_max = 12;
    auto data = generate_synthetic(sp);

    auto run_full = [&](const fs::path& out) {
        auto st = init_train_state(cfg);
        train(st, data.train_s, data.train_t);
        save_train_checkpoint(st, out);
    };
    run_full(dir / "a.ckpt");
    run_full(dir / "b.ckpt");

    // resumed run: stop after epoch 1, reload, finish
    auto st = init_train_state(cfg);
    st.cfg.epochs = 1;
    train(st, data.train_s, data.train_t);
    save_train_checkpoint(st, dir / "mid.ckpt");
    auto resumed = load_train_checkpoint(dir / "mid.ckpt");
    resumed.cfg.epochs = 2;
    train(resumed, data.train_s, data.train_t);
    save_train_checkpoint(resumed, dir / "c.ckpt");

    auto bytes = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };
    const bool repeat_ok = bytes(dir / "a.ckpt") == bytes(dir / "b.ckpt");
    const bool resume_ok = bytes(dir / "a.ckpt") == bytes(dir / "c.ckpt");
    report(5, "determinism", repeat_ok && resume_ok,
           std::string("repeated run bitwise identical: ") + (repeat_ok ? "yes" : "NO") +
               "; resumed run bitwise identical: " + (resume_ok ? "yes" : "NO"));
}

void criterion_6_synthetic_end_to_end() {
    // Thresholds pinned from three baseline seed runs of this exact config
    // (training seeds 7/11/23): contrast 0.486/0.432/0.480, background L1
    // 0.0094/0.0077/0.0074, empty-image attention 0.084/0.076/0.081. Pinned
    // with margin: contrast >= 0.3, background L1 <= 0.05, empty att <= 0.15.
    int epochs = 15;
    if (const char* e = std::getenv("ATTNX_ACCEPT_EPOCHS")) epochs = std::atoi(e);

    synthetic_spec sp;  // benchmark defaults: 64x64, 200/domain, 10% empty
    sp.seed = 42;
    auto data = generate_synthetic(sp);

    train_config cfg;
    cfg.epochs = epochs;
    cfg.switch_epoch = epochs / 3;
    cfg.image_size = 64;
    cfg.width_multiplier = 0.25;
    cfg.residual_blocks = 3;
    cfg.seed = 7;
    // At this scale the discriminators win almost immediately, so the default
    // cycle weight of 10 pushes the attention maps to zero before the
    // adversarial signal can pull them up (and once the sigmoid saturates the
    // attention gradient vanishes). A weight of 3 recovers within two epochs
    // and converges to well-localized maps; the full-scale default stays 10.
    cfg.lambda_cyc = 3.0;

    const auto t0 = std::chrono::steady_clock::now();
    auto st = init_train_state(cfg);
    train(st, data.train_s, data.train_t);
    const double train_minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

    double contrast_sum = 0, bg_sum = 0, empty_att_sum = 0;
    int n_fg = 0, n_all = 0, n_empty = 0;
    auto eval_direction = [&](const dataset& ds, const network<float>& gen,
                              const network<float>& att) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            auto out = translate_inference(gen, att, ds.images[i]);
            const auto& gt = ds.masks[i];
            bool has_fg = false;
            for (float v : gt.data()) has_fg |= v > 0.5f;
            auto mm = mask_metrics(out, ds.images[i], gt, static_cast<float>(cfg.tau));
            bg_sum += mm.background_l1;
            ++n_all;
            if (has_fg) {
                contrast_sum += mm.attention_contrast;
                ++n_fg;
            } else {
                double a = 0;
                for (float v : out.attention.data()) a += v;
                empty_att_sum += a / static_cast<double>(out.attention.numel());
                ++n_empty;
            }
        }
    };
    eval_direction(data.test_s, st.g_st, st.a_s);
    eval_direction(data.test_t, st.g_ts, st.a_t);

    const double contrast = n_fg ? contrast_sum / n_fg : 0.0;
    const double bg_l1 = n_all ? bg_sum / n_all : 1.0;
    const double empty_att = n_empty ? empty_att_sum / n_empty : 1.0;
    const bool in_budget = train_minutes <= 30.0;
    const bool ok = in_budget && contrast >= 0.3 && bg_l1 <= 0.05 && empty_att <= 0.15 &&
                    n_empty > 0;

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "trained %.1f min (budget 30); attention contrast %.3f (>= 0.3); background L1 "
                  "%.4f (<= 0.05); empty-image attention %.3f (<= 0.15) over %d empty images",
                  train_minutes, contrast, bg_l1, empty_att, n_empty);
    report(6, "synthetic end-to-end", ok, buf);
}

void criterion_7_ablation_structure() {
    bool ok = true;
    std::string detail;

    synthetic_spec sp;
    sp.seed = 50;
    sp.count = 2;
    sp.test_count = 1;
    sp.image_size = 32;
    sp.radius_min = 5;
    sp.radius_max = 12;
    auto data = generate_synthetic(sp);
    const auto& s = data.train_s.images[0];
    const auto& t = data.train_t.images[0];

    train_config base;
    base.epochs = 2;
    base.switch_epoch = 1;
    base.image_size = 32;
    base.width_multiplier = 0.25;
    base.residual_blocks = 1;
    base.seed = 12;

    // no cycle term
    {
        auto cfg = base;
        cfg.ablation = ablation_from_name("ours-cycle");
        auto st = init_train_state(cfg);
        auto [bs, bt] = train_step(st, s, t);
        if (bs.cyc != 0.0 || bt.cyc != 0.0) {
            ok = false;
            detail += " no_cycle leaks a cycle term;";
        }
    }
    // reused cycle attention is bitwise equal
    {
        auto cfg = base;
        cfg.ablation = ablation_from_name("ours-cycleatt");
        auto st = init_train_state(cfg);
        no_grad_guard ng;
        auto cy = cycle(s, st.g_st, st.a_s, st.g_ts, st.a_t, cfg.ablation);
        if (cy.backward.attention.data() != cy.forward.attention.data()) {
            ok = false;
            detail += " cycleAtt attention not reused bitwise;";
        }
    }
    // single attention path: the dropped side degenerates to all-ones
    {
        auto cfg = base;
        cfg.ablation = ablation_from_name("ours-as");  // A_T dropped
        auto st = init_train_state(cfg);
        no_grad_guard ng;
        auto out_t = translate_once(st.g_ts, st.a_t, t, cfg.ablation.disable_attention_t);
        auto out_s = translate_once(st.g_st, st.a_s, s, cfg.ablation.disable_attention_s);
        bool t_ones = true;
        for (float v : out_t.attention.data()) t_ones &= v == 1.0f;
        bool s_varies = false;
        for (float v : out_s.attention.data()) s_varies |= v != 1.0f;
        if (!t_ones || !s_varies) {
            ok = false;
            detail += " ours-as does not keep exactly one attention path;";
        }
    }
    // whole-image discriminator: masked stage never engages, norm survives
    {
        auto cfg = base;
        cfg.ablation = ablation_from_name("ours-d");
        auto st = init_train_state(cfg);
        train(st, data.train_s, data.train_t);
        if (st.masked_stage_active() || !st.d_s.instance_norm_enabled || !st.attention_frozen) {
            ok = false;
            detail += " ours-d stage handling wrong;";
        }
    }
    // unfrozen attention keeps training after the switch
    {
        auto cfg = base;
        cfg.ablation = ablation_from_name("ours-d-a");
        auto st = init_train_state(cfg);
        st.cfg.epochs = 1;
        train(st, data.train_s, data.train_t);
        const auto at_switch = params_checksum(st.a_s.params);
        st.cfg.epochs = 2;
        train(st, data.train_s, data.train_t);
        if (st.attention_frozen || params_checksum(st.a_s.params) == at_switch) {
            ok = false;
            detail += " ours-d-a attention did not keep training;";
        }
    }

    if (ok) detail = "all five structural differences verified by instrumentation";
    report(7, "ablation structure", ok, detail);
}

}  // namespace

int main() {
    criterion_1_gradients();
    criterion_2_blend_algebra();
    criterion_3_state_machine();
    criterion_4_kid();
    criterion_5_determinism();
    criterion_7_ablation_structure();
    criterion_6_synthetic_end_to_end();  // longest last
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all 7 acceptance criteria passed\n");
    return 0;
}
