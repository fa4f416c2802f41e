#pragma once

#include "attnx/data_io.hpp"
#include "attnx/optim.hpp"
#include "attnx/translate.hpp"

#include <chrono>

namespace attnx {

struct train_config {
    int epochs = 30;
    int switch_epoch = 30;  // attention freeze + masked-discriminator switch
    double tau = 0.1;
    double lambda_cyc = 10.0;
    double alpha = 2e-4;
    std::uint64_t seed = 0;
    int batch_size = 1;
    int image_size = 64;
    double width_multiplier = 0.25;
    int residual_blocks = 3;
    ablation_flags ablation;
    bool attention_discriminator_enabled = true;
    int checkpoint_every = 5;
    std::string out_dir;  // metrics + checkpoints; empty disables file output

    void validate() const {
        if (epochs < 0 || switch_epoch < 0 || switch_epoch > epochs)
            throw std::invalid_argument("need 0 <= switch_epoch <= epochs");
        if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in [0,1)");
        if (lambda_cyc < 0.0) throw std::invalid_argument("lambda_cyc must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (image_size % 4 != 0) throw std::invalid_argument("image_size must be divisible by 4");
        if (residual_blocks < 0) throw std::invalid_argument("residual_blocks must be >= 0");
        if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
    }
};

inline void to_json(json& j, const ablation_flags& a) {
    j = json{{"no_cycle", a.no_cycle},
             {"reuse_cycle_attention", a.reuse_cycle_attention},
             {"disable_attention_s", a.disable_attention_s},
             {"disable_attention_t", a.disable_attention_t},
             {"whole_image_discriminator", a.whole_image_discriminator},
             {"never_freeze_attention", a.never_freeze_attention}};
}

inline void from_json(const json& j, ablation_flags& a) {
    a = ablation_flags{};
    auto opt = [&](const char* k, bool& v) { if (j.contains(k)) j.at(k).get_to(v); };
    opt("no_cycle", a.no_cycle);
    opt("reuse_cycle_attention", a.reuse_cycle_attention);
    opt("disable_attention_s", a.disable_attention_s);
    opt("disable_attention_t", a.disable_attention_t);
    opt("whole_image_discriminator", a.whole_image_discriminator);
    opt("never_freeze_attention", a.never_freeze_attention);
}

// Table-2 row names. Ours-As keeps only A_S (drops A_T) and vice versa.
inline ablation_flags ablation_from_name(const std::string& name) {
    ablation_flags a;
    if (name.empty() || name == "ours") return a;
    if (name == "ours-cycle") a.no_cycle = true;
    else if (name == "ours-cycleatt") a.reuse_cycle_attention = true;
    else if (name == "ours-as") a.disable_attention_t = true;
    else if (name == "ours-at") a.disable_attention_s = true;
    else if (name == "ours-d") a.whole_image_discriminator = true;
    else if (name == "ours-d-a") {
        a.whole_image_discriminator = true;
        a.never_freeze_attention = true;
    } else {
        throw std::invalid_argument(
            "unknown ablation '" + name +
            "' (expected ours, ours-cycle, ours-cycleatt, ours-as, ours-at, ours-d, ours-d-a)");
    }
    return a;
}

inline void to_json(json& j, const train_config& c) {
    j = json{{"epochs", c.epochs},
             {"switch_epoch", c.switch_epoch},
             {"tau", c.tau},
             {"lambda_cyc", c.lambda_cyc},
             {"alpha", c.alpha},
             {"seed", c.seed},
             {"batch_size", c.batch_size},
             {"image_size", c.image_size},
             {"width_multiplier", c.width_multiplier},
             {"residual_blocks", c.residual_blocks},
             {"ablation", c.ablation},
             {"attention_discriminator_enabled", c.attention_discriminator_enabled},
             {"checkpoint_every", c.checkpoint_every},
             {"out_dir", c.out_dir}};
}

inline void from_json(const json& j, train_config& c) {
    c = train_config{};
    auto opt = [&](const char* k, auto& v) { if (j.contains(k)) j.at(k).get_to(v); };
    opt("epochs", c.epochs);
    opt("switch_epoch", c.switch_epoch);
    opt("tau", c.tau);
    opt("lambda_cyc", c.lambda_cyc);
    opt("alpha", c.alpha);
    opt("seed", c.seed);
    opt("batch_size", c.batch_size);
    opt("image_size", c.image_size);
    opt("width_multiplier", c.width_multiplier);
    opt("residual_blocks", c.residual_blocks);
    opt("ablation", c.ablation);
    opt("attention_discriminator_enabled", c.attention_discriminator_enabled);
    opt("checkpoint_every", c.checkpoint_every);
    opt("out_dir", c.out_dir);
}

// --- network_spec serialization (checkpoints are self-describing) ----------

inline void to_json(json& j, const layer_spec& l) {
    static const char* kinds[] = {"conv", "transpose_conv", "upsample", "residual"};
    j = json{{"kind", kinds[static_cast<int>(l.kind)]},
             {"kernel", l.kernel},
             {"stride", l.stride},
             {"filters", l.filters},
             {"activation", act_name(l.activation)},
             {"normalized", l.normalized},
             {"pad", l.pad == pad_mode::reflect ? "reflect" : "zero"}};
}

inline void from_json(const json& j, layer_spec& l) {
    const std::string kind = j.at("kind");
    if (kind == "conv") l.kind = layer_kind::conv;
    else if (kind == "transpose_conv") l.kind = layer_kind::transpose_conv;
    else if (kind == "upsample") l.kind = layer_kind::upsample;
    else if (kind == "residual") l.kind = layer_kind::residual;
    else throw std::invalid_argument("unknown layer kind " + kind);
    j.at("kernel").get_to(l.kernel);
    j.at("stride").get_to(l.stride);
    j.at("filters").get_to(l.filters);
    const std::string a = j.at("activation");
    if (a == "none") l.activation = act::none;
    else if (a == "relu") l.activation = act::relu;
    else if (a == "leaky_relu_0.2") l.activation = act::leaky_relu_02;
    else if (a == "sigmoid") l.activation = act::sigmoid;
    else if (a == "tanh") l.activation = act::tanh_h;
    else throw std::invalid_argument("unknown activation " + a);
    j.at("normalized").get_to(l.normalized);
    l.pad = j.at("pad") == "reflect" ? pad_mode::reflect : pad_mode::zero;
}

inline void to_json(json& j, const network_spec& s) {
    static const char* roles[] = {"generator", "attention", "discriminator", "custom"};
    j = json{{"role", roles[static_cast<int>(s.role)]},
             {"width_multiplier", s.width_multiplier},
             {"input_channels", s.input_channels},
             {"layers", s.layers}};
}

inline void from_json(const json& j, network_spec& s) {
    const std::string role = j.at("role");
    if (role == "generator") s.role = net_role::generator;
    else if (role == "attention") s.role = net_role::attention;
    else if (role == "discriminator") s.role = net_role::discriminator;
    else s.role = net_role::custom;
    j.at("width_multiplier").get_to(s.width_multiplier);
    j.at("input_channels").get_to(s.input_channels);
    j.at("layers").get_to(s.layers);
}

// ---------------------------------------------------------------------------

struct epoch_metrics {
    int epoch = 0;
    int stage = 1;
    double adv_d_s = 0, adv_d_t = 0, adv_g = 0, cyc = 0;
    double wall_time = 0;
};

struct train_state {
    train_config cfg;
    int epoch = 0;
    network<float> g_st, g_ts;  // generators
    network<float> a_s, a_t;    // attention networks
    network<float> d_s, d_t;    // discriminators
    adam<float> opt_gen_s, opt_gen_t, opt_d_s, opt_d_t;
    rng master{0};
    bool attention_frozen = false;
    bool disc_norm_removed = false;
    std::vector<epoch_metrics> history;

    // c < switch_epoch is stage 1 (Algorithm 1's "if c < 30" test)
    bool masked_stage_active() const {
        return epoch >= cfg.switch_epoch && cfg.attention_discriminator_enabled &&
               !cfg.ablation.whole_image_discriminator;
    }
    bool freeze_active() const {
        return epoch >= cfg.switch_epoch && !cfg.ablation.never_freeze_attention;
    }
};

inline train_state init_train_state(const train_config& cfg) {
    cfg.validate();
    train_state st;
    st.cfg = cfg;
    rng r(cfg.seed);
    st.g_st = build_generator<float>(cfg.width_multiplier, r, cfg.residual_blocks);
    st.a_s = build_attention<float>(cfg.width_multiplier, r);
    st.d_t = build_discriminator<float>(cfg.width_multiplier, r);
    st.g_ts = build_generator<float>(cfg.width_multiplier, r, cfg.residual_blocks);
    st.a_t = build_attention<float>(cfg.width_multiplier, r);
    st.d_s = build_discriminator<float>(cfg.width_multiplier, r);
    st.master = r;

    const float lr = static_cast<float>(cfg.alpha);
    st.opt_gen_s = adam<float>(lr);
    st.opt_gen_t = adam<float>(lr);
    st.opt_d_s = adam<float>(lr);
    st.opt_d_t = adam<float>(lr);
    auto group = [](const network<float>& g, const network<float>& a) {
        std::vector<tensor<float>> p = g.params;
        p.insert(p.end(), a.params.begin(), a.params.end());
        return p;
    };
    st.opt_gen_s.attach(group(st.g_st, st.a_s));
    st.opt_gen_t.attach(group(st.g_ts, st.a_t));
    st.opt_d_s.attach(st.d_s.params);
    st.opt_d_t.attach(st.d_t.params);
    return st;
}

// Epoch-boundary transitions: attention freeze and the discriminator
// instance-norm removal (conv weights are shared, hence preserved bitwise).
inline void apply_stage_transitions(train_state& st) {
    if (st.freeze_active() && !st.attention_frozen) {
        st.a_s.set_requires_grad(false);
        st.a_t.set_requires_grad(false);
        st.attention_frozen = true;
    }
    if (st.masked_stage_active() && !st.disc_norm_removed) {
        st.d_s = without_instance_norm(st.d_s);
        st.d_t = without_instance_norm(st.d_t);
        st.disc_norm_removed = true;
    }
}

namespace detail {

inline void zero_all_grads(train_state& st) {
    for (auto* n : {&st.g_st, &st.g_ts, &st.a_s, &st.a_t, &st.d_s, &st.d_t})
        for (auto& p : n->params) p.zero_grad();
}

// One alternating update: discriminators first, then generators(+attention).
inline std::pair<loss_bundle, loss_bundle> train_step_impl(train_state& st,
                                                           const tensor<float>& s,
                                                           const tensor<float>& t, bool stage2) {
    const auto& ab = st.cfg.ablation;
    const float tau = static_cast<float>(st.cfg.tau);
    const float lam = static_cast<float>(st.cfg.lambda_cyc);

    // forward passes (cycle unless ablated away)
    translation_output<float> fwd_s, fwd_t;
    tensor<float> cyc_s_loss = tensor<float>::scalar(0.0f);
    tensor<float> cyc_t_loss = tensor<float>::scalar(0.0f);
    if (ab.no_cycle) {
        fwd_s = translate_once(st.g_st, st.a_s, s, ab.disable_attention_s);
        fwd_t = translate_once(st.g_ts, st.a_t, t, ab.disable_attention_t);
    } else {
        cycle_output<float> cs = cycle(s, st.g_st, st.a_s, st.g_ts, st.a_t, ab,
                                       ab.disable_attention_s, ab.disable_attention_t);
        cycle_output<float> ct = cycle(t, st.g_ts, st.a_t, st.g_st, st.a_s, ab,
                                       ab.disable_attention_t, ab.disable_attention_s);
        cyc_s_loss = cycle_loss(s, cs.reconstruction);
        cyc_t_loss = cycle_loss(t, ct.reconstruction);
        fwd_s = cs.forward;
        fwd_t = ct.forward;
    }

    // --- discriminator ascent -------------------------------------------
    auto disc_inputs = [&](const tensor<float>& real, const translation_output<float>& fake_out,
                           const tensor<float>& real_attention) {
        if (!stage2)
            return std::pair{real, fake_out.composed.detach()};
        return std::pair{mask_for_discriminator(real, real_attention, tau),
                         mask_for_discriminator(fake_out.raw.detach(), fake_out.attention, tau)};
    };
    auto [dt_real, dt_fake] = disc_inputs(t, fwd_s, fwd_t.attention);
    auto [ds_real, ds_fake] = disc_inputs(s, fwd_t, fwd_s.attention);

    auto [adv_d_t, g_unused_t] = adversarial_losses(st.d_t.forward(dt_real), st.d_t.forward(dt_fake));
    auto [adv_d_s, g_unused_s] = adversarial_losses(st.d_s.forward(ds_real), st.d_s.forward(ds_fake));
    const double adv_d_t_v = adv_d_t.item();
    const double adv_d_s_v = adv_d_s.item();
    backward(adv_d_t);
    backward(adv_d_s);
    st.opt_d_t.step();
    st.opt_d_s.step();
    zero_all_grads(st);

    // --- generator + attention descent on the total objective ------------
    tensor<float> dg_s = stage2
                             ? st.d_t.forward(mask_for_discriminator(fwd_s.raw, fwd_s.attention, tau))
                             : st.d_t.forward(fwd_s.composed);
    tensor<float> dg_t = stage2
                             ? st.d_s.forward(mask_for_discriminator(fwd_t.raw, fwd_t.attention, tau))
                             : st.d_s.forward(fwd_t.composed);
    tensor<float> adv_g_s = sq_mean(affine(dg_s, 1.0f, -1.0f));
    tensor<float> adv_g_t = sq_mean(affine(dg_t, 1.0f, -1.0f));
    tensor<float> total = total_generator_loss(adv_g_s, adv_g_t, cyc_s_loss, cyc_t_loss, lam);

    loss_bundle bs{adv_g_s.item(), adv_d_t_v, cyc_s_loss.item(), 0.0};
    loss_bundle bt{adv_g_t.item(), adv_d_s_v, cyc_t_loss.item(), 0.0};
    bs.total_g = bs.adv_g + lam * bs.cyc;
    bt.total_g = bt.adv_g + lam * bt.cyc;

    if (!std::isfinite(total.item()))
        throw std::runtime_error("non-finite training loss at epoch " + std::to_string(st.epoch) +
                                 ": adv_g=(" + std::to_string(bs.adv_g) + "," +
                                 std::to_string(bt.adv_g) + ") cyc=(" + std::to_string(bs.cyc) +
                                 "," + std::to_string(bt.cyc) + ")");
    backward(total);
    st.opt_gen_s.step();
    st.opt_gen_t.step();
    zero_all_grads(st);
    return {bs, bt};
}

}  // namespace detail

inline std::pair<loss_bundle, loss_bundle> train_step_stage1(train_state& st,
                                                             const tensor<float>& s,
                                                             const tensor<float>& t) {
    if (st.masked_stage_active())
        throw std::logic_error("train_step_stage1 called in the masked stage");
    return detail::train_step_impl(st, s, t, false);
}

inline std::pair<loss_bundle, loss_bundle> train_step_stage2(train_state& st,
                                                             const tensor<float>& s,
                                                             const tensor<float>& t) {
    if (!st.masked_stage_active())
        throw std::logic_error("train_step_stage2 requires epoch >= switch_epoch and an enabled "
                               "attention discriminator");
    return detail::train_step_impl(st, s, t, true);
}

inline std::pair<loss_bundle, loss_bundle> train_step(train_state& st, const tensor<float>& s,
                                                      const tensor<float>& t) {
    return detail::train_step_impl(st, s, t, st.masked_stage_active());
}

// --- checkpointing ----------------------------------------------------------

inline checkpoint make_train_checkpoint(const train_state& st) {
    checkpoint ck;
    ck.meta["format"] = "attnx-train-state";
    ck.meta["config"] = st.cfg;
    ck.meta["epoch"] = st.epoch;
    ck.meta["rng"] = st.master.serialize();
    ck.meta["attention_frozen"] = st.attention_frozen;
    ck.meta["disc_norm_removed"] = st.disc_norm_removed;
    ck.meta["specs"] = {{"g_st", st.g_st.spec}, {"g_ts", st.g_ts.spec}, {"a_s", st.a_s.spec},
                        {"a_t", st.a_t.spec},   {"d_s", st.d_s.spec},   {"d_t", st.d_t.spec}};
    ck.meta["instance_norm"] = {{"d_s", st.d_s.instance_norm_enabled},
                                {"d_t", st.d_t.instance_norm_enabled}};
    ck.meta["adam_steps"] = {{"gen_s", st.opt_gen_s.step_count()},
                             {"gen_t", st.opt_gen_t.step_count()},
                             {"d_s", st.opt_d_s.step_count()},
                             {"d_t", st.opt_d_t.step_count()}};

    auto put_net = [&](const char* prefix, const network<float>& n) {
        for (std::size_t i = 0; i < n.params.size(); ++i)
            ck.arrays.push_back({std::string(prefix) + "." + n.param_names[i],
                                 n.params[i].shape(), n.params[i].data()});
    };
    put_net("g_st", st.g_st);
    put_net("g_ts", st.g_ts);
    put_net("a_s", st.a_s);
    put_net("a_t", st.a_t);
    put_net("d_s", st.d_s);
    put_net("d_t", st.d_t);

    auto put_opt = [&](const char* prefix, adam<float>& opt) {
        for (std::size_t i = 0; i < opt.moments1().size(); ++i) {
            const int n = static_cast<int>(opt.moments1()[i].size());
            ck.arrays.push_back({std::string(prefix) + ".m" + std::to_string(i), {n},
                                 opt.moments1()[i]});
            ck.arrays.push_back({std::string(prefix) + ".v" + std::to_string(i), {n},
                                 opt.moments2()[i]});
        }
    };
    auto& mut = const_cast<train_state&>(st);
    put_opt("opt.gen_s", mut.opt_gen_s);
    put_opt("opt.gen_t", mut.opt_gen_t);
    put_opt("opt.d_s", mut.opt_d_s);
    put_opt("opt.d_t", mut.opt_d_t);
    return ck;
}

inline void save_train_checkpoint(const train_state& st, const fs::path& path) {
    save_checkpoint(path, make_train_checkpoint(st));
}

inline train_state load_train_checkpoint(const fs::path& path) {
    const checkpoint ck = load_checkpoint(path);
    if (ck.meta.value("format", "") != "attnx-train-state")
        throw std::runtime_error("not a training checkpoint: " + path.string());
    train_state st;
    st.cfg = ck.meta.at("config").get<train_config>();
    st.epoch = ck.meta.at("epoch").get<int>();
    st.master = rng::deserialize(ck.meta.at("rng").get<std::string>());
    st.attention_frozen = ck.meta.at("attention_frozen").get<bool>();
    st.disc_norm_removed = ck.meta.at("disc_norm_removed").get<bool>();

    rng scratch(0);
    auto load_net = [&](const char* key, const char* prefix, bool norm_enabled) {
        auto spec = ck.meta.at("specs").at(key).get<network_spec>();
        network<float> n = build_network<float>(std::move(spec), scratch, norm_enabled);
        for (std::size_t i = 0; i < n.params.size(); ++i) {
            const named_array& a = ck.find(std::string(prefix) + "." + n.param_names[i]);
            if (a.shape != n.params[i].shape())
                throw std::runtime_error("checkpoint shape mismatch for " + a.name);
            n.params[i].data() = a.values;
        }
        return n;
    };
    st.g_st = load_net("g_st", "g_st", true);
    st.g_ts = load_net("g_ts", "g_ts", true);
    st.a_s = load_net("a_s", "a_s", true);
    st.a_t = load_net("a_t", "a_t", true);
    st.d_s = load_net("d_s", "d_s", ck.meta.at("instance_norm").at("d_s").get<bool>());
    st.d_t = load_net("d_t", "d_t", ck.meta.at("instance_norm").at("d_t").get<bool>());
    if (st.attention_frozen) {
        st.a_s.set_requires_grad(false);
        st.a_t.set_requires_grad(false);
    }

    const float lr = static_cast<float>(st.cfg.alpha);
    st.opt_gen_s = adam<float>(lr);
    st.opt_gen_t = adam<float>(lr);
    st.opt_d_s = adam<float>(lr);
    st.opt_d_t = adam<float>(lr);
    auto group = [](const network<float>& g, const network<float>& a) {
        std::vector<tensor<float>> p = g.params;
        p.insert(p.end(), a.params.begin(), a.params.end());
        return p;
    };
    st.opt_gen_s.attach(group(st.g_st, st.a_s));
    st.opt_gen_t.attach(group(st.g_ts, st.a_t));
    st.opt_d_s.attach(st.d_s.params);
    st.opt_d_t.attach(st.d_t.params);

    auto load_opt = [&](const char* prefix, const char* key, adam<float>& opt) {
        for (std::size_t i = 0; i < opt.moments1().size(); ++i) {
            opt.moments1()[i] = ck.find(std::string(prefix) + ".m" + std::to_string(i)).values;
            opt.moments2()[i] = ck.find(std::string(prefix) + ".v" + std::to_string(i)).values;
        }
        opt.set_step_count(ck.meta.at("adam_steps").at(key).get<long>());
    };
    load_opt("opt.gen_s", "gen_s", st.opt_gen_s);
    load_opt("opt.gen_t", "gen_t", st.opt_gen_t);
    load_opt("opt.d_s", "d_s", st.opt_d_s);
    load_opt("opt.d_t", "d_t", st.opt_d_t);
    return st;
}

// --- epoch loop --------------------------------------------------------------

namespace detail {

inline tensor<float> stack_batch(const dataset& ds, const std::vector<int>& order, int start,
                                 int bs) {
    const auto& first = ds.images[order[start]];
    if (bs == 1) return first.detach();
    tensor<float> out(shape_t{bs, first.dim(1), first.dim(2), first.dim(3)});
    const std::size_t chw = first.numel();
    for (int b = 0; b < bs; ++b)
        std::copy(ds.images[order[start + b]].data().begin(),
                  ds.images[order[start + b]].data().end(), out.data().begin() + b * chw);
    return out;
}

}  // namespace detail

// Runs epochs [state.epoch, cfg.epochs). Epoch length is min(|S|,|T|) sample
// pairs under independent per-domain shuffles.
inline void train(train_state& st, const dataset& ds_s, const dataset& ds_t) {
    st.cfg.validate();
    if (ds_s.size() == 0 || ds_t.size() == 0) throw std::invalid_argument("empty dataset");
    const int n = static_cast<int>(std::min(ds_s.size(), ds_t.size()));
    const int steps = std::max(1, n / st.cfg.batch_size);
    if (st.cfg.batch_size > n) throw std::invalid_argument("batch_size exceeds dataset size");

    const bool emit = !st.cfg.out_dir.empty();
    fs::path out_dir(st.cfg.out_dir);
    std::ofstream csv;
    if (emit) {
        fs::create_directories(out_dir);
        const fs::path csv_path = out_dir / "metrics.csv";
        const bool fresh = !fs::exists(csv_path);
        csv.open(csv_path, std::ios::app);
        if (fresh) csv << "epoch,stage,adv_d_s,adv_d_t,adv_g,cyc,wall_time\n";
    }

    for (int c = st.epoch; c < st.cfg.epochs; ++c) {
        st.epoch = c;
        apply_stage_transitions(st);
        const auto t0 = std::chrono::steady_clock::now();

        std::vector<int> order_s(ds_s.size()), order_t(ds_t.size());
        std::iota(order_s.begin(), order_s.end(), 0);
        std::iota(order_t.begin(), order_t.end(), 0);
        st.master.shuffle(order_s);
        st.master.shuffle(order_t);

        epoch_metrics em;
        em.epoch = c;
        em.stage = st.masked_stage_active() ? 2 : 1;
        for (int i = 0; i < steps; ++i) {
            tensor<float> s = detail::stack_batch(ds_s, order_s, i * st.cfg.batch_size,
                                                  st.cfg.batch_size);
            tensor<float> t = detail::stack_batch(ds_t, order_t, i * st.cfg.batch_size,
                                                  st.cfg.batch_size);
            auto [bs, bt] = train_step(st, s, t);
            em.adv_d_t += bs.adv_d;
            em.adv_d_s += bt.adv_d;
            em.adv_g += bs.adv_g + bt.adv_g;
            em.cyc += bs.cyc + bt.cyc;
        }
        em.adv_d_s /= steps;
        em.adv_d_t /= steps;
        em.adv_g /= steps;
        em.cyc /= steps;
        em.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        st.history.push_back(em);

        st.epoch = c + 1;
        if (emit) {
            csv << em.epoch << "," << em.stage << "," << em.adv_d_s << "," << em.adv_d_t << ","
                << em.adv_g << "," << em.cyc << "," << em.wall_time << "\n";
            csv.flush();
            const bool at_switch = st.epoch == st.cfg.switch_epoch;
            if (st.epoch % st.cfg.checkpoint_every == 0 || at_switch || st.epoch == st.cfg.epochs) {
                save_train_checkpoint(st, out_dir / ("checkpoint_epoch_" +
                                                     std::to_string(st.epoch) + ".ckpt"));
                save_train_checkpoint(st, out_dir / "checkpoint_latest.ckpt");
            }
        }
    }
}

// Test-time forward: no graph recording.
inline translation_output<float> translate_inference(const network<float>& net_g,
                                                     const network<float>& net_a,
                                                     const tensor<float>& image) {
    no_grad_guard ng;
    return translate_once(net_g, net_a, image);
}

}  // namespace attnx
