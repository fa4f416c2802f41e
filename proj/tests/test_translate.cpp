#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "attnx/translate.hpp"

using namespace attnx;

namespace {

tensor<double> random_image(shape_t shape, rng& r) {
    tensor<double> t(std::move(shape));
    for (auto& v : t.data()) v = r.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("compose blend algebra") {
    rng r(1);
    auto input = random_image({1, 3, 4, 4}, r);
    auto raw = random_image({1, 3, 4, 4}, r);

    // attention == 1 -> composed == raw
    auto ones = tensor<double>(shape_t{1, 1, 4, 4}, 1.0);
    auto out1 = compose(input, raw, ones);
    for (std::size_t i = 0; i < raw.numel(); ++i)
        CHECK(out1.composed.data()[i] == doctest::Approx(raw.data()[i]));

    // attention == 0 -> composed == input bitwise
    auto zeros = tensor<double>(shape_t{1, 1, 4, 4}, 0.0);
    auto out0 = compose(input, raw, zeros);
    CHECK(out0.composed.data() == input.data());

    // scalar check: 0.5 * 0.8 + 0.5 * 0.2 = 0.5
    auto a1 = tensor<double>::from_data({1, 1, 1, 1}, {0.5});
    auto i3 = tensor<double>(shape_t{1, 3, 1, 1}, 0.2);
    auto r3 = tensor<double>(shape_t{1, 3, 1, 1}, 0.8);
    auto out5 = compose(i3, r3, a1);
    for (double v : out5.composed.data()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("compose rejects malformed attention maps") {
    rng r(2);
    auto input = random_image({1, 3, 4, 4}, r);
    auto raw = random_image({1, 3, 4, 4}, r);
    auto bad_c = tensor<double>(shape_t{1, 3, 4, 4}, 0.5);
    CHECK_THROWS_AS(compose(input, raw, bad_c), std::invalid_argument);
    auto bad_hw = tensor<double>(shape_t{1, 1, 2, 2}, 0.5);
    CHECK_THROWS_AS(compose(input, raw, bad_hw), std::invalid_argument);
    auto raw_bad = random_image({1, 3, 2, 2}, r);
    auto a = tensor<double>(shape_t{1, 1, 4, 4}, 0.5);
    CHECK_THROWS_AS(compose(input, raw_bad, a), std::invalid_argument);
}

TEST_CASE("disabled attention reduces translate_once to the bare generator") {
    rng r(3);
    auto gen = build_generator<double>(0.25, r, 1);
    auto att = build_attention<double>(0.25, r);
    auto x = random_image({1, 3, 16, 16}, r);
    no_grad_guard ng;
    auto out = translate_once(gen, att, x, /*attention_disabled=*/true);
    for (double v : out.attention.data()) CHECK(v == 1.0);
    CHECK(out.composed.data() == out.raw.data());
}

TEST_CASE("cycle reconstruction and cycle_loss") {
    rng r(4);
    auto g_st = build_generator<double>(0.25, r, 1);
    auto a_s = build_attention<double>(0.25, r);
    auto g_ts = build_generator<double>(0.25, r, 1);
    auto a_t = build_attention<double>(0.25, r);
    auto s = random_image({1, 3, 16, 16}, r);

    no_grad_guard ng;
    auto cy = cycle(s, g_st, a_s, g_ts, a_t);
    CHECK(cy.reconstruction.shape() == s.shape());
    CHECK(cy.backward.input.data() == cy.forward.composed.data());

    // forced identity cycle: zero attention both ways -> s'' == s, loss == 0
    auto cy0 = cycle(s, g_st, a_s, g_ts, a_t, {}, true, true);
    // disabled attention is all-ones, so instead force via compose directly
    auto zeros = tensor<double>(shape_t{1, 1, 16, 16}, 0.0);
    auto fwd = compose(s, g_st.forward(s), zeros);
    auto bwd = compose(fwd.composed, g_ts.forward(fwd.composed), zeros);
    CHECK(bwd.composed.data() == s.data());
    CHECK(cycle_loss(s, bwd.composed).item() == 0.0);
    (void)cy0;

    CHECK_THROWS_AS(cycle_loss(s, zeros), std::invalid_argument);
}

TEST_CASE("cycle_loss is a mean of absolute differences") {
    auto a = tensor<double>::from_data({1, 1, 1, 3}, {0.0, 1.0, -1.0});
    auto b = tensor<double>::from_data({1, 1, 1, 3}, {1.0, 1.0, 1.0});
    CHECK(cycle_loss(a, b).item() == doctest::Approx(1.0));  // (1+0+2)/3
}

TEST_CASE("reused cycle attention is bitwise identical to the forward map") {
    rng r(5);
    auto g_st = build_generator<double>(0.25, r, 1);
    auto a_s = build_attention<double>(0.25, r);
    auto g_ts = build_generator<double>(0.25, r, 1);
    auto a_t = build_attention<double>(0.25, r);
    auto s = random_image({1, 3, 16, 16}, r);

    ablation_flags ab;
    ab.reuse_cycle_attention = true;
    no_grad_guard ng;
    auto cy = cycle(s, g_st, a_s, g_ts, a_t, ab);
    CHECK(cy.backward.attention.data() == cy.forward.attention.data());

    auto plain = cycle(s, g_st, a_s, g_ts, a_t);
    CHECK(plain.backward.attention.data() != plain.forward.attention.data());
}

TEST_CASE("adversarial losses match hand-evaluated LSGAN values") {
    // D(real) = 1, D(fake) = 0: discriminator perfect -> adv_d = 0, adv_g = 1
    auto real1 = tensor<double>(shape_t{1, 1, 2, 2}, 1.0);
    auto fake0 = tensor<double>(shape_t{1, 1, 2, 2}, 0.0);
    auto [d0, g0] = adversarial_losses(real1, fake0);
    CHECK(d0.item() == doctest::Approx(0.0));
    CHECK(g0.item() == doctest::Approx(1.0));

    // D(real) = 0, D(fake) = 1: fully fooled -> adv_d = 1, adv_g = 0
    auto [d1, g1] = adversarial_losses(fake0, real1);
    CHECK(d1.item() == doctest::Approx(1.0));
    CHECK(g1.item() == doctest::Approx(0.0));

    // D == 0.5 everywhere -> adv_d = 1/8 + 1/8 = 1/4, adv_g = 1/4
    auto half = tensor<double>(shape_t{1, 1, 2, 2}, 0.5);
    auto [dh, gh] = adversarial_losses(half, half);
    CHECK(dh.item() == doctest::Approx(0.25));
    CHECK(gh.item() == doctest::Approx(0.25));

    // masked variant is the same functional
    auto [dm, gm] = masked_adversarial_losses(half, half);
    CHECK(dm.item() == doctest::Approx(dh.item()));
    CHECK(gm.item() == doctest::Approx(gh.item()));
}

TEST_CASE("threshold_mask is strict at tau and idempotent") {
    auto a = tensor<double>::from_data({1, 1, 1, 5}, {0.0, 0.1, 0.1000001, 0.5, 1.0});
    auto m = threshold_mask(a, 0.1);
    CHECK(m.data() == std::vector<double>{0, 0, 1, 1, 1});
    CHECK_FALSE(m.requires_grad());

    auto m2 = threshold_mask(m, 0.1);
    CHECK(m2.data() == m.data());  // binary input -> fixed point

    CHECK_THROWS_AS(threshold_mask(a, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(threshold_mask(a, 1.0), std::invalid_argument);
}

TEST_CASE("mask_for_discriminator zeroes the background and keeps gradients off the mask") {
    rng r(6);
    auto img = random_image({1, 3, 2, 2}, r);
    img.set_requires_grad(true);
    auto att = tensor<double>::from_data({1, 1, 2, 2}, {0.0, 0.05, 0.2, 0.9});
    auto masked = mask_for_discriminator(img, att, 0.1);

    for (int c = 0; c < 3; ++c) {
        CHECK(masked.at(0, c, 0, 0) == 0.0);
        CHECK(masked.at(0, c, 0, 1) == 0.0);
        CHECK(masked.at(0, c, 1, 0) == img.at(0, c, 1, 0));
        CHECK(masked.at(0, c, 1, 1) == img.at(0, c, 1, 1));
    }

    auto loss = l1_mean(masked);
    backward(loss);
    // gradient lands only where the mask is 1
    for (int c = 0; c < 3; ++c) {
        CHECK(img.grad()[c * 4 + 0] == 0.0);
        CHECK(img.grad()[c * 4 + 1] == 0.0);
        CHECK(img.grad()[c * 4 + 2] != 0.0);
        CHECK(img.grad()[c * 4 + 3] != 0.0);
    }
}

TEST_CASE("total generator loss weights the cycle terms") {
    auto one = tensor<double>::from_data({1}, {1.0});
    auto half = tensor<double>::from_data({1}, {0.5});
    auto total = total_generator_loss(one, one, half, half, 10.0);
    CHECK(total.item() == doctest::Approx(1.0 + 1.0 + 10.0 * 1.0));

    auto zero = tensor<double>::from_data({1}, {0.0});
    CHECK(total_generator_loss(one, zero, zero, zero, 10.0).item() == doctest::Approx(1.0));
    CHECK_THROWS_AS(total_generator_loss(one, one, half, half, -1.0), std::invalid_argument);
}

TEST_CASE("all-ones attention makes the pipeline collapse to plain cycle translation") {
    rng r(7);
    auto g_st = build_generator<double>(0.25, r, 1);
    auto a_s = build_attention<double>(0.25, r);
    auto g_ts = build_generator<double>(0.25, r, 1);
    auto a_t = build_attention<double>(0.25, r);
    auto s = random_image({1, 3, 16, 16}, r);

    no_grad_guard ng;
    auto cy = cycle(s, g_st, a_s, g_ts, a_t, {}, true, true);
    // both maps disabled: s' = F(s), s'' = G(F(s))
    auto sp = g_st.forward(s);
    auto s2 = g_ts.forward(sp);
    CHECK(cy.forward.composed.data() == sp.data());
    CHECK(cy.reconstruction.data() == s2.data());
}

TEST_CASE("gradients flow through the full composition") {
    rng r(8);
    auto g = build_generator<double>(0.25, r, 1);
    auto a = build_attention<double>(0.25, r);
    auto s = random_image({1, 3, 16, 16}, r);

    auto out = translate_once(g, a, s);
    auto loss = sq_mean(out.composed);
    backward(loss);
    bool gen_has = false, att_has = false;
    for (const auto& p : g.params) gen_has |= p.has_grad();
    for (const auto& p : a.params) att_has |= p.has_grad();
    CHECK(gen_has);
    CHECK(att_has);
}
