#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "attnx/ops.hpp"

using namespace attnx;

TEST_CASE("tensor invariants") {
    tensor<double> t(shape_t{2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(tensor<double>::from_data({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(tensor<double>(shape_t{0, 3}), std::invalid_argument);

    tensor<double> bad = tensor<double>::from_data({2}, {1.0, std::nan("")});
    CHECK_FALSE(bad.finite());
    CHECK_THROWS(bad.check_finite("test"));
}

TEST_CASE("backward: linear form gradient equals the constant factor") {
    // loss = sum(w * x) with x constant -> dloss/dw = x. The sum is realized
    // as n * mean(|.|) on a positive-valued product.
    auto w = tensor<double>::from_data({3}, {1.0, 2.0, 0.5}).set_requires_grad(true);
    auto x = tensor<double>::from_data({3}, {3.0, 5.0, -7.0});
    tensor<double> loss = affine(l1_mean(mul(w, x)), 3.0, 0.0);
    backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(3.0));
    CHECK(w.grad()[1] == doctest::Approx(5.0));
    CHECK(w.grad()[2] == doctest::Approx(7.0));  // sign(w*x) * x with a negative product
}

TEST_CASE("backward: two paths accumulate") {
    auto w = tensor<double>::from_data({1}, {2.0}).set_requires_grad(true);
    tensor<double> path1 = affine(w, 3.0, 0.0);  // 3w
    tensor<double> path2 = affine(w, 4.0, 0.0);  // 4w
    tensor<double> loss = add(path1, path2);     // 7w
    backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("backward errors") {
    auto w = tensor<double>::from_data({2}, {1.0, 2.0}).set_requires_grad(true);
    tensor<double> y = affine(w, 2.0, 0.0);
    CHECK_THROWS_AS(backward(y), std::logic_error);  // non-scalar
    tensor<double> loss = sq_mean(y);
    backward(loss);
    CHECK_THROWS_AS(backward(loss), std::logic_error);  // consumed graph
}

TEST_CASE("sq_mean gradient at w=[2] is 4 (2x/n with n=1)") {
    auto w = tensor<double>::from_data({1}, {2.0}).set_requires_grad(true);
    tensor<double> loss = sq_mean(w);
    backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("no_grad_guard suppresses recording") {
    auto w = tensor<double>::from_data({2}, {1.0, 2.0}).set_requires_grad(true);
    no_grad_guard ng;
    tensor<double> y = sq_mean(w);
    CHECK_FALSE(y.node()->needs_grad());
}

TEST_CASE("rng determinism and serialization round trip") {
    rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    (void)a.normal();  // leave a spare cached
    const std::string s = a.serialize();
    rng c = rng::deserialize(s);
    for (int i = 0; i < 50; ++i) CHECK(a.normal() == c.normal());
}

TEST_CASE("detach cuts the graph") {
    auto w = tensor<double>::from_data({2}, {1.0, -1.0}).set_requires_grad(true);
    tensor<double> y = affine(w, 2.0, 1.0);
    tensor<double> d = y.detach();
    CHECK_FALSE(d.node()->needs_grad());
    CHECK(d.data() == y.data());
}
