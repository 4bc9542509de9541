#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pjfnn/autograd.hpp"
#include "pjfnn/error.hpp"
#include "pjfnn/tensor.hpp"

using namespace pjfnn;

TEST_CASE("tensor construction checks the data length") {
    CHECK(Tensor(Shape{2, 3}).size() == 6);
    CHECK(Tensor::scalar(4.0f).item() == 4.0f);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(Tensor(Shape{2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor::vector({1, 2}).item(), ContractError);
}

TEST_CASE("matmul examples") {
    const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
    CHECK(matmul(Tensor::identity(2), m) == m);
    CHECK(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})) == Tensor::matrix({{11}}));

    testing_support::Rng rng(3);
    const Tensor any = testing_support::random_tensor(Shape{3, 4}, rng);
    CHECK(matmul(Tensor::zeros(Shape{2, 3}), any) == Tensor::zeros(Shape{2, 4}));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    try {
        matmul(Tensor::zeros(Shape{2, 3}), Tensor::zeros(Shape{2, 3}));
        FAIL("expected a DimensionError");
    } catch (const DimensionError& e) {
        const std::string what = e.what();
        CHECK(what.find("[2x3]") != std::string::npos);
    }
}

TEST_CASE("gradient of sum is ones") {
    Tape tape;
    testing_support::Rng rng(5);
    const Var p = tape.parameter("p", testing_support::random_tensor(Shape{3, 2, 4}, rng));
    const Gradients g = tape.backward(sum(p));
    CHECK(g.at("p") == Tensor::ones(Shape{3, 2, 4}));
}

TEST_CASE("gradient of a square at 3 is 6") {
    Tape tape;
    const Var p = tape.parameter("p", Tensor::scalar(3.0f));
    CHECK(tape.backward(sum(square(p))).at("p").item() == doctest::Approx(6.0));
    Tape tape2;
    const Var q = tape2.parameter("q", Tensor::scalar(3.0f));
    CHECK(tape2.backward(mul(q, q)).at("q").item() == doctest::Approx(6.0));
}

TEST_CASE("unused parameters receive exact zeros") {
    Tape tape;
    const Var a = tape.parameter("a", Tensor::vector({1, 2}));
    const Var b = tape.parameter("b", Tensor::vector({3, 4, 5}));
    const Gradients g = tape.backward(sum(square(a)));
    CHECK(g.at("b") == Tensor::zeros(Shape{3}));
    CHECK(g.at("a") == Tensor::vector({2, 4}));
}

TEST_CASE("backward visits every contributing node once") {
    Tape tape;
    const Var a = tape.parameter("a", Tensor::vector({1, 2}));
    const Var b = add(a, a);           // a used twice
    const Var c = mul(b, a);
    const Var loss = sum(c);
    const Gradients g = tape.backward(loss);
    // d/da sum(2a * a) = 4a
    CHECK(g.at("a") == Tensor::vector({4, 8}));
    CHECK(tape.last_visit_count() == 3);
}

TEST_CASE("non-scalar loss is a contract error") {
    Tape tape;
    const Var a = tape.parameter("a", Tensor::vector({1, 2}));
    CHECK_THROWS_AS(tape.backward(scale(a, 2.0f)), ContractError);
}

TEST_CASE("max ties resolve to the lowest index") {
    Tape tape;
    const Var a = tape.parameter("a", Tensor::vector({1, 5, 5, 2}));
    const Var m = max(a);
    CHECK(m.value().item() == 5.0f);
    CHECK(tape.backward(m).at("a") == Tensor::vector({0, 1, 0, 0}));
}

TEST_CASE("matmul gradients against finite differences") {
    testing_support::Rng rng(11);
    const Tensor a0 = testing_support::random_tensor(Shape{3, 4}, rng);
    const Tensor b0 = testing_support::random_tensor(Shape{4, 2}, rng);
    auto loss_of = [](const Tensor& a, const Tensor& b) {
        double s = 0.0;
        const Tensor c = matmul(a, b);
        for (std::size_t i = 0; i < c.size(); ++i) s += static_cast<double>(c[i]) * c[i];
        return s;
    };
    Tape tape;
    const Var a = tape.parameter("a", a0);
    const Var b = tape.parameter("b", b0);
    const Gradients g = tape.backward(sum(square(matmul(a, b))));
    const float h = 1e-2f;
    for (std::size_t i = 0; i < a0.size(); ++i) {
        Tensor up = a0, down = a0;
        up[i] += h;
        down[i] -= h;
        const double numeric = (loss_of(up, b0) - loss_of(down, b0)) / (static_cast<double>(up[i]) - down[i]);
        CHECK(g.at("a")[i] == doctest::Approx(numeric).epsilon(1e-3));
    }
}

TEST_CASE("reductions are deterministic") {
    testing_support::Rng rng(2);
    const Tensor t = testing_support::random_tensor(Shape{1000}, rng);
    Tape t1, t2;
    CHECK(sum(t1.constant(t)).value() == sum(t2.constant(t)).value());
    CHECK(mean(t1.constant(t)).value() == mean(t2.constant(t)).value());
}
