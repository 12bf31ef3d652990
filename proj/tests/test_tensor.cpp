#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "micacl/grad_check.hpp"
#include "micacl/tensor.hpp"
#include "reference/oracles.hpp"

using namespace micacl;

TEST_CASE("matmul basics") {
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    CHECK(matmul(a, eye).values() == std::vector<double>{1, 2, 3, 4});

    Tensor b = Tensor::from({2, 1}, {5, 6});
    Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    const auto expect = oracle::matmul({1, 2, 3, 4}, {5, 6}, 2, 2, 1);
    CHECK(c.values() == expect);
    CHECK(c.values()[0] == 17.0);
    CHECK(c.values()[1] == 39.0);

    Tensor zero = Tensor::zeros({3, 2});
    Tensor any = Tensor::from({2, 4}, {1, -2, 3, 4, 5, 6, -7, 8});
    const auto zeros_out = matmul(zero, any).values();
    for (double v : zeros_out) CHECK(v == 0.0);

    CHECK_THROWS_WITH_AS(matmul(a, Tensor::zeros({3, 2})),
                         doctest::Contains("[2x2]"), ShapeError);
    CHECK_THROWS_WITH_AS(matmul(a, Tensor::zeros({3, 2})),
                         doctest::Contains("[3x2]"), ShapeError);
}

TEST_CASE("softmax values and stability") {
    Tensor x = Tensor::from({3}, {0, 0, 0});
    const auto uniform_out = softmax(x, 0).values();
    for (double v : uniform_out) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Tensor y = softmax(Tensor::from({2}, {1, 0}), 0);
    CHECK(y.values()[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(y.values()[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));

    Tensor huge = softmax(Tensor::from({2}, {1000, 0}), 0);
    CHECK(std::isfinite(huge.values()[0]));
    CHECK(huge.values()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(huge.values()[1] == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(softmax(x, 1), ShapeError);
    CHECK_THROWS_AS(softmax(x, -1), ShapeError);
}

TEST_CASE("softmax rows sum to one for magnitude-1e3 inputs") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = Tensor::uniform({4, 6}, -1e3, 1e3, rng);
        Tensor s = softmax(x, 1);
        for (int r = 0; r < 4; ++r) {
            double sum = 0.0;
            for (int c = 0; c < 6; ++c) {
                const double v = s.values()[static_cast<std::size_t>(r * 6 + c)];
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("activations") {
    Tensor x = Tensor::from({4}, {-3, 0, 2, 5});
    const auto r = relu(x).values();
    CHECK(r == std::vector<double>{0, 0, 2, 5});
    CHECK(sigmoid(Tensor::scalar(0)).item() == 0.5);
    CHECK(tanh_act(Tensor::scalar(0)).item() == 0.0);
}

TEST_CASE("reduce") {
    CHECK(reduce(Tensor::from({3}, {2, 4, 6}), 0, Reduce::Mean).item() == 4.0);
    const auto s = reduce(Tensor::from({2, 2}, {1, 2, 3, 4}), 0, Reduce::Sum).values();
    CHECK(s == std::vector<double>{4, 6});

    // max ties route the gradient to the first maximal element
    Tensor x = Tensor::from({3}, {1, 5, 5}, true);
    Tensor m = reduce(x, 0, Reduce::Max);
    CHECK(m.item() == 5.0);
    backward(m);
    CHECK(x.grad() == std::vector<double>{0, 1, 0});

    CHECK_THROWS_AS(reduce(x, 1, Reduce::Sum), ShapeError);
}

TEST_CASE("adaptive_avg_pool") {
    const auto even = adaptive_avg_pool(Tensor::from({4}, {1, 2, 3, 4}), 2).values();
    CHECK(even == std::vector<double>{1.5, 3.5});

    Tensor x = Tensor::from({5}, {3, 1, 4, 1, 5});
    CHECK(adaptive_avg_pool(x, 5).values() == x.values());

    const auto uneven = adaptive_avg_pool(Tensor::from({3}, {1, 2, 3}), 2).values();
    const auto expect = oracle::adaptive_pool({1, 2, 3}, 2);
    CHECK(uneven == expect);
    CHECK(uneven == std::vector<double>{1.0, 2.5});

    CHECK_THROWS_AS(adaptive_avg_pool(x, 0), ShapeError);
    CHECK_THROWS_AS(adaptive_avg_pool(x, 6), ShapeError);
}

TEST_CASE("backward populates gradients") {
    // loss = sum(w .* x) -> grad(x) = w
    Tensor w = Tensor::from({3}, {2, -1, 0.5});
    Tensor x = Tensor::from({3}, {1, 1, 1}, true);
    backward(reduce_all(mul(w, x), Reduce::Sum));
    CHECK(x.grad() == std::vector<double>{2, -1, 0.5});

    // loss = (x - 3)^2 at x = 5 -> grad = 4
    Tensor x2 = Tensor::scalar(5.0, true);
    Tensor diff = add_scalar(x2, -3.0);
    backward(mul(diff, diff));
    CHECK(x2.grad()[0] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("backward error paths") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    CHECK_THROWS_AS(backward(mul(x, x)), NumericError);  // non-scalar
    CHECK_THROWS_AS(backward(Tensor::scalar(1.0, true)), NumericError);  // empty tape

    Tensor loss = reduce_all(mul(x, x), Reduce::Sum);
    backward(loss);
    CHECK_THROWS_AS(backward(loss), NumericError);  // consumed tape
}

TEST_CASE("shared subexpressions accumulate once per path") {
    // z = (x + x) * (x + x) = 4 x^2 -> dz/dx = 8x
    Tensor x = Tensor::scalar(3.0, true);
    Tensor s = add(x, x);
    backward(mul(s, s));
    CHECK(x.grad()[0] == doctest::Approx(24.0).epsilon(1e-12));
}

TEST_CASE("tape replay is deterministic") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor a = Tensor::uniform({4, 4}, -2, 2, rng, true);
        Tensor b = Tensor::uniform({4, 4}, -2, 2, rng, true);
        Tensor loss = reduce_all(sigmoid(matmul(a, softmax(b, 1))), Reduce::Sum);
        backward(loss);
        return std::make_tuple(loss.item(), a.grad(), b.grad());
    };
    const auto first = run(123);
    const auto second = run(123);
    CHECK(std::get<0>(first) == std::get<0>(second));
    CHECK(std::get<1>(first) == std::get<1>(second));
    CHECK(std::get<2>(first) == std::get<2>(second));
}

TEST_CASE("grad_check on closed forms") {
    // f(x) = x^2 at x = 3
    Tensor x = Tensor::scalar(3.0, true);
    auto f = [&]() { return mul(x, x); };
    CHECK(grad_check(f, {x}, 1e-5) < 1e-8);

    // dead ReLU region: analytic 0 equals numeric 0
    Tensor neg = Tensor::scalar(-1.0, true);
    auto g = [&]() { return reduce_all(relu(neg), Reduce::Sum); };
    CHECK(grad_check(g, {neg}, 1e-5) == 0.0);

    CHECK_THROWS_AS(grad_check(f, {x}, 0.0), NumericError);
    CHECK_THROWS_AS(grad_check(f, {x}, 0.5), NumericError);
}

TEST_CASE("per-primitive gradients match finite differences") {
    const double eps = 1e-5;
    const double tol = 1e-6;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        auto fresh = [&](Shape shape) { return Tensor::uniform(shape, -2, 2, rng, true); };

        {
            Tensor a = fresh({3, 4}), b = fresh({3, 4});
            CHECK(grad_check([&] { return reduce_all(add(a, b), Reduce::Sum); }, {a, b}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(sub(a, b), Reduce::Sum); }, {a, b}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(mul(a, b), Reduce::Mean); }, {a, b}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(mul_scalar(add_scalar(a, 0.7), -1.3), Reduce::Sum); },
                             {a}, eps) < tol);
        }
        {
            Tensor a = fresh({2, 3}), b = fresh({3, 4});
            CHECK(grad_check([&] { return reduce_all(matmul(a, b), Reduce::Sum); }, {a, b}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(transpose(a), Reduce::Sum); }, {a}, eps) < tol);
        }
        {
            Tensor a = fresh({2, 5});
            Tensor v = fresh({5});
            Tensor s = fresh({});
            CHECK(grad_check([&] { return reduce_all(add_rowvec(a, v), Reduce::Sum); }, {a, v}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(scale(a, s), Reduce::Sum); }, {a, s}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(softmax(a, 1), Reduce::Max); }, {a}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(sigmoid(a), Reduce::Sum); }, {a}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(tanh_act(a), Reduce::Sum); }, {a}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(adaptive_avg_pool(a, 3), Reduce::Sum); }, {a}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(reshape(a, {5, 2}), Reduce::Mean); }, {a}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(select(a, 0, 1), Reduce::Sum); }, {a}, eps) < tol);
        }
        {
            // relu inputs resampled away from the kink by a 1e-3 margin
            std::vector<double> vals(12);
            for (auto& v : vals) {
                do {
                    v = rng.uniform_in(-2, 2);
                } while (std::abs(v) < 1e-3);
            }
            Tensor a = Tensor::from({3, 4}, vals, true);
            CHECK(grad_check([&] { return reduce_all(relu(a), Reduce::Sum); }, {a}, eps) < tol);
        }
        {
            // max-reduce with a value gap so the probe cannot cross the argmax
            std::vector<double> vals{0.9, -1.7, 0.1, 1.6, -0.4, -1.1};
            std::vector<int> order{0, 1, 2, 3, 4, 5};
            rng.shuffle(order);
            std::vector<double> shuffled(6);
            for (int i = 0; i < 6; ++i) shuffled[static_cast<std::size_t>(i)] = vals[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
            Tensor a = Tensor::from({2, 3}, shuffled, true);
            CHECK(grad_check([&] { return reduce_all(reduce(a, 1, Reduce::Max), Reduce::Sum); }, {a}, eps) < tol);
        }
        {
            Tensor a = fresh({2, 3}), b = fresh({2, 3}), c = fresh({2, 2});
            CHECK(grad_check([&] { return reduce_all(stack({a, b}, 1), Reduce::Sum); }, {a, b}, eps) < tol);
            CHECK(grad_check([&] { return reduce_all(concat_last({a, c}), Reduce::Sum); }, {a, c}, eps) < tol);
        }
    }
}

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor::from({0}, {}), ShapeError);
    CHECK_THROWS_AS(Tensor::from({2}, {1, 2}).item(), ShapeError);

    Tensor leaf = Tensor::from({2}, {1, 2}, true);
    CHECK_THROWS_AS(leaf.grad(), NumericError);
    Tensor rec = add_scalar(leaf, 1.0);
    CHECK_THROWS_AS(rec.mutable_values(), NumericError);

    Tensor d = rec.detach();
    CHECK_FALSE(d.requires_grad());
    CHECK(d.values() == rec.values());
}
