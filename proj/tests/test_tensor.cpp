#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "icicle/errors.hpp"
#include "icicle/rng.hpp"
#include "icicle/tensor.hpp"
#include "oracles.hpp"

using namespace icicle;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) v = rng.uniform(-scale, scale);
    return Tensor::from_data(std::move(shape), std::move(d));
}

}  // namespace

TEST_CASE("matmul identity and zero cases") {
    Tensor i2 = Tensor::identity(2);
    Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
    Tensor r = matmul(i2, m);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(r.at(i, j) == m.at(i, j));

    Tensor z = Tensor::zeros({2, 2});
    Tensor rz = matmul(i2, z);
    for (double v : rz.data()) CHECK(v == 0.0);
}

TEST_CASE("matmul hand-evaluated dot product") {
    Tensor a = Tensor::matrix({{1, 2}});
    Tensor b = Tensor::matrix({{3}, {4}});
    CHECK(matmul(a, b).item() == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("matmul matches brute-force oracle on random shapes") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng.index(6), k = 1 + rng.index(6), n = 1 + rng.index(6);
        oracle::Mat a(m, std::vector<double>(k)), b(k, std::vector<double>(n));
        std::vector<double> af, bf;
        for (auto& row : a)
            for (auto& v : row) af.push_back(v = rng.uniform(-2, 2));
        for (auto& row : b)
            for (auto& v : row) bf.push_back(v = rng.uniform(-2, 2));
        Tensor r = matmul(Tensor::from_data({m, k}, af), Tensor::from_data({k, n}, bf));
        oracle::Mat expect = oracle::matmul(a, b);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                CHECK(r.at(i, j) == doctest::Approx(expect[i][j]).epsilon(1e-12));
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 3});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), DimensionError);
}

TEST_CASE("conv2d identity kernel, zero kernel, and hand-evaluated window") {
    Tensor ones_in = Tensor::ones({1, 1, 2, 2});
    Tensor unit_k = Tensor::ones({1, 1, 1, 1});
    Tensor out = conv2d(ones_in, unit_k, 1);
    CHECK(out.shape() == Shape{1, 1, 2, 2});
    for (double v : out.data()) CHECK(v == 1.0);

    Tensor zk = Tensor::zeros({1, 1, 1, 1});
    Tensor zout = conv2d(ones_in, zk, 1);
    for (double v : zout.data()) CHECK(v == 0.0);

    Tensor in = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor k = Tensor::from_data({1, 1, 2, 2}, {1, 1, 1, 1});
    CHECK(conv2d(in, k, 1).item() == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("conv2d matches sliding-window oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t h = 3 + rng.index(4), w = 3 + rng.index(4);
        const std::size_t kh = 1 + rng.index(3), kw = 1 + rng.index(3);
        const std::size_t stride = 1 + rng.index(2);
        oracle::Mat in(h, std::vector<double>(w)), ker(kh, std::vector<double>(kw));
        std::vector<double> inf, kf;
        for (auto& row : in)
            for (auto& v : row) inf.push_back(v = rng.uniform(-1, 1));
        for (auto& row : ker)
            for (auto& v : row) kf.push_back(v = rng.uniform(-1, 1));
        Tensor out = conv2d(Tensor::from_data({1, 1, h, w}, inf),
                            Tensor::from_data({1, 1, kh, kw}, kf), stride);
        oracle::Mat expect = oracle::conv2d_single(in, ker, stride);
        CHECK(out.shape()[2] == expect.size());
        CHECK(out.shape()[3] == expect[0].size());
        for (std::size_t i = 0; i < expect.size(); ++i)
            for (std::size_t j = 0; j < expect[0].size(); ++j)
                CHECK(out.data()[i * expect[0].size() + j] ==
                      doctest::Approx(expect[i][j]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d rejects oversized kernel") {
    CHECK_THROWS_AS(conv2d(Tensor::ones({1, 1, 2, 2}), Tensor::ones({1, 1, 3, 3}), 1),
                    DimensionError);
}

TEST_CASE("relu forward sign cases and gradient") {
    Tensor x = Tensor::from_data({1, 3}, {-1, 0, 2});
    Tensor y = relu(x);
    CHECK(y.data() == std::vector<double>{0, 0, 2});

    Tensor nonneg = Tensor::from_data({1, 3}, {0.5, 0, 3});
    CHECK(relu(nonneg).data() == nonneg.data());

    // gradient at [-1, 2] with upstream ones
    Tensor probe = Tensor::from_data({1, 2}, {-1, 2}, true);
    backward(sum(relu(probe)));
    CHECK(probe.grad() == std::vector<double>{0, 1});
}

TEST_CASE("row_softmax symmetry, stability, direct evaluation") {
    Tensor flat = row_softmax(Tensor::matrix({{0, 0}}));
    CHECK(flat.at(0, 0) == doctest::Approx(0.5).epsilon(1e-13));

    Tensor big = row_softmax(Tensor::matrix({{1000, 0}}));
    CHECK(big.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(big.at(0, 1) >= 0.0);

    Tensor t = row_softmax(Tensor::matrix({{std::log(1.0), std::log(3.0)}}));
    CHECK(t.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("row_softmax rows sum to one and shift invariance") {
    Rng rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t r = 1 + rng.index(4), c = 1 + rng.index(5);
        Tensor x = random_tensor({r, c}, rng, 3.0);
        Tensor y = row_softmax(x);
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) s += y.at(i, j);
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
        // shift each row by its own constant
        std::vector<double> shifted = x.data();
        for (std::size_t i = 0; i < r; ++i) {
            const double cshift = rng.uniform(-5, 5);
            for (std::size_t j = 0; j < c; ++j) shifted[i * c + j] += cshift;
        }
        Tensor y2 = row_softmax(Tensor::from_data({r, c}, shifted));
        for (std::size_t i = 0; i < y.numel(); ++i)
            CHECK(std::abs(y.data()[i] - y2.data()[i]) < 1e-12);
    }
}

TEST_CASE("l2_normalize_rows") {
    Tensor y = l2_normalize_rows(Tensor::matrix({{3, 4}}));
    CHECK(y.at(0, 0) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(y.at(0, 1) == doctest::Approx(0.8).epsilon(1e-14));

    Tensor unit = Tensor::matrix({{1, 0}});
    CHECK(l2_normalize_rows(unit).data() == unit.data());

    CHECK_THROWS_AS(l2_normalize_rows(Tensor::matrix({{0, 0}})), DegenerateInputError);

    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor({3, 4}, rng);
        Tensor n = l2_normalize_rows(add_scalar(x, 2.0));  // keep away from zero rows
        for (std::size_t i = 0; i < 3; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 4; ++j) s += n.at(i, j) * n.at(i, j);
            CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("backward linear, disconnected, and product cases") {
    Tensor x = Tensor::from_data({2, 3}, {1, -2, 0.5, 3, 4, -1}, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);

    // constant loss: no gradient flows anywhere
    Tensor w = Tensor::from_data({1, 1}, {5.0}, true);
    Tensor constant = Tensor::scalar(3.0);
    backward(constant);  // no-op
    CHECK(w.grad()[0] == 0.0);

    Tensor a = Tensor::from_data({1, 1}, {2.0}, true);
    Tensor b = Tensor::from_data({1, 1}, {3.0}, true);
    backward(mul(a, b));
    CHECK(a.grad()[0] == doctest::Approx(3.0));
    CHECK(b.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::from_data({1, 2}, {1, 2}, true);
    CHECK_THROWS_AS(backward(relu(x)), ContractError);
}

TEST_CASE("gradients accumulate additively across uses") {
    Tensor x = Tensor::from_data({1, 1}, {1.5}, true);
    Tensor y = add(mul(x, x), x);  // x^2 + x, x used twice in mul and once in add
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(2.0 * 1.5 + 1.0).epsilon(1e-14));
}

TEST_CASE("backward of a sum of losses equals the sum of per-loss gradients") {
    Rng rng(13);
    Tensor base = random_tensor({2, 3}, rng);

    Tensor xa = Tensor::from_data(base.shape(), base.data(), true);
    backward(add(sum(mul(xa, xa)), sum(relu(xa))));
    std::vector<double> combined = xa.grad();

    Tensor xb = Tensor::from_data(base.shape(), base.data(), true);
    backward(sum(mul(xb, xb)));
    Tensor xc = Tensor::from_data(base.shape(), base.data(), true);
    backward(sum(relu(xc)));
    for (std::size_t i = 0; i < combined.size(); ++i) {
        CHECK(combined[i] == doctest::Approx(xb.grad()[i] + xc.grad()[i]).epsilon(1e-14));
    }
}

TEST_CASE("grad_check: sum of squares") {
    Rng rng(17);
    Tensor x = random_tensor({2, 4}, rng);
    double err = grad_check([](const Tensor& t) { return sum(mul(t, t)); }, x, 1e-6);
    CHECK(err < 1e-6);
}

TEST_CASE("grad_check: constant function has zero error") {
    Tensor x = Tensor::from_data({1, 3}, {1, 2, 3});
    double err = grad_check([](const Tensor& t) { return mul_scalar(sum(sub(t, t)), 0.0); }, x);
    CHECK(err == 0.0);
}

TEST_CASE("grad_check: softmax cross-entropy composite") {
    Rng rng(19);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor target = row_softmax(random_tensor({3, 4}, rng)).detach();
    auto f = [target](const Tensor& t) {
        Tensor p = row_softmax(t);
        return mul_scalar(sum(mul(target, log(p))), -1.0);
    };
    CHECK(grad_check(f, x, 1e-6) < 1e-5);
}

TEST_CASE("grad_check across every differentiable primitive") {
    Rng rng(23);
    Tensor x = random_tensor({2, 3}, rng);
    Tensor other = random_tensor({2, 3}, rng);
    Tensor w = random_tensor({3, 2}, rng);
    Tensor bias = random_tensor({1, 3}, rng);
    Tensor centers = random_tensor({2, 3}, rng);

    CHECK(grad_check([&](const Tensor& t) { return sum(add(t, other)); }, x) < 1e-6);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(sub(t, other), t)); }, x) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(matmul(t, w)); }, x) < 1e-6);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(transpose(t), transpose(other))); },
                     x) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(exp(mul_scalar(t, 0.5))); }, x) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(log(add_scalar(mul(t, t), 1.5))); }, x) <
          1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(pow_scalar(add_scalar(mul(t, t), 1.0), -1.0)); },
                     x) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(row_softmax(t)); }, x) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(l2_normalize_rows(add_scalar(t, 3.0)), other)); },
                     x) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) {
              return sum(mul(row_normalize(add_scalar(mul(t, t), 0.5)), other));
          }, x) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(add_row_broadcast(t, bias)); }, x) < 1e-6);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(reshape(t, {3, 2}), w)); }, x) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(pairwise_sqdist(t, centers)); }, x) < 1e-5);
    // bias path of add_row_broadcast
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(add_row_broadcast(other, t), other)); },
                     bias) < 1e-5);
    // center path of pairwise_sqdist
    CHECK(grad_check([&](const Tensor& t) { return sum(pairwise_sqdist(other, t)); }, centers) <
          1e-5);
}

TEST_CASE("grad_check conv stack") {
    Rng rng(29);
    Tensor img = random_tensor({2, 2, 5, 5}, rng);
    Tensor ker = random_tensor({3, 2, 2, 2}, rng);

    CHECK(grad_check([&](const Tensor& t) { return sum(conv2d(t, ker, 1)); }, img) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(conv2d(img, t, 2)); }, ker) < 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(maxpool2x2(t), maxpool2x2(t))); },
                     img) < 1e-5);
}

TEST_CASE("forward determinism for fixed inputs") {
    Rng rng1(31), rng2(31);
    Tensor a1 = random_tensor({4, 4}, rng1), a2 = random_tensor({4, 4}, rng2);
    Tensor b1 = random_tensor({4, 4}, rng1), b2 = random_tensor({4, 4}, rng2);
    Tensor r1 = row_softmax(matmul(relu(a1), b1));
    Tensor r2 = row_softmax(matmul(relu(a2), b2));
    CHECK(r1.data() == r2.data());  // bitwise
}

TEST_CASE("non-finite results abort with the offending op name") {
    Tensor x = Tensor::matrix({{-1.0}});
    CHECK_THROWS_WITH_AS(log(x), doctest::Contains("log"), TrainingDivergence);
    Tensor big = Tensor::matrix({{1e308}});
    CHECK_THROWS_AS(mul(big, big), TrainingDivergence);
}

TEST_CASE("unreachable leaves keep zero grad") {
    Tensor used = Tensor::from_data({1, 1}, {2.0}, true);
    Tensor unused = Tensor::from_data({1, 1}, {7.0}, true);
    backward(mul(used, used));
    CHECK(used.grad()[0] == doctest::Approx(4.0));
    CHECK(unused.grad()[0] == 0.0);
}
