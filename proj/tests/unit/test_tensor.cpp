#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "kia/autodiff.hpp"
#include "kia/errors.hpp"
#include "kia/grad_check.hpp"
#include "kia/tensor.hpp"
#include "support.hpp"

using namespace kia;
using kia::test::Gen;

namespace {

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor out = Tensor::matrix(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

}  // namespace

TEST_CASE("matmul: worked and trivial examples") {
    const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
    const Tensor b = Tensor::from_rows({{1}, {1}});
    const Tensor c = kernels::matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c(0, 0) == 3.0);
    CHECK(c(1, 0) == 7.0);

    CHECK(kernels::matmul(Tensor::identity(2), a) == a);
}

TEST_CASE("matmul: shape mismatch names both shapes") {
    const Tensor a = Tensor::matrix(2, 3);
    const Tensor b = Tensor::matrix(4, 5);
    try {
        kernels::matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
}

TEST_CASE("matmul kernels agree with a naive triple loop") {
    Gen g(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = g.index(1, 13), k = g.index(1, 17), p = g.index(1, 11);
        const Tensor a = g.normal_matrix(n, k);
        const Tensor b = g.normal_matrix(k, p);
        const Tensor ref = naive_matmul(a, b);
        CHECK(max_abs_diff(kernels::matmul(a, b), ref) <= 1e-12);

        Tensor nt = Tensor::matrix(n, p);
        kernels::matmul_nt_acc(a, kernels::transpose(b), nt);
        CHECK(max_abs_diff(nt, ref) <= 1e-12);

        Tensor tn = Tensor::matrix(n, p);
        kernels::matmul_tn_acc(kernels::transpose(a), b, tn);
        CHECK(max_abs_diff(tn, ref) <= 1e-12);
    }
}

TEST_CASE("matmul with identity is bitwise neutral") {
    Gen g(12);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = g.index(1, 9), k = g.index(1, 9);
        const Tensor a = g.normal_matrix(n, k);
        const Tensor x = g.normal_matrix(k, 1);
        const Tensor lhs = kernels::matmul(kernels::matmul(a, Tensor::identity(k)), x);
        CHECK(lhs == kernels::matmul(a, x));
    }
}

TEST_CASE("elementwise examples") {
    CHECK(kernels::tanh(Tensor::row({0.0}))[0] == 0.0);
    const Tensor s = kernels::scale(Tensor::row({1.0, -1.0}), 2.0);
    CHECK(s[0] == 2.0);
    CHECK(s[1] == -2.0);
    CHECK_THROWS_AS(kernels::add(Tensor::row({1, 2}), Tensor::row({3})), DimensionError);
    CHECK_THROWS_AS(kernels::sub(Tensor::row({1, 2}), Tensor::row({3})), DimensionError);
}

TEST_CASE("mse examples") {
    Tape tape;
    auto v = [&](std::initializer_list<double> xs) { return tape.constant(Tensor::row(xs)); };
    CHECK(mse(v({1.5, -2}), v({1.5, -2})).value().item() == 0.0);
    CHECK(mse(v({0, 0}), v({1, 1})).value().item() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mse(v({3}), v({0})).value().item() == 9.0);
    CHECK_THROWS_AS(mse(v({1, 2}), v({1})), DimensionError);
}

TEST_CASE("backward: sum, chain rule, absent gradients, contracts") {
    {
        Tape tape;
        const Var theta = tape.leaf(Tensor::from_rows({{1, -2, 3}, {0.5, 7, 9}}), true);
        const Gradients g = tape.backward(sum(theta));
        const Tensor gt = g.get(theta);
        for (double x : gt.values()) CHECK(x == 1.0);
    }
    {
        // L = mse(W x, y), W = 2, x = 3, y = 0.
        Tape tape;
        const Var w = tape.leaf(Tensor::from_rows({{2.0}}), true);
        const Var x = tape.constant(Tensor::from_rows({{3.0}}));
        const Var y = tape.constant(Tensor::from_rows({{0.0}}));
        const Var unused = tape.leaf(Tensor::from_rows({{5.0}}), true);
        const Var loss = mse(matmul(w, x), y);
        CHECK(loss.value().item() == 36.0);
        const Gradients g = tape.backward(loss);
        CHECK(g.get(w).item() == 36.0);
        CHECK(g.find(unused) == nullptr);
        CHECK(g.get(unused).item() == 0.0);
    }
    {
        Tape tape;
        const Var a = tape.leaf(Tensor::row({1, 2}), true);
        CHECK_THROWS_AS(tape.backward(a), ContractError);
    }
}

TEST_CASE("grad_check examples") {
    const double sq = grad_check([](Tape&, Var t) { return sum(matmul(t, t)); }, Tensor::from_rows({{3.0}}), 1e-4);
    CHECK(sq < 1e-7);
    const double flat = grad_check(
        [](Tape& tape, Var) { return tape.constant(Tensor::scalar(4.0)); }, Tensor::from_rows({{3.0}}), 1e-4);
    CHECK(flat == 0.0);
    CHECK_THROWS_AS(grad_check([](Tape&, Var t) { return sum(scale(t, std::nan(""))); }, Tensor::row({1.0}), 1e-4),
                    NumericError);
}

TEST_CASE("every differentiable op passes grad_check at 10 random points") {
    Gen g(21);
    const double eps = 1e-4, tol = 1e-5;
    // A fixed random projection turns each op's output into a scalar with a
    // non-trivial upstream gradient.
    auto project = [](Tape& tape, Var out, std::uint64_t seed) {
        Gen pg(seed);
        return sum(matmul(out, tape.constant(pg.normal_matrix(out.value().cols(), 1))));
    };
    for (int point = 0; point < 10; ++point) {
        const std::uint64_t ps = 1000 + static_cast<std::uint64_t>(point);
        const Tensor a = g.normal_matrix(3, 4), b = g.normal_matrix(3, 4), c = g.normal_matrix(4, 2);
        const Tensor r = g.normal_matrix(1, 4);

        CHECK(grad_check([&](Tape& t, std::span<const Var> p) { return project(t, matmul(p[0], p[1]), ps); },
                         {a, c}, eps) <= tol);
        CHECK(grad_check([&](Tape& t, std::span<const Var> p) { return project(t, add(p[0], p[1]), ps); }, {a, b},
                         eps) <= tol);
        CHECK(grad_check([&](Tape& t, std::span<const Var> p) { return project(t, sub(p[0], p[1]), ps); }, {a, b},
                         eps) <= tol);
        CHECK(grad_check([&](Tape& t, Var x) { return project(t, scale(x, -1.7), ps); }, a, eps) <= tol);
        CHECK(grad_check([&](Tape& t, Var x) { return project(t, tanh(x), ps); }, a, eps) <= tol);
        CHECK(grad_check([&](Tape& t, std::span<const Var> p) { return project(t, add_row(p[0], p[1]), ps); },
                         {a, r}, eps) <= tol);
        CHECK(grad_check([&](Tape& t, Var x) { return project(t, slice_cols(x, 1, 3), ps); }, a, eps) <= tol);
        CHECK(grad_check([&](Tape& t, std::span<const Var> p) { return project(t, concat_cols(p[0], p[1]), ps); },
                         {a, b}, eps) <= tol);
        CHECK(grad_check(
                  [&](Tape& t, std::span<const Var> p) {
                      const Var parts[] = {p[0], p[1]};
                      return project(t, concat_rows(parts), ps);
                  },
                  {a, b}, eps) <= tol);
        CHECK(grad_check([&](Tape&, std::span<const Var> p) { return mse(p[0], p[1]); }, {a, b}, eps) <= tol);
        CHECK(grad_check([&](Tape&, Var x) { return sum(x); }, a, eps) <= tol);
    }
}

TEST_CASE("re-running a tape gives bitwise-identical values and gradients") {
    Gen g(31);
    const Tensor w1 = g.normal_matrix(5, 4), w2 = g.normal_matrix(4, 3), x = g.normal_matrix(7, 5);
    const Tensor y = g.normal_matrix(7, 3);
    auto run = [&] {
        Tape tape;
        const Var a = tape.leaf(w1, true), b = tape.leaf(w2, true);
        const Var loss = mse(matmul(tanh(matmul(tape.constant(x), a)), b), tape.constant(y));
        const Gradients gr = tape.backward(loss);
        return std::vector<Tensor>{loss.value(), gr.get(a), gr.get(b)};
    };
    CHECK(run() == run());
}
