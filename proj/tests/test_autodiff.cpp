#include <catch2/catch.hpp>

#include <cmath>

#include "dalight/core/gradcheck.hpp"
#include "dalight/core/ops.hpp"
#include "dalight/core/rng.hpp"
#include "helpers.hpp"

using namespace dalight;
using testutil::random_tensor;

namespace {

// Scalarizes an op output against fixed random weights so row-sum and other
// symmetries of the op cannot mask gradient errors.
Tensor weighted_sum(const Tensor& y, const Tensor& weights, Tape* tape) {
    return ops::sum_all(ops::mul(y, weights, tape), tape);
}

}  // namespace

TEST_CASE("backward linear case: grad of sum(w * x) is x exactly") {
    Rng rng(1);
    Tensor x = random_tensor(Shape{2, 3}, rng);
    Tensor w = random_tensor(Shape{2, 3}, rng);
    Tape tape;
    Tensor loss = ops::sum_all(ops::mul(w, x, &tape), &tape);
    ops::backward(loss, tape);
    for (int64_t i = 0; i < w.size(); ++i) REQUIRE(w.grad_at(i) == x[i]);
    for (int64_t i = 0; i < x.size(); ++i) REQUIRE(x.grad_at(i) == w[i]);
}

TEST_CASE("backward on conv energy matches finite differences") {
    Rng rng(2);
    Tensor x = random_tensor(Shape{1, 2, 4, 4, 4}, rng);
    Tensor w = random_tensor(Shape{2, 2, 3, 3, 3}, rng);
    auto closure = [&](Tape* t) {
        Tensor y = ops::conv3d(x, w, nullptr, 1, 1, t);
        return ops::scale(ops::sum_all(ops::mul(y, y, t), t), 0.5, t);
    };
    REQUIRE(grad_check(closure, {w}, 1e-3) <= 1e-4);
}

TEST_CASE("parameter with no path to the loss holds zero gradient") {
    Rng rng(3);
    Tensor x = random_tensor(Shape{2, 2}, rng);
    Tensor used = random_tensor(Shape{2, 2}, rng);
    Tensor unused = random_tensor(Shape{2, 2}, rng);
    Tape tape;
    Tensor loss = ops::sum_all(ops::mul(x, used, &tape), &tape);
    ops::backward(loss, tape);
    for (int64_t i = 0; i < unused.size(); ++i) REQUIRE(unused.grad_at(i) == 0.0);
}

TEST_CASE("backward rejects non-scalar losses and double replay") {
    Rng rng(4);
    Tensor x = random_tensor(Shape{2, 2}, rng);
    Tape tape;
    Tensor y = ops::mul(x, x, &tape);
    REQUIRE_THROWS_AS(ops::backward(y, tape), ShapeError);
    Tensor loss = ops::sum_all(y, &tape);
    ops::backward(loss, tape);
    REQUIRE_THROWS_AS(ops::backward(loss, tape), std::logic_error);
}

TEST_CASE("a cleared tape leaves grad slots zeroed") {
    Rng rng(5);
    Tensor x = random_tensor(Shape{3}, rng);
    Tensor w = random_tensor(Shape{3}, rng);
    Tape tape;
    Tensor loss = ops::sum_all(ops::mul(w, x, &tape), &tape);
    ops::backward(loss, tape);
    REQUIRE(w.grad_at(0) != 0.0);
    tape.clear();
    for (int64_t i = 0; i < w.size(); ++i) REQUIRE(w.grad_at(i) == 0.0);
    for (int64_t i = 0; i < x.size(); ++i) REQUIRE(x.grad_at(i) == 0.0);
}

TEST_CASE("grad_check on a linear closure is near machine precision") {
    Rng rng(6);
    Tensor x = random_tensor(Shape{4}, rng);
    Tensor w = random_tensor(Shape{4}, rng);
    auto closure = [&](Tape* t) { return ops::sum_all(ops::mul(w, x, t), t); };
    REQUIRE(grad_check(closure, {w, x}, 1e-3) <= 1e-8);
}

TEST_CASE("gradient check: conv3d with bias") {
    Rng rng(7);
    Tensor x = random_tensor(Shape{1, 2, 3, 4, 4}, rng);
    Tensor w = random_tensor(Shape{2, 2, 3, 3, 3}, rng);
    Tensor b = random_tensor(Shape{2}, rng);
    Tensor r = random_tensor(Shape{1, 2, 2, 4, 4}, rng);  // stride 2 output shape... computed below
    Tensor rw = random_tensor(Shape{1, 2, 3, 4, 4}, rng);
    auto closure = [&](Tape* t) {
        Tensor y = ops::conv3d(x, w, &b, 1, 1, t);
        return weighted_sum(y, rw, t);
    };
    REQUIRE(grad_check(closure, {x, w, b}, 1e-3) <= 1e-4);

    auto strided = [&](Tape* t) {
        Tensor y = ops::conv3d(x, w, &b, 2, 1, t);
        return ops::sum_all(ops::mul(y, y, t), t);
    };
    REQUIRE(grad_check(strided, {x, w, b}, 1e-3) <= 1e-4);
    (void)r;
}

TEST_CASE("gradient check: depthwise and pointwise") {
    Rng rng(8);
    Tensor x = random_tensor(Shape{1, 3, 4, 4, 4}, rng);
    Tensor wd = random_tensor(Shape{3, 3, 3, 3}, rng);
    Tensor rw = random_tensor(Shape{1, 3, 4, 4, 4}, rng);
    auto dw = [&](Tape* t) {
        return weighted_sum(ops::depthwise_conv3d(x, wd, 1, 1, t), rw, t);
    };
    REQUIRE(grad_check(dw, {x, wd}, 1e-3) <= 1e-4);

    Tensor wp = random_tensor(Shape{2, 3}, rng);
    Tensor bp = random_tensor(Shape{2}, rng);
    Tensor rp = random_tensor(Shape{1, 2, 4, 4, 4}, rng);
    auto pw = [&](Tape* t) {
        return weighted_sum(ops::pointwise_conv3d(x, wp, &bp, t), rp, t);
    };
    REQUIRE(grad_check(pw, {x, wp, bp}, 1e-3) <= 1e-4);
}

TEST_CASE("gradient check: transposed conv") {
    Rng rng(9);
    Tensor x = random_tensor(Shape{1, 2, 2, 3, 2}, rng);
    Tensor w = random_tensor(Shape{2, 3, 2, 2, 2}, rng);
    Tensor b = random_tensor(Shape{3}, rng);
    Tensor rw = random_tensor(Shape{1, 3, 4, 6, 4}, rng);
    auto closure = [&](Tape* t) {
        return weighted_sum(ops::transposed_conv3d(x, w, &b, t), rw, t);
    };
    REQUIRE(grad_check(closure, {x, w, b}, 1e-3) <= 1e-4);
}

TEST_CASE("gradient check: group norm with affine") {
    Rng rng(10);
    Tensor x = testutil::normal_tensor(Shape{2, 4, 3, 3, 3}, rng);
    Tensor gamma = random_tensor(Shape{4}, rng, 0.5, 1.5);
    Tensor beta = random_tensor(Shape{4}, rng);
    Tensor rw = random_tensor(Shape{2, 4, 3, 3, 3}, rng);
    auto closure = [&](Tape* t) {
        return weighted_sum(ops::group_norm(x, 2, gamma, beta, 1e-5, t), rw, t);
    };
    REQUIRE(grad_check(closure, {x, gamma, beta}, 1e-3) <= 1e-4);
}

TEST_CASE("gradient check: activations") {
    Rng rng(11);
    Tensor x = random_tensor(Shape{2, 5}, rng, -2.0, 2.0);
    Tensor rw = random_tensor(Shape{2, 5}, rng);
    auto g = [&](Tape* t) { return weighted_sum(ops::gelu(x, t), rw, t); };
    REQUIRE(grad_check(g, {x}, 1e-3) <= 1e-4);
    auto s = [&](Tape* t) { return weighted_sum(ops::sigmoid(x, t), rw, t); };
    REQUIRE(grad_check(s, {x}, 1e-3) <= 1e-4);
}

TEST_CASE("gradient check: softmax variants") {
    Rng rng(12);
    Tensor z = random_tensor(Shape{1, 4, 2, 2, 2}, rng, -2.0, 2.0);
    Tensor rw = random_tensor(Shape{1, 4, 2, 2, 2}, rng);
    auto ch = [&](Tape* t) { return weighted_sum(ops::softmax_channel(z, t), rw, t); };
    REQUIRE(grad_check(ch, {z}, 1e-3) <= 1e-4);

    Tensor z2 = random_tensor(Shape{2, 3, 5}, rng, -2.0, 2.0);
    Tensor rw2 = random_tensor(Shape{2, 3, 5}, rng);
    auto last = [&](Tape* t) { return weighted_sum(ops::softmax_lastdim(z2, t), rw2, t); };
    REQUIRE(grad_check(last, {z2}, 1e-3) <= 1e-4);
}

TEST_CASE("gradient check: pooling") {
    Rng rng(13);
    Tensor x = random_tensor(Shape{1, 3, 2, 3, 3}, rng);
    Tensor r1 = random_tensor(Shape{1, 3, 2}, rng);
    auto hw = [&](Tape* t) { return weighted_sum(ops::pool(x, ops::PoolMode::mean_over_hw, t), r1, t); };
    REQUIRE(grad_check(hw, {x}, 1e-3) <= 1e-4);
    Tensor r2 = random_tensor(Shape{1, 3}, rng);
    auto gm = [&](Tape* t) { return weighted_sum(ops::pool(x, ops::PoolMode::global_mean, t), r2, t); };
    REQUIRE(grad_check(gm, {x}, 1e-3) <= 1e-4);
}

TEST_CASE("gradient check: matmul, bmm, linear, channel_project") {
    Rng rng(14);
    Tensor a = random_tensor(Shape{3, 4}, rng);
    Tensor b = random_tensor(Shape{4, 2}, rng);
    Tensor r = random_tensor(Shape{3, 2}, rng);
    auto mm = [&](Tape* t) { return weighted_sum(ops::matmul(a, b, t), r, t); };
    REQUIRE(grad_check(mm, {a, b}, 1e-3) <= 1e-4);

    Tensor ba = random_tensor(Shape{2, 3, 4}, rng);
    Tensor bb = random_tensor(Shape{2, 3, 5}, rng);
    Tensor br = random_tensor(Shape{2, 4, 5}, rng);
    auto bt = [&](Tape* t) { return weighted_sum(ops::bmm(ba, bb, true, false, t), br, t); };
    REQUIRE(grad_check(bt, {ba, bb}, 1e-3) <= 1e-4);

    Tensor bb2 = random_tensor(Shape{2, 5, 4}, rng);
    Tensor br2 = random_tensor(Shape{2, 3, 5}, rng);
    auto bt2 = [&](Tape* t) { return weighted_sum(ops::bmm(ba, bb2, false, true, t), br2, t); };
    REQUIRE(grad_check(bt2, {ba, bb2}, 1e-3) <= 1e-4);

    Tensor lx = random_tensor(Shape{3, 4}, rng);
    Tensor lw = random_tensor(Shape{2, 4}, rng);
    Tensor lb = random_tensor(Shape{2}, rng);
    Tensor lr = random_tensor(Shape{3, 2}, rng);
    auto lin = [&](Tape* t) { return weighted_sum(ops::linear(lx, lw, &lb, t), lr, t); };
    REQUIRE(grad_check(lin, {lx, lw, lb}, 1e-3) <= 1e-4);

    Tensor cx = random_tensor(Shape{2, 3, 5}, rng);
    Tensor cw = random_tensor(Shape{4, 3}, rng);
    Tensor cr = random_tensor(Shape{2, 4, 5}, rng);
    auto cp = [&](Tape* t) { return weighted_sum(ops::channel_project(cx, cw, t), cr, t); };
    REQUIRE(grad_check(cp, {cx, cw}, 1e-3) <= 1e-4);
}

TEST_CASE("gradient check: interpolation, broadcasts, concat, blend, row_select") {
    Rng rng(15);
    Tensor x = random_tensor(Shape{1, 2, 2, 3, 3}, rng);
    Tensor ri = random_tensor(Shape{1, 2, 4, 5, 5}, rng);
    auto interp = [&](Tape* t) {
        return weighted_sum(ops::interpolate_trilinear(x, Shape{4, 5, 5}, t), ri, t);
    };
    REQUIRE(grad_check(interp, {x}, 1e-3) <= 1e-4);

    Tensor big = random_tensor(Shape{2, 3, 2, 2, 2}, rng);
    Tensor bc = random_tensor(Shape{2, 3}, rng);
    Tensor rb = random_tensor(Shape{2, 3, 2, 2, 2}, rng);
    auto mulbc = [&](Tape* t) { return weighted_sum(ops::mul(big, bc, t), rb, t); };
    REQUIRE(grad_check(mulbc, {big, bc}, 1e-3) <= 1e-4);
    Tensor bcd = random_tensor(Shape{2, 3, 2}, rng);
    auto addbc = [&](Tape* t) { return weighted_sum(ops::add(big, bcd, t), rb, t); };
    REQUIRE(grad_check(addbc, {big, bcd}, 1e-3) <= 1e-4);

    Tensor ca = random_tensor(Shape{1, 2, 2, 2, 2}, rng);
    Tensor cb = random_tensor(Shape{1, 3, 2, 2, 2}, rng);
    Tensor rc = random_tensor(Shape{1, 5, 2, 2, 2}, rng);
    auto cat = [&](Tape* t) { return weighted_sum(ops::concat_channels(ca, cb, t), rc, t); };
    REQUIRE(grad_check(cat, {ca, cb}, 1e-3) <= 1e-4);

    Tensor ba2 = random_tensor(Shape{2, 4}, rng);
    Tensor bb3 = random_tensor(Shape{2, 4}, rng);
    Tensor logit(Shape{1}, {0.3});
    Tensor rblend = random_tensor(Shape{2, 4}, rng);
    auto bl = [&](Tape* t) { return weighted_sum(ops::blend(ba2, bb3, logit, t), rblend, t); };
    REQUIRE(grad_check(bl, {ba2, bb3, logit}, 1e-3) <= 1e-4);

    Tensor table = random_tensor(Shape{5, 3}, rng);
    Tensor rr = random_tensor(Shape{3}, rng);
    auto rs = [&](Tape* t) { return weighted_sum(ops::row_select(table, 2, t), rr, t); };
    REQUIRE(grad_check(rs, {table}, 1e-3) <= 1e-4);

    auto sa = [&](Tape* t) { return ops::sum_all(ops::scale_add(ba2, bb3, 0.7, -0.3, t), t); };
    REQUIRE(grad_check(sa, {ba2, bb3}, 1e-3) <= 1e-4);
}

TEST_CASE("row_select rejects out-of-range rows") {
    Tensor table(Shape{4, 2});
    REQUIRE_THROWS_AS(ops::row_select(table, 4), ConfigError);
    REQUIRE_THROWS_AS(ops::row_select(table, -1), ConfigError);
}

TEST_CASE("gradient accumulates when a tensor is used twice") {
    Rng rng(16);
    Tensor x = random_tensor(Shape{3}, rng);
    auto closure = [&](Tape* t) {
        // loss = sum(x*x) + sum(x) -> dloss/dx = 2x + 1
        return ops::scale_add(ops::sum_all(ops::mul(x, x, t), t), ops::sum_all(x, t), 1.0, 1.0, t);
    };
    Tape tape;
    Tensor loss = closure(&tape);
    ops::backward(loss, tape);
    for (int64_t i = 0; i < 3; ++i) {
        REQUIRE(x.grad_at(i) == Approx(2.0 * x[i] + 1.0).margin(1e-12));
    }
}
