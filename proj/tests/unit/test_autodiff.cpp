#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "gradcheck.hpp"

namespace {

using namespace blobgan;
using blobgan::testing::check_gradients;

Tensor away_from_zero(Shape shape, std::mt19937_64& rng, float margin) {
    Tensor t = Tensor::uniform(std::move(shape), rng, -1.0f, 1.0f);
    for (auto& v : t.values()) {
        if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
    }
    return t;
}

TEST(Autodiff, SumGivesOnes) {
    Tape tape;
    Var x = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    tape.backward(ops::sum(x));
    EXPECT_EQ(tape.grad(x), Tensor::ones({2, 3}));
}

TEST(Autodiff, DisconnectedLeafHasZeroGradient) {
    Tape tape;
    Var x = tape.leaf(Tensor({3}, 1.0f));
    Var unused = tape.leaf(Tensor({2}, 5.0f));
    tape.backward(ops::sum(ops::square(x)));
    EXPECT_EQ(tape.grad(unused), Tensor::zeros({2}));
}

TEST(Autodiff, NonScalarLossIsDomainError) {
    Tape tape;
    Var x = tape.leaf(Tensor({3}, 1.0f));
    EXPECT_THROW(tape.backward(x), DomainError);
}

TEST(Autodiff, MixedTapesRejected) {
    Tape t1, t2;
    Var a = t1.leaf(Tensor({2}, 1.0f));
    Var b = t2.leaf(Tensor({2}, 1.0f));
    EXPECT_THROW(ops::add(a, b), DomainError);
}

TEST(Autodiff, SquaredSigmoidOfAffineMatchesFiniteDifferences) {
    std::mt19937_64 rng(1);
    auto fn = [](Tape&, const std::vector<Var>& v) {
        Var y = ops::sigmoid(ops::matmul(v[0], v[1]));
        return ops::sum(ops::square(y));
    };
    auto rep = check_gradients(fn, {Tensor::randn({3, 3}, rng), Tensor::randn({3, 1}, rng)}, rng);
    EXPECT_GRADS(rep);
}

TEST(Autodiff, ElementwiseOpsMatchFiniteDifferences) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = Tensor::randn({2, 3, 4}, rng);
        Tensor b = Tensor::randn({3, 1}, rng);
        Tensor pos = Tensor::uniform({2, 3, 4}, rng, 0.5f, 2.0f);
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::add(v[0], v[1]); }, {a, b}, rng));
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::sub(v[0], v[1]); }, {a, b}, rng));
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::mul(v[0], v[1]); }, {a, b}, rng));
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::sigmoid(v[0]); }, {a}, rng));
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::tanh(v[0]); }, {a}, rng));
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::softplus(v[0]); }, {a}, rng));
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::exp(v[0]); }, {a}, rng));
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::sqrt(v[0]); }, {pos}, rng));
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::scale(ops::square(v[0]), 0.3f); },
                                     {a}, rng));
        EXPECT_GRADS(check_gradients(
            [](Tape&, const std::vector<Var>& v) { return ops::atan2(v[0], v[1]); },
            {away_from_zero({5}, rng, 0.3f), away_from_zero({5}, rng, 0.3f)}, rng));
    }
}

TEST(Autodiff, LeakyReluAwayFromKink) {
    // A 0.05 margin keeps the 2h = 0.02 probes on one side of the kink.
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::leaky_relu(v[0]); },
                                     {away_from_zero({4, 5}, rng, 0.05f)}, rng));
    }
}

TEST(Autodiff, ReductionsAndShapeOps) {
    std::mt19937_64 rng(4);
    Tensor a = Tensor::randn({2, 3, 4}, rng);
    for (int axis : {0, 1, 2, -1}) {
        EXPECT_GRADS(check_gradients([axis](Tape&, const std::vector<Var>& v) { return ops::sum_axis(v[0], axis); },
                                     {a}, rng));
        EXPECT_GRADS(check_gradients(
            [axis](Tape&, const std::vector<Var>& v) { return ops::mean_axis(v[0], axis, true); }, {a}, rng));
        EXPECT_GRADS(check_gradients(
            [axis](Tape&, const std::vector<Var>& v) { return ops::l2_normalize(v[0], axis); }, {a}, rng));
    }
    EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::mean(v[0]); }, {a}, rng));
    EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::narrow(v[0], 1, 1, 2); }, {a}, rng));
    EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::transpose_last2(v[0]); }, {a}, rng));
    EXPECT_GRADS(check_gradients(
        [](Tape&, const std::vector<Var>& v) { return ops::concat({v[0], v[1]}, 1); },
        {a, Tensor::randn({2, 2, 4}, rng)}, rng));
}

TEST(Autodiff, MatmulAllTransposes) {
    std::mt19937_64 rng(5);
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            Tensor a = Tensor::randn(ta ? Shape{4, 3} : Shape{3, 4}, rng);
            Tensor b = Tensor::randn(tb ? Shape{5, 4} : Shape{4, 5}, rng);
            EXPECT_GRADS(check_gradients(
                [ta, tb](Tape&, const std::vector<Var>& v) { return ops::matmul(v[0], v[1], ta, tb); }, {a, b}, rng));
            Tensor ba = Tensor::randn(ta ? Shape{2, 4, 3} : Shape{2, 3, 4}, rng);
            Tensor bb = Tensor::randn(tb ? Shape{2, 5, 4} : Shape{2, 4, 5}, rng);
            EXPECT_GRADS(check_gradients(
                [ta, tb](Tape&, const std::vector<Var>& v) { return ops::bmm(v[0], v[1], ta, tb); }, {ba, bb}, rng));
        }
    }
}

TEST(Autodiff, MatmulHandExample) {
    Tape tape;
    Var a = tape.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    Var b = tape.constant(Tensor({3, 2}, {1, 0, 0, 1, 0, 0}));
    EXPECT_EQ(ops::matmul(a, b).value(), Tensor({2, 2}, {1, 2, 4, 5}));
}

Tensor conv_loop_oracle(const Tensor& x, const Tensor& w, int pad) {
    const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const auto o = w.dim(0), k = w.dim(2);
    const auto ho = h + 2 * pad - k + 1, wo = wd + 2 * pad - k + 1;
    Tensor out({n, o, ho, wo});
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t oc = 0; oc < o; ++oc)
            for (std::int64_t y = 0; y < ho; ++y)
                for (std::int64_t xx = 0; xx < wo; ++xx) {
                    double acc = 0.0;
                    for (std::int64_t ic = 0; ic < c; ++ic)
                        for (std::int64_t ky = 0; ky < k; ++ky)
                            for (std::int64_t kx = 0; kx < k; ++kx) {
                                const auto iy = y + ky - pad, ix = xx + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                acc += static_cast<double>(x.at({b, ic, iy, ix})) * w.at({oc, ic, ky, kx});
                            }
                    out.at({b, oc, y, xx}) = static_cast<float>(acc);
                }
    return out;
}

TEST(Conv, OneByOneOnesIsIdentity) {
    std::mt19937_64 rng(6);
    Tensor x = Tensor::randn({1, 1, 5, 5}, rng);
    EXPECT_EQ(kernels::conv2d_forward(x, Tensor::ones({1, 1, 1, 1}), 0), x);
}

TEST(Conv, MatchesLoopOracle) {
    std::mt19937_64 rng(7);
    for (int pad : {0, 1}) {
        Tensor x = Tensor::randn({2, 3, 4, 4}, rng);
        Tensor w = Tensor::randn({5, 3, 3, 3}, rng);
        Tensor got = kernels::conv2d_forward(x, w, pad);
        Tensor want = conv_loop_oracle(x, w, pad);
        ASSERT_EQ(got.shape(), want.shape());
        EXPECT_LT(max_abs_diff(got, want), 1e-5f);
    }
}

TEST(Conv, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(8);
    for (int pad : {0, 1}) {
        EXPECT_GRADS(check_gradients(
            [pad](Tape&, const std::vector<Var>& v) { return ops::conv2d(v[0], v[1], pad); },
            {Tensor::randn({2, 2, 4, 4}, rng), Tensor::randn({3, 2, 3, 3}, rng)}, rng));
        EXPECT_GRADS(check_gradients(
            [pad](Tape&, const std::vector<Var>& v) { return ops::conv2d_input_grad(v[0], v[1], pad, 4, 4); },
            {Tensor::randn({2, 3, pad ? 4 : 2, pad ? 4 : 2}, rng), Tensor::randn({3, 2, 3, 3}, rng)}, rng));
    }
}

TEST(Conv, InputGradIsAdjointOfConv) {
    std::mt19937_64 rng(9);
    Tensor x = Tensor::randn({2, 3, 5, 5}, rng);
    Tensor w = Tensor::randn({4, 3, 3, 3}, rng);
    Tensor gy = Tensor::randn({2, 4, 5, 5}, rng);
    Tensor gx({2, 3, 5, 5});
    kernels::conv2d_backward_data(gy, w, 1, gx);
    Tensor y = kernels::conv2d_forward(x, w, 1);
    double lhs = 0.0, rhs = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) lhs += static_cast<double>(y[i]) * gy[i];
    for (std::int64_t i = 0; i < x.numel(); ++i) rhs += static_cast<double>(x[i]) * gx[i];
    EXPECT_NEAR(lhs, rhs, 1e-3);
}

TEST(Conv, ResamplingGradients) {
    std::mt19937_64 rng(10);
    EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::upsample2x(v[0]); },
                                 {Tensor::randn({2, 2, 3, 3}, rng)}, rng));
    EXPECT_GRADS(check_gradients([](Tape&, const std::vector<Var>& v) { return ops::avg_pool2x(v[0]); },
                                 {Tensor::randn({2, 2, 4, 6}, rng)}, rng));
}

TEST(Conv, ShapeErrors) {
    Tape tape;
    Var x = tape.constant(Tensor({1, 2, 4, 4}));
    Var w = tape.constant(Tensor({1, 3, 3, 3}));
    EXPECT_THROW(ops::conv2d(x, w, 1), DomainError);
    EXPECT_THROW(ops::avg_pool2x(tape.constant(Tensor({1, 1, 3, 4}))), DomainError);
    EXPECT_THROW(ops::add(tape.constant(Tensor({2, 3})), tape.constant(Tensor({4}))), DomainError);
}

}  // namespace
