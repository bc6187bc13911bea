#include "doctest.h"

#include <cmath>

#include "eev/ops.hpp"

using namespace eev;

TEST_CASE("conv2d matches hand convolution on all-ones 3x3") {
    auto x = full_tensor<float>(Shape(1, 1, 3, 3), 1.0f);
    auto w = full_tensor<float>(Shape(1, 1, 3, 3), 1.0f);
    auto y = conv2d<float>(nullptr, x, w, nullptr, 1, 1);
    REQUIRE(y->shape == Shape(1, 1, 3, 3));
    CHECK(y->at(0, 0, 1, 1) == doctest::Approx(9.0f)); // full window
    CHECK(y->at(0, 0, 0, 0) == doctest::Approx(4.0f)); // corner window
    CHECK(y->at(0, 0, 2, 2) == doctest::Approx(4.0f));
    CHECK(y->at(0, 0, 0, 1) == doctest::Approx(6.0f)); // edge window
}

TEST_CASE("conv2d with 1x1 identity kernel is the identity") {
    Rng rng(7);
    auto x = randn_tensor<float>(Shape(2, 3, 4, 5), rng);
    auto w = make_tensor<float>(Shape(3, 3, 1, 1));
    for (int c = 0; c < 3; ++c) w->at(c, c, 0, 0) = 1.0f;
    auto b = make_tensor<float>(Shape(1, 3, 1, 1));
    auto y = conv2d<float>(nullptr, x, w, b, 1, 0);
    REQUIRE(y->shape == x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) CHECK(y->data[i] == x->data[i]);
}

TEST_CASE("conv2d with zero weights yields constant bias") {
    Rng rng(11);
    auto x = randn_tensor<float>(Shape(1, 2, 6, 6), rng);
    auto w = make_tensor<float>(Shape(4, 2, 3, 3));
    auto b = make_tensor<float>(Shape(1, 4, 1, 1));
    b->data = {0.5f, -1.0f, 2.0f, 0.0f};
    auto y = conv2d<float>(nullptr, x, w, b, 1);
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                CHECK(y->at(0, c, i, j) == b->data[c]);
}

TEST_CASE("conv2d output dims follow the floor formula") {
    auto x = full_tensor<float>(Shape(1, 1, 9, 9), 1.0f);
    auto w = full_tensor<float>(Shape(2, 1, 5, 5), 0.1f);
    auto y = conv2d<float>(nullptr, x, w, nullptr, 2, 2);
    CHECK(y->shape == Shape(1, 2, 5, 5)); // (9 + 4 - 5)/2 + 1
}

TEST_CASE("conv2d rejects channel mismatch") {
    auto x = full_tensor<float>(Shape(1, 3, 4, 4), 1.0f);
    auto w = full_tensor<float>(Shape(2, 2, 3, 3), 1.0f);
    CHECK_THROWS_AS(conv2d<float>(nullptr, x, w, nullptr, 1), ShapeError);
}

TEST_CASE("conv2d is linear in its input") {
    Rng rng(21);
    auto x = randn_tensor<double>(Shape(1, 2, 8, 8), rng);
    auto y = randn_tensor<double>(Shape(1, 2, 8, 8), rng);
    auto w = randn_tensor<double>(Shape(3, 2, 3, 3), rng);
    const double a = 1.7, b = -0.4;
    auto combo = make_tensor<double>(x->shape);
    for (std::size_t i = 0; i < combo->data.size(); ++i)
        combo->data[i] = a * x->data[i] + b * y->data[i];
    auto lhs = conv2d<double>(nullptr, combo, w, nullptr, 1);
    auto cx = conv2d<double>(nullptr, x, w, nullptr, 1);
    auto cy = conv2d<double>(nullptr, y, w, nullptr, 1);
    for (std::size_t i = 0; i < lhs->data.size(); ++i) {
        const double rhs = a * cx->data[i] + b * cy->data[i];
        CHECK(std::abs(lhs->data[i] - rhs) <=
              1e-5 * std::max({std::abs(lhs->data[i]), std::abs(rhs), 1.0}));
    }
}

TEST_CASE("deconv2d shape contract: stride 2 doubles resolution") {
    auto x = full_tensor<float>(Shape(1, 1, 4, 4), 1.0f);
    auto w = full_tensor<float>(Shape(1, 3, 5, 5), 0.1f);
    auto y = deconv2d<float>(nullptr, x, w, nullptr, 2);
    CHECK(y->shape == Shape(1, 3, 8, 8));
    auto y1 = deconv2d<float>(nullptr, x, w, nullptr, 1);
    CHECK(y1->shape == Shape(1, 3, 4, 4));
}

TEST_CASE("deconv2d with zero weights yields bias") {
    Rng rng(3);
    auto x = randn_tensor<float>(Shape(1, 2, 4, 4), rng);
    auto w = make_tensor<float>(Shape(2, 3, 3, 3));
    auto b = make_tensor<float>(Shape(1, 3, 1, 1));
    b->data = {1.0f, 2.0f, 3.0f};
    auto y = deconv2d<float>(nullptr, x, w, b, 2);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                CHECK(y->at(0, c, i, j) == b->data[c]);
}

TEST_CASE("deconv2d is the adjoint of conv2d under shared weights") {
    // <deconv(x), y> == <x, conv(y)> for zero bias, checked numerically.
    Rng rng(31);
    for (int stride : {1, 2}) {
        for (int k : {1, 3, 5}) {
            auto x = randn_tensor<double>(Shape(1, 3, 6, 6), rng);
            auto w = randn_tensor<double>(Shape(3, 2, k, k), rng);
            auto dx = deconv2d<double>(nullptr, x, w, nullptr, stride);
            auto y = randn_tensor<double>(Shape(1, 2, 6 * stride, 6 * stride), rng);
            auto cy = conv2d<double>(nullptr, y, w, nullptr, stride);
            REQUIRE(cy->shape == x->shape);
            double lhs = 0.0, rhs = 0.0;
            for (std::size_t i = 0; i < dx->data.size(); ++i) lhs += dx->data[i] * y->data[i];
            for (std::size_t i = 0; i < x->data.size(); ++i) rhs += x->data[i] * cy->data[i];
            CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
        }
    }
}

TEST_CASE("avg_pool2 arithmetic") {
    auto x = make_tensor<float>(Shape(1, 1, 2, 2), {1.0f, 2.0f, 3.0f, 4.0f});
    auto y = avg_pool2<float>(nullptr, x);
    REQUIRE(y->shape == Shape(1, 1, 1, 1));
    CHECK(y->data[0] == doctest::Approx(2.5f));
}

TEST_CASE("avg_pool2 keeps constants constant") {
    auto x = full_tensor<float>(Shape(1, 3, 8, 8), 0.7f);
    auto y = avg_pool2<float>(nullptr, x);
    REQUIRE(y->shape == Shape(1, 3, 4, 4));
    for (float v : y->data) CHECK(v == doctest::Approx(0.7f));
}

TEST_CASE("avg_pool2 conserves the mean on random tensors") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        auto x = randn_tensor<float>(Shape(1, 2, 16, 12), rng);
        auto y = avg_pool2<float>(nullptr, x);
        double mx = 0.0, my = 0.0;
        for (float v : x->data) mx += v;
        for (float v : y->data) my += v;
        mx /= static_cast<double>(x->data.size());
        my /= static_cast<double>(y->data.size());
        CHECK(std::abs(mx - my) <= 1e-6 * std::max({std::abs(mx), std::abs(my), 1.0}));
    }
}

TEST_CASE("avg_pool2 rejects odd dims") {
    auto x = full_tensor<float>(Shape(1, 1, 3, 4), 1.0f);
    CHECK_THROWS_AS(avg_pool2<float>(nullptr, x), ShapeError);
}

TEST_CASE("global_avg_pool values") {
    auto c = full_tensor<float>(Shape(2, 3, 5, 5), 1.25f);
    auto y = global_avg_pool<float>(nullptr, c);
    REQUIRE(y->shape == Shape(2, 3, 1, 1));
    for (float v : y->data) CHECK(v == doctest::Approx(1.25f));

    auto x = make_tensor<float>(Shape(1, 1, 2, 2), {0.0f, 2.0f, 4.0f, 6.0f});
    CHECK(global_avg_pool<float>(nullptr, x)->data[0] == doctest::Approx(3.0f));
}

TEST_CASE("global_avg_pool preserves channel sums times H*W") {
    Rng rng(17);
    auto x = randn_tensor<float>(Shape(2, 4, 6, 6), rng);
    auto y = global_avg_pool<float>(nullptr, x);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 4; ++c) {
            double s = 0.0;
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) s += x->at(n, c, i, j);
            CHECK(y->at(n, c, 0, 0) * 36.0 == doctest::Approx(s).epsilon(1e-5));
        }
}

TEST_CASE("bilinear_warp with zero flow is exactly the identity") {
    Rng rng(13);
    auto src = randn_tensor<float>(Shape(2, 3, 9, 7), rng);
    auto flow = make_tensor<float>(Shape(2, 2, 9, 7));
    auto y = bilinear_warp<float>(nullptr, src, flow);
    for (std::size_t i = 0; i < src->data.size(); ++i) CHECK(y->data[i] == src->data[i]);
}

TEST_CASE("bilinear_warp integer flow shifts columns") {
    // flow (1,0) samples src at x+1: interior output columns equal the next
    // source column (direct index-shift oracle).
    Rng rng(19);
    auto src = randn_tensor<float>(Shape(1, 1, 6, 6), rng);
    auto flow = make_tensor<float>(Shape(1, 2, 6, 6));
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) flow->at(0, 0, i, j) = 1.0f;
    auto y = bilinear_warp<float>(nullptr, src, flow);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(y->at(0, 0, i, j) == doctest::Approx(src->at(0, 0, i, j + 1)));
}

TEST_CASE("bilinear_warp half-pixel flow on a ramp yields midpoints") {
    // source row is a linear ramp 0,1,2,...; sampling at x+0.5 must return
    // the midpoint of neighbors on interior pixels (closed-form bilinear).
    auto src = make_tensor<float>(Shape(1, 1, 2, 8));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 8; ++j) src->at(0, 0, i, j) = static_cast<float>(j);
    auto flow = make_tensor<float>(Shape(1, 2, 2, 8));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 8; ++j) flow->at(0, 0, i, j) = 0.5f;
    auto y = bilinear_warp<float>(nullptr, src, flow);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 7; ++j)
            CHECK(y->at(0, 0, i, j) == doctest::Approx(static_cast<float>(j) + 0.5f));
}

TEST_CASE("bilinear_warp rejects malformed flow") {
    auto src = full_tensor<float>(Shape(1, 3, 4, 4), 1.0f);
    auto flow = make_tensor<float>(Shape(1, 3, 4, 4));
    CHECK_THROWS_AS(bilinear_warp<float>(nullptr, src, flow), ShapeError);
}

TEST_CASE("activation values") {
    auto x = make_tensor<float>(Shape(1, 1, 1, 4), {-1.0f, 2.0f, 0.0f, -2.0f});
    auto r = relu<float>(nullptr, x);
    CHECK(r->data[0] == 0.0f);
    CHECK(r->data[1] == 2.0f);
    auto l = leaky_relu<float>(nullptr, x, 0.1f);
    CHECK(l->data[3] == doctest::Approx(-0.2f));
    auto s = sigmoid<float>(nullptr, x);
    CHECK(s->data[2] == doctest::Approx(0.5f));
    auto t = tanh_op<float>(nullptr, x);
    CHECK(t->data[2] == doctest::Approx(0.0f));
}

TEST_CASE("quantize_round uses half-away-from-zero") {
    auto x = make_tensor<float>(Shape(1, 1, 1, 6), {1.4f, -1.5f, 2.0f, -3.0f, 0.5f, -0.4f});
    auto y = quantize_round<float>(nullptr, x);
    CHECK(y->data[0] == 1.0f);
    CHECK(y->data[1] == -2.0f);
    CHECK(y->data[2] == 2.0f);
    CHECK(y->data[3] == -3.0f);
    CHECK(y->data[4] == 1.0f);
    CHECK(y->data[5] == 0.0f);
}

TEST_CASE("quantize_noise stays within half a step for any seed") {
    for (std::uint64_t seed : {1ull, 42ull, 987654321ull}) {
        Rng rng(seed);
        auto x = randn_tensor<float>(Shape(1, 4, 8, 8), rng);
        Rng noise(seed + 1);
        auto y = quantize_noise<float>(nullptr, x, noise);
        for (std::size_t i = 0; i < x->data.size(); ++i)
            CHECK(std::abs(y->data[i] - x->data[i]) < 0.5f);
    }
}

TEST_CASE("space_to_depth round-trips through depth_to_space") {
    Rng rng(77);
    auto x = randn_tensor<float>(Shape(2, 3, 8, 12), rng);
    for (int r : {2, 4}) {
        auto packed = space_to_depth<float>(nullptr, x, r);
        CHECK(packed->shape == Shape(2, 3 * r * r, 8 / r, 12 / r));
        auto back = depth_to_space<float>(nullptr, packed, r);
        REQUIRE(back->shape == x->shape);
        for (std::size_t i = 0; i < x->data.size(); ++i) CHECK(back->data[i] == x->data[i]);
    }
}

TEST_CASE("concat and slice are inverses") {
    Rng rng(99);
    auto a = randn_tensor<float>(Shape(1, 2, 4, 4), rng);
    auto b = randn_tensor<float>(Shape(1, 3, 4, 4), rng);
    auto cat = concat_channels<float>(nullptr, {a, b});
    REQUIRE(cat->shape == Shape(1, 5, 4, 4));
    auto sa = slice_channels<float>(nullptr, cat, 0, 2);
    auto sb = slice_channels<float>(nullptr, cat, 2, 3);
    for (std::size_t i = 0; i < a->data.size(); ++i) CHECK(sa->data[i] == a->data[i]);
    for (std::size_t i = 0; i < b->data.size(); ++i) CHECK(sb->data[i] == b->data[i]);
}

TEST_CASE("upsample_flow2 doubles both resolution and displacement") {
    auto f = make_tensor<float>(Shape(1, 2, 3, 3));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            f->at(0, 0, i, j) = 0.75f;
            f->at(0, 1, i, j) = -0.25f;
        }
    auto up = upsample_flow2<float>(nullptr, f);
    REQUIRE(up->shape == Shape(1, 2, 6, 6));
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            CHECK(up->at(0, 0, i, j) == doctest::Approx(1.5f));
            CHECK(up->at(0, 1, i, j) == doctest::Approx(-0.5f));
        }
}

TEST_CASE("forward operators reject non-finite results") {
    auto x = make_tensor<float>(Shape(1, 1, 1, 2), {1.0f, 0.0f});
    auto zero = make_tensor<float>(Shape(1, 1, 1, 2), {0.0f, 0.0f});
    CHECK_THROWS_AS(div<float>(nullptr, x, zero), NumericsError);
}
