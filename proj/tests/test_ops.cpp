#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "polarseg/ops.hpp"

using namespace polarseg;
using DTensor = TensorT<double>;

namespace {

DTensor dconv(const DTensor& x, const DTensor& k, const std::vector<double>& b, int stride,
              Padding pad) {
    return ops::conv2d<double>(x, k, std::span<const double>(b), stride, pad);
}

double inner(const DTensor& a, const DTensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

}  // namespace

TEST_CASE("conv2d all-ones valid reduces to window sum") {
    Tensor x(Shape{1, 1, 3, 3}, 1.0f);
    Tensor k(Shape{1, 1, 3, 3}, 1.0f);
    Tensor out = ops::conv2d<float>(x, k, {}, 1, Padding::Valid);
    CHECK(out.shape == Shape{1, 1, 1, 1});
    CHECK(out.data[0] == doctest::Approx(9.0f));
}

TEST_CASE("conv2d identity kernel with same padding preserves the input") {
    std::mt19937 rng(7);
    Tensor x(Shape{2, 1, 5, 6});
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (float& v : x.data) v = dist(rng);
    Tensor k(Shape{1, 1, 3, 3}, 0.0f);
    k.at(0, 0, 1, 1) = 1.0f;
    Tensor out = ops::conv2d<float>(x, k, {}, 1, Padding::Same);
    REQUIRE(out.shape == x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(out.data[i] == x.data[i]);
}

TEST_CASE("conv2d rejects channel mismatch naming both shapes") {
    Tensor x(Shape{1, 3, 4, 4});
    Tensor k(Shape{2, 4, 3, 3});
    CHECK_THROWS_WITH_AS(ops::conv2d<float>(x, k, {}, 1, Padding::Same),
                         doctest::Contains("(1,3,4,4)"), std::invalid_argument);
}

TEST_CASE("conv2d bias length must match output channels") {
    Tensor x(Shape{1, 1, 4, 4});
    Tensor k(Shape{2, 1, 3, 3});
    std::vector<float> bias(3, 0.0f);
    CHECK_THROWS_AS(ops::conv2d<float>(x, k, std::span<const float>(bias), 1, Padding::Same),
                    std::invalid_argument);
}

TEST_CASE("conv2d forward is deterministic") {
    std::mt19937 rng(11);
    Tensor x(Shape{2, 3, 9, 9});
    Tensor k(Shape{4, 3, 3, 3});
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (float& v : x.data) v = dist(rng);
    for (float& v : k.data) v = dist(rng);
    Tensor a = ops::conv2d<float>(x, k, {}, 2, Padding::Same);
    Tensor b = ops::conv2d<float>(x, k, {}, 2, Padding::Same);
    CHECK(a.data == b.data);
}

TEST_CASE("conv2d gradients match central finite differences") {
    for (std::uint32_t seed : {1u, 2u, 3u}) {
        std::mt19937 rng(seed);
        DTensor x(Shape{2, 3, 8, 8}), k(Shape{4, 3, 3, 3});
        std::vector<double> bias(4);
        gradcheck::fill_uniform(x, rng);
        gradcheck::fill_uniform(k, rng);
        for (double& v : bias) v = std::uniform_real_distribution<double>(-1, 1)(rng);
        const int stride = seed % 2 ? 1 : 2;
        const Padding pad = seed % 2 ? Padding::Same : Padding::Valid;

        DTensor out = dconv(x, k, bias, stride, pad);
        DTensor cot(out.shape);
        gradcheck::fill_uniform(cot, rng);

        DTensor gx(x.shape), gk(k.shape);
        std::vector<double> gb(4, 0.0);
        ops::conv2d_backward<double>(cot, x, k, stride, pad, &gx, &gk, &gb);

        auto fwd_x = [&] { return dconv(x, k, bias, stride, pad); };
        CHECK(gradcheck::max_rel_err(x, fwd_x, gx, cot) < 1e-3);
        auto fwd_k = [&] { return dconv(x, k, bias, stride, pad); };
        CHECK(gradcheck::max_rel_err(k, fwd_k, gk, cot) < 1e-3);
        // bias gradient: exact column sums of the cotangent
        for (int c = 0; c < 4; ++c) {
            double expect = 0.0;
            for (int n = 0; n < cot.shape.n; ++n) {
                const double* p = cot.plane(n, c);
                for (int i = 0; i < cot.shape.h * cot.shape.w; ++i) expect += p[i];
            }
            CHECK(gradcheck::rel_err(gb[c], expect) < 1e-9);
        }
    }
}

TEST_CASE("transposed_conv2d stamps the kernel for a single pixel") {
    Tensor x(Shape{1, 1, 1, 1}, 1.0f);
    Tensor k(Shape{1, 1, 2, 2}, 1.0f);
    Tensor out = ops::transposed_conv2d<float>(x, k, 2);
    REQUIRE(out.shape == Shape{1, 1, 2, 2});
    for (float v : out.data) CHECK(v == 1.0f);
}

TEST_CASE("transposed_conv2d is the adjoint of valid conv2d") {
    for (std::uint32_t seed : {5u, 6u, 7u, 8u}) {
        std::mt19937 rng(seed);
        const int stride = seed % 2 ? 2 : 1;
        DTensor x(Shape{2, 3, 8, 8}), k(Shape{4, 3, 2, 2});
        gradcheck::fill_uniform(x, rng);
        gradcheck::fill_uniform(k, rng);
        DTensor cx = dconv(x, k, {}, stride, Padding::Valid);
        DTensor y(cx.shape);
        gradcheck::fill_uniform(y, rng);
        DTensor ty = ops::transposed_conv2d<double>(y, k, stride);
        // shapes agree when (h - kh) divides stride; 8,2 does for both strides
        REQUIRE(ty.shape == x.shape);
        const double lhs = inner(cx, y);
        const double rhs = inner(x, ty);
        CHECK(gradcheck::rel_err(lhs, rhs) < 1e-4);
    }
}

TEST_CASE("transposed_conv2d gradients match finite differences") {
    for (std::uint32_t seed : {21u, 22u, 23u}) {
        std::mt19937 rng(seed);
        DTensor x(Shape{1, 3, 5, 5}), k(Shape{3, 2, 2, 2});
        gradcheck::fill_uniform(x, rng);
        gradcheck::fill_uniform(k, rng);
        DTensor out = ops::transposed_conv2d<double>(x, k, 2);
        DTensor cot(out.shape);
        gradcheck::fill_uniform(cot, rng);
        DTensor gx(x.shape), gk(k.shape);
        ops::transposed_conv2d_backward<double>(cot, x, k, 2, &gx, &gk);
        auto fwd = [&] { return ops::transposed_conv2d<double>(x, k, 2); };
        CHECK(gradcheck::max_rel_err(x, fwd, gx, cot) < 1e-3);
        CHECK(gradcheck::max_rel_err(k, fwd, gk, cot) < 1e-3);
    }
}

TEST_CASE("avg_pool2d basics") {
    Tensor x(Shape{1, 1, 2, 2});
    x.data = {1.0f, 2.0f, 3.0f, 4.0f};
    Tensor out = ops::avg_pool2d<float>(x, 2);
    REQUIRE(out.shape == Shape{1, 1, 1, 1});
    CHECK(out.data[0] == doctest::Approx(2.5f));

    Tensor c(Shape{1, 2, 8, 8}, 0.7f);
    Tensor pooled = ops::avg_pool2d<float>(c, 2);
    for (float v : pooled.data) CHECK(v == doctest::Approx(0.7f));

    Tensor bad(Shape{1, 1, 5, 5});
    CHECK_THROWS_AS(ops::avg_pool2d<float>(bad, 2), std::invalid_argument);
}

TEST_CASE("avg_pool2d gradient matches finite differences") {
    std::mt19937 rng(31);
    DTensor x(Shape{2, 2, 6, 6});
    gradcheck::fill_uniform(x, rng);
    DTensor out = ops::avg_pool2d<double>(x, 2);
    DTensor cot(out.shape);
    gradcheck::fill_uniform(cot, rng);
    DTensor gx(x.shape);
    ops::avg_pool2d_backward<double>(cot, 2, &gx);
    auto fwd = [&] { return ops::avg_pool2d<double>(x, 2); };
    CHECK(gradcheck::max_rel_err(x, fwd, gx, cot) < 1e-3);
}

TEST_CASE("relu and sigmoid pointwise values") {
    Tensor x(Shape{1, 1, 1, 4});
    x.data = {-1.0f, 2.0f, 0.0f, -1000.0f};
    Tensor r = ops::relu(x);
    CHECK(r.data[0] == 0.0f);
    CHECK(r.data[1] == 2.0f);
    CHECK(r.data[2] == 0.0f);

    Tensor s = ops::sigmoid(x);
    CHECK(s.data[2] == doctest::Approx(0.5f));
    for (float v : s.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    Tensor extreme(Shape{1, 1, 1, 2});
    extreme.data = {1000.0f, -1000.0f};
    Tensor se = ops::sigmoid(extreme);
    CHECK(se.data[0] < 1.0f);
    CHECK(se.data[1] > 0.0f);
}

TEST_CASE("relu and sigmoid gradients match finite differences") {
    for (std::uint32_t seed : {41u, 42u, 43u}) {
        std::mt19937 rng(seed);
        DTensor x(Shape{2, 3, 4, 4});
        gradcheck::fill_uniform_away_from_zero(x, rng);
        DTensor cot(x.shape);
        gradcheck::fill_uniform(cot, rng);

        DTensor gr(x.shape);
        ops::relu_backward<double>(cot, x, &gr);
        auto fwd_r = [&] { return ops::relu<double>(x); };
        CHECK(gradcheck::max_rel_err(x, fwd_r, gr, cot) < 1e-3);

        DTensor y = ops::sigmoid<double>(x);
        DTensor gs(x.shape);
        ops::sigmoid_backward<double>(cot, y, &gs);
        auto fwd_s = [&] { return ops::sigmoid<double>(x); };
        CHECK(gradcheck::max_rel_err(x, fwd_s, gs, cot) < 1e-3);
    }
}

TEST_CASE("concat_channels shape arithmetic and recovery") {
    std::mt19937 rng(51);
    Tensor a(Shape{1, 2, 4, 4}), b(Shape{1, 3, 4, 4});
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (float& v : a.data) v = dist(rng);
    for (float& v : b.data) v = dist(rng);
    Tensor out = ops::concat_channels(a, b);
    REQUIRE(out.shape == Shape{1, 5, 4, 4});
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 16; ++i) CHECK(out.plane(0, c)[i] == a.plane(0, c)[i]);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 16; ++i) CHECK(out.plane(0, 2 + c)[i] == b.plane(0, c)[i]);

    Tensor bad(Shape{1, 1, 5, 4});
    CHECK_THROWS_AS(ops::concat_channels(a, bad), std::invalid_argument);
}

TEST_CASE("concat_channels gradient matches finite differences") {
    std::mt19937 rng(61);
    DTensor a(Shape{2, 2, 3, 3}), b(Shape{2, 1, 3, 3});
    gradcheck::fill_uniform(a, rng);
    gradcheck::fill_uniform(b, rng);
    DTensor out = ops::concat_channels(a, b);
    DTensor cot(out.shape);
    gradcheck::fill_uniform(cot, rng);
    DTensor ga(a.shape), gb(b.shape);
    ops::concat_channels_backward<double>(cot, a.shape.c, &ga, &gb);
    auto fwd_a = [&] { return ops::concat_channels(a, b); };
    CHECK(gradcheck::max_rel_err(a, fwd_a, ga, cot) < 1e-3);
    auto fwd_b = [&] { return ops::concat_channels(a, b); };
    CHECK(gradcheck::max_rel_err(b, fwd_b, gb, cot) < 1e-3);
}

TEST_CASE("mean_fuse basics and gradient") {
    Tensor m0(Shape{1, 1, 2, 2}, 0.0f);
    Tensor m1(Shape{1, 1, 2, 2}, 1.0f);
    Tensor fused = ops::mean_fuse<float>({&m0, &m1});
    for (float v : fused.data) CHECK(v == doctest::Approx(0.5f));

    Tensor same = ops::mean_fuse<float>({&m1, &m1, &m1});
    for (float v : same.data) CHECK(v == 1.0f);

    CHECK_THROWS_AS(ops::mean_fuse<float>({}), std::invalid_argument);

    std::mt19937 rng(71);
    DTensor a(Shape{1, 2, 3, 3}), b(Shape{1, 2, 3, 3}), c(Shape{1, 2, 3, 3});
    gradcheck::fill_uniform(a, rng);
    gradcheck::fill_uniform(b, rng);
    gradcheck::fill_uniform(c, rng);
    DTensor out = ops::mean_fuse<double>({&a, &b, &c});
    DTensor cot(out.shape);
    gradcheck::fill_uniform(cot, rng);
    DTensor ga(a.shape), gb(b.shape), gc(c.shape);
    ops::mean_fuse_backward<double>(cot, 3, {&ga, &gb, &gc});
    auto fwd = [&] { return ops::mean_fuse<double>({&a, &b, &c}); };
    CHECK(gradcheck::max_rel_err(a, fwd, ga, cot) < 1e-3);
    CHECK(gradcheck::max_rel_err(b, fwd, gb, cot) < 1e-3);
}
